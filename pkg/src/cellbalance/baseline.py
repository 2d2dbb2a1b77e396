"""MAX-SINR association: every UE picks its strongest BS, ignoring load."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .channel import linear_to_db
from .validation import check_sinr_db


def max_sinr_action(sinrs, current_bs=None, hysteresis_db=0.0) -> int:
    """Index of the highest-SINR BS (``sinrs`` in dB), lowest index on ties.

    With ``hysteresis_db > 0`` the UE stays on ``current_bs`` unless the best
    alternative beats it by more than the margin.
    """
    arr = np.asarray(sinrs, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("sinrs must be a non-empty vector")
    current = None if current_bs is None else [current_bs]
    return int(_choose(check_sinr_db(arr), current, hysteresis_db)[0])


def _choose(sinr_db, current, hysteresis_db):
    if hysteresis_db < 0:
        raise ValueError("hysteresis_db must be >= 0")
    best = np.argmax(sinr_db, axis=1)
    if current is None or hysteresis_db == 0:
        return best
    current = np.asarray(current, dtype=np.int64)
    rows = np.arange(sinr_db.shape[0])
    gain = sinr_db[rows, best] - sinr_db[rows, current]
    return np.where(gain > hysteresis_db, best, current)


class MaxSinrPolicy(BaseEstimator):
    """Stateless baseline; ``fit`` only records the BS count."""

    def __init__(self, hysteresis_db=0.0):
        self.hysteresis_db = hysteresis_db

    def fit(self, X=None, y=None):
        if self.hysteresis_db < 0:
            raise ValueError("hysteresis_db must be >= 0")
        if X is not None:
            self.n_features_in_ = check_sinr_db(X).shape[1]
        return self

    def predict(self, X, current=None):
        """Chosen BS per row of dB SINRs ``X``."""
        return _choose(check_sinr_db(X), current, self.hysteresis_db)

    # epoch protocol hooks

    def begin_episode(self, world):
        self.fit()

    def decide(self, obs):
        return self.predict(linear_to_db(obs.sinr), obs.serving)

    def feedback(self, obs, actions, report, next_obs, learn=True):
        pass

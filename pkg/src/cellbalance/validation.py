"""Input checks shared by the policy estimators."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array


def check_states(X, n_features=None, name="X"):
    """2-d finite float array, optionally with a fixed feature count."""
    if isinstance(X, np.ndarray) and X.dtype == np.float64 and X.ndim == 2 and X.size:
        # hot path inside the epoch loop; same contract as check_array
        if not np.isfinite(X).all():
            raise ValueError(f"{name} contains NaN or infinity")
    else:
        X = check_array(X, dtype=np.float64, ensure_2d=True, input_name=name)
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"{name} has {X.shape[1]} features, expected {n_features}")
    return X


def check_sinr_db(sinrs):
    arr = np.asarray(sinrs, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] == 0:
        raise ValueError("SINR input must be a non-empty vector or (n_ue, n_bs) matrix")
    if not np.all(np.isfinite(arr)):
        raise ValueError("SINR values must be finite")
    return arr


def check_actions(actions, n_actions, n=None):
    actions = np.asarray(actions)
    if not np.issubdtype(actions.dtype, np.integer):
        raise TypeError("actions must be integers")
    if n is not None and actions.shape != (n,):
        raise ValueError(f"expected {n} actions, got shape {actions.shape}")
    if np.any((actions < 0) | (actions >= n_actions)):
        raise ValueError(f"action outside 0..{n_actions - 1}")
    return actions.astype(np.int64)

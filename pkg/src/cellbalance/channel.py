"""Radio propagation: UMa-NLOS path loss, received power and SINR.

All power bookkeeping is done here so the rest of the package never has to
remember which quantities are in dBm and which in milliwatts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MIN_D3D_M = 10.0
SPEED_OF_LIGHT = 299_792_458.0


def db_to_linear(db):
    return np.power(10.0, np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


# dBm and mW share the dB <-> linear mapping; aliases keep call sites readable.
dbm_to_mw = db_to_linear
mw_to_dbm = linear_to_db


def _require_finite(name, value):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return arr


@dataclass(frozen=True)
class LinkGeometry:
    """Horizontal distance plus antenna heights (m) and carrier (GHz)."""

    d2d: float
    h_bs: float = 25.0
    h_ut: float = 1.5
    fc: float = 3.5

    def __post_init__(self):
        for name in ("d2d", "h_bs", "h_ut", "fc"):
            _require_finite(name, getattr(self, name))
        if self.d2d < 0:
            raise ValueError(f"d2d must be >= 0, got {self.d2d}")
        if not self.h_bs > self.h_ut > 0:
            raise ValueError(f"need h_bs > h_ut > 0, got h_bs={self.h_bs}, h_ut={self.h_ut}")
        if self.fc <= 0:
            raise ValueError(f"fc must be positive, got {self.fc}")

    @property
    def d3d(self) -> float:
        return math.hypot(self.d2d, self.h_bs - self.h_ut)


def _uma_nlos_db(d3d, fc, h_ut):
    d3d = np.maximum(d3d, MIN_D3D_M)
    pl_nlos = 13.54 + 39.08 * np.log10(d3d) + 20.0 * np.log10(fc) - 0.6 * (h_ut - 1.5)
    pl_los = 28.0 + 22.0 * np.log10(d3d) + 20.0 * np.log10(fc)
    return np.maximum(pl_los, pl_nlos)


def path_loss_uma_nlos(geom: LinkGeometry) -> float:
    """UMa NLOS path loss in dB, ``max(PL_LOS, PL'_NLOS)``.

    The LOS term uses only its below-breakpoint branch; see
    :func:`assert_nlos_dominates` for why that is safe at macro heights.
    d3d is floored at 10 m.
    """
    return float(_uma_nlos_db(geom.d3d, geom.fc, geom.h_ut))


def path_loss_matrix(d2d, h_bs=25.0, h_ut=1.5, fc=3.5):
    """Vectorised :func:`path_loss_uma_nlos` over an array of distances."""
    d2d = _require_finite("d2d", d2d)
    if np.any(d2d < 0):
        raise ValueError("d2d must be >= 0")
    LinkGeometry(0.0, h_bs, h_ut, fc)  # validates heights and carrier
    d3d = np.hypot(d2d, h_bs - h_ut)
    return _uma_nlos_db(d3d, fc, h_ut)


def _uma_los_full_db(d3d, d2d, fc, h_bs, h_ut):
    # Two-slope LOS with effective heights (h_E = 1 m), used only for the
    # dominance check below.
    d_bp = 4.0 * (h_bs - 1.0) * (h_ut - 1.0) * fc * 1e9 / SPEED_OF_LIGHT
    near = 28.0 + 22.0 * np.log10(d3d) + 20.0 * np.log10(fc)
    far = (28.0 + 40.0 * np.log10(d3d) + 20.0 * np.log10(fc)
           - 9.0 * np.log10(d_bp ** 2 + (h_bs - h_ut) ** 2))
    return np.where(d2d <= d_bp, near, far)


def assert_nlos_dominates(h_bs, h_ut, fc, d2d_max, d2d_min=0.0, samples=2048):
    """Raise ``ValueError`` if the NLOS term does not dominate both LOS branches.

    When it dominates on ``[d2d_min, d2d_max]`` the breakpoint logic of the LOS
    model cannot change the result, so the simplified LOS term is exact.
    """
    d2d = np.linspace(d2d_min, d2d_max, samples)
    d3d = np.maximum(np.hypot(d2d, h_bs - h_ut), MIN_D3D_M)
    nlos = 13.54 + 39.08 * np.log10(d3d) + 20.0 * np.log10(fc) - 0.6 * (h_ut - 1.5)
    los = _uma_los_full_db(d3d, d2d, fc, h_bs, h_ut)
    bad = nlos < los
    if np.any(bad):
        raise ValueError(
            f"UMa LOS term exceeds NLOS at d2d={d2d[bad][0]:.1f} m; "
            "the simplified path-loss model is not valid for this geometry"
        )


def rx_power(tx_power, pl):
    """Received power in dBm for transmit power ``tx_power`` (dBm) and loss ``pl`` (dB)."""
    tx_power = _require_finite("tx_power", tx_power)
    pl = _require_finite("pl", pl)
    out = tx_power - pl
    return float(out) if out.ndim == 0 else out


def sinr(rxp, serving: int, noise: float, interference: bool = False) -> float:
    """Linear SINR of BS ``serving`` given received powers ``rxp`` (dBm).

    With ``interference`` the other BSs' power adds to the noise floor;
    without it the result is the plain SNR and non-serving entries are ignored.
    """
    rxp = np.asarray(rxp, dtype=float)
    if rxp.ndim != 1 or rxp.size == 0:
        raise ValueError("rxp must be a non-empty 1-d vector")
    if not 0 <= serving < rxp.size:
        raise IndexError(f"serving BS {serving} out of range for {rxp.size} BSs")
    signal = dbm_to_mw(rxp[serving])
    floor = dbm_to_mw(noise)
    if interference:
        _require_finite("rxp", rxp)
        floor = floor + (dbm_to_mw(rxp).sum() - signal)
    else:
        _require_finite("rxp", rxp[serving])
    return float(signal / floor)


def sinr_matrix(rxp, noise: float, interference: bool = False):
    """SINR for every (UE, BS) pair from an ``(n_ue, n_bs)`` dBm matrix."""
    rxp = _require_finite("rxp", rxp)
    if rxp.ndim != 2 or rxp.shape[1] == 0:
        raise ValueError("rxp must have shape (n_ue, n_bs) with n_bs >= 1")
    mw = dbm_to_mw(rxp)
    floor = dbm_to_mw(noise)
    if interference:
        return mw / (mw.sum(axis=1, keepdims=True) - mw + floor)
    return mw / floor


@dataclass
class SignalQuality:
    rxp: np.ndarray
    sinr: np.ndarray
    noise: float


def signal_quality(ue_xy, bs_xy, *, tx_power=46.0, noise=-95.0, h_bs=25.0,
                   h_ut=1.5, fc=3.5, interference=False) -> SignalQuality:
    """Received power and SINR for UEs at ``ue_xy`` against BSs at ``bs_xy``."""
    ue_xy = np.atleast_2d(np.asarray(ue_xy, dtype=float))
    bs_xy = np.atleast_2d(np.asarray(bs_xy, dtype=float))
    d2d = np.linalg.norm(ue_xy[:, None, :] - bs_xy[None, :, :], axis=-1)
    rxp = rx_power(tx_power, path_loss_matrix(d2d, h_bs, h_ut, fc))
    return SignalQuality(rxp=rxp, sinr=sinr_matrix(rxp, noise, interference), noise=noise)

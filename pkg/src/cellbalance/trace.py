"""Commuter mobility traces: generation, CSV round trip and validation."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .config import SimConfig

HEADER = "ue_id,epoch,x_m,y_m,demand_bits"
RESIDENTIAL, OFFICE = "residential", "office"


class TraceError(ValueError):
    pass


class TraceRow(NamedTuple):
    ue_id: int
    epoch: int
    x: float
    y: float
    demand: int


class TraceEpoch(NamedTuple):
    epoch: int
    positions: np.ndarray  # (n_ue, 2)
    demand: np.ndarray  # (n_ue,)


@dataclass
class Trace:
    """Per-UE positions ``(n_ue, horizon, 2)`` and demand ``(n_ue, horizon)``."""

    positions: np.ndarray
    demand: np.ndarray

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        self.demand = np.asarray(self.demand, dtype=np.int64)
        if self.positions.ndim != 3 or self.positions.shape[2] != 2:
            raise TraceError("positions must have shape (n_ue, horizon, 2)")
        if self.demand.shape != self.positions.shape[:2]:
            raise TraceError("demand shape does not match positions")
        if np.any(self.demand < 0):
            raise TraceError("demand must be >= 0")

    @property
    def num_ue(self) -> int:
        return self.positions.shape[0]

    @property
    def horizon(self) -> int:
        return self.positions.shape[1]

    def __len__(self):
        return self.num_ue * self.horizon

    def rows(self):
        for ue in range(self.num_ue):
            for t in range(self.horizon):
                x, y = self.positions[ue, t]
                yield TraceRow(ue, t, float(x), float(y), int(self.demand[ue, t]))

    def epoch(self, t: int) -> TraceEpoch:
        return TraceEpoch(t, self.positions[:, t], self.demand[:, t])

    def to_csv(self) -> str:
        lines = [HEADER]
        lines.extend(f"{r.ue_id},{r.epoch},{r.x!r},{r.y!r},{r.demand}" for r in self.rows())
        return "\n".join(lines) + "\n"

    def sha256(self) -> str:
        return hashlib.sha256(self.to_csv().encode("utf-8")).hexdigest()

    def save(self, path):
        Path(path).write_bytes(self.to_csv().encode("utf-8"))

    def check_area(self, area):
        w, h = area
        x, y = self.positions[..., 0], self.positions[..., 1]
        bad = (x < 0) | (x > w) | (y < 0) | (y > h)
        if np.any(bad):
            ue, t = np.argwhere(bad)[0]
            raise TraceError(f"UE {ue} epoch {t}: position outside area {area}")

    @classmethod
    def from_rows(cls, rows) -> "Trace":
        rows = list(rows)
        if not rows:
            raise TraceError("no rows")
        by_ue: dict[int, list[TraceRow]] = {}
        for r in rows:
            by_ue.setdefault(r.ue_id, []).append(r)
        ue_ids = sorted(by_ue)
        if ue_ids != list(range(len(ue_ids))):
            raise TraceError(f"UE ids must be 0..{len(ue_ids) - 1}, got {ue_ids[:5]}...")
        horizon = None
        for ue in ue_ids:
            epochs = sorted(r.epoch for r in by_ue[ue])
            for expected, got in enumerate(epochs):
                if got != expected:
                    kind = "duplicate" if got < expected else "missing"
                    raise TraceError(f"UE {ue}: {kind} epoch {expected if kind == 'missing' else got}")
            if horizon is None:
                horizon = len(epochs)
            elif len(epochs) != horizon:
                raise TraceError(f"UE {ue}: {len(epochs)} epochs, expected {horizon}")
        positions = np.empty((len(ue_ids), horizon, 2))
        demand = np.empty((len(ue_ids), horizon), dtype=np.int64)
        for r in rows:
            positions[r.ue_id, r.epoch] = (r.x, r.y)
            demand[r.ue_id, r.epoch] = r.demand
        return cls(positions, demand)


def parse_trace(text: str) -> Trace:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise TraceError("no rows")
    if lines[0].strip() != HEADER:
        raise TraceError(f"line 1: expected header {HEADER!r}")
    rows = []
    for lineno, line in enumerate(lines[1:], 2):
        parts = line.split(",")
        if len(parts) != 5:
            raise TraceError(f"line {lineno}: expected 5 fields, got {len(parts)}")
        try:
            ue, t = int(parts[0]), int(parts[1])
            x, y = float(parts[2]), float(parts[3])
            demand = int(parts[4])
        except ValueError as exc:
            raise TraceError(f"line {lineno}: {exc}") from None
        if not (np.isfinite(x) and np.isfinite(y)):
            raise TraceError(f"line {lineno}: non-finite position")
        if demand < 0 or ue < 0 or t < 0:
            raise TraceError(f"line {lineno}: negative value")
        rows.append(TraceRow(ue, t, x, y, demand))
    return Trace.from_rows(rows)


def load_trace(path, area=None) -> Trace:
    trace = parse_trace(Path(path).read_bytes().decode("utf-8"))
    if area is not None:
        trace.check_area(area)
    return trace


def _uniform_in(rng, rect, n):
    x0, y0, x1, y1 = rect
    return np.column_stack([rng.uniform(x0, x1, n), rng.uniform(y0, y1, n)])


def _rect_area(rect):
    return (rect[2] - rect[0]) * (rect[3] - rect[1])


def _travel(start, dest, speed, elapsed):
    """Position after moving ``speed * elapsed`` from start toward dest, stopping on arrival."""
    delta = dest - start
    dist = np.linalg.norm(delta, axis=-1, keepdims=True)
    step = np.minimum(speed[:, None] * elapsed, dist)
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(dist > 0, delta / np.where(dist > 0, dist, 1.0), 0.0)
    return start + unit * step


def home_zones(cfg: SimConfig, rng_seed: int):
    """Home zone of each UE, drawn uniformly over the union of both zones."""
    rng = np.random.default_rng([rng_seed, 0])
    p_res = _rect_area(cfg.residential_zone) / (
        _rect_area(cfg.residential_zone) + _rect_area(cfg.office_zone))
    return np.where(rng.random(cfg.num_ue) < p_res, RESIDENTIAL, OFFICE)


def generate_trace(cfg: SimConfig, rng_seed: int | None = None) -> Trace:
    """Commute trace: every UE swaps zones in the morning and returns in the evening.

    Positions are rounded to millimetres and demands to whole bits so the
    CSV form round-trips exactly.
    """
    seed = cfg.rng_seed if rng_seed is None else rng_seed
    zones = home_zones(cfg, seed)
    rng = np.random.default_rng([seed, 1])
    n, horizon = cfg.num_ue, cfg.horizon
    is_res = zones == RESIDENTIAL

    home = np.where(is_res[:, None],
                    _uniform_in(rng, cfg.residential_zone, n),
                    _uniform_in(rng, cfg.office_zone, n))
    dest = np.where(is_res[:, None],
                    _uniform_in(rng, cfg.office_zone, n),
                    _uniform_in(rng, cfg.residential_zone, n))
    log_lo, log_hi = np.log(cfg.demand_min_bits), np.log(cfg.demand_max_bits)
    demand = np.exp(rng.uniform(log_lo, log_hi, size=(n, horizon)))

    m0, m1 = cfg.window_epochs(cfg.morning_window)
    e0, _ = cfg.window_epochs(cfg.evening_window)
    if cfg.commute_speed is None:
        speed = np.linalg.norm(dest - home, axis=1) / max(m1 - m0, 1)
    else:
        speed = np.full(n, float(cfg.commute_speed))

    positions = np.empty((n, horizon, 2))
    evening_start = _travel(home, dest, speed, max(e0 - m0, 0))
    for t in range(horizon):
        if t < m0:
            positions[:, t] = home
        elif t < e0:
            positions[:, t] = _travel(home, dest, speed, t - m0)
        else:
            positions[:, t] = _travel(evening_start, home, speed, t - e0)

    w, h = cfg.area
    positions[..., 0] = np.clip(positions[..., 0], 0.0, w)
    positions[..., 1] = np.clip(positions[..., 1], 0.0, h)
    return Trace(np.round(positions, 3), np.rint(demand).astype(np.int64))

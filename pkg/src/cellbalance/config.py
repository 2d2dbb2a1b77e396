"""Simulation configuration and its flat ``key = value`` file format."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

from .channel import assert_nlos_dominates

MINUTES_PER_DAY = 1440

Rect = tuple[float, float, float, float]


def _default_bs_positions():
    return ((500.0, 375.0), (1500.0, 375.0), (500.0, 1125.0), (1500.0, 1125.0))


@dataclass(frozen=True)
class SimConfig:
    """Everything needed to build a world and generate its traces.

    Zones are ``(x0, y0, x1, y1)`` rectangles. Commute windows are minutes of
    the day and are rescaled onto ``horizon`` epochs, so a shortened day keeps
    the same shape. ``commute_speed`` is metres per epoch; ``None`` picks a
    per-UE speed that lands exactly at the end of the morning window.
    """

    area: tuple[float, float] = (2000.0, 1500.0)
    num_bs: int = 4
    bs_positions: tuple[tuple[float, float], ...] = field(default_factory=_default_bs_positions)
    rb_per_bs: int = 50
    allowed_rb: tuple[int, ...] = (50, 100)
    num_ue: int = 20
    noise: float = -95.0
    fc: float = 3.5
    h_bs: float = 25.0
    h_ut: float = 1.5
    tx_power: float = 46.0
    rb_bandwidth_hz: float = 360_000.0
    interference: bool = False
    tti_ms: float = 1.0
    ues_per_tti: int = 10
    epoch: float = 1.0
    horizon: int = MINUTES_PER_DAY
    rng_seed: int = 0
    residential_zone: Rect = (0.0, 0.0, 1000.0, 1500.0)
    office_zone: Rect = (1000.0, 0.0, 2000.0, 750.0)
    morning_window: tuple[float, float] = (420.0, 540.0)
    evening_window: tuple[float, float] = (1020.0, 1140.0)
    commute_speed: float | None = None
    demand_min_bits: float = 60e6
    demand_max_bits: float = 1.2e9
    max_attachment: int | None = None
    reward_mode: str = "rate"
    reward_scale: float = 1e8

    def __post_init__(self):
        self.validate()

    @property
    def ttis_per_epoch(self) -> int:
        return int(round(self.epoch * 60_000.0 / self.tti_ms))

    @property
    def epoch_seconds(self) -> float:
        return self.epoch * 60.0

    def window_epochs(self, window) -> tuple[int, int]:
        scale = self.horizon / MINUTES_PER_DAY
        return int(round(window[0] * scale)), int(round(window[1] * scale))

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def validate(self):
        w, h = self.area
        if not (w > 0 and h > 0):
            raise ValueError(f"area must be positive, got {self.area}")
        for name in ("num_bs", "rb_per_bs", "num_ue", "ues_per_tti", "horizon"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.epoch <= 0 or self.tti_ms <= 0:
            raise ValueError("epoch and tti_ms must be positive")
        if len(self.bs_positions) != self.num_bs:
            raise ValueError(f"{len(self.bs_positions)} bs_positions given for num_bs={self.num_bs}")
        for x, y in self.bs_positions:
            if not (0 <= x <= w and 0 <= y <= h):
                raise ValueError(f"BS position ({x}, {y}) outside area {self.area}")
        if self.rb_per_bs not in self.allowed_rb:
            raise ValueError(f"rb_per_bs={self.rb_per_bs} not in allowed_rb={self.allowed_rb}")
        for name in ("residential_zone", "office_zone"):
            x0, y0, x1, y1 = getattr(self, name)
            if not (0 <= x0 < x1 <= w and 0 <= y0 < y1 <= h):
                raise ValueError(f"{name} {getattr(self, name)} inconsistent with area {self.area}")
        for name in ("morning_window", "evening_window"):
            a, b = getattr(self, name)
            if not 0 <= a < b <= MINUTES_PER_DAY:
                raise ValueError(f"{name} must satisfy 0 <= start < end <= {MINUTES_PER_DAY}")
        if self.morning_window[1] > self.evening_window[0]:
            raise ValueError("morning window must end before the evening window starts")
        if self.commute_speed is not None and self.commute_speed < 0:
            raise ValueError("commute_speed must be >= 0")
        if not 0 < self.demand_min_bits <= self.demand_max_bits:
            raise ValueError("need 0 < demand_min_bits <= demand_max_bits")
        if self.max_attachment is not None and self.max_attachment <= 0:
            raise ValueError("max_attachment must be positive or None")
        if self.reward_mode not in ("rate", "capped"):
            raise ValueError(f"reward_mode must be 'rate' or 'capped', got {self.reward_mode!r}")
        if self.reward_scale <= 0:
            raise ValueError("reward_scale must be positive")
        assert_nlos_dominates(self.h_bs, self.h_ut, self.fc, d2d_max=math.hypot(w, h))


DESK_SCALE = {"horizon": 120}
PAPER_SCALE = {"horizon": MINUTES_PER_DAY}


# -- key = value files ------------------------------------------------------

def _parse_float_tuple(text):
    return tuple(float(t) for t in text.replace(";", ",").split(",") if t.strip())


def _parse_bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_optional(parse):
    def inner(text):
        return None if text.strip().lower() in ("none", "") else parse(text)
    return inner


def _parse_points(text):
    points = []
    for chunk in text.split(";"):
        if chunk.strip():
            x, y = _parse_float_tuple(chunk)
            points.append((x, y))
    return tuple(points)


_PARSERS = {
    "area": _parse_float_tuple,
    "bs_positions": _parse_points,
    "allowed_rb": lambda t: tuple(int(v) for v in t.split(",") if v.strip()),
    "interference": _parse_bool,
    "residential_zone": _parse_float_tuple,
    "office_zone": _parse_float_tuple,
    "morning_window": _parse_float_tuple,
    "evening_window": _parse_float_tuple,
    "commute_speed": _parse_optional(float),
    "max_attachment": _parse_optional(int),
    "reward_mode": str.strip,
}


def parse_config(text: str, base: SimConfig | None = None) -> SimConfig:
    """Parse ``key = value`` lines (``#`` starts a comment) over ``base``."""
    base = base or SimConfig()
    types = {f.name: f.type for f in dataclasses.fields(SimConfig)}
    changes = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        parse = _PARSERS.get(key) or (int if types[key] == "int" else float)
        try:
            changes[key] = parse(value)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad value for {key}: {exc}") from None
    if "bs_positions" in changes and "num_bs" not in changes:
        changes["num_bs"] = len(changes["bs_positions"])
    return base.replace(**changes)


def load_config(path, base: SimConfig | None = None) -> SimConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"), base)


def dump_config(cfg: SimConfig) -> str:
    def fmt(v):
        if v is None:
            return "none"
        if isinstance(v, bool):
            return str(v).lower()
        if isinstance(v, tuple):
            if v and isinstance(v[0], tuple):
                return "; ".join(", ".join(repr(c) for c in p) for p in v)
            return ", ".join(repr(c) for c in v)
        return repr(v) if not isinstance(v, str) else v

    return "".join(f"{f.name} = {fmt(getattr(cfg, f.name))}\n" for f in dataclasses.fields(cfg))

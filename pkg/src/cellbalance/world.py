"""The simulated network: base stations, UEs and one-epoch stepping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import signal_quality
from .config import SimConfig
from .scheduler import BaseStationState, round_robin_totals
from .trace import OFFICE, RESIDENTIAL, Trace, TraceEpoch


def achieved_rate(n_rb, sinr, rb_bandwidth_hz=360_000.0):
    """Shannon rate in bits/s of ``n_rb`` resource blocks at linear ``sinr``."""
    n_rb = np.asarray(n_rb, dtype=float)
    sinr = np.asarray(sinr, dtype=float)
    if not np.all(np.isfinite(sinr)):
        raise ValueError("sinr must be finite")
    if np.any(n_rb < 0) or np.any(sinr <= 0):
        raise ValueError("need n_rb >= 0 and sinr > 0")
    rate = n_rb * rb_bandwidth_hz * np.log2(1.0 + sinr)
    return float(rate) if rate.ndim == 0 else rate


@dataclass
class UserEquipment:
    id: int
    position: tuple[float, float]
    zone: str
    serving_bs: int
    demand: int
    rb_obtained_last_epoch: float


@dataclass(frozen=True)
class EpochReport:
    """Outcome of one decision epoch; per-UE arrays are indexed by UE id.

    ``rbs`` is the mean RB count per TTI over the epoch.
    """

    epoch: int
    serving: np.ndarray
    rbs: np.ndarray
    rate: np.ndarray
    demand: np.ndarray
    qos: np.ndarray
    loads: np.ndarray
    epoch_seconds: float = 60.0

    @property
    def achieved_bits(self) -> np.ndarray:
        return self.rate * self.epoch_seconds


@dataclass(frozen=True)
class Observation:
    """What every UE sees at an epoch boundary, before deciding."""

    epoch: int
    sinr: np.ndarray  # (n_ue, n_bs) linear
    own_rb: np.ndarray  # (n_ue,) mean RBs per TTI last epoch
    loads: np.ndarray  # (n_bs,) broadcast loads
    serving: np.ndarray  # (n_ue,)


class World:
    """Mutable network state advanced one epoch at a time."""

    def __init__(self, cfg: SimConfig, trace: Trace):
        if trace.num_ue != cfg.num_ue:
            raise ValueError(f"trace has {trace.num_ue} UEs, config expects {cfg.num_ue}")
        self.cfg = cfg
        self.trace = trace
        self.bs_xy = np.asarray(cfg.bs_positions, dtype=float)
        x0, y0, x1, y1 = cfg.residential_zone
        start = trace.positions[:, 0]
        inside = (start[:, 0] >= x0) & (start[:, 0] <= x1) & (start[:, 1] >= y0) & (start[:, 1] <= y1)
        self.zones = np.where(inside, RESIDENTIAL, OFFICE)
        self.reset()

    @property
    def num_ue(self) -> int:
        return self.cfg.num_ue

    @property
    def num_bs(self) -> int:
        return self.cfg.num_bs

    def reset(self, serving=None):
        """Back to epoch 0 positions; attach every UE (default: strongest BS)."""
        first = self.trace.epoch(0)
        self.epoch = 0
        self.positions = first.positions.copy()
        self.demand = first.demand.copy()
        self.rb_last = np.zeros(self.num_ue)
        if serving is None:
            serving = np.argmax(self.sinr(), axis=1)
        self.base_stations = [
            BaseStationState(j, tuple(self.bs_xy[j]), self.cfg.rb_per_bs)
            for j in range(self.num_bs)
        ]
        for ue, j in enumerate(serving):
            self.base_stations[int(j)].attach(ue)
        self.serving = np.asarray(serving, dtype=np.int64).copy()

    def signal_quality(self):
        c = self.cfg
        return signal_quality(self.positions, self.bs_xy, tx_power=c.tx_power, noise=c.noise,
                              h_bs=c.h_bs, h_ut=c.h_ut, fc=c.fc, interference=c.interference)

    def sinr(self):
        return self.signal_quality().sinr

    def loads(self) -> np.ndarray:
        return np.array([bs.load for bs in self.base_stations], dtype=np.int64)

    def census(self) -> np.ndarray:
        """Loads recomputed from the per-UE attachment vector."""
        return np.bincount(self.serving, minlength=self.num_bs)

    def ue(self, i: int) -> UserEquipment:
        return UserEquipment(i, tuple(self.positions[i]), str(self.zones[i]),
                             int(self.serving[i]), int(self.demand[i]), float(self.rb_last[i]))

    def observe(self, loads=None) -> Observation:
        return Observation(self.epoch, self.sinr(), self.rb_last.copy(),
                           self.loads() if loads is None else np.asarray(loads),
                           self.serving.copy())

    def move(self, ue: int, target: int):
        """Detach ``ue`` from its BS queue and append it to ``target``'s tail."""
        self.base_stations[int(self.serving[ue])].detach(ue)
        self.base_stations[target].attach(ue)
        self.serving[ue] = target

    def check_partition(self):
        seen = sorted(ue for bs in self.base_stations for ue in bs.rr_queue)
        if seen != list(range(self.num_ue)):
            raise AssertionError("UEs not attached to exactly one BS")
        if not np.array_equal(self.loads(), self.census()):
            raise AssertionError("BS queues disagree with UE attachment")


def _as_epoch(rows, num_ue) -> TraceEpoch:
    if isinstance(rows, TraceEpoch):
        return rows
    rows = sorted(rows, key=lambda r: r.ue_id)
    if [r.ue_id for r in rows] != list(range(num_ue)):
        raise ValueError("epoch rows must cover every UE exactly once")
    epochs = {r.epoch for r in rows}
    if len(epochs) != 1:
        raise ValueError(f"rows span several epochs: {sorted(epochs)}")
    return TraceEpoch(epochs.pop(), np.array([(r.x, r.y) for r in rows]),
                      np.array([r.demand for r in rows], dtype=np.int64))


def run_epoch(world: World, rows) -> EpochReport:
    """Advance ``world`` through one epoch with attachments held fixed.

    ``rows`` is the trace slice for ``world.epoch`` (a :class:`TraceEpoch` or
    a sequence of :class:`TraceRow`). Round-robin grants for the whole epoch
    come from :func:`round_robin_totals`; rates are epoch averages.
    """
    cfg = world.cfg
    step = _as_epoch(rows, world.num_ue)
    if step.epoch != world.epoch:
        raise ValueError(f"trace epoch {step.epoch} does not match world epoch {world.epoch}")
    world.positions = np.asarray(step.positions, dtype=float).copy()
    world.demand = np.asarray(step.demand, dtype=np.int64).copy()

    n_tti = cfg.ttis_per_epoch
    total_rb = np.zeros(world.num_ue)
    for bs in world.base_stations:
        alloc = round_robin_totals(bs.rr_queue, bs.rb_budget, n_tti, cfg.ues_per_tti)
        for ue, rb in alloc.rbs.items():
            total_rb[ue] = rb
        bs.rr_queue[:] = alloc.queue
    mean_rb = total_rb / n_tti

    serving_sinr = world.sinr()[np.arange(world.num_ue), world.serving]
    rate = achieved_rate(mean_rb, serving_sinr, cfg.rb_bandwidth_hz)
    bits = rate * cfg.epoch_seconds
    demand = world.demand.astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        qos = np.where(demand > 0, np.minimum(bits, demand) / np.where(demand > 0, demand, 1.0), 1.0)

    world.rb_last = mean_rb
    report = EpochReport(world.epoch, world.serving.copy(), mean_rb, rate,
                         world.demand.copy(), qos, world.loads(), cfg.epoch_seconds)
    world.epoch += 1
    return report


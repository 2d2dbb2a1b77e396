"""xApp-style controller: load table, load broadcast and handover control.

Messages travel on an in-process bus; each one can be logged as a text line
``epoch,type,payload...`` so runs can be audited after the fact.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .world import EpochReport, World, run_epoch

SCHEMA_VERSION = 1


class InvariantError(RuntimeError):
    pass


class VerdictCode(str, enum.Enum):
    OK = "ok"
    NO_OP = "no_op"
    STALE_STATE = "stale_state"
    OVER_CAPACITY = "over_capacity"


@dataclass(frozen=True)
class LoadMessage:
    epoch: int
    loads: tuple[int, ...]

    def to_line(self) -> str:
        return f"{self.epoch},load," + ";".join(str(v) for v in self.loads)


@dataclass(frozen=True)
class HandoverRequest:
    ue: int
    current_bs: int
    target_bs: int
    epoch: int

    def to_line(self) -> str:
        return f"{self.epoch},request,{self.ue},{self.current_bs},{self.target_bs}"


@dataclass(frozen=True)
class Verdict:
    code: VerdictCode

    @property
    def accepted(self) -> bool:
        return self.code is VerdictCode.OK


@dataclass
class EventLog:
    """Ordered message log; ``lines`` is what gets written to disk."""

    lines: list[str] = field(default_factory=list)

    def add(self, line: str):
        self.lines.append(line)

    def write(self, path):
        Path(path).write_text(f"# schema {SCHEMA_VERSION}\n" + "".join(l + "\n" for l in self.lines),
                              encoding="utf-8")


def count_handovers(lines) -> int:
    """Executed handovers in an event log (``handover`` lines)."""
    return sum(1 for line in lines if line.split(",", 2)[1:2] == ["handover"])


def read_event_log(path) -> list[str]:
    return [l for l in Path(path).read_text(encoding="utf-8").splitlines()
            if l and not l.startswith("#")]


@dataclass
class LoadTable:
    loads: np.ndarray
    stamp: int = -1

    def snapshot(self) -> tuple[int, ...]:
        return tuple(int(v) for v in self.loads)


class Coordinator:
    """Single writer of the load table; serialises handovers per epoch."""

    def __init__(self, world: World, max_attachment: int | None = None, log: EventLog | None = None):
        self.world = world
        self.max_attachment = max_attachment
        self.log = log
        self.table = LoadTable(world.census())
        self.attachment = world.serving.copy()
        self.handovers = 0
        self.handovers_per_epoch: list[int] = []

    def _emit(self, line):
        if self.log is not None:
            self.log.add(line)

    def advance(self, epoch: int):
        if epoch <= self.table.stamp:
            raise InvariantError(f"load table stamp must increase: {self.table.stamp} -> {epoch}")
        self.table.stamp = epoch

    def broadcast_loads(self) -> list[LoadMessage]:
        """One identical, immutable load message per UE."""
        if int(self.table.loads.sum()) != self.world.num_ue:
            raise InvariantError(
                f"loads {self.table.snapshot()} sum to {self.table.loads.sum()}, "
                f"expected {self.world.num_ue}")
        msg = LoadMessage(self.table.stamp, self.table.snapshot())
        self._emit(msg.to_line())
        return [msg] * self.world.num_ue

    def validate_request(self, req: HandoverRequest) -> Verdict:
        if not 0 <= req.ue < self.world.num_ue:
            raise KeyError(f"unknown UE {req.ue}")
        if not 0 <= req.target_bs < self.world.num_bs:
            raise ValueError(f"target BS {req.target_bs} out of range")
        recorded = int(self.attachment[req.ue])
        if req.target_bs == req.current_bs:
            return Verdict(VerdictCode.NO_OP)
        if req.current_bs != recorded:
            return Verdict(VerdictCode.STALE_STATE)
        if self.max_attachment is not None and self.table.loads[req.target_bs] + 1 > self.max_attachment:
            return Verdict(VerdictCode.OVER_CAPACITY)
        return Verdict(VerdictCode.OK)

    def execute_handover(self, req: HandoverRequest):
        self.world.move(req.ue, req.target_bs)
        self.table.loads[req.current_bs] -= 1
        self.table.loads[req.target_bs] += 1
        self.attachment[req.ue] = req.target_bs
        self.handovers += 1
        self._emit(f"{req.epoch},handover,{req.ue},{req.current_bs},{req.target_bs}")

    def submit(self, requests) -> list[Verdict]:
        """Validate and execute in ascending UE order; later requests see earlier moves.

        Ties within one UE fall back to (current, target) so that any arrival
        order of the same requests gives the same outcome.
        """
        ordered = sorted(requests, key=lambda r: (r.ue, r.current_bs, r.target_bs))
        verdicts = []
        executed = 0
        for req in ordered:
            self._emit(req.to_line())
            verdict = self.validate_request(req)
            self._emit(f"{req.epoch},verdict,{req.ue},{verdict.code.value}")
            if verdict.accepted:
                self.execute_handover(req)
                executed += 1
            verdicts.append(verdict)
        self.handovers_per_epoch.append(executed)
        return verdicts

    def reconcile(self):
        """Check the table against a from-scratch census of the world."""
        census = self.world.census()
        if not np.array_equal(census, self.table.loads):
            raise InvariantError(f"load table {self.table.snapshot()} != census {tuple(census)}")
        if int(census.sum()) != self.world.num_ue:
            raise InvariantError("attachment census does not cover every UE")


def epoch_protocol(world: World, coordinator: Coordinator, policy, learn=True):
    """Run one decision epoch; returns ``(report, handovers_this_epoch)``.

    Order: broadcast loads, every UE decides, requests are validated and
    executed in UE order, the epoch is simulated, then agents get their
    rewards and train.
    """
    epoch = world.epoch
    coordinator.advance(epoch)
    msg = coordinator.broadcast_loads()[0]
    obs = world.observe(loads=np.array(msg.loads))
    targets = np.asarray(policy.decide(obs), dtype=np.int64)
    requests = [HandoverRequest(ue, int(obs.serving[ue]), int(targets[ue]), epoch)
                for ue in range(world.num_ue)]
    coordinator.submit(requests)
    report = run_epoch(world, world.trace.epoch(epoch))
    coordinator.reconcile()
    next_obs = world.observe(loads=coordinator.table.loads.copy())
    policy.feedback(obs, world.serving.copy(), report, next_obs, learn=learn)
    return report, coordinator.handovers_per_epoch[-1]


@dataclass
class EpisodeResult:
    reports: list[EpochReport]
    handovers: int
    handovers_per_epoch: list[int]
    log: EventLog | None

    @property
    def total_bits(self) -> float:
        return float(sum(r.achieved_bits.sum() for r in self.reports))

    @property
    def mean_qos(self) -> float:
        return float(np.mean([r.qos for r in self.reports]))


def run_episode(world: World, policy, *, log=False, learn=True, max_attachment=None,
                epochs=None, on_epoch=None) -> EpisodeResult:
    """Reset ``world`` and play the whole trace (or ``epochs`` epochs) once."""
    world.reset()
    policy.begin_episode(world)
    coordinator = Coordinator(world, max_attachment=max_attachment,
                              log=EventLog() if log else None)
    reports = []
    for _ in range(world.trace.horizon if epochs is None else epochs):
        report, _ = epoch_protocol(world, coordinator, policy, learn=learn)
        reports.append(report)
        if on_epoch is not None:
            on_epoch(world, coordinator, report)
    return EpisodeResult(reports, coordinator.handovers, coordinator.handovers_per_epoch,
                         coordinator.log)

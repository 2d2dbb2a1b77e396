"""Experiment sweeps: DQN against MAX-SINR over bandwidth and UE count.

Every (rb, ue, seed) cell runs both policies on the same trace. Results are
written as delimiter-separated text so they diff cleanly between runs.
"""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from .agent import DQNPolicy
from .baseline import MaxSinrPolicy
from .config import DESK_SCALE, PAPER_SCALE, SimConfig
from .coordinator import run_episode
from .trace import Trace, generate_trace, load_trace
from .world import World

log = logging.getLogger(__name__)

POLICIES = ("dqn", "max_sinr")
FIGURES = (
    "fig5_throughput_vs_rb",
    "fig6_throughput_vs_ue",
    "fig7_handover_delta_vs_rb",
    "fig8_handover_delta_vs_ue",
)
DELIMITERS = {"csv": ",", "tsv": "\t"}


class Cell(NamedTuple):
    rb: int
    ue: int
    seed: int
    policy: str

    @property
    def key(self) -> tuple[int, int, int]:
        return self.rb, self.ue, self.seed

    @property
    def slug(self) -> str:
        return f"rb{self.rb}_ue{self.ue}_seed{self.seed}_{self.policy}"


@dataclass(frozen=True)
class ExperimentPlan:
    """A grid of cells plus everything needed to run them reproducibly.

    ``trace_path`` replaces generated traces with a file; ``ue_values`` must
    then be the file's UE count. ``eval_epsilon`` turns the last DQN episode
    into a post-training evaluation pass without exploration or learning;
    ``None`` reports the last training episode as is.
    """

    rb_values: tuple[int, ...] = (50, 100)
    ue_values: tuple[int, ...] = (20, 50)
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    policies: tuple[str, ...] = POLICIES
    episodes: int = 20
    base: SimConfig = field(default_factory=lambda: SimConfig(**DESK_SCALE))
    trace_path: str | None = None
    eval_epsilon: float | None = 1.0
    dqn_params: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("rb_values", "ue_values", "seeds", "policies"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        self.validate()

    @classmethod
    def desk(cls, **changes) -> "ExperimentPlan":
        return cls(**changes)

    @classmethod
    def paper(cls, **changes) -> "ExperimentPlan":
        """Full-day horizon, 100 episodes and the complete bandwidth/UE grid."""
        changes.setdefault("base", SimConfig(**PAPER_SCALE))
        changes.setdefault("ue_values", (20, 40, 50, 60, 80, 100))
        changes.setdefault("episodes", 100)
        return cls(**changes)

    def validate(self):
        if not (self.rb_values and self.ue_values and self.seeds and self.policies):
            raise ValueError("plan needs at least one rb value, ue count, seed and policy")
        unknown = set(self.policies) - set(POLICIES)
        if unknown:
            raise ValueError(f"unknown policies {sorted(unknown)}; choose from {POLICIES}")
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        for rb in self.rb_values:
            if rb not in self.base.allowed_rb:
                raise ValueError(f"rb {rb} not in allowed budgets {self.base.allowed_rb}")
        if any(ue < 1 for ue in self.ue_values):
            raise ValueError("ue counts must be positive")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        if self.eval_epsilon is not None and not 0.0 <= self.eval_epsilon <= 1.0:
            raise ValueError("eval_epsilon must lie in [0, 1]")

    def cells(self) -> list[Cell]:
        return [Cell(rb, ue, seed, policy)
                for rb in self.rb_values for ue in self.ue_values
                for seed in self.seeds for policy in self.policies]

    def config(self, rb: int, ue: int, seed: int) -> SimConfig:
        return self.base.replace(rb_per_bs=rb, num_ue=ue, rng_seed=seed)


@dataclass(frozen=True)
class ResultRow:
    rb_per_bs: int
    num_ue: int
    seed: int
    policy: str
    total_throughput_bits: float
    mean_qos: float
    total_handovers: int
    episode: int
    trace_sha256: str
    status: str = "ok"

    def __post_init__(self):
        if min(self.total_throughput_bits, self.total_handovers, self.episode) < 0:
            raise ValueError("result fields must be non-negative")
        if not 0.0 <= self.mean_qos <= 1.0:
            raise ValueError(f"mean QoS {self.mean_qos} outside [0, 1]")

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def key(self) -> tuple[int, int, int]:
        return self.rb_per_bs, self.num_ue, self.seed


RESULT_FIELDS = tuple(f.name for f in fields(ResultRow))


class CurvePoint(NamedTuple):
    episode: int
    epsilon: float
    learning: bool
    total_throughput_bits: float
    mean_qos: float
    total_handovers: int


class TraceCache:
    """One trace per (ue, seed), shared by every rb value and policy."""

    def __init__(self, plan: ExperimentPlan):
        self.plan = plan
        self._traces: dict[tuple[int, int], Trace] = {}
        self._file: Trace | None = None

    def get(self, ue: int, seed: int) -> Trace:
        if self.plan.trace_path is not None:
            if self._file is None:
                self._file = load_trace(self.plan.trace_path, area=self.plan.base.area)
            if self._file.num_ue != ue:
                raise ValueError(f"trace file has {self._file.num_ue} UEs, cell wants {ue}")
            return self._file
        if (ue, seed) not in self._traces:
            cfg = self.plan.base.replace(num_ue=ue)
            self._traces[ue, seed] = generate_trace(cfg, rng_seed=seed)
        return self._traces[ue, seed]


EpochHook = Callable[..., None]


def _run_dqn(plan, cell, world, log_path, on_epoch):
    cfg = world.cfg
    params = {"reward_mode": cfg.reward_mode, "reward_scale": cfg.reward_scale, **plan.dqn_params}
    policy = DQNPolicy(random_state=cell.seed, **params)
    curve = []
    hook = None if on_epoch is None else (lambda w, c, r: on_epoch(cell, w, c, r, policy))
    for ep in range(plan.episodes):
        final = ep == plan.episodes - 1
        evaluate = final and plan.eval_epsilon is not None
        train_eps = policy.epsilon
        if evaluate:
            policy.set_params(epsilon=plan.eval_epsilon)
        result = run_episode(world, policy, log=final and log_path is not None, learn=not evaluate,
                             max_attachment=cfg.max_attachment, on_epoch=hook)
        curve.append(CurvePoint(ep, policy.epsilon, not evaluate, result.total_bits,
                                result.mean_qos, result.handovers))
        policy.set_params(epsilon=train_eps)
    return result, curve


def run_cell(plan: ExperimentPlan, cell: Cell, trace: Trace, log_dir=None,
             on_epoch: EpochHook | None = None):
    """Run one cell; returns ``(ResultRow, learning curve)``."""
    cfg = plan.config(cell.rb, cell.ue, cell.seed)
    world = World(cfg, trace)
    log_path = None if log_dir is None else Path(log_dir) / f"{cell.slug}.log"
    if cell.policy == "dqn":
        result, curve = _run_dqn(plan, cell, world, log_path, on_epoch)
        episode = plan.episodes - 1
    else:
        policy = MaxSinrPolicy()
        hook = None if on_epoch is None else (lambda w, c, r: on_epoch(cell, w, c, r, policy))
        result = run_episode(world, policy, log=log_path is not None, learn=False,
                             max_attachment=cfg.max_attachment, on_epoch=hook)
        curve, episode = [], 0
    if log_path is not None:
        result.log.write(log_path)
    row = ResultRow(cell.rb, cell.ue, cell.seed, cell.policy, result.total_bits,
                    min(result.mean_qos, 1.0), result.handovers, episode, trace.sha256())
    return row, curve


def run_experiment(plan: ExperimentPlan, log_dir=None,
                   on_epoch: EpochHook | None = None) -> list[ResultRow]:
    """Run every cell of ``plan`` in order.

    A cell that raises is recorded with ``status="failed: ..."`` and the
    sweep carries on. With ``log_dir`` set, the reported episode's event log
    and each DQN cell's learning curve are written there.
    ``on_epoch(cell, world, coordinator, report, policy)`` is called after
    every simulated epoch.
    """
    plan.validate()
    if log_dir is not None:
        Path(log_dir).mkdir(parents=True, exist_ok=True)
    traces = TraceCache(plan)
    rows = []
    for cell in plan.cells():
        start = time.perf_counter()
        sha = ""
        try:
            trace = traces.get(cell.ue, cell.seed)
            sha = trace.sha256()
            row, curve = run_cell(plan, cell, trace, log_dir, on_epoch)
            if log_dir is not None and curve:
                write_curve(curve, Path(log_dir) / f"{cell.slug}.curve.csv")
        except Exception as exc:  # a broken cell must not sink the sweep
            log.exception("cell %s failed", cell.slug)
            message = str(exc).replace("\n", " ").replace(",", ";")
            row = ResultRow(cell.rb, cell.ue, cell.seed, cell.policy, 0.0, 0.0, 0, 0, sha,
                            status=f"failed: {type(exc).__name__}: {message}")
        log.info("%s: qos=%.4f handovers=%d (%.1fs)", cell.slug, row.mean_qos,
                 row.total_handovers, time.perf_counter() - start)
        rows.append(row)
    return rows


def write_curve(curve, path):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CurvePoint._fields)
    for p in curve:
        writer.writerow([p.episode, repr(p.epsilon), int(p.learning),
                         repr(p.total_throughput_bits), repr(p.mean_qos), p.total_handovers])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


# -- comparisons ---------------------------------------------------------------

def _pairs(results):
    by_key: dict[tuple, dict[str, ResultRow]] = {}
    for row in results:
        slot = by_key.setdefault(row.key, {})
        if row.policy in slot:
            raise ValueError(f"duplicate result for cell {row.key} policy {row.policy}")
        slot[row.policy] = row
    return by_key


def handover_delta(results) -> dict[tuple[int, int, int], int]:
    """``dqn - max_sinr`` total handovers for every (rb, ue, seed) cell.

    Cells where either side failed are left out; a cell with no row at all
    for one of the policies is an error.
    """
    out = {}
    for key, slot in sorted(_pairs(results).items()):
        missing = set(POLICIES) - set(slot)
        if missing:
            raise KeyError(f"cell rb={key[0]} ue={key[1]} seed={key[2]} has no {sorted(missing)[0]} result")
        if slot["dqn"].ok and slot["max_sinr"].ok:
            out[key] = slot["dqn"].total_handovers - slot["max_sinr"].total_handovers
    return out


def qos_gap(results) -> dict[tuple[int, int, int], float]:
    """``dqn - max_sinr`` mean QoS for every cell where both succeeded."""
    out = {}
    for key, slot in sorted(_pairs(results).items()):
        if all(p in slot and slot[p].ok for p in POLICIES):
            out[key] = slot["dqn"].mean_qos - slot["max_sinr"].mean_qos
    return out


# -- report files ----------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _table(header, rows, delimiter) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _throughput_series(ok_rows, axis, fixed_name, fixed_value):
    groups: dict[tuple, list[ResultRow]] = {}
    for r in ok_rows:
        if getattr(r, fixed_name) == fixed_value:
            groups.setdefault((getattr(r, axis), r.policy), []).append(r)
    return [(x, policy, len(rs), float(np.mean([r.total_throughput_bits for r in rs])),
             float(np.mean([r.mean_qos for r in rs])))
            for (x, policy), rs in sorted(groups.items())]


def _delta_series(deltas, axis_index, other_index):
    groups: dict[tuple, list[int]] = {}
    for key, d in deltas.items():
        groups.setdefault((key[axis_index], key[other_index]), []).append(d)
    return [(x, other, len(ds), sum(ds), sum(ds) / len(ds)) for (x, other), ds in sorted(groups.items())]


def _ordered(results):
    return sorted(results, key=lambda r: (r.rb_per_bs, r.num_ue, r.seed, r.policy))


def results_table(results, fmt="csv") -> str:
    """The results table alone; works for single-policy sweeps too."""
    if fmt not in DELIMITERS:
        raise ValueError(f"unknown format {fmt!r}; choose from {sorted(DELIMITERS)}")
    rows = ([getattr(r, f) for f in RESULT_FIELDS] for r in _ordered(results))
    return _table(RESULT_FIELDS, rows, DELIMITERS[fmt])


def report_tables(results, fmt="csv") -> dict[str, str]:
    """File name to contents for the results table and the four figure series.

    Throughput against rb is taken at the largest UE count present (100 in
    the paper-scale grid) and throughput against UE count at the smallest
    bandwidth (50). Handover deltas are tabulated for every value of the
    other axis.
    """
    results = list(results)
    if not results:
        raise ValueError("no results to report")
    table = results_table(results, fmt)
    delim = DELIMITERS[fmt]
    ordered = _ordered(results)
    ok_rows = [r for r in ordered if r.ok]
    deltas = handover_delta(ordered)
    fixed_ue = max(r.num_ue for r in ordered)
    fixed_rb = min(r.rb_per_bs for r in ordered)
    tput = ("policy", "n_seeds", "mean_total_throughput_bits", "mean_qos")
    return {
        f"results.{fmt}": table,
        f"{FIGURES[0]}.{fmt}": _table(("rb_per_bs", *tput),
                                      (row for row in _throughput_series(ok_rows, "rb_per_bs", "num_ue", fixed_ue)), delim),
        f"{FIGURES[1]}.{fmt}": _table(("num_ue", *tput),
                                      (row for row in _throughput_series(ok_rows, "num_ue", "rb_per_bs", fixed_rb)), delim),
        f"{FIGURES[2]}.{fmt}": _table(("rb_per_bs", "num_ue", "n_seeds", "total_delta", "mean_delta"),
                                      _delta_series(deltas, 0, 1), delim),
        f"{FIGURES[3]}.{fmt}": _table(("num_ue", "rb_per_bs", "n_seeds", "total_delta", "mean_delta"),
                                      _delta_series(deltas, 1, 0), delim),
    }


def emit_report(results, out_dir, fmt="csv") -> list[Path]:
    """Write the results table and figure series into ``out_dir``.

    Everything is rendered before the first file is opened, so invalid input
    leaves nothing behind.
    """
    tables = report_tables(results, fmt)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, text in tables.items():
        path = out / name
        path.write_text(text, encoding="utf-8")
        paths.append(path)
    return paths


def read_results(path) -> list[ResultRow]:
    """Parse a results table written by :func:`emit_report`."""
    path = Path(path)
    delim = DELIMITERS.get(path.suffix.lstrip("."), ",")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh, delimiter=delim)
        if tuple(reader.fieldnames or ()) != RESULT_FIELDS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            try:
                rows.append(ResultRow(int(rec["rb_per_bs"]), int(rec["num_ue"]), int(rec["seed"]),
                                      rec["policy"], float(rec["total_throughput_bits"]),
                                      float(rec["mean_qos"]), int(rec["total_handovers"]),
                                      int(rec["episode"]), rec["trace_sha256"], rec["status"]))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
    return rows

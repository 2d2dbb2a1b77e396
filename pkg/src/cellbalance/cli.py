"""Command-line entry point: ``cellbalance {generate-trace,run,report}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import DESK_SCALE, PAPER_SCALE, SimConfig, load_config
from .harness import (
    ExperimentPlan,
    emit_report,
    handover_delta,
    qos_gap,
    read_results,
    results_table,
    run_experiment,
)
from .trace import generate_trace

DEFAULT_REPLICATES = 5


def _base_config(args) -> SimConfig:
    scale = PAPER_SCALE if args.paper_scale else DESK_SCALE
    base = SimConfig(**scale)
    if args.config:
        base = load_config(args.config, base=base)
    return base


def _add_common(p):
    p.add_argument("--config", metavar="PATH", help="key = value simulation config file")
    p.add_argument("--seed", type=int, default=1, help="master seed (default 1)")
    p.add_argument("--paper-scale", action="store_true",
                   help="full-day horizon, 100 episodes, complete UE grid")
    p.add_argument("--out", metavar="DIR", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cellbalance", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress per cell")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate-trace", help="write a mobility/demand trace CSV")
    _add_common(gen)
    gen.add_argument("--ue", type=int, help="number of UEs (default from config)")

    run = sub.add_parser("run", help="run a DQN / MAX-SINR sweep and write the report")
    _add_common(run)
    run.add_argument("--policy", choices=("dqn", "max_sinr", "both"), default="both")
    run.add_argument("--rb", type=int, nargs="+", help="RB budgets per BS (default 50 100)")
    run.add_argument("--ue", type=int, nargs="+", help="UE counts (default 20 50)")
    run.add_argument("--episodes", type=int, help="DQN training episodes per cell")
    run.add_argument("--replicates", type=int, default=DEFAULT_REPLICATES,
                     help="seeds per cell: SEED, SEED+1, ... (default 5)")
    run.add_argument("--trace", metavar="PATH", help="use this trace file instead of generating")
    run.add_argument("--format", choices=("csv", "tsv"), default="csv")

    rep = sub.add_parser("report", help="rebuild figure series from a results table")
    rep.add_argument("results", help="results.csv written by 'run'")
    rep.add_argument("--out", metavar="DIR", required=True)
    rep.add_argument("--format", choices=("csv", "tsv"), default="csv")
    return parser


def cmd_generate_trace(args) -> int:
    cfg = _base_config(args)
    if args.ue is not None:
        cfg = cfg.replace(num_ue=args.ue)
    trace = generate_trace(cfg, rng_seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"trace_ue{cfg.num_ue}_seed{args.seed}.csv"
    trace.save(path)
    print(f"{path} sha256={trace.sha256()}")
    return 0


def plan_from_args(args) -> ExperimentPlan:
    base = _base_config(args)
    changes = {"base": base, "seeds": tuple(args.seed + k for k in range(args.replicates))}
    if args.rb:
        changes["rb_values"] = tuple(args.rb)
    if args.ue:
        changes["ue_values"] = tuple(args.ue)
    if args.episodes is not None:
        changes["episodes"] = args.episodes
    if args.policy != "both":
        changes["policies"] = (args.policy,)
    if args.trace:
        changes["trace_path"] = args.trace
    return ExperimentPlan.paper(**changes) if args.paper_scale else ExperimentPlan.desk(**changes)


def cmd_run(args) -> int:
    if args.replicates < 1:
        raise ValueError("--replicates must be >= 1")
    plan = plan_from_args(args)
    out = Path(args.out)
    results = run_experiment(plan, log_dir=out / "logs")
    if len(plan.policies) == 2:
        paths = emit_report(results, out, fmt=args.format)
        deltas = handover_delta(results)
        for key, gap in qos_gap(results).items():
            print(f"rb={key[0]} ue={key[1]} seed={key[2]} qos_gap={gap:+.4f} "
                  f"handover_delta={deltas[key]:+d}")
    else:
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / f"results.{args.format}"]
        paths[0].write_text(results_table(results, args.format), encoding="utf-8")
    for p in paths:
        print(p)
    failed = [r for r in results if not r.ok]
    for r in failed:
        print(f"FAILED rb={r.rb_per_bs} ue={r.num_ue} seed={r.seed} {r.policy}: {r.status}",
              file=sys.stderr)
    return 1 if failed else 0


def cmd_report(args) -> int:
    results = read_results(args.results)
    for p in emit_report(results, args.out, fmt=args.format):
        print(p)
    return 1 if any(not r.ok for r in results) else 0


COMMANDS = {"generate-trace": cmd_generate_trace, "run": cmd_run, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"cellbalance: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

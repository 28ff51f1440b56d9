"""Command-line entry points: solve-dp, train-rl, simulate, compare, report.

Failures print one machine-readable JSON object on stderr and exit
nonzero; success prints a short human-readable confirmation on stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import dp, runner
from .actor_critic import train
from .config import ScenarioConfig, load_config

FULL_SCALE = {"runs": 10, "agents": 50_000, "total_env_steps": 10_000_000}


def _load(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig().validate()
    if getattr(args, "seed", None) is not None:
        cfg.simulation.base_seed = args.seed
    if getattr(args, "scale", "desk") == "full":
        cfg.simulation.runs = FULL_SCALE["runs"]
        cfg.simulation.agents = FULL_SCALE["agents"]
        cfg.training.total_env_steps = FULL_SCALE["total_env_steps"]
    if getattr(args, "workers", None) is not None:
        cfg.simulation.n_workers = args.workers
    return cfg


def _cmd_solve_dp(args):
    cfg = _load(args)
    vg = dp.backward_induct(cfg)
    vg.model_hash = cfg.model_hash()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "valuegrid.bin"
    vg.save(path)
    print(f"solved {cfg.name}: value grid written to {path}")


def _cmd_train_rl(args):
    cfg = _load(args)
    policy = train(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "policy.bin"
    policy.save(path)
    final = policy.telemetry["mean_return"][-1]
    print(f"trained {cfg.name}: policy written to {path} "
          f"(final mean episode return {final:.4f})")


def _cmd_simulate(args):
    cfg = _load(args)
    summary = runner.run_scenario(cfg, args.solver, args.out,
                                  dump_trajectories=args.dump_trajectories,
                                  artifact=args.artifact,
                                  n_workers=cfg.simulation.n_workers)
    stats = summary["stats_mean"]
    print(f"simulated {cfg.name} [{args.solver}]: "
          f"initial discounted utility {stats['initial_discounted_utility']:.4f}, "
          f"employment person-years {stats['employment_person_years']:.0f} "
          f"-> {args.out}")


def _cmd_compare(args):
    result = runner.compare(args.run_a, args.run_b, out_dir=args.out)
    print(json.dumps(result, indent=1, sort_keys=True))


def _cmd_report(args):
    print(runner.report(args.run))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="worklife",
        description="Life-cycle labor-supply model: solvers, simulation, comparisons")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", help="scenario JSON (defaults when omitted)")
        p.add_argument("--out", required=out_required, help="output directory")
        p.add_argument("--seed", type=int, help="override the simulation base seed")
        p.add_argument("--scale", choices=("desk", "full"), default="desk",
                       help="desk: config sizes; full: 10 runs x 50k agents, 10M steps")
        p.add_argument("--workers", type=int, help="simulation worker count")

    p = sub.add_parser("solve-dp", help="solve the model by backward induction")
    common(p)
    p.set_defaults(func=_cmd_solve_dp)

    p = sub.add_parser("train-rl", help="train the actor-critic policy")
    common(p)
    p.set_defaults(func=_cmd_train_rl)

    p = sub.add_parser("simulate", help="solve/train as needed, simulate, emit files")
    common(p)
    p.add_argument("--solver", choices=runner.SOLVERS, required=True)
    p.add_argument("--artifact", help="reuse a solved value grid or trained policy")
    p.add_argument("--dump-trajectories", action="store_true")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("compare", help="delta table between two finished runs")
    p.add_argument("run_a", help="reference run directory")
    p.add_argument("run_b", help="alternative run directory")
    p.add_argument("--out", help="directory for comparison.json and employment_diff.csv")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("report", help="print the summary of a finished run")
    p.add_argument("run", help="run directory")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except Exception as exc:  # noqa: BLE001 - boundary: report and exit nonzero
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

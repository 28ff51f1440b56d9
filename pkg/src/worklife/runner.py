"""Scenario orchestration: solve or train, simulate, emit files, compare.

A scenario run writes into one output directory:

* the solver artifact (``valuegrid.bin`` for the grid solver, one
  ``policy_run<r>.bin`` per run for the learner; none for random actions),
* ``aggregates.csv`` with the across-run mean per-age shares
  (``age,employed_share,unemployed_share,retired_share,mean_net_income``),
* one ``policy_age<A>_<employment>.csv`` per configured panel (pension
  knots x wage knots of action codes; not emitted for random actions),
* optional ``trajectories_run<r>.csv`` dumps, one row per (agent, age),
* ``summary.json`` holding the full config, hashes, per-run and mean
  statistics, wall-clock time, and (for the learner) training telemetry.

The learner is refitted for every run with a derived seed; a solved value
grid is shared across runs.
"""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np

from . import dp, metrics, simulate
from .actor_critic import RlPolicy, train
from .config import DECLARED_REFORM_FIELDS, ScenarioConfig
from .model import Employment

SOLVERS = ("dp", "rl", "random")

_EMPLOYMENT_BY_NAME = {"unemployed": Employment.UNEMPLOYED,
                       "employed": Employment.EMPLOYED,
                       "retired": Employment.RETIRED}


def _policy_map_from_handle(policy, cfg, age, employment):
    """(pension knots x wage knots) action codes for any policy handle."""
    if isinstance(policy, dp.DpPolicy):
        return dp.policy_map(policy.vg, age, employment)
    grid = cfg.grid
    p, w = np.meshgrid(grid.pension_knots(), grid.wage_knots(), indexing="ij")
    prev = np.full(p.size, grid.prev_wage_knots()[grid.n_prev_wage // 2])
    tis = np.full(p.size, grid.n_tis - 1)
    probs = policy.probabilities(np.full(p.size, int(employment)), p.ravel(), prev,
                                 tis, w.ravel(), age, cfg)
    return np.argmax(probs, axis=-1).reshape(p.shape).astype(np.int8)


def _write_policy_map(path, cfg, matrix):
    wage_knots = cfg.grid.wage_knots()
    header = "pension_eur_year," + ",".join(f"wage_{w:.6g}" for w in wage_knots)
    lines = [header]
    for pk, row in zip(cfg.grid.pension_knots(), matrix):
        lines.append(f"{pk:.6g}," + ",".join(str(int(a)) for a in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


TRAJECTORY_COLUMNS = ("agent,age,employment,action,wage,prev_wage,pension_accrued,"
                      "time_in_state,net_income,utility,reward,terminal_value")


def _dump_trajectories(path, trajs):
    T = trajs.horizon
    with open(path, "w", encoding="utf-8") as f:
        f.write(TRAJECTORY_COLUMNS + "\n")
        for i in range(trajs.n_agents):
            for t, age in enumerate(trajs.ages):
                state = f"{i},{int(age)},{int(trajs.employment[i, t])},"
                common = (f"{trajs.wage[i, t]:.6g},{trajs.prev_wage[i, t]:.6g},"
                          f"{trajs.pension[i, t]:.6g},{int(trajs.tis[i, t])}")
                if t < T:
                    f.write(state + f"{int(trajs.action[i, t])}," + common + ","
                            f"{trajs.net_income[i, t]:.6g},"
                            f"{trajs.utility[i, t]:.12g},"
                            f"{trajs.reward[i, t]:.12g},\n")
                else:
                    f.write(state + "," + common + ",,,,"
                            f"{trajs.terminal_value[i]:.12g}\n")


def _mean_report(reports):
    emp = np.stack([r.employed_share for r in reports]).mean(axis=0)
    un = np.stack([r.unemployed_share for r in reports]).mean(axis=0)
    ret = np.stack([r.retired_share for r in reports]).mean(axis=0)
    net = np.stack([r.mean_net_income for r in reports]).mean(axis=0)
    return simulate.AggregateReport(ages=reports[0].ages, employed_share=emp,
                                    unemployed_share=un, retired_share=ret,
                                    mean_net_income=net,
                                    population=reports[0].population)


def run_scenario(cfg: ScenarioConfig, solver: str, out_dir, dump_trajectories=False,
                 artifact=None, n_workers=None, runs=None, agents=None):
    """Solve (or train, or neither), simulate, and write the run directory.

    ``artifact`` reuses a previously written value grid or policy file; its
    model hash must match the configuration. Returns the summary dict.
    """
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver '{solver}', expected one of {SOLVERS}")
    cfg.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    runs = runs if runs is not None else cfg.simulation.runs
    agents = agents if agents is not None else cfg.simulation.agents
    started = time.perf_counter()

    vg = None
    telemetry = []
    policies = {}
    if solver == "dp":
        if artifact is not None:
            vg = dp.ValueGrid.load(artifact)
            if vg.model_hash != cfg.model_hash():
                raise ValueError(
                    f"value grid was solved for model {vg.model_hash}, "
                    f"not {cfg.model_hash()}")
        else:
            vg = dp.backward_induct(cfg)
            vg.model_hash = cfg.model_hash()
        vg.save(out / "valuegrid.bin")
        producer = lambda r: dp.DpPolicy(vg)
    elif solver == "rl":
        if artifact is not None:
            loaded = RlPolicy.load(artifact)
            if loaded.model_hash != cfg.model_hash():
                raise ValueError(
                    f"policy was trained for model {loaded.model_hash}, "
                    f"not {cfg.model_hash()}")

            def producer(r):
                policies[r] = loaded
                return loaded
        else:
            def producer(r):
                tc_run = _train_config_for_run(cfg, r)
                policy = train(cfg, tc_run)
                policies[r] = policy
                return policy
    else:
        producer = lambda r: simulate.random_policy()

    run_reports = []
    run_trajs = []
    for r in range(runs):
        policy = producer(r)
        trajs, report = simulate.run_population(
            policy, cfg, n_agents=agents, seed=[cfg.simulation.base_seed, r],
            n_workers=n_workers)
        run_reports.append(report)
        run_trajs.append(trajs)
        if solver == "rl" and r in policies:
            policies[r].save(out / f"policy_run{r}.bin")
            if policies[r].telemetry:
                telemetry.append({k: list(map(float, v))
                                  for k, v in policies[r].telemetry.items()})
        if dump_trajectories:
            _dump_trajectories(out / f"trajectories_run{r}.csv", trajs)

    _mean_report(run_reports).save_csv(out / "aggregates.csv")

    if solver in ("dp", "rl"):
        map_policy = dp.DpPolicy(vg) if solver == "dp" else policies[runs - 1]
        for age, employment in cfg.policy_map_panels:
            matrix = _policy_map_from_handle(map_policy, cfg, int(age),
                                             _EMPLOYMENT_BY_NAME[employment])
            _write_policy_map(out / f"policy_age{int(age)}_{employment}.csv", cfg, matrix)

    stat_dicts = [r.stats.to_dict() for r in run_reports]
    keys = [k for k in stat_dicts[0] if stat_dicts[0][k] is not None]
    summary = {
        "scenario": cfg.name,
        "solver": solver,
        "config": cfg.to_dict(),
        "config_hash": cfg.content_hash(),
        "model_hash": cfg.model_hash(),
        "runs": runs,
        "agents": agents,
        "stats_mean": {k: float(np.mean([d[k] for d in stat_dicts])) for k in keys},
        "stats_std": {k: float(np.std([d[k] for d in stat_dicts])) for k in keys},
        "per_run_stats": stat_dicts,
        "wall_clock_seconds": time.perf_counter() - started,
    }
    if solver == "rl" and telemetry:
        summary["training"] = telemetry
    with open(out / "summary.json", "w", encoding="utf-8") as f:
        json.dump(summary, f, sort_keys=True, indent=1)
    return summary


def _train_config_for_run(cfg, run_index):
    import dataclasses

    return dataclasses.replace(cfg.training, seed=cfg.training.seed + run_index)


def _load_summary(run_dir):
    path = Path(run_dir) / "summary.json"
    if not path.exists():
        raise FileNotFoundError(f"no summary.json under {run_dir}")
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def _load_aggregates(run_dir):
    path = Path(run_dir) / "aggregates.csv"
    rows = path.read_text(encoding="utf-8").strip().split("\n")[1:]
    data = np.array([[float(v) for v in row.split(",")] for row in rows])
    return data[:, 0].astype(int), data[:, 1]


def compare(run_a_dir, run_b_dir, out_dir=None):
    """Delta table between two finished runs (``a`` is the reference).

    Refuses comparisons across configurations that differ in anything but
    the declared reform fields and the scenario name. Emits
    ``comparison.json`` and a per-age employment-difference CSV when
    ``out_dir`` is given.
    """
    sa, sb = _load_summary(run_a_dir), _load_summary(run_b_dir)
    from .config import config_from_dict

    cfg_a = config_from_dict(_strip_defaults(sa["config"]))
    cfg_b = config_from_dict(_strip_defaults(sb["config"]))
    if (cfg_a.terminal_age - cfg_a.start_age) != (cfg_b.terminal_age - cfg_b.start_age):
        raise ValueError("runs have different horizons")
    diff = set(cfg_a.reform_fields_vs(cfg_b))
    undeclared = diff - DECLARED_REFORM_FIELDS
    if undeclared:
        raise ValueError(
            "runs differ in non-reform model fields: " + ", ".join(sorted(undeclared)))

    gamma = cfg_a.reward.gamma
    horizon = cfg_a.terminal_age - cfg_a.start_age
    cc = metrics.compensating_consumption_from_sums(
        sa["stats_mean"]["mean_discounted_unscaled_utility"],
        sb["stats_mean"]["mean_discounted_unscaled_utility"], horizon, gamma)
    stat_keys = ("initial_discounted_utility", "time_avg_discounted_utility",
                 "equivalent_net_income", "employment_person_years",
                 "mean_discounted_unscaled_utility")
    deltas = {k: sb["stats_mean"][k] - sa["stats_mean"][k] for k in stat_keys}
    result = {
        "reference": {"scenario": sa["scenario"], "solver": sa["solver"],
                      "dir": str(run_a_dir)},
        "alternative": {"scenario": sb["scenario"], "solver": sb["solver"],
                        "dir": str(run_b_dir)},
        "reform_fields": sorted(diff),
        "deltas": deltas,
        "compensating_consumption_pct": cc,
    }
    ages_a, emp_a = _load_aggregates(run_a_dir)
    ages_b, emp_b = _load_aggregates(run_b_dir)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "comparison.json", "w", encoding="utf-8") as f:
            json.dump(result, f, sort_keys=True, indent=1)
        lines = ["age,employed_share_a,employed_share_b,delta"]
        for age, ea, eb in zip(ages_a, emp_a, emp_b):
            lines.append(f"{age},{ea:.12g},{eb:.12g},{eb - ea:.12g}")
        (out / "employment_diff.csv").write_text("\n".join(lines) + "\n",
                                                 encoding="utf-8")
    return result


def _strip_defaults(config_dict):
    # summary stores the fully materialized config; feed it back through the
    # loader unchanged (it is a complete override set)
    return config_dict


def report(run_dir) -> str:
    """Human-readable one-run summary."""
    s = _load_summary(run_dir)
    lines = [
        f"scenario: {s['scenario']}   solver: {s['solver']}",
        f"runs: {s['runs']}   agents per run: {s['agents']}",
        f"config hash: {s['config_hash']}   model hash: {s['model_hash']}",
        f"wall clock: {s['wall_clock_seconds']:.1f}s",
        "",
        f"{'statistic':38s} {'mean':>14s} {'std':>12s}",
    ]
    for key in ("initial_discounted_utility", "time_avg_discounted_utility",
                "equivalent_net_income", "employment_person_years",
                "mean_discounted_unscaled_utility"):
        lines.append(f"{key:38s} {s['stats_mean'][key]:14.4f} {s['stats_std'][key]:12.4f}")
    return "\n".join(lines)

"""Baseline vs the two shipped reforms, solved with the grid method.

Runs the three shipped scenarios (baseline, retirement age to 66, basic
income 500 e/month with a 40% flat tax), prints the statistics table with
reform deltas, and writes the per-age employment-rate differences as CSV.

Run: python demos/04_reform_comparison.py  (a few minutes: three solves)
"""

import pathlib
import time

import numpy as np

from worklife import dp, metrics, simulate
from worklife.config import load_config

here = pathlib.Path(__file__).resolve().parent
out_dir = here / "output"
out_dir.mkdir(exist_ok=True)
configs = here.parent / "configs"

N_AGENTS = 10_000
results = {}
for scenario in ("baseline", "retirement66", "ubi500_flat40"):
    cfg = load_config(configs / f"{scenario}.json")
    print(f"solving and simulating {scenario}...")
    t0 = time.time()
    vg = dp.backward_induct(cfg)
    vg.model_hash = cfg.model_hash()
    trajs, report = simulate.run_population(dp.DpPolicy(vg), cfg,
                                            n_agents=N_AGENTS, seed=314)
    print(f"  {time.time() - t0:.0f}s")
    results[scenario] = (cfg, trajs, report)

base_cfg, base_trajs, base_rep = results["baseline"]

print(f"\n{'statistic':34s}{'baseline':>12s}{'ret. 66':>12s}{'basic inc.':>12s}")
rows = [("initial discounted utility", "initial_discounted_utility", "{:12.4f}"),
        ("time-avg discounted utility", "time_avg_discounted_utility", "{:12.4f}"),
        ("equivalent net income (e/y)", "equivalent_net_income", "{:12,.0f}"),
        ("employment person-years", "employment_person_years", "{:12,.0f}")]
for label, key, fmt in rows:
    vals = [getattr(results[s][2].stats, key)
            for s in ("baseline", "retirement66", "ubi500_flat40")]
    print(f"{label:34s}" + "".join(fmt.format(v) for v in vals))

print("\nreform deltas against the baseline:")
for scenario in ("retirement66", "ubi500_flat40"):
    cfg, trajs, rep = results[scenario]
    d_emp = rep.stats.employment_person_years - base_rep.stats.employment_person_years
    d_tavg = (rep.stats.time_avg_discounted_utility
              - base_rep.stats.time_avg_discounted_utility)
    cc = metrics.compensating_consumption(base_trajs, trajs, base_cfg.reward.gamma)
    print(f"  {scenario:15s}: employment {d_emp:+12,.0f} person-years, "
          f"time-avg utility {d_tavg:+.4f}, compensating consumption {cc:+.2f}%")

for scenario in ("retirement66", "ubi500_flat40"):
    rep = results[scenario][2]
    path = out_dir / f"employment_diff_{scenario}.csv"
    with open(path, "w", encoding="utf-8") as f:
        f.write("age,employed_share_baseline,employed_share_reform,delta\n")
        for age, a, b in zip(base_rep.ages, base_rep.employed_share,
                             rep.employed_share):
            f.write(f"{age},{a:.6g},{b:.6g},{b - a:.6g}\n")
    print(f"wrote {path}")

"""Solve the baseline by backward induction and inspect the solution.

Prints solve timing, the value surface at the entry age, the optimal-action
map at the first retirement-feasible age (the data behind the policy-map
figures), and the simulated employment profile of a 10,000-agent
population following the greedy policy. Writes the per-age aggregates and
the age-64 policy maps as CSV next to this script.

Run: python demos/02_grid_solution.py  (about a minute)
"""

import pathlib
import time

import numpy as np

from worklife import dp, simulate
from worklife.config import ScenarioConfig
from worklife.model import Employment

out_dir = pathlib.Path(__file__).resolve().parent / "output"
out_dir.mkdir(exist_ok=True)

cfg = ScenarioConfig().validate()
print(f"grid: {cfg.grid.n_pension} pension x {cfg.grid.n_prev_wage} prev-wage x "
      f"{cfg.grid.n_tis} tis x {cfg.grid.n_wage} wage knots, "
      f"{cfg.terminal_age - cfg.start_age} decision ages")

t0 = time.time()
vg = dp.backward_induct(cfg)
vg.model_hash = cfg.model_hash()
print(f"solved in {time.time() - t0:.1f}s")

print("\nvalue at the entry age (unemployed, no history), by wage-offer knot:")
v0 = vg.values[0, int(Employment.UNEMPLOYED), 0, 0, 0, :]
for w, v in list(zip(cfg.grid.wage_knots(), v0))[::4]:
    print(f"  wage offer {w:9,.0f} e/y -> discounted value {v:8.4f}")

age = 64
print(f"\noptimal actions at {age}, employed agents "
      f"(rows: pension knots, cols: wage knots; 0 stay, 1 switch, 2 retire):")
pm = dp.policy_map(vg, age, Employment.EMPLOYED)
for pk, row in list(zip(cfg.grid.pension_knots(), pm))[::2]:
    print(f"  pension {pk:8,.0f}: " + " ".join(str(int(a)) for a in row))

print("\nsimulating 10,000 agents under the greedy policy...")
t0 = time.time()
policy = dp.DpPolicy(vg)
trajs, report = simulate.run_population(policy, cfg, n_agents=10_000, seed=2024)
print(f"simulated in {time.time() - t0:.1f}s")

print("\nemployment/unemployment/retirement shares by age:")
for i in range(0, len(report.ages), 4):
    print(f"  age {report.ages[i]:2d}: employed {report.employed_share[i]:5.2f}  "
          f"unemployed {report.unemployed_share[i]:5.2f}  "
          f"retired {report.retired_share[i]:5.2f}")

s = report.stats
print(f"\ninitial discounted utility : {s.initial_discounted_utility:9.4f}")
print(f"time-avg discounted utility: {s.time_avg_discounted_utility:9.4f}")
print(f"equivalent net income      : {s.equivalent_net_income:9,.2f} e/y")
print(f"employment person-years    : {s.employment_person_years:11,.0f} (per 100k agents)")

report.save_csv(out_dir / "baseline_dp_aggregates.csv")
np.savetxt(out_dir / "policy_age64_employed.csv", pm, fmt="%d", delimiter=",")
print(f"\nwrote {out_dir / 'baseline_dp_aggregates.csv'}")
print(f"wrote {out_dir / 'policy_age64_employed.csv'}")

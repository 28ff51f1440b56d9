"""Tour of the decision problem: states, actions, income and rewards.

Follows one agent through a few hand-picked years and prints everything
the model computes along the way: feasible actions, gross-to-net income
under the baseline rules, pension accrual, per-period utility, and the
terminal valuation of the pension stream.

Run: python demos/01_model_walkthrough.py
"""

import numpy as np

from worklife import fiscal, model
from worklife.config import ScenarioConfig
from worklife.model import Action, AgentState, Employment

cfg = ScenarioConfig().validate()

print("=== parameters ===")
print(f"horizon: ages {cfg.start_age}..{cfg.terminal_age}, "
      f"retirement feasible from {model.retirement_feasible_age(cfg)} "
      f"(threshold {cfg.min_retirement_age})")
print(f"utility: log(net income) - {cfg.reward.kappa} if employed, "
      f"discount {cfg.reward.gamma}, solver scale 1/{cfg.reward.reward_scale:.0f}")

print("\n=== the free-time calibration ===")
u_work = model.reward(Employment.EMPLOYED, 1_800 * 12, cfg.reward, scaled=False)
u_home = model.reward(Employment.UNEMPLOYED, 850 * 12, cfg.reward, scaled=False)
print(f"employed at 1,800 e/month net: utility {float(u_work):.4f}")
print(f"out of work at 850 e/month net: utility {float(u_home):.4f}  "
      f"(difference {abs(float(u_work - u_home)):.2e})")

print("\n=== net income across states (baseline rules) ===")
for label, e, wage, prev, tis in [
        ("employed at 25k", Employment.EMPLOYED, 25_000.0, 22_000.0, 3),
        ("first year unemployed, was on 25k", Employment.UNEMPLOYED, 20_000.0, 25_000.0, 0),
        ("long-term unemployed", Employment.UNEMPLOYED, 20_000.0, 25_000.0, 3),
        ("retired on 12k accrual", Employment.RETIRED, 0.0, 0.0, 1)]:
    net = fiscal.net_income(int(e), wage, prev, tis, 12_000.0, cfg.fiscal)
    print(f"{label:38s} -> net {float(net):9,.0f} e/y")

print("\n=== one mid-career year, step by step ===")
s = AgentState(Employment.EMPLOYED, 40, pension_accrued=6_000.0, prev_wage=24_000.0,
               time_in_state=4, wage=26_000.0)
print(f"state: {s}")
print(f"feasible actions: {sorted(a.name for a in model.feasible_actions(s, cfg))}")
for action in (Action.STAY, Action.SWITCH):
    dist = model.next_wage_distribution(
        AgentState(Employment.EMPLOYED if action == Action.STAY else Employment.UNEMPLOYED,
                   40, wage=s.wage), 41, cfg.wage_process)
    draw = float(dist.quantile(0.5))
    nxt, net, r = model.step(s, action, draw, cfg)
    print(f"{action.name:7s}: net {net:9,.0f}, scaled reward {r:.4f}, "
          f"next state ({nxt.employment.name}, tis {nxt.time_in_state}, "
          f"pension {nxt.pension_accrued:,.0f}, median next wage {draw:,.0f})")

print("\n=== terminal valuation at the last age ===")
for pension in (0.0, 10_000.0, 25_000.0):
    s70 = AgentState(Employment.RETIRED, cfg.terminal_age, pension_accrued=pension,
                     wage=cfg.wage_process.wage_floor)
    print(f"accrued {pension:9,.0f} e/y -> terminal value "
          f"{model.terminal_value(s70, cfg):7.4f} (scaled), retirement income "
          f"{float(model.terminal_net_income_of_pension(np.asarray(pension), cfg)):9,.0f} e/y")

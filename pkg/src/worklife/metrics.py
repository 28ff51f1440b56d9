"""Comparison statistics over simulated populations.

All statistics are pure reductions over a trajectory container (anything
with ``reward``, ``utility``, ``net_income``, ``employment`` arrays plus
``terminal_value`` and ``employed_years()``, as produced by
:mod:`worklife.simulate`). Discounted-utility measures include the
terminal valuation; the flow measures (equivalent net income, employment
person-years) cover the in-horizon years only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class StatBlock:
    """Headline statistics of one simulated population."""

    initial_discounted_utility: float
    time_avg_discounted_utility: float
    equivalent_net_income: float
    employment_person_years: float
    mean_discounted_unscaled_utility: float
    population: int
    horizon: int
    gamma: float
    compensating_consumption_pct: float | None = None

    def to_dict(self):
        return {
            "initial_discounted_utility": self.initial_discounted_utility,
            "time_avg_discounted_utility": self.time_avg_discounted_utility,
            "equivalent_net_income": self.equivalent_net_income,
            "employment_person_years": self.employment_person_years,
            "mean_discounted_unscaled_utility": self.mean_discounted_unscaled_utility,
            "population": self.population,
            "horizon": self.horizon,
            "gamma": self.gamma,
            "compensating_consumption_pct": self.compensating_consumption_pct,
        }


def _suffix_discounted(rewards, terminal_value, gamma):
    """(N, T) array of per-start-time discounted sums including the terminal."""
    n, T = rewards.shape
    out = np.empty((n, T))
    future = np.asarray(terminal_value, dtype=float) * np.ones(n)
    for t in range(T - 1, -1, -1):
        future = rewards[:, t] + gamma * future
        out[:, t] = future
    return out


def initial_discounted_utility(trajs, gamma) -> float:
    """Population mean of the discounted scaled return from the first age."""
    if trajs.n_agents == 0:
        raise ValueError("empty population")
    return float(_suffix_discounted(trajs.reward, trajs.terminal_value, gamma)[:, 0].mean())


def time_avg_discounted_utility(trajs, gamma) -> float:
    """Mean over agents and start times of the remaining discounted return.

    Path-dependent: each in-horizon age restarts the discounting at that
    age, terminal value included.
    """
    if trajs.n_agents == 0:
        raise ValueError("empty population")
    return float(_suffix_discounted(trajs.reward, trajs.terminal_value, gamma).mean())


def equivalent_net_income(trajs) -> float:
    """Net income deflated by the free-time cost of employed years.

    ``exp`` of the unscaled per-period utility, averaged over agents and
    in-horizon years; an undiscounted flow measure.
    """
    return float(np.exp(trajs.utility).mean())


def employment_person_years(trajs, scale_to=None) -> float:
    """Total employed person-years, optionally rescaled to a population size."""
    from .model import Employment

    count = float((trajs.employment == Employment.EMPLOYED).sum())
    if scale_to is not None:
        count *= scale_to / trajs.n_agents
    return count


def mean_discounted_unscaled_utility(trajs, gamma) -> float:
    """Per-agent mean of sum_t gamma^(t-1) * u_t over the in-horizon years."""
    weights = gamma ** np.arange(trajs.horizon)
    return float((trajs.utility @ weights).mean())


def discount_period_sum(horizon, gamma) -> float:
    return float(np.sum(gamma ** np.arange(horizon)))


def compensating_consumption(ref_trajs, alt_trajs, gamma, tol=1e-10) -> float:
    """Uniform consumption increase (percent) equating alt to ref utility.

    Solves for ``x`` such that the population-average discounted sum of
    unscaled utilities with all alternative-policy net incomes scaled by
    ``1 + x`` matches the reference policy. Solved by bisection on
    ``x in (-0.99, 10)``, with the log-utility closed form as a cross-check;
    the two must agree to 1e-8.
    """
    if ref_trajs.horizon != alt_trajs.horizon:
        raise ValueError("populations must share the horizon")
    weights = gamma ** np.arange(alt_trajs.horizon)
    target = mean_discounted_unscaled_utility(ref_trajs, gamma)
    # free-time adjustment of each period, recovered from the stored utility
    leisure_adj = alt_trajs.utility - np.log(alt_trajs.net_income)

    def scaled_utility(x):
        u = np.log((1.0 + x) * alt_trajs.net_income) + leisure_adj
        return float((u @ weights).mean())

    lo, hi = -0.99, 10.0
    if not (scaled_utility(lo) <= target <= scaled_utility(hi)):
        raise ValueError("no compensating-consumption root in (-0.99, 10)")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if scaled_utility(mid) < target:
            lo = mid
        else:
            hi = mid
    x_bisect = 0.5 * (lo + hi)

    d = discount_period_sum(alt_trajs.horizon, gamma)
    x_closed = float(np.exp((target - scaled_utility(0.0)) / d) - 1.0)
    if abs(x_bisect - x_closed) > 1e-8:
        raise AssertionError(
            f"bisection {x_bisect} and closed form {x_closed} disagree")
    return 100.0 * x_closed


def compensating_consumption_from_sums(u_ref, u_alt, horizon, gamma, tol=1e-10) -> float:
    """Compensating consumption from two stored discounted-utility means.

    Same root as :func:`compensating_consumption` when populations carry
    log utility; used when only run summaries are available. Bisection with
    closed-form cross-check, in percent.
    """
    d = discount_period_sum(horizon, gamma)

    def g(x):
        return u_alt + d * np.log1p(x) - u_ref

    lo, hi = -0.99, 10.0
    if g(lo) > 0 or g(hi) < 0:
        raise ValueError("no compensating-consumption root in (-0.99, 10)")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
    x_bisect = 0.5 * (lo + hi)
    x_closed = float(np.expm1((u_ref - u_alt) / d))
    if abs(x_bisect - x_closed) > 1e-8:
        raise AssertionError(f"bisection {x_bisect} and closed form {x_closed} disagree")
    return 100.0 * x_closed


def compute_stats(trajs, cfg, scale_to=None) -> StatBlock:
    """Fill the statistics block for one population."""
    gamma = cfg.reward.gamma
    scale = scale_to if scale_to is not None else cfg.simulation.person_year_scale
    return StatBlock(
        initial_discounted_utility=initial_discounted_utility(trajs, gamma),
        time_avg_discounted_utility=time_avg_discounted_utility(trajs, gamma),
        equivalent_net_income=equivalent_net_income(trajs),
        employment_person_years=employment_person_years(trajs, scale_to=scale),
        mean_discounted_unscaled_utility=mean_discounted_unscaled_utility(trajs, gamma),
        population=trajs.n_agents,
        horizon=trajs.horizon,
        gamma=gamma,
    )

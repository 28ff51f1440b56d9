"""Life-cycle Markov decision process: states, actions, wages, rewards.

One decision per year. An agent enters the year in an employment state,
holding a current wage (or wage offer), an accrued pension entitlement,
the reference wage of the last employment spell, and the years elapsed
since the last employment transition. The chosen action sets the
employment state for the year about to elapse; income, utility, pension
accrual and the next wage draw all follow from that elapsed year.

Everything here is a pure function of (state, action, config, draw).
:func:`transition_core` is the single vectorized implementation of the
dynamics; the scalar :func:`step` and all solvers delegate to it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from . import fiscal


class Employment(IntEnum):
    UNEMPLOYED = 0
    EMPLOYED = 1
    RETIRED = 2


class Action(IntEnum):
    STAY = 0
    SWITCH = 1
    RETIRE = 2


@dataclass
class AgentState:
    """One agent's position in the 6-dimensional state space."""

    employment: Employment
    age: int
    pension_accrued: float = 0.0
    prev_wage: float = 0.0
    time_in_state: int = 0
    wage: float = 0.0

    def validate(self, cfg):
        if not (cfg.start_age <= self.age <= cfg.terminal_age):
            raise ValueError(f"age {self.age} outside [{cfg.start_age}, {cfg.terminal_age}]")
        if self.pension_accrued < 0 or self.prev_wage < 0 or self.time_in_state < 0:
            raise ValueError("pension_accrued, prev_wage and time_in_state must be non-negative")
        wp = cfg.wage_process
        if not (wp.wage_floor <= self.wage <= wp.wage_cap):
            raise ValueError(f"wage {self.wage} outside [{wp.wage_floor}, {wp.wage_cap}]")


@dataclass
class RewardParams:
    """Per-period utility parameters.

    Utility of one year is ``log(net income) - kappa`` when employed and
    ``log(net income)`` otherwise; solvers see it divided by
    ``reward_scale``.
    """

    kappa: float = 0.75
    gamma: float = 0.92
    reward_scale: float = 10.0

    def validate(self):
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")
        if not (0.0 < self.gamma < 1.0):
            raise ValueError("gamma must lie in (0, 1)")
        if self.reward_scale <= 0:
            raise ValueError("reward_scale must be positive")


@dataclass
class WageProcessParams:
    """AR(1) log-wage process around a quadratic age profile.

    ``log w' = (1 - rho) * profile(age') + rho * log(w * penalty) + eps``
    with ``eps ~ N(0, sigma^2)``; the multiplicative penalty applies after
    an unemployed year. Draws are clamped to ``[wage_floor, wage_cap]``.
    """

    rho: float = 0.89
    sigma: float = 0.20
    log_wage_level: float = math.log(18_000.0)
    log_wage_growth: float = 0.035
    log_wage_curvature: float = -0.0006
    profile_pivot_age: int = 18
    unemployment_penalty: float = 0.95
    wage_floor: float = 1_000.0
    wage_cap: float = 203_000.0

    def mean_log_wage(self, age):
        t = np.asarray(age, dtype=float) - self.profile_pivot_age
        return self.log_wage_level + self.log_wage_growth * t + self.log_wage_curvature * t * t

    def validate(self):
        if not (0.0 <= self.rho <= 1.0):
            raise ValueError("rho must lie in [0, 1]")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if not (0.0 < self.unemployment_penalty <= 1.0):
            raise ValueError("unemployment_penalty must lie in (0, 1]")
        if not (0.0 < self.wage_floor < self.wage_cap):
            raise ValueError("need 0 < wage_floor < wage_cap")


@dataclass
class TerminalParams:
    """Mortality horizon for the pension stream valued at the last age.

    ``survival`` holds the probability of being alive ``k`` years past the
    terminal age, starting at 1. If not given it is derived from a
    Gompertz hazard ``h(a) = hazard_level * exp(hazard_growth * (a - terminal_age))``.
    """

    max_age: int = 100
    hazard_level: float = 0.0009
    hazard_growth: float = 0.085
    survival: tuple | None = None

    def survival_vector(self, terminal_age):
        n = self.max_age - terminal_age + 1
        if self.survival is not None:
            surv = np.asarray(self.survival, dtype=float)
            if len(surv) != n:
                raise ValueError(f"survival needs {n} entries for ages {terminal_age}..{self.max_age}")
        else:
            hazards = self.hazard_level * np.exp(self.hazard_growth * np.arange(n - 1))
            surv = np.concatenate(([1.0], np.exp(-np.cumsum(hazards))))
        if surv[0] != 1.0 or np.any(np.diff(surv) > 0) or np.any(surv < 0) or np.any(surv > 1):
            raise ValueError("survival must start at 1, be non-increasing and lie in [0, 1]")
        return surv

    def validate(self):
        if self.max_age < 0:
            raise ValueError("max_age must be non-negative")
        if self.hazard_level < 0 or self.hazard_growth < 0:
            raise ValueError("hazard parameters must be non-negative")


def retirement_feasible_age(cfg) -> int:
    """First integer age at which the retire action is available."""
    return math.ceil(cfg.min_retirement_age)


def feasible_mask(employment, age, cfg):
    """Boolean mask of shape ``(..., 3)`` over action codes.

    Retired agents can only stay. Everyone else can stay or switch, and
    additionally retire from the feasible retirement age on.
    """
    employment = np.asarray(employment)
    retired = employment == Employment.RETIRED
    mask = np.empty(employment.shape + (3,), dtype=bool)
    mask[..., Action.STAY] = True
    mask[..., Action.SWITCH] = ~retired
    mask[..., Action.RETIRE] = ~retired & (age >= retirement_feasible_age(cfg))
    return mask


def feasible_actions(s: AgentState, cfg) -> set[Action]:
    """Set of actions available in state ``s``."""
    mask = feasible_mask(np.asarray(s.employment), s.age, cfg)
    return {Action(i) for i in range(3) if mask[i]}


def reward(employment, net_income, params: RewardParams, scaled=True):
    """Scaled per-period utility of one elapsed year.

    ``employment`` is the state the year was spent in; only employed years
    pay the free-time cost ``kappa``. Non-positive net income is a hard
    error (the fiscal floor must prevent it).
    """
    net_income = np.asarray(net_income, dtype=float)
    if np.any(net_income <= 0):
        raise ValueError("net income must be positive")
    employment = np.asarray(employment)
    u = np.log(net_income) - params.kappa * (employment == Employment.EMPLOYED)
    return u / params.reward_scale if scaled else u


@dataclass
class WageDistribution:
    """Log-normal next-wage distribution, clamped to the wage bounds."""

    mean_log: float
    sigma: float
    wage_floor: float
    wage_cap: float

    def _clamp(self, w):
        return np.clip(w, self.wage_floor, self.wage_cap)

    def sample(self, rng, size=None):
        eps = rng.standard_normal(size) if self.sigma > 0 else (np.zeros(size) if size else 0.0)
        return self._clamp(np.exp(self.mean_log + self.sigma * eps))

    def quantile(self, q):
        from scipy.special import ndtri

        q = np.asarray(q, dtype=float)
        if self.sigma == 0:
            return self._clamp(np.exp(self.mean_log) * np.ones_like(q))
        return self._clamp(np.exp(self.mean_log + self.sigma * ndtri(q)))


def next_wage_mean_log(wage, elapsed_unemployed, next_age, wp: WageProcessParams):
    """Conditional mean of next log wage given this year's wage and status."""
    wage = np.asarray(wage, dtype=float)
    penalty = np.where(np.asarray(elapsed_unemployed, dtype=bool), wp.unemployment_penalty, 1.0)
    return (1.0 - wp.rho) * wp.mean_log_wage(next_age) + wp.rho * np.log(wage * penalty)


def next_wage_distribution(s: AgentState, next_age, wp: WageProcessParams) -> WageDistribution:
    """Distribution of the wage offer at ``next_age``.

    ``s.employment`` is read as the status during the elapsed year, so the
    unemployment penalty applies exactly when that year was spent
    unemployed.
    """
    mean_log = float(next_wage_mean_log(s.wage, s.employment == Employment.UNEMPLOYED,
                                        next_age, wp))
    return WageDistribution(mean_log, wp.sigma, wp.wage_floor, wp.wage_cap)


def initial_wage_distribution(cfg) -> WageDistribution:
    """Wage-offer distribution for labor-market entrants at the start age."""
    wp = cfg.wage_process
    return WageDistribution(float(wp.mean_log_wage(cfg.start_age)), wp.sigma,
                            wp.wage_floor, wp.wage_cap)


def transition_core(employment, pension, prev_wage, tis, wage, age, action, cfg,
                    validate=True):
    """Deterministic part of one annual step, vectorized over agents.

    The action fixes the employment state for the elapsed year; income,
    utility and pension accrual are computed for that year; the reference
    wage updates after employed years. Returns a dict with the post-year
    state fields (everything except the next wage draw) and the year's
    ``net_income``, ``utility`` (unscaled) and ``reward`` (scaled).
    Infeasible actions raise.
    """
    employment = np.asarray(employment)
    action = np.asarray(action)
    if validate:
        mask = feasible_mask(employment, age, cfg)
        ok = np.take_along_axis(mask, action[..., None].astype(int), axis=-1)[..., 0]
        if not np.all(ok):
            bad = int(np.argmax(~ok))
            raise ValueError(
                f"infeasible action {int(action.flat[bad])} for employment "
                f"{int(employment.flat[bad])} at age {age}")

    switched = np.where(employment == Employment.EMPLOYED,
                        Employment.UNEMPLOYED, Employment.EMPLOYED)
    e_next = np.where(action == Action.SWITCH, switched, employment)
    e_next = np.where(action == Action.RETIRE, Employment.RETIRED, e_next).astype(np.int8)

    transitioned = e_next != employment
    tis_elapsed = np.where(transitioned, 0, np.minimum(np.asarray(tis) + 1, cfg.tis_cap))

    net = fiscal.net_income(e_next, wage, prev_wage, tis_elapsed, pension, cfg.fiscal)
    utility = reward(e_next, net, cfg.reward, scaled=False)
    accrual = fiscal.accrue_pension(e_next, wage, prev_wage, tis_elapsed, cfg.fiscal)

    return {
        "employment": e_next,
        "pension": np.asarray(pension, dtype=float) + accrual,
        "prev_wage": np.where(e_next == Employment.EMPLOYED, wage, prev_wage).astype(float),
        "tis": tis_elapsed.astype(np.int64),
        "net_income": net,
        "utility": utility,
        "reward": utility / cfg.reward.reward_scale,
    }


def step(s: AgentState, a: Action, wage_draw: float, cfg):
    """Advance one agent by one year.

    ``wage_draw`` should come from :func:`next_wage_distribution` for the
    elapsed year. Returns ``(next_state, net_income, scaled_reward)``.
    """
    out = transition_core(np.asarray(int(s.employment)), s.pension_accrued, s.prev_wage,
                          s.time_in_state, s.wage, s.age, np.asarray(int(a)), cfg)
    wp = cfg.wage_process
    nxt = AgentState(
        employment=Employment(int(out["employment"])),
        age=s.age + 1,
        pension_accrued=float(out["pension"]),
        prev_wage=float(out["prev_wage"]),
        time_in_state=int(out["tis"]),
        wage=float(np.clip(wage_draw, wp.wage_floor, wp.wage_cap)),
    )
    return nxt, float(out["net_income"]), float(out["reward"])


def terminal_value_of_pension(pension, cfg):
    """Scaled value at the terminal age of retiring on a given entitlement.

    Sum of survival-weighted, discounted retirement rewards from the
    terminal age to the end of the mortality horizon. Vectorized over
    ``pension``.
    """
    pension = np.asarray(pension, dtype=float)
    surv = cfg.terminal.survival_vector(cfg.terminal_age)
    discounts = surv * cfg.reward.gamma ** np.arange(len(surv))
    net = fiscal.net_income(np.full(pension.shape, int(Employment.RETIRED), dtype=np.int8),
                            np.zeros_like(pension), np.zeros_like(pension),
                            np.ones_like(pension, dtype=int), pension, cfg.fiscal)
    r = reward(np.full(pension.shape, int(Employment.RETIRED)), net, cfg.reward)
    return r * discounts.sum()


def terminal_net_income_of_pension(pension, cfg):
    """Annual net retirement income behind the terminal valuation."""
    pension = np.asarray(pension, dtype=float)
    return fiscal.net_income(np.full(pension.shape, int(Employment.RETIRED), dtype=np.int8),
                             np.zeros_like(pension), np.zeros_like(pension),
                             np.ones_like(pension, dtype=int), pension, cfg.fiscal)


def terminal_value(s: AgentState, cfg):
    """Terminal value for one agent; non-retired agents are deemed to retire."""
    if s.age != cfg.terminal_age:
        raise ValueError(f"terminal value is defined at age {cfg.terminal_age}, got {s.age}")
    return float(terminal_value_of_pension(np.asarray(s.pension_accrued), cfg))

"""Seeded Monte-Carlo population simulation under any policy handle.

A policy handle is anything with ``kind``, ``model_hash`` and an
``act_batch(employment, pension, prev_wage, tis, wage, age, uniforms, cfg)``
method returning one action code per agent. All randomness (initial wages,
wage shocks, action-sampling uniforms) is drawn up front from one seeded
generator keyed by the run, so results are byte-identical for any worker
count; workers own disjoint agent blocks and aggregation always reduces in
agent order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import metrics, model
from .actor_critic import sample_actions
from .model import Employment


@dataclass
class PopulationTrajectories:
    """Column-oriented trajectories of one simulated population.

    State arrays have one column per age (``T+1`` including the terminal
    age); flow arrays have one column per elapsed year (``T``). Column
    ``t+1`` of ``employment`` is the state the year starting at
    ``start_age + t`` was spent in.
    """

    start_age: int
    employment: np.ndarray       # (N, T+1) int8
    action: np.ndarray           # (N, T)  int8
    wage: np.ndarray             # (N, T+1)
    pension: np.ndarray          # (N, T+1)
    prev_wage: np.ndarray        # (N, T+1)
    tis: np.ndarray              # (N, T+1) int16
    net_income: np.ndarray       # (N, T)
    utility: np.ndarray          # (N, T) unscaled
    reward: np.ndarray           # (N, T) scaled
    terminal_value: np.ndarray   # (N,) scaled
    terminal_net_income: np.ndarray  # (N,)

    @property
    def n_agents(self):
        return self.employment.shape[0]

    @property
    def horizon(self):
        return self.net_income.shape[1]

    @property
    def ages(self):
        return np.arange(self.start_age, self.start_age + self.employment.shape[1])

    def employed_years(self):
        """Boolean (N, T): was the elapsed year starting at age t spent employed."""
        return self.employment[:, 1:] == Employment.EMPLOYED

    @classmethod
    def from_flows(cls, net_income, employed, kappa=0.0, terminal_value=None,
                   start_age=18):
        """Synthetic population from per-year net incomes and employment flags."""
        net_income = np.atleast_2d(np.asarray(net_income, dtype=float))
        employed = np.broadcast_to(np.atleast_2d(employed), net_income.shape)
        n, T = net_income.shape
        emp_states = np.full((n, T + 1), int(Employment.UNEMPLOYED), dtype=np.int8)
        emp_states[:, 1:][employed] = int(Employment.EMPLOYED)
        utility = np.log(net_income) - kappa * employed
        tv = np.zeros(n) if terminal_value is None else np.asarray(terminal_value, float)
        zeros = np.zeros((n, T + 1))
        return cls(start_age=start_age, employment=emp_states,
                   action=np.zeros((n, T), dtype=np.int8), wage=zeros.copy(),
                   pension=zeros.copy(), prev_wage=zeros.copy(),
                   tis=np.zeros((n, T + 1), dtype=np.int16), net_income=net_income,
                   utility=utility, reward=utility.copy(), terminal_value=tv,
                   terminal_net_income=np.zeros(n))


@dataclass
class AggregateReport:
    """Per-age population shares and the scenario statistics block."""

    ages: np.ndarray
    employed_share: np.ndarray
    unemployed_share: np.ndarray
    retired_share: np.ndarray
    mean_net_income: np.ndarray
    population: int
    stats: "metrics.StatBlock | None" = None

    CSV_HEADER = "age,employed_share,unemployed_share,retired_share,mean_net_income"

    def to_csv(self) -> str:
        lines = [self.CSV_HEADER]
        for i, age in enumerate(self.ages):
            lines.append(f"{int(age)},{self.employed_share[i]:.12g},"
                         f"{self.unemployed_share[i]:.12g},{self.retired_share[i]:.12g},"
                         f"{self.mean_net_income[i]:.12g}")
        return "\n".join(lines) + "\n"

    def save_csv(self, path):
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_csv())


@dataclass
class RandomPolicy:
    """Uniform draw over the feasible actions at each state."""

    kind: str = "random"
    model_hash: str = ""
    mode: str = "sample"

    def act_batch(self, employment, pension, prev_wage, tis, wage, age, uniforms, cfg):
        mask = model.feasible_mask(np.atleast_1d(np.asarray(employment)), age, cfg)
        probs = mask / mask.sum(axis=-1, keepdims=True)
        return sample_actions(probs, np.atleast_1d(uniforms))

    def act(self, s: model.AgentState, mode, rng, cfg):
        actions = sorted(model.feasible_actions(s, cfg))
        return actions[rng.integers(len(actions))]


def random_policy() -> RandomPolicy:
    return RandomPolicy()


def aggregate(trajs: PopulationTrajectories, cfg) -> AggregateReport:
    """Exact per-age shares and mean net income from trajectories."""
    n = trajs.n_agents
    counts = np.stack([(trajs.employment == e).sum(axis=0) for e in range(3)], axis=1)
    shares = counts / n
    mean_net = np.concatenate([trajs.net_income.mean(axis=0),
                               [trajs.terminal_net_income.mean()]])
    return AggregateReport(
        ages=trajs.ages, employed_share=shares[:, int(Employment.EMPLOYED)],
        unemployed_share=shares[:, int(Employment.UNEMPLOYED)],
        retired_share=shares[:, int(Employment.RETIRED)],
        mean_net_income=mean_net, population=n,
        stats=metrics.compute_stats(trajs, cfg))


def run_population(policy, cfg, n_agents=None, seed=None, n_workers=None,
                   initial_wage_sigma=None, initial_employment=None):
    """Simulate a population from the start age to the terminal age.

    Everyone starts unemployed with no pension and no wage history, holding
    a wage offer drawn from the entry-age distribution. The two
    ``initial_*`` overrides exist for sensitivity reporting: entry-wage
    dispersion and entry employment state. Returns
    ``(trajectories, aggregate_report)``; deterministic in
    ``(seed, policy, cfg)``. A policy fitted to a different model
    configuration is refused.
    """
    n = n_agents if n_agents is not None else cfg.simulation.agents
    seed = seed if seed is not None else cfg.simulation.base_seed
    workers = n_workers if n_workers is not None else cfg.simulation.n_workers
    if policy.model_hash and policy.model_hash != cfg.model_hash():
        raise ValueError(
            f"policy was fitted to model {policy.model_hash}, not {cfg.model_hash()}")

    T = cfg.terminal_age - cfg.start_age
    wp = cfg.wage_process
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    init_eps = rng.standard_normal(n)
    shock_eps = rng.standard_normal((n, T))
    action_u = rng.random((n, T))

    trajs = PopulationTrajectories(
        start_age=cfg.start_age,
        employment=np.empty((n, T + 1), dtype=np.int8),
        action=np.empty((n, T), dtype=np.int8),
        wage=np.empty((n, T + 1)), pension=np.empty((n, T + 1)),
        prev_wage=np.empty((n, T + 1)), tis=np.empty((n, T + 1), dtype=np.int16),
        net_income=np.empty((n, T)), utility=np.empty((n, T)),
        reward=np.empty((n, T)), terminal_value=np.empty(n),
        terminal_net_income=np.empty(n))

    init_dist = model.initial_wage_distribution(cfg)
    entry_sigma = wp.sigma if initial_wage_sigma is None else initial_wage_sigma
    entry_state = (Employment.UNEMPLOYED if initial_employment is None
                   else initial_employment)
    trajs.employment[:, 0] = int(entry_state)
    trajs.pension[:, 0] = 0.0
    trajs.prev_wage[:, 0] = 0.0
    trajs.tis[:, 0] = 0
    trajs.wage[:, 0] = np.clip(np.exp(init_dist.mean_log + entry_sigma * init_eps),
                               wp.wage_floor, wp.wage_cap)

    def simulate_block(rows):
        employment = trajs.employment[rows, 0].astype(np.int64)
        pension = trajs.pension[rows, 0].copy()
        prev_wage = trajs.prev_wage[rows, 0].copy()
        tis = trajs.tis[rows, 0].astype(np.int64)
        wage = trajs.wage[rows, 0].copy()
        for t in range(T):
            age = cfg.start_age + t
            acts = np.asarray(policy.act_batch(employment, pension, prev_wage, tis,
                                               wage, age, action_u[rows, t], cfg))
            out = model.transition_core(employment, pension, prev_wage, tis, wage,
                                        age, acts, cfg)
            mean_log = model.next_wage_mean_log(
                wage, out["employment"] == Employment.UNEMPLOYED, age + 1, wp)
            wage = np.clip(np.exp(mean_log + wp.sigma * shock_eps[rows, t]),
                           wp.wage_floor, wp.wage_cap)
            employment, pension = out["employment"].astype(np.int64), out["pension"]
            prev_wage, tis = out["prev_wage"], out["tis"]
            trajs.action[rows, t] = acts
            trajs.net_income[rows, t] = out["net_income"]
            trajs.utility[rows, t] = out["utility"]
            trajs.reward[rows, t] = out["reward"]
            trajs.employment[rows, t + 1] = employment
            trajs.pension[rows, t + 1] = pension
            trajs.prev_wage[rows, t + 1] = prev_wage
            trajs.tis[rows, t + 1] = tis
            trajs.wage[rows, t + 1] = wage
        trajs.terminal_value[rows] = model.terminal_value_of_pension(pension, cfg)
        trajs.terminal_net_income[rows] = model.terminal_net_income_of_pension(pension, cfg)

    blocks = [slice(lo, min(lo + -(-n // workers), n))
              for lo in range(0, n, -(-n // workers))]
    if workers == 1 or len(blocks) == 1:
        for rows in blocks:
            simulate_block(rows)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(simulate_block, blocks))

    return trajs, aggregate(trajs, cfg)


@dataclass
class MultiRunReport:
    """Across-run mean and standard deviation of aggregates and statistics."""

    reports: list
    ages: np.ndarray = field(init=False)
    mean_employed_share: np.ndarray = field(init=False)
    std_employed_share: np.ndarray = field(init=False)
    stats_mean: dict = field(init=False)
    stats_std: dict = field(init=False)

    def __post_init__(self):
        self.ages = self.reports[0].ages
        emp = np.stack([r.employed_share for r in self.reports])
        self.mean_employed_share = emp.mean(axis=0)
        self.std_employed_share = emp.std(axis=0)
        keys = [k for k, v in self.reports[0].stats.to_dict().items() if v is not None]
        table = {k: np.array([r.stats.to_dict()[k] for r in self.reports]) for k in keys}
        self.stats_mean = {k: float(v.mean()) for k, v in table.items()}
        self.stats_std = {k: float(v.std()) for k, v in table.items()}


def multi_run(policy_producer, cfg, runs=None, agents=None, base_seed=None,
              n_workers=None) -> MultiRunReport:
    """Average aggregates over independent simulation runs.

    ``policy_producer(run_index)`` supplies the policy for each run, which
    lets callers retrain a learner per run while a solved grid is reused
    unchanged. Run ``r`` simulates with seed sequence ``[base_seed, r]``.
    """
    runs = runs if runs is not None else cfg.simulation.runs
    agents = agents if agents is not None else cfg.simulation.agents
    base_seed = base_seed if base_seed is not None else cfg.simulation.base_seed
    reports = []
    for r in range(runs):
        policy = policy_producer(r)
        _, report = run_population(policy, cfg, n_agents=agents,
                                   seed=[base_seed, r], n_workers=n_workers)
        reports.append(report)
    return MultiRunReport(reports=reports)

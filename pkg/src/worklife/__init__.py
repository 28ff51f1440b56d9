"""Life-cycle labor-supply model: grid DP and actor-critic solvers,
population simulation, and reform comparison statistics."""

from .actor_critic import RlPolicy, TrainConfig, train
from .config import ConfigError, ScenarioConfig, load_config
from .dp import DpPolicy, GridSpec, ValueGrid, backward_induct, greedy_action, policy_map
from .fiscal import FiscalRules
from .model import (Action, AgentState, Employment, RewardParams, TerminalParams,
                    WageProcessParams, feasible_actions, reward, step, terminal_value)
from .simulate import (AggregateReport, PopulationTrajectories, multi_run,
                       random_policy, run_population)

__version__ = "0.1.0"

__all__ = [
    "Action", "AgentState", "AggregateReport", "ConfigError", "DpPolicy",
    "Employment", "FiscalRules", "GridSpec", "PopulationTrajectories",
    "RewardParams", "RlPolicy", "ScenarioConfig", "TerminalParams", "TrainConfig",
    "ValueGrid", "WageProcessParams", "backward_induct", "feasible_actions",
    "greedy_action", "load_config", "multi_run", "policy_map", "random_policy",
    "reward", "run_population", "step", "terminal_value", "train",
]

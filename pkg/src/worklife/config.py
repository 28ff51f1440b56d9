"""Scenario configuration: defaults, JSON overlay loading, validation, hashing.

A scenario file is a JSON object whose keys overlay the baseline defaults;
an empty file yields the full default baseline. Unknown keys are rejected
by name. Two hashes identify artifacts: ``model_hash`` covers everything
that defines the decision problem (dynamics, fiscal rules, horizon, grid
and training parameters), while ``content_hash`` also covers simulation
sizes and seeds.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, fields

from .actor_critic import TrainConfig
from .dp import GridSpec
from .fiscal import FiscalRules
from .model import RewardParams, TerminalParams, WageProcessParams


class ConfigError(ValueError):
    pass


@dataclass
class SimConfig:
    """Population-simulation sizes and seeding."""

    runs: int = 3
    agents: int = 10_000
    base_seed: int = 20_240_101
    n_workers: int = 1
    person_year_scale: int = 100_000

    def validate(self):
        if self.runs < 1 or self.agents < 1:
            raise ConfigError("runs and agents must be at least 1")
        if self.n_workers < 1:
            raise ConfigError("n_workers must be at least 1")


@dataclass
class ScenarioConfig:
    """Full parameterization of one scenario."""

    name: str = "baseline"
    start_age: int = 18
    terminal_age: int = 70
    min_retirement_age: float = 63.5
    tis_cap: int = 10
    reward: RewardParams = field(default_factory=RewardParams)
    wage_process: WageProcessParams = field(default_factory=WageProcessParams)
    terminal: TerminalParams = field(default_factory=TerminalParams)
    fiscal: FiscalRules = field(default_factory=FiscalRules)
    grid: GridSpec = field(default_factory=GridSpec)
    training: TrainConfig = field(default_factory=TrainConfig)
    simulation: SimConfig = field(default_factory=SimConfig)
    policy_map_panels: tuple = ((64, "employed"), (64, "unemployed"))

    def validate(self):
        if not (self.start_age < self.terminal_age):
            raise ConfigError("start_age must precede terminal_age")
        if self.terminal.max_age < self.terminal_age:
            raise ConfigError("terminal.max_age must not precede terminal_age")
        if self.tis_cap < 1:
            raise ConfigError("tis_cap must be at least 1")
        for section in (self.reward, self.wage_process, self.terminal, self.fiscal,
                        self.grid, self.training, self.simulation):
            try:
                section.validate()
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        wp = self.wage_process
        for label, knots in (("wage", self.grid.wage_knots()),
                             ("prev_wage", self.grid.prev_wage_knots())):
            # a euro of slack: queries are clamped to the hull anyway
            if knots[0] > wp.wage_floor + 1.0 or knots[-1] < wp.wage_cap - 1.0:
                raise ConfigError(
                    f"{label} grid [{knots[0]:.0f}, {knots[-1]:.0f}] must cover "
                    f"wage bounds [{wp.wage_floor:.0f}, {wp.wage_cap:.0f}]")
        for age, employment in self.policy_map_panels:
            if not (self.start_age <= int(age) < self.terminal_age):
                raise ConfigError(f"policy-map age {age} outside the decision horizon")
            if employment not in ("employed", "unemployed", "retired"):
                raise ConfigError(f"unknown policy-map employment state '{employment}'")
        return self

    def to_dict(self):
        return dataclasses.asdict(self)

    def _model_dict(self):
        d = self.to_dict()
        for key in ("name", "simulation", "policy_map_panels"):
            d.pop(key)
        return d

    def model_hash(self) -> str:
        return _digest(self._model_dict())

    def content_hash(self) -> str:
        return _digest(self.to_dict())

    def reform_fields_vs(self, other: "ScenarioConfig") -> list[str]:
        """Dotted names of model-relevant fields on which two configs differ."""
        return sorted(_diff_keys(self._model_dict(), other._model_dict()))


#: model fields a reform scenario may change relative to its baseline
DECLARED_REFORM_FIELDS = frozenset({
    "min_retirement_age",
    "fiscal.ubi_enabled",
    "fiscal.ubi_amount",
    "fiscal.flat_tax_rate",
})


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()[:16]


def _diff_keys(a, b, prefix=""):
    keys = set(a) | set(b)
    out = []
    for k in keys:
        va, vb = a.get(k), b.get(k)
        if isinstance(va, dict) and isinstance(vb, dict):
            out += _diff_keys(va, vb, prefix=f"{prefix}{k}.")
        elif va != vb:
            out.append(f"{prefix}{k}")
    return out


def _overlay_dataclass(obj, data, path):
    known = {f.name: f for f in fields(obj)}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown configuration key '{path}{key}'")
        current = getattr(obj, key)
        if dataclasses.is_dataclass(current) and isinstance(value, dict):
            _overlay_dataclass(current, value, path=f"{path}{key}.")
        elif isinstance(value, dict):
            raise ConfigError(f"configuration key '{path}{key}' does not take a mapping")
        else:
            if key == "tax_brackets" and value is not None:
                value = tuple((float(t), float(r)) for t, r in value)
            elif key == "survival" and value is not None:
                value = tuple(float(v) for v in value)
            elif key == "policy_map_panels" and value is not None:
                value = tuple((int(a), str(e)) for a, e in value)
            elif isinstance(value, list):
                value = tuple(value)
            setattr(obj, key, value)


def config_from_dict(data: dict) -> ScenarioConfig:
    cfg = ScenarioConfig()
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be a JSON object")
    _overlay_dataclass(cfg, data, path="")
    return cfg.validate()


def load_config(path) -> ScenarioConfig:
    """Load a scenario file: JSON overrides applied over the defaults.

    An empty file is the default baseline. Unknown keys, malformed JSON and
    invariant violations raise :class:`ConfigError` naming the problem.
    """
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    if not text.strip():
        return ScenarioConfig().validate()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    try:
        return config_from_dict(data)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

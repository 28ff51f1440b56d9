import numpy as np
import pytest

from worklife.config import ScenarioConfig, config_from_dict


def make_config(**overrides) -> ScenarioConfig:
    return config_from_dict(overrides)


@pytest.fixture(scope="session")
def baseline_cfg() -> ScenarioConfig:
    return ScenarioConfig().validate()


def tiny_config(rng: np.random.Generator, allow_retirement=None) -> ScenarioConfig:
    """Random small instance whose dynamics stay exactly on the grid.

    Deterministic constant wages (rho=1, sigma=0, no unemployment penalty)
    and zero pension accrual keep every reachable state at a knot, so grid
    values must match exhaustive enumeration bit-for-bit (up to float
    roundoff). Fiscal parameters, horizon, knot values and the terminal
    survival curve are randomized.
    """
    start = 30
    n_ages = int(rng.integers(2, 5))          # 2..4 decision ages
    terminal = start + n_ages
    if allow_retirement is None:
        allow_retirement = bool(rng.integers(2))
    min_ret = start + int(rng.integers(1, n_ages + 1)) - 0.5 if allow_retirement \
        else terminal + 5.0

    wage0 = float(rng.uniform(12_000, 40_000))
    wage_step = float(rng.uniform(4_000, 15_000))
    n_wage = int(rng.integers(2, 4))          # 2..3 wage knots
    wage_cap = wage0 + wage_step * (n_wage - 1)

    pension0 = float(rng.uniform(0, 3_000))
    pension_step = float(rng.uniform(2_000, 9_000))
    n_pension = int(rng.integers(2, 4))

    brackets = ((0.0, 0.0),
                (float(rng.uniform(8_000, 15_000)), float(rng.uniform(0.1, 0.3))),
                (float(rng.uniform(25_000, 40_000)), float(rng.uniform(0.3, 0.5))))
    survival = (1.0,) + tuple(np.sort(rng.uniform(0.0, 1.0, size=2))[::-1])

    return config_from_dict({
        "start_age": start,
        "terminal_age": terminal,
        "min_retirement_age": min_ret,
        "policy_map_panels": ((start, "employed"),),
        "reward": {
            "kappa": float(rng.uniform(0.3, 1.2)),
            "gamma": float(rng.uniform(0.7, 0.97)),
        },
        "wage_process": {
            "rho": 1.0, "sigma": 0.0, "unemployment_penalty": 1.0,
            "wage_floor": wage0, "wage_cap": wage_cap,
        },
        "terminal": {"max_age": terminal + 2, "survival": survival},
        "fiscal": {
            "basic_ui_benefit": float(rng.uniform(4_000, 10_000)),
            "er_replacement_rate": float(rng.uniform(0.2, 0.6)),
            "er_cap_fraction": float(rng.uniform(0.7, 0.95)),
            "guarantee_pension": float(rng.uniform(5_000, 9_000)),
            "net_floor": float(rng.uniform(3_000, 4_500)),
            "accrual_employed": 0.0,
            "accrual_unemployed": 0.0,
            "tax_brackets": brackets,
        },
        "grid": {
            "n_pension": n_pension, "n_prev_wage": n_wage, "n_wage": n_wage,
            "n_tis": int(rng.integers(1, 4)),
            "pension_origin": pension0 / 12.0, "pension_step": pension_step / 12.0,
            "wage_origin": wage0 / 12.0, "wage_step": max(wage_step, 1.0) / 12.0,
            "prev_wage_origin": wage0 / 12.0, "prev_wage_step": max(wage_step, 1.0) / 12.0,
            "quadrature_nodes": 1,
        },
    })


_ACCEPTANCE_RESULTS = []


def record_acceptance(number: int, description: str, passed: bool, detail: str = ""):
    line = f"ACCEPTANCE {number:2d} {'PASS' if passed else 'FAIL'} - {description}"
    if detail:
        line += f" ({detail})"
    _ACCEPTANCE_RESULTS.append((number, line))
    print("\n" + line)
    assert passed, line


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE_RESULTS):
            terminalreporter.write_line(line)

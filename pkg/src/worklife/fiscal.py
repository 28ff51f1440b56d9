"""Tax and benefit rules: gross-to-net income and pension accrual.

All monetary quantities are euros per year. Every function is a pure,
numpy-vectorized map from (state fields, rules) to amounts, so the same
code serves scalar calls, population arrays and grid meshes.

The parameter table is a stylized approximation of a Nordic-style scheme:
a progressive wage/benefit tax, a social-security contribution on wages
only, a one-year earnings-related unemployment benefit on top of a flat
basic benefit, a guarantee pension, and a means-tested net-income floor.
The basic-income variant replaces the progressive tax with a flat tax and
the minimum benefits with an unconditional transfer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

UNEMPLOYED, EMPLOYED, RETIRED = 0, 1, 2


@dataclass
class FiscalRules:
    """Parameter set for one tax/benefit regime.

    ``tax_brackets`` is an ordered list of ``(threshold, marginal_rate)``
    pairs; the rate applies to income above the threshold up to the next
    one. With ``ubi_enabled`` the bracket schedule is replaced by
    ``flat_tax_rate`` on all gross income, every agent receives
    ``ubi_amount`` untaxed, the basic unemployment benefit and the
    net-income floor are dropped, and the guarantee pension is reduced by
    the basic-income amount (no double floor).
    """

    ss_contribution_rate: float = 0.08
    tax_brackets: tuple = ((0.0, 0.0), (12_000.0, 0.20), (30_000.0, 0.35), (60_000.0, 0.45))
    basic_ui_benefit: float = 4_000.0
    er_replacement_rate: float = 0.20
    er_cap_fraction: float = 0.90
    guarantee_pension: float = 8_000.0
    net_floor: float = 3_600.0
    accrual_employed: float = 0.015
    accrual_unemployed: float = 0.01125
    ubi_enabled: bool = False
    ubi_amount: float = 6_000.0
    flat_tax_rate: float = 0.40

    def validate(self):
        rates = [self.ss_contribution_rate, self.er_replacement_rate,
                 self.er_cap_fraction, self.accrual_employed,
                 self.accrual_unemployed, self.flat_tax_rate]
        rates += [r for _, r in self.tax_brackets]
        if any(not (0.0 <= r <= 1.0) for r in rates):
            raise ValueError("fiscal rates must lie in [0, 1]")
        thresholds = [t for t, _ in self.tax_brackets]
        if thresholds != sorted(thresholds) or len(set(thresholds)) != len(thresholds):
            raise ValueError("tax_brackets thresholds must be strictly increasing")
        for name in ("basic_ui_benefit", "guarantee_pension", "net_floor", "ubi_amount"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


def tax(gross, is_wage, rules: FiscalRules):
    """Income tax and social-security contribution due on a gross amount.

    Returns ``(tax_due, ss_due)``. The contribution applies to wage income
    only; benefits and pensions are taxed under the same schedule but carry
    no contribution. Negative gross is a hard error.
    """
    gross = np.asarray(gross, dtype=float)
    if np.any(gross < 0):
        raise ValueError("gross income must be non-negative")
    is_wage = np.asarray(is_wage, dtype=bool)
    ss_due = np.where(is_wage, rules.ss_contribution_rate * gross, 0.0)
    if rules.ubi_enabled:
        tax_due = rules.flat_tax_rate * gross
    else:
        tax_due = np.zeros_like(gross)
        brackets = rules.tax_brackets
        for i, (lo, rate) in enumerate(brackets):
            hi = brackets[i + 1][0] if i + 1 < len(brackets) else np.inf
            tax_due = tax_due + rate * np.clip(gross - lo, 0.0, hi - lo)
    return tax_due, ss_due


def unemployment_benefit(prev_wage, time_in_state, rules: FiscalRules):
    """Gross unemployment benefit for one unemployed year.

    ``time_in_state`` is the elapsed year's value: 0 means the year directly
    after an employment spell, which is the only year with an
    earnings-related component (requires a positive reference wage). Later
    years pay the basic benefit only. Under basic income the basic benefit
    is replaced by the transfer, so only the earnings-related excess over
    the old basic amount remains, and only in year 0.
    """
    prev_wage = np.asarray(prev_wage, dtype=float)
    time_in_state = np.asarray(time_in_state)
    basic = rules.basic_ui_benefit
    er = np.minimum(basic + rules.er_replacement_rate * np.maximum(0.0, prev_wage - basic),
                    rules.er_cap_fraction * prev_wage)
    eligible = (time_in_state == 0) & (prev_wage > 0)
    if rules.ubi_enabled:
        return np.where(eligible, np.maximum(0.0, er - basic), 0.0)
    return np.where(eligible, er, basic)


def pension_benefit(pension_accrued, rules: FiscalRules):
    """Gross annual pension: the accrued entitlement or the guarantee floor.

    Under basic income the guarantee is lowered by the transfer amount; the
    transfer itself is added back in :func:`net_income`.
    """
    pension_accrued = np.asarray(pension_accrued, dtype=float)
    floor = rules.guarantee_pension
    if rules.ubi_enabled:
        floor = max(0.0, floor - rules.ubi_amount)
    return np.maximum(pension_accrued, floor)


def accrue_pension(employment, wage, prev_wage, time_in_state, rules: FiscalRules):
    """Pension entitlement earned during one elapsed year.

    Employed years accrue on the wage; the first unemployed year after
    employment accrues on the previous wage; later unemployed years and
    retirement accrue nothing. ``time_in_state`` is the elapsed year's
    value, as in :func:`unemployment_benefit`.
    """
    employment = np.asarray(employment)
    wage = np.asarray(wage, dtype=float)
    prev_wage = np.asarray(prev_wage, dtype=float)
    time_in_state = np.asarray(time_in_state)
    out = np.where(employment == EMPLOYED, rules.accrual_employed * wage, 0.0)
    first_year_unemployed = (employment == UNEMPLOYED) & (time_in_state == 0)
    return np.where(first_year_unemployed, rules.accrual_unemployed * prev_wage, out)


def gross_income(employment, wage, prev_wage, time_in_state, pension_accrued,
                 rules: FiscalRules):
    """Gross income for one elapsed year in the given employment state."""
    employment = np.asarray(employment)
    wage = np.asarray(wage, dtype=float)
    gross = np.where(employment == EMPLOYED, wage,
                     unemployment_benefit(prev_wage, time_in_state, rules))
    return np.where(employment == RETIRED, pension_benefit(pension_accrued, rules), gross)


def net_income(employment, wage, prev_wage, time_in_state, pension_accrued,
               rules: FiscalRules):
    """Net income for one elapsed year: gross minus taxes plus transfers.

    The baseline regime tops the result up to ``net_floor``; the
    basic-income regime instead adds the unconditional ``ubi_amount`` to
    everyone with no floor. A non-positive result signals an inconsistent
    rule set and raises.
    """
    employment = np.asarray(employment)
    gross = gross_income(employment, wage, prev_wage, time_in_state,
                         pension_accrued, rules)
    tax_due, ss_due = tax(gross, employment == EMPLOYED, rules)
    net = gross - tax_due - ss_due
    if rules.ubi_enabled:
        net = net + rules.ubi_amount
    else:
        net = np.maximum(net, rules.net_floor)
    if np.any(net <= 0):
        raise ValueError("net income must be positive; fiscal rules are inconsistent")
    return net

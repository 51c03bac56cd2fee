"""Reform scenarios: rate changes, mechanical revenue effects, and
counterfactual experiment designs.

A scenario replaces the federal part of the pre-year schedule with the
post-year federal rules, holding state and FICA at pre-year levels.
Incomes are converted into post-year nominal dollars with a single
scalar price deflator before the post-law rates are evaluated, so pre
and post rates refer to the same real earnings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace as dc_replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ._kernels import ordered_sum
from .errors import SchemaError
from .population import ImputedCouple
from .tax import TaxSchedule, effective_rates_batch, load_year, total_tax_batch
from .welfare import (
    ElasticityProfile,
    RateBundle,
    WelfareDecomposition,
    income_shares,
    marginal_excess_burden,
)

_DATA_DIR = Path(__file__).parent / "data"


@dataclass(frozen=True)
class ReformScenario:
    name: str
    pre: TaxSchedule
    post_federal: TaxSchedule
    price_deflator: float  # post-year nominal dollars per pre-year nominal dollar

    def __post_init__(self):
        if self.price_deflator <= 0:
            raise ValueError("deflator must be positive")

    @property
    def post_composite(self) -> TaxSchedule:
        """Post-year federal rules with pre-year state and FICA."""
        return dc_replace(
            self.post_federal,
            fica_rate=self.pre.fica_rate,
            state_flat_rate=self.pre.state_flat_rate,
        )


@dataclass(frozen=True)
class CounterfactualSpec:
    population_year: int
    pre_law_year: int
    post_law_year: int
    mode: str  # "distribution-only" | "distribution-and-law"

    def __post_init__(self):
        if self.mode not in ("distribution-only", "distribution-and-law"):
            raise ValueError("mode must be distribution-only or distribution-and-law")


def load_price_index(path=None) -> dict[int, float]:
    p = Path(path) if path is not None else _DATA_DIR / "price_index.json"
    with open(p, encoding="utf-8") as fh:
        doc = json.load(fh)
    return {int(k): float(v) for k, v in doc.items()}


def scenario_from_file(path, schedule_dir=None) -> ReformScenario:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        return ReformScenario(
            name=str(doc["name"]),
            pre=load_year(int(doc["pre_year"]), schedule_dir),
            post_federal=load_year(int(doc["post_federal_year"]), schedule_dir),
            price_deflator=float(doc["deflator"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"invalid scenario document {path}: {exc}") from exc


def _earnings_arrays(pop: Sequence[ImputedCouple]):
    pop = sorted(pop, key=lambda c: c.base.id)
    y_m = np.array([c.base.earnings_m for c in pop])
    y_f = np.array([c.potential_earnings_f for c in pop])
    big_f = np.array([c.participation_prob for c in pop])
    w = np.array([c.base.weight for c in pop])
    return pop, y_m, y_f, big_f, w


def rate_changes(
    pop: Sequence[ImputedCouple], scenario: ReformScenario
) -> list[RateBundle]:
    """Per-couple effective rates under pre-year law and their reform-
    induced changes, ordered by ascending record id."""
    _, y_m, y_f, _, _ = _earnings_arrays(pop)
    tau_m0, tau_f0, a0 = effective_rates_batch(y_m, y_f, scenario.pre)
    d = scenario.price_deflator
    tau_m1, tau_f1, a1 = effective_rates_batch(
        y_m * d, y_f * d, scenario.post_composite
    )
    return [
        RateBundle(
            tau_m=float(tau_m0[i]),
            tau_f=float(tau_f0[i]),
            a=float(a0[i]),
            d_tau_m=float(tau_m1[i] - tau_m0[i]),
            d_tau_f=float(tau_f1[i] - tau_f0[i]),
            d_a=float(a1[i] - a0[i]),
        )
        for i in range(len(y_m))
    ]


def mechanical_reduction(
    pop: Sequence[ImputedCouple], scenario: ReformScenario
) -> float:
    """Liability decrease at unchanged behavior, as a fraction of
    aggregate expected labor income.

    Expected liability blends the dual-earner and single-earner states
    by the participation probability.  Post-law liabilities are computed
    at deflated nominal incomes and converted back into pre-year real
    dollars before differencing.
    """
    pop_sorted, y_m, y_f, big_f, w = _earnings_arrays(pop)
    zeros = np.zeros_like(y_f)

    def expected_liability(schedule, scale):
        dual = total_tax_batch(y_m * scale, y_f * scale, schedule)
        single = total_tax_batch(y_m * scale, zeros, schedule)
        return (big_f * dual + (1.0 - big_f) * single) / scale

    pre = expected_liability(scenario.pre, 1.0)
    post = expected_liability(scenario.post_composite, scenario.price_deflator)
    shares = income_shares(pop_sorted)
    return float(ordered_sum(w * (pre - post)) / shares.W)


def run_reform(
    pop: Sequence[ImputedCouple],
    scenario: ReformScenario,
    el: ElasticityProfile,
) -> WelfareDecomposition:
    """Full welfare evaluation of one scenario on one population."""
    pop = sorted(pop, key=lambda c: c.base.id)
    rates = rate_changes(pop, scenario)
    mech = mechanical_reduction(pop, scenario)
    return marginal_excess_burden(pop, rates, el, mechanical_reduction=mech)


def run_counterfactual(
    spec: CounterfactualSpec,
    pop: Sequence[ImputedCouple],
    el: ElasticityProfile,
    schedule_dir=None,
    price_index: Optional[dict[int, float]] = None,
    scenario_name: Optional[str] = None,
) -> WelfareDecomposition:
    """Evaluate the pre->post law change on a population drawn from a
    possibly different year.

    The population's nominal incomes are first aligned to the pre-law
    year through the price index; then the pre->post reform is applied
    as usual.  ``distribution-only`` varies the population while holding
    the law change fixed; ``distribution-and-law`` additionally moves
    the law years themselves.  Both reduce to the same computation once
    the years are resolved.
    """
    if price_index is None:
        price_index = load_price_index()
    for year in (spec.population_year, spec.pre_law_year, spec.post_law_year):
        if year not in price_index:
            raise SchemaError(f"price index has no entry for year {year}")

    align = price_index[spec.pre_law_year] / price_index[spec.population_year]
    deflator = price_index[spec.post_law_year] / price_index[spec.pre_law_year]
    scenario = ReformScenario(
        name=scenario_name
        or f"{spec.mode}-{spec.population_year}-{spec.pre_law_year}-{spec.post_law_year}",
        pre=load_year(spec.pre_law_year, schedule_dir),
        post_federal=load_year(spec.post_law_year, schedule_dir),
        price_deflator=deflator,
    )
    if align != 1.0:
        pop = [rescale_couple(c, align) for c in pop]
    return run_reform(pop, scenario, el)


def rescale_couple(c: ImputedCouple, factor: float) -> ImputedCouple:
    """Scale a couple's nominal wages by a price factor."""
    base = c.base
    new_base = dc_replace(
        base,
        wage_m=base.wage_m * factor,
        wage_f=None if base.wage_f is None else base.wage_f * factor,
    )
    return ImputedCouple(
        base=new_base,
        potential_earnings_f=c.potential_earnings_f * factor,
        participation_prob=c.participation_prob,
    )

"""Sufficient-statistics marginal excess burden for couples.

Per couple, the welfare gain from a small reform decomposes into the
husband's intensive-margin response (in both participation states), the
wife's intensive response, the wife's participation response, and the
two cross-responses.  Each term is a behavioral fiscal externality:
(rate / net-of-tax rate) x rate change x elasticity x expected income
share.  Gains are reported as a fraction of aggregate expected labor
income, with sign convention gain = -dD (losses negative).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._kernels import ordered_sum
from .errors import DenominatorUnderflow
from .population import ImputedCouple

NET_RATE_FLOOR = 1e-6

#: winners/losers threshold: 0.1% of own couple income
GAIN_THRESHOLD = 0.001

QUINTILE_ETAS = (1.0, 0.8, 0.6, 0.4, 0.2)


@dataclass(frozen=True)
class RateBundle:
    """Effective rate levels and reform-induced changes for one couple."""

    tau_m: float
    tau_f: float
    a: float
    d_tau_m: float = 0.0
    d_tau_f: float = 0.0
    d_a: float = 0.0

    def __post_init__(self):
        for level in (self.tau_m, self.tau_f, self.a):
            if not level < 1:
                raise ValueError("net-of-tax rates must be positive (rate < 1)")
        for d in (self.d_tau_m, self.d_tau_f, self.d_a):
            if not np.isfinite(d):
                raise ValueError("rate changes must be finite")


@dataclass(frozen=True)
class ElasticityProfile:
    """Compensated elasticities; eta may be a scalar or a per-quintile
    vector of five values (assigned bottom to top)."""

    eps_m: float
    eps_f: float
    eps_mf: float
    eps_fm: float
    eta: float | tuple

    def __post_init__(self):
        if isinstance(self.eta, (tuple, list)):
            if len(self.eta) != 5:
                raise ValueError("quintile eta vector must have exactly 5 entries")
            if any(e < 0 for e in self.eta):
                raise ValueError("eta entries must be non-negative")
            object.__setattr__(self, "eta", tuple(float(e) for e in self.eta))
        elif self.eta < 0:
            raise ValueError("eta must be non-negative")

    @property
    def quintile_varying(self) -> bool:
        return isinstance(self.eta, tuple)


@dataclass(frozen=True)
class IncomeShares:
    s_m2: np.ndarray  # husband income share, dual-earner state
    s_f: np.ndarray   # wife (potential) income share
    s_m1: np.ndarray  # husband income share, single-earner state
    W: float          # aggregate expected labor income
    expected_income: np.ndarray  # per-couple E_i


@dataclass(frozen=True)
class WelfareDecomposition:
    intensive_m: float
    intensive_f: float
    extensive_f: float
    cross_effects: float
    total_without_cross: float
    total: float
    per_couple_gains: np.ndarray  # fraction of own expected couple income
    mechanical_reduction: Optional[float]
    per_dollar: Optional[float]


def _sorted_by_id(pop: Sequence[ImputedCouple]) -> list[ImputedCouple]:
    return sorted(pop, key=lambda c: c.base.id)


def income_shares(pop: Sequence[ImputedCouple]) -> IncomeShares:
    """Expected labor income shares, weighted, ordered by record id."""
    pop = _sorted_by_id(pop)
    y_m = np.array([c.base.earnings_m for c in pop])
    y_f = np.array([c.potential_earnings_f for c in pop])
    big_f = np.array([c.participation_prob for c in pop])
    w = np.array([c.base.weight for c in pop])

    e_m2 = y_m * big_f
    e_f = y_f * big_f
    e_m1 = y_m * (1.0 - big_f)
    expected = e_m2 + e_f + e_m1
    total = ordered_sum(w * expected)
    if total <= 0:
        raise ZeroDivisionError("aggregate labor income is zero")
    return IncomeShares(
        s_m2=w * e_m2 / total,
        s_f=w * e_f / total,
        s_m1=w * e_m1 / total,
        W=float(total),
        expected_income=expected,
    )


def quintile_eta(
    pop: Sequence[ImputedCouple], etas: tuple = QUINTILE_ETAS
) -> np.ndarray:
    """Per-couple participation elasticity by income quintile.

    Couples are ranked by expected couple labor income (ties broken by
    ascending id); quintile boundaries fall at cumulative weight
    20/40/60/80%; eta is assigned bottom to top.
    """
    pop = _sorted_by_id(pop)
    if not pop:
        raise ValueError("population is empty")
    shares = income_shares(pop)
    w = np.array([c.base.weight for c in pop])
    order = np.lexsort(
        (np.array([c.base.id for c in pop]), shares.expected_income)
    )
    cum = np.cumsum(w[order])
    frac = cum / cum[-1]
    eta_sorted = np.empty(len(pop))
    for rank, f in enumerate(frac):
        # quintile = number of boundaries strictly below this couple's
        # cumulative weight (couples straddling a boundary stay below it)
        q = int(np.sum(np.array([0.2, 0.4, 0.6, 0.8]) < f - 1e-12))
        eta_sorted[rank] = etas[q]
    out = np.empty(len(pop))
    out[order] = eta_sorted
    return out


def _check_denominators(levels: np.ndarray, what: str) -> None:
    if np.any(1.0 - levels < NET_RATE_FLOOR):
        raise DenominatorUnderflow(f"net-of-tax rate 1 - {what} below {NET_RATE_FLOOR}")


def marginal_excess_burden(
    pop: Sequence[ImputedCouple],
    rates: Sequence[RateBundle],
    el: ElasticityProfile,
    mechanical_reduction: Optional[float] = None,
) -> WelfareDecomposition:
    """Aggregate welfare gain of a marginal reform, decomposed by margin.

    ``rates`` must align with ``pop`` after sorting by record id.  When
    ``mechanical_reduction`` (fraction of aggregate income) is supplied,
    the welfare gain per dollar of tax cut M/(M - G) is reported; it is
    absent when M <= 0.
    """
    if len(pop) != len(rates):
        raise ValueError("pop and rates must have equal lengths")
    order = np.argsort([c.base.id for c in pop], kind="stable")
    pop = [pop[i] for i in order]
    rates = [rates[i] for i in order]
    shares = income_shares(pop)

    tau_m = np.array([r.tau_m for r in rates])
    tau_f = np.array([r.tau_f for r in rates])
    a = np.array([r.a for r in rates])
    d_tau_m = np.array([r.d_tau_m for r in rates])
    d_tau_f = np.array([r.d_tau_f for r in rates])
    d_a = np.array([r.d_a for r in rates])
    _check_denominators(tau_m, "tau_m")
    _check_denominators(tau_f, "tau_f")
    _check_denominators(a, "a")

    if el.quintile_varying:
        eta = quintile_eta(pop, el.eta)
    else:
        eta = np.full(len(pop), float(el.eta))

    s_m = shares.s_m2 + shares.s_m1  # husband hours move in both states

    # fiscal-externality terms of dD (positive = extra burden);
    # reported gains are the negation
    int_m = tau_m / (1.0 - tau_m) * d_tau_m * el.eps_m * s_m
    int_f = tau_f / (1.0 - tau_f) * d_tau_f * el.eps_f * shares.s_f
    ext_f = a / (1.0 - a) * d_a * eta * shares.s_f
    # the husband's response to the wife's rate exists only in the
    # dual-earner state, so the mf term carries s_m2 alone
    cross = (
        tau_m / (1.0 - tau_f) * d_tau_f * el.eps_mf * shares.s_m2
        + tau_f / (1.0 - tau_m) * d_tau_m * el.eps_fm * shares.s_f
    )

    intensive_m = -ordered_sum(int_m)
    intensive_f = -ordered_sum(int_f)
    extensive_f = -ordered_sum(ext_f)
    cross_effects = -ordered_sum(cross)
    total = intensive_m + intensive_f + extensive_f + cross_effects

    # per-couple gains as a fraction of own expected income: the shares
    # above carry weight_i / W, so rescale by W / (weight_i * E_i)
    w = np.array([c.base.weight for c in pop])
    per_couple = -(int_m + int_f + ext_f + cross) * shares.W / (w * shares.expected_income)

    per_dollar = None
    if mechanical_reduction is not None and mechanical_reduction > 0:
        per_dollar = mechanical_reduction / (mechanical_reduction - total)

    return WelfareDecomposition(
        intensive_m=intensive_m,
        intensive_f=intensive_f,
        extensive_f=extensive_f,
        cross_effects=cross_effects,
        total_without_cross=total - cross_effects,
        total=total,
        per_couple_gains=per_couple,
        mechanical_reduction=mechanical_reduction,
        per_dollar=per_dollar,
    )


def representative_couple(
    mean_rates: RateBundle, s_m: float, s_f: float, el: ElasticityProfile
) -> float:
    """Welfare gain for a homogeneous benchmark couple with mean rates.

    Requires a jointly-taxed benchmark: tau_m = tau_f.
    """
    if abs(mean_rates.tau_m - mean_rates.tau_f) > 1e-12:
        raise ValueError("representative couple requires tau_m == tau_f")
    if el.quintile_varying:
        raise ValueError("representative couple needs a scalar eta")
    tau = mean_rates.tau_m
    a = mean_rates.a
    if 1.0 - tau < NET_RATE_FLOOR or 1.0 - a < NET_RATE_FLOOR:
        raise DenominatorUnderflow("net-of-tax rate below floor")
    d_tau = mean_rates.d_tau_m
    burden = (
        tau / (1.0 - tau) * d_tau
        * ((el.eps_m + el.eps_mf) * s_m + (el.eps_f + el.eps_fm) * s_f)
        + a / (1.0 - a) * mean_rates.d_a * el.eta * s_f
    )
    return -burden


def representative_inputs(
    pop: Sequence[ImputedCouple], rates: Sequence[RateBundle]
) -> tuple[RateBundle, float, float]:
    """Income-weighted mean rates and aggregate shares for the
    representative-couple benchmark.

    The intensive rate blends husband and wife marginal rates with their
    income shares (the benchmark assumes joint taxation, so a single
    mean applies to both spouses); the participation rate is averaged
    over wife income shares.
    """
    order = np.argsort([c.base.id for c in pop], kind="stable")
    rates = [rates[i] for i in order]
    shares = income_shares(pop)
    s_m = shares.s_m2 + shares.s_m1
    s_f = shares.s_f
    s_m_tot = float(ordered_sum(s_m))
    s_f_tot = float(ordered_sum(s_f))
    tau_m = np.array([r.tau_m for r in rates])
    tau_f = np.array([r.tau_f for r in rates])
    d_tau_m = np.array([r.d_tau_m for r in rates])
    d_tau_f = np.array([r.d_tau_f for r in rates])
    a = np.array([r.a for r in rates])
    d_a = np.array([r.d_a for r in rates])
    tau_bar = float(ordered_sum(s_m * tau_m + s_f * tau_f))
    d_tau_bar = float(ordered_sum(s_m * d_tau_m + s_f * d_tau_f))
    a_bar = float(ordered_sum(s_f * a) / s_f_tot)
    d_a_bar = float(ordered_sum(s_f * d_a) / s_f_tot)
    bundle = RateBundle(
        tau_m=tau_bar, tau_f=tau_bar, a=a_bar,
        d_tau_m=d_tau_bar, d_tau_f=d_tau_bar, d_a=d_a_bar,
    )
    return bundle, s_m_tot, s_f_tot


@dataclass(frozen=True)
class DistributionStats:
    percentiles: dict  # {"P10": ..., "P25": ..., "P50": ..., "P75": ..., "P90": ...}
    winners: float
    losers: float
    neutral: float


def weighted_percentile(values: np.ndarray, weights: np.ndarray, q: float) -> float:
    """Lower-interpolation weighted percentile: the smallest value whose
    cumulative weight reaches q of the total."""
    order = np.argsort(values, kind="stable")
    cum = np.cumsum(weights[order])
    idx = int(np.searchsorted(cum, q * cum[-1], side="left"))
    idx = min(idx, len(values) - 1)
    return float(values[order][idx])


def distribution_stats(
    per_couple_gains: Sequence[float], weights: Sequence[float]
) -> DistributionStats:
    gains = np.asarray(per_couple_gains, dtype=float)
    w = np.asarray(weights, dtype=float)
    if gains.size == 0 or gains.shape != w.shape:
        raise ValueError("gains and weights must be equal-length and nonempty")
    wsum = w.sum()
    percentiles = {
        f"P{int(100 * q)}": weighted_percentile(gains, w, q)
        for q in (0.10, 0.25, 0.50, 0.75, 0.90)
    }
    winners = float(w[gains > GAIN_THRESHOLD].sum() / wsum)
    losers = float(w[gains < -GAIN_THRESHOLD].sum() / wsum)
    return DistributionStats(
        percentiles=percentiles,
        winners=winners,
        losers=losers,
        neutral=1.0 - winners - losers,
    )

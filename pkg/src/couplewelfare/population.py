"""Couple records, synthetic population generation, and CSV round trips.

The synthetic generator draws jointly log-normal spousal wages and a
latent fixed-cost participation rule for wives, so that the true
participation probabilities and wage-equation coefficients are known and
can be recovered by the selection estimator in :mod:`couplewelfare.heckman`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import SchemaError

EDUC_LEVELS = ("hs_dropout", "hs_grad", "some_college", "college")

CSV_HEADER = [
    "id", "age_m", "age_f", "educ_m", "educ_f", "wage_m", "hours_m",
    "works_f", "wage_f", "hours_f", "n_children", "n_children_u6", "weight",
]


@dataclass(frozen=True)
class CoupleRecord:
    id: int
    age_m: int
    age_f: int
    educ_m: str
    educ_f: str
    wage_m: float
    hours_m: float
    works_f: bool
    wage_f: Optional[float]
    hours_f: Optional[float]
    n_children: int
    n_children_u6: int
    weight: float

    def __post_init__(self):
        if self.hours_m <= 0:
            raise ValueError("sample is restricted to working husbands")
        if self.weight < 0:
            raise ValueError("weight must be non-negative")
        if self.works_f:
            if self.wage_f is None or self.hours_f is None:
                raise ValueError("working wife must carry wage_f and hours_f")
        elif self.wage_f is not None or self.hours_f is not None:
            raise ValueError("non-working wife must not carry wage_f/hours_f")
        if self.educ_m not in EDUC_LEVELS or self.educ_f not in EDUC_LEVELS:
            raise ValueError(f"education must be one of {EDUC_LEVELS}")

    @property
    def earnings_m(self) -> float:
        return self.wage_m * self.hours_m

    @property
    def earnings_f(self) -> float:
        if not self.works_f:
            return 0.0
        return self.wage_f * self.hours_f


@dataclass(frozen=True)
class ImputedCouple:
    base: CoupleRecord
    potential_earnings_f: float
    participation_prob: float

    def __post_init__(self):
        if not (0.0 < self.participation_prob < 1.0):
            raise ValueError("participation_prob must lie strictly in (0, 1)")
        if self.potential_earnings_f <= 0:
            raise ValueError("potential earnings must be positive")


@dataclass(frozen=True)
class PopulationConfig:
    """Parameters of the synthetic generating process.

    Wife log potential earnings follow a linear index in age, education
    and children plus a normal error; participation is decided by a
    latent index (including the exclusion restrictions: husband earnings
    and children under six) plus a selection error correlated with the
    wage error.
    """

    n: int = 5000
    # husband wage process
    mean_log_wage_m: float = 3.0
    sd_log_wage_m: float = 0.5
    hours_m: float = 2200.0
    # wife potential earnings (log-linear index)
    wage_const: float = 9.2
    wage_age: float = 0.01
    wage_age2: float = -0.0005
    wage_educ: tuple = (0.0, 0.2, 0.4, 0.7)  # by EDUC_LEVELS
    wage_children: float = -0.05
    sd_wage_error: float = 0.5
    # participation latent index
    sel_const: float = 0.3
    sel_age: float = 0.01
    sel_age2: float = -0.001
    sel_educ: tuple = (0.0, 0.15, 0.3, 0.45)
    sel_children: float = -0.1
    sel_husband_earnings: float = -0.08  # per $10k of husband earnings
    sel_children_u6: float = -0.5
    # error structure
    selection_rho: float = 0.5  # Corr(wage error, selection error)
    # Corr(wife wage error, husband log-wage shock).  Nonzero values make
    # husband earnings endogenous in the selection equation, so the
    # default keeps spousal dependence in observables (assorted
    # education) only.
    wage_corr: float = 0.0
    hours_f: float = 1800.0
    weight_low: float = 0.5
    weight_high: float = 1.5

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError("population size must be positive")
        if self.sd_log_wage_m <= 0 or self.sd_wage_error <= 0:
            raise ValueError("error standard deviations must be positive")
        if not (-1 < self.selection_rho < 1) or not (-1 < self.wage_corr < 1):
            raise ValueError("correlations must lie in (-1, 1)")


def _error_covariance(config: PopulationConfig) -> np.ndarray:
    """Correlation matrix of (wage error u, selection error v, husband
    shock e); v and e are independent by construction."""
    corr = np.array(
        [
            [1.0, config.selection_rho, config.wage_corr],
            [config.selection_rho, 1.0, 0.0],
            [config.wage_corr, 0.0, 1.0],
        ]
    )
    if np.linalg.eigvalsh(corr)[0] <= 0:
        raise ValueError("error correlation matrix is not positive definite")
    return corr


def _educ_index(level: str) -> int:
    return EDUC_LEVELS.index(level)


def wife_log_earnings_index(config: PopulationConfig, age_f, educ_f_idx, n_children):
    age = np.asarray(age_f, dtype=float) - 40.0
    educ = np.asarray(config.wage_educ)[np.asarray(educ_f_idx)]
    return (
        config.wage_const
        + config.wage_age * age
        + config.wage_age2 * age**2
        + educ
        + config.wage_children * np.asarray(n_children, dtype=float)
    )


def wife_selection_index(
    config: PopulationConfig, age_f, educ_f_idx, n_children, n_children_u6, earnings_m
):
    age = np.asarray(age_f, dtype=float) - 40.0
    educ = np.asarray(config.sel_educ)[np.asarray(educ_f_idx)]
    return (
        config.sel_const
        + config.sel_age * age
        + config.sel_age2 * age**2
        + educ
        + config.sel_children * np.asarray(n_children, dtype=float)
        + config.sel_husband_earnings * np.asarray(earnings_m, dtype=float) / 1e4
        + config.sel_children_u6 * np.asarray(n_children_u6, dtype=float)
    )


def generate_synthetic_with_truth(
    config: PopulationConfig, seed: int
) -> tuple[list[CoupleRecord], np.ndarray]:
    """Generate couples plus the true participation probabilities Phi(index)."""
    from scipy.stats import norm

    rng = np.random.default_rng(seed)
    n = config.n

    age_m = rng.integers(25, 55, size=n)
    age_f = np.clip(age_m + rng.integers(-4, 5, size=n), 25, 54)
    educ_m = rng.integers(0, 4, size=n)
    # spouses' education is positively assorted
    educ_f = np.clip(educ_m + rng.integers(-1, 2, size=n), 0, 3)
    n_children = rng.integers(0, 4, size=n)
    n_children_u6 = np.minimum(rng.integers(0, 3, size=n), n_children)
    weight = rng.uniform(config.weight_low, config.weight_high, size=n)

    chol = np.linalg.cholesky(_error_covariance(config))
    errors = rng.standard_normal((n, 3)) @ chol.T
    u, v, e = errors[:, 0], errors[:, 1], errors[:, 2]

    log_wage_m = config.mean_log_wage_m + config.sd_log_wage_m * e
    wage_m = np.exp(log_wage_m)
    earnings_m = wage_m * config.hours_m

    log_pot_f = (
        wife_log_earnings_index(config, age_f, educ_f, n_children)
        + config.sd_wage_error * u
    )
    index = wife_selection_index(
        config, age_f, educ_f, n_children, n_children_u6, earnings_m
    )
    works = index + v > 0
    truth_prob = norm.cdf(index)

    records = []
    for i in range(n):
        if works[i]:
            wage_f = math.exp(log_pot_f[i]) / config.hours_f
            hours_f = config.hours_f
        else:
            wage_f = None
            hours_f = None
        records.append(
            CoupleRecord(
                id=i,
                age_m=int(age_m[i]),
                age_f=int(age_f[i]),
                educ_m=EDUC_LEVELS[educ_m[i]],
                educ_f=EDUC_LEVELS[educ_f[i]],
                wage_m=float(wage_m[i]),
                hours_m=config.hours_m,
                works_f=bool(works[i]),
                wage_f=wage_f,
                hours_f=hours_f,
                n_children=int(n_children[i]),
                n_children_u6=int(n_children_u6[i]),
                weight=float(weight[i]),
            )
        )
    return records, truth_prob


def generate_synthetic(config: PopulationConfig, seed: int) -> list[CoupleRecord]:
    return generate_synthetic_with_truth(config, seed)[0]


def filter_attached(
    pop: Sequence[CoupleRecord], min_earnings: float
) -> list[CoupleRecord]:
    """Drop couples whose husband earns below a minimum-attachment floor."""
    return [r for r in pop if r.earnings_m >= min_earnings]


# ---------------------------------------------------------------------------
# CSV round trip
# ---------------------------------------------------------------------------

def export_population(pop: Sequence[CoupleRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in pop:
            writer.writerow(
                [
                    r.id, r.age_m, r.age_f, r.educ_m, r.educ_f,
                    repr(r.wage_m), repr(r.hours_m),
                    int(r.works_f),
                    "" if r.wage_f is None else repr(r.wage_f),
                    "" if r.hours_f is None else repr(r.hours_f),
                    r.n_children, r.n_children_u6, repr(r.weight),
                ]
            )


def _parse_row(row: dict, rownum: int) -> CoupleRecord:
    def bad(column: str, why: str):
        return SchemaError(f"row {rownum}, column {column!r}: {why}")

    def get(column: str) -> str:
        val = row.get(column)
        if val is None or val == "":
            raise bad(column, "missing value")
        return val

    try:
        works_f = bool(int(get("works_f")))
    except ValueError as exc:
        raise bad("works_f", "must be 0 or 1") from exc

    wage_f = row.get("wage_f") or None
    hours_f = row.get("hours_f") or None
    try:
        rec = CoupleRecord(
            id=int(get("id")),
            age_m=int(get("age_m")),
            age_f=int(get("age_f")),
            educ_m=get("educ_m"),
            educ_f=get("educ_f"),
            wage_m=float(get("wage_m")),
            hours_m=float(get("hours_m")),
            works_f=works_f,
            wage_f=None if wage_f is None else float(wage_f),
            hours_f=None if hours_f is None else float(hours_f),
            n_children=int(get("n_children")),
            n_children_u6=int(get("n_children_u6")),
            weight=float(get("weight")),
        )
    except SchemaError:
        raise
    except ValueError as exc:
        raise SchemaError(f"row {rownum}: {exc}") from exc
    return rec


def import_population(path) -> list[CoupleRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError("empty population file")
        missing = [c for c in CSV_HEADER if c not in reader.fieldnames]
        if missing:
            raise SchemaError(f"missing required column(s): {', '.join(missing)}")
        return [_parse_row(row, i) for i, row in enumerate(reader, start=2)]

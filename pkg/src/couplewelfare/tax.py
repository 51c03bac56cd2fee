"""Tax liabilities and effective tax rates from piecewise-linear schedules.

A schedule bundles one year's federal bracket structure, deduction and
exemption amounts, an optional EITC trapezoid, a combined (employee plus
employer) FICA rate, and a flat state rate.  Effective rates are forward
differences of total liability, expressed per dollar of pre-tax labor
income by dividing through by (1 + 0.5 * fica_rate): workers are assumed
to bear the employer half of the payroll tax.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ._kernels import bracket_tax, eitc_credit_array
from .errors import SchemaError

#: forward-difference step for marginal rates, in currency units
MARGINAL_STEP = 0.1

SCHEDULE_DIR_ENV = "COUPLEWELFARE_SCHEDULE_DIR"


@dataclass(frozen=True)
class EitcSchedule:
    """Four-parameter EITC trapezoid: phase-in, plateau, phase-out."""

    phase_in_rate: float
    kink1: float
    kink2: float
    phase_out_rate: float

    def __post_init__(self):
        if not (0 < self.kink1 <= self.kink2):
            raise ValueError("EITC kinks must satisfy 0 < kink1 <= kink2")
        if self.phase_in_rate <= 0 or self.phase_out_rate <= 0:
            raise ValueError("EITC rates must be positive")

    @property
    def exhaustion(self) -> float:
        """Income at which the credit is completely phased out."""
        return self.kink2 + self.phase_in_rate * self.kink1 / self.phase_out_rate


@dataclass(frozen=True)
class TaxSchedule:
    year: int
    brackets: Tuple[Tuple[float, float], ...]  # (lower_bound, marginal_rate)
    standard_deduction: float
    personal_exemption: float
    num_exemptions: int
    fica_rate: float
    state_flat_rate: float
    eitc: Optional[EitcSchedule] = None

    def __post_init__(self):
        lowers = [b[0] for b in self.brackets]
        rates = [b[1] for b in self.brackets]
        if not lowers or lowers[0] != 0:
            raise ValueError("first bracket lower bound must be 0")
        if any(lo <= prev for prev, lo in zip(lowers, lowers[1:])):
            raise ValueError("bracket lower bounds must be strictly increasing")
        for r in rates + [self.fica_rate, self.state_flat_rate]:
            if not (0 <= r < 1):
                raise ValueError("rates must lie in [0, 1)")
        if self.standard_deduction < 0 or self.personal_exemption < 0:
            raise ValueError("deduction and exemption must be non-negative")
        # cache bracket arrays for the kernels
        object.__setattr__(self, "_lowers", np.asarray(lowers, dtype=float))
        object.__setattr__(self, "_rates", np.asarray(rates, dtype=float))

    @property
    def deduction_total(self) -> float:
        return self.standard_deduction + self.num_exemptions * self.personal_exemption

    @property
    def incidence_factor(self) -> float:
        """1 + employer half of FICA; divisor turning rates into shares of
        pre-tax labor income."""
        return 1.0 + 0.5 * self.fica_rate


@dataclass(frozen=True)
class FilingInput:
    earnings_m: float
    earnings_f: float
    n_children: int = 2

    def __post_init__(self):
        if self.earnings_m < 0 or self.earnings_f < 0:
            raise ValueError("earnings must be non-negative")


class TaxComponents(NamedTuple):
    federal: float
    state: float
    fica: float
    total: float


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def eitc_credit(earned: float, s: EitcSchedule) -> float:
    """Piecewise-linear credit on earned income; zero past exhaustion."""
    if earned < 0:
        raise ValueError("earned income must be non-negative")
    return float(
        eitc_credit_array(
            np.asarray([earned], dtype=float),
            s.phase_in_rate,
            s.kink1,
            s.kink2,
            s.phase_out_rate,
        )[0]
    )


def total_tax_batch(
    earnings_m: np.ndarray, earnings_f: np.ndarray, s: TaxSchedule
) -> np.ndarray:
    """Total liability (federal + state + FICA) for arrays of couples."""
    joint = np.asarray(earnings_m, dtype=float) + np.asarray(earnings_f, dtype=float)
    taxable = np.maximum(joint - s.deduction_total, 0.0)
    federal = bracket_tax(taxable, s._lowers, s._rates)
    if s.eitc is not None:
        federal = federal - eitc_credit_array(
            joint, s.eitc.phase_in_rate, s.eitc.kink1, s.eitc.kink2, s.eitc.phase_out_rate
        )
    return federal + (s.state_flat_rate + s.fica_rate) * joint


def total_tax(f: FilingInput, s: TaxSchedule) -> TaxComponents:
    joint = f.earnings_m + f.earnings_f
    taxable = max(joint - s.deduction_total, 0.0)
    federal = float(
        bracket_tax(np.asarray([taxable]), s._lowers, s._rates)[0]
    )
    if s.eitc is not None:
        federal -= eitc_credit(joint, s.eitc)
    state = s.state_flat_rate * joint
    fica = s.fica_rate * joint
    return TaxComponents(federal, state, fica, federal + state + fica)


def marginal_rate(f: FilingInput, s: TaxSchedule, earner: str) -> float:
    """Effective marginal rate on one spouse's earnings.

    Forward difference of total liability over a 0.1-unit earnings bump,
    divided by the payroll incidence factor.
    """
    if earner not in ("m", "f"):
        raise ValueError("earner must be 'm' or 'f'")
    if earner == "m":
        bumped = FilingInput(f.earnings_m + MARGINAL_STEP, f.earnings_f, f.n_children)
    else:
        bumped = FilingInput(f.earnings_m, f.earnings_f + MARGINAL_STEP, f.n_children)
    diff = total_tax(bumped, s).total - total_tax(f, s).total
    return diff / MARGINAL_STEP / s.incidence_factor


def participation_rate(f: FilingInput, potential_f: float, s: TaxSchedule) -> float:
    """Effective participation tax rate on the wife's potential earnings.

    Liability change when the wife moves from zero to her potential
    earnings (husband earnings held fixed), as a share of those earnings,
    divided by the payroll incidence factor.
    """
    if potential_f <= 0:
        raise ZeroDivisionError("potential earnings must be positive")
    working = FilingInput(f.earnings_m, potential_f, f.n_children)
    alone = FilingInput(f.earnings_m, 0.0, f.n_children)
    diff = total_tax(working, s).total - total_tax(alone, s).total
    return diff / potential_f / s.incidence_factor


def effective_rates_batch(
    earnings_m: np.ndarray, potential_f: np.ndarray, s: TaxSchedule
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized (tau_m, tau_f, a) for a population.

    Marginal rates are evaluated at (earnings_m, potential_f); the
    participation rate compares potential_f against zero wife earnings.
    """
    ym = np.asarray(earnings_m, dtype=float)
    yf = np.asarray(potential_f, dtype=float)
    if np.any(yf <= 0):
        raise ZeroDivisionError("potential earnings must be positive")
    base = total_tax_batch(ym, yf, s)
    tau_m = (total_tax_batch(ym + MARGINAL_STEP, yf, s) - base) / MARGINAL_STEP
    tau_f = (total_tax_batch(ym, yf + MARGINAL_STEP, s) - base) / MARGINAL_STEP
    a = (base - total_tax_batch(ym, np.zeros_like(yf), s)) / yf
    k = s.incidence_factor
    return tau_m / k, tau_f / k, a / k


# ---------------------------------------------------------------------------
# schedule files
# ---------------------------------------------------------------------------

_BUILTIN_SCHEDULE_DIR = Path(__file__).parent / "data" / "schedules"


def schedule_from_dict(doc: dict) -> TaxSchedule:
    try:
        eitc = None
        if doc.get("eitc") is not None:
            e = doc["eitc"]
            eitc = EitcSchedule(
                phase_in_rate=float(e["phase_in_rate"]),
                kink1=float(e["kink1"]),
                kink2=float(e["kink2"]),
                phase_out_rate=float(e["phase_out_rate"]),
            )
        return TaxSchedule(
            year=int(doc["year"]),
            brackets=tuple((float(lo), float(r)) for lo, r in doc["brackets"]),
            standard_deduction=float(doc["standard_deduction"]),
            personal_exemption=float(doc["personal_exemption"]),
            num_exemptions=int(doc["num_exemptions"]),
            fica_rate=float(doc["fica_rate"]),
            state_flat_rate=float(doc["state_flat_rate"]),
            eitc=eitc,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"invalid schedule document: {exc}") from exc


def load_schedule(path: str | os.PathLike) -> TaxSchedule:
    with open(path, encoding="utf-8") as fh:
        return schedule_from_dict(json.load(fh))


def schedule_dir(override: str | os.PathLike | None = None) -> Path:
    """Resolve the schedule directory: explicit arg, env var, or built-in."""
    if override is not None:
        return Path(override)
    env = os.environ.get(SCHEDULE_DIR_ENV)
    if env:
        return Path(env)
    return _BUILTIN_SCHEDULE_DIR


def load_year(year: int, directory: str | os.PathLike | None = None) -> TaxSchedule:
    path = schedule_dir(directory) / f"{year}.json"
    if not path.exists():
        raise FileNotFoundError(f"no schedule file for year {year}: {path}")
    sched = load_schedule(path)
    if sched.year != year:
        raise SchemaError(f"schedule file {path} declares year {sched.year}")
    return sched


def available_years(directory: str | os.PathLike | None = None) -> Sequence[int]:
    d = schedule_dir(directory)
    return sorted(int(p.stem) for p in d.glob("*.json") if p.stem.isdigit())

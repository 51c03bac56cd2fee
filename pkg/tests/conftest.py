import numpy as np
import pytest

from couplewelfare.population import CoupleRecord, ImputedCouple
from couplewelfare.tax import EitcSchedule, TaxSchedule


@pytest.fixture
def flat_schedule():
    """Single 20% bracket, no deductions, no EITC, no payroll/state."""
    return TaxSchedule(
        year=2000,
        brackets=((0.0, 0.20),),
        standard_deduction=0.0,
        personal_exemption=0.0,
        num_exemptions=0,
        fica_rate=0.0,
        state_flat_rate=0.0,
    )


@pytest.fixture
def two_bracket_schedule():
    return TaxSchedule(
        year=2000,
        brackets=((0.0, 0.10), (30000.0, 0.30)),
        standard_deduction=5000.0,
        personal_exemption=1000.0,
        num_exemptions=4,
        fica_rate=0.15,
        state_flat_rate=0.04,
    )


@pytest.fixture
def eitc():
    return EitcSchedule(
        phase_in_rate=0.40, kink1=10000.0, kink2=15000.0, phase_out_rate=0.21
    )


def make_couple(
    cid=0,
    wage_m=20.0,
    hours_m=2000.0,
    works_f=False,
    wage_f=None,
    hours_f=None,
    weight=1.0,
    n_children=2,
    n_children_u6=0,
):
    return CoupleRecord(
        id=cid,
        age_m=40,
        age_f=38,
        educ_m="hs_grad",
        educ_f="hs_grad",
        wage_m=wage_m,
        hours_m=hours_m,
        works_f=works_f,
        wage_f=wage_f,
        hours_f=hours_f,
        n_children=n_children,
        n_children_u6=n_children_u6,
        weight=weight,
    )


def make_imputed(cid=0, y_m=40000.0, y_f=20000.0, prob=0.5, weight=1.0):
    return ImputedCouple(
        base=make_couple(cid=cid, wage_m=y_m / 2000.0, hours_m=2000.0, weight=weight),
        potential_earnings_f=y_f,
        participation_prob=prob,
    )


@pytest.fixture
def random_imputed_pop():
    def build(n=50, seed=0):
        rng = np.random.default_rng(seed)
        return [
            make_imputed(
                cid=i,
                y_m=float(rng.uniform(20000, 120000)),
                y_f=float(rng.uniform(8000, 60000)),
                prob=float(rng.uniform(0.1, 0.9)),
                weight=float(rng.uniform(0.5, 1.5)),
            )
            for i in range(n)
        ]

    return build

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from couplewelfare.errors import SchemaError
from couplewelfare.tax import (
    EitcSchedule,
    FilingInput,
    TaxSchedule,
    available_years,
    eitc_credit,
    load_year,
    marginal_rate,
    participation_rate,
    total_tax,
    total_tax_batch,
)


def hand_bracket_walk(taxable, brackets):
    """Independent reference: accumulate rate * overlap for each bracket."""
    tax = 0.0
    for i, (lo, rate) in enumerate(brackets):
        hi = brackets[i + 1][0] if i + 1 < len(brackets) else float("inf")
        if taxable > lo:
            tax += rate * (min(taxable, hi) - lo)
    return tax


class TestEitc:
    def test_zero_income(self, eitc):
        assert eitc_credit(0.0, eitc) == 0.0

    def test_kink1_value(self, eitc):
        assert eitc_credit(eitc.kink1, eitc) == pytest.approx(
            eitc.phase_in_rate * eitc.kink1
        )

    def test_exhaustion_point(self, eitc):
        assert eitc_credit(eitc.exhaustion, eitc) == pytest.approx(0.0, abs=1e-9)

    def test_plateau_flat(self, eitc):
        plateau = eitc.phase_in_rate * eitc.kink1
        for y in np.linspace(eitc.kink1, eitc.kink2, 7):
            assert eitc_credit(float(y), eitc) == pytest.approx(plateau)

    def test_clamped_past_exhaustion(self, eitc):
        assert eitc_credit(eitc.exhaustion + 50000.0, eitc) == 0.0

    @given(st.floats(min_value=0.0, max_value=5e5))
    @settings(max_examples=200, deadline=None)
    def test_continuity_everywhere(self, y):
        s = EitcSchedule(0.40, 10000.0, 15000.0, 0.21)
        eps = 1e-6
        left = eitc_credit(max(y - eps, 0.0), s)
        right = eitc_credit(y + eps, s)
        assert abs(left - right) <= 1e-9 + 1.0 * eps

    def test_invalid_kinks_rejected(self):
        with pytest.raises(ValueError):
            EitcSchedule(0.4, 15000.0, 10000.0, 0.21)


class TestTotalTax:
    def test_zero_earnings_no_eitc(self, flat_schedule):
        assert total_tax(FilingInput(0.0, 0.0), flat_schedule).total == 0.0

    def test_zero_earnings_refundable_eitc(self, flat_schedule, eitc):
        s = TaxSchedule(
            year=2000, brackets=((0.0, 0.2),), standard_deduction=0.0,
            personal_exemption=0.0, num_exemptions=0, fica_rate=0.0,
            state_flat_rate=0.0, eitc=eitc,
        )
        # zero earned income draws zero credit under the trapezoid
        assert total_tax(FilingInput(0.0, 0.0), s).total == 0.0

    def test_mid_bracket_matches_hand_walk(self, two_bracket_schedule):
        s = two_bracket_schedule
        f = FilingInput(50000.0, 20000.0)
        joint = 70000.0
        taxable = joint - s.deduction_total
        expected_federal = hand_bracket_walk(taxable, s.brackets)
        comp = total_tax(f, s)
        assert comp.federal == pytest.approx(expected_federal)
        assert comp.state == pytest.approx(0.04 * joint)
        assert comp.fica == pytest.approx(0.15 * joint)
        assert comp.total == pytest.approx(
            expected_federal + 0.19 * joint
        )

    def test_published_1988_parameters(self):
        s = load_year(1988)
        assert s.standard_deduction == 5000.0
        assert s.personal_exemption == 1950.0

    def test_batch_agrees_with_scalar(self, two_bracket_schedule):
        rng = np.random.default_rng(3)
        y_m = rng.uniform(0, 2e5, size=40)
        y_f = rng.uniform(0, 8e4, size=40)
        batch = total_tax_batch(y_m, y_f, two_bracket_schedule)
        for i in range(40):
            scalar = total_tax(
                FilingInput(float(y_m[i]), float(y_f[i])), two_bracket_schedule
            ).total
            assert batch[i] == pytest.approx(scalar, rel=1e-12)

    def test_federal_monotone_and_lipschitz(self, two_bracket_schedule):
        s = two_bracket_schedule
        top_rate = max(r for _, r in s.brackets)
        incomes = np.linspace(0, 3e5, 301)
        fed = np.array(
            [total_tax(FilingInput(float(y), 0.0), s).federal for y in incomes]
        )
        diffs = np.diff(fed)
        steps = np.diff(incomes)
        assert np.all(diffs >= -1e-9)
        assert np.all(diffs <= top_rate * steps + 1e-9)


class TestMarginalRate:
    def test_interior_bracket_composite(self, two_bracket_schedule):
        s = two_bracket_schedule
        # taxable income deep inside the 30% bracket
        f = FilingInput(60000.0, 30000.0)
        expected = (0.30 + s.state_flat_rate + s.fica_rate) / (1 + 0.5 * s.fica_rate)
        assert marginal_rate(f, s, "m") == pytest.approx(expected, abs=1e-6)
        assert marginal_rate(f, s, "f") == pytest.approx(expected, abs=1e-6)

    def test_all_rates_zero(self):
        s = TaxSchedule(
            year=2000, brackets=((0.0, 0.0),), standard_deduction=0.0,
            personal_exemption=0.0, num_exemptions=0, fica_rate=0.0,
            state_flat_rate=0.0,
        )
        assert marginal_rate(FilingInput(40000.0, 10000.0), s, "m") == 0.0

    def test_eitc_phase_out_adds_slope(self, eitc):
        s = TaxSchedule(
            year=2000, brackets=((0.0, 0.10),), standard_deduction=0.0,
            personal_exemption=0.0, num_exemptions=0, fica_rate=0.0,
            state_flat_rate=0.0, eitc=eitc,
        )
        f = FilingInput(16000.0, 0.0)  # inside the phase-out region
        assert marginal_rate(f, s, "m") == pytest.approx(
            0.10 + eitc.phase_out_rate, abs=1e-6
        )

    def test_spouse_relabeling_invariance(self, two_bracket_schedule):
        s = two_bracket_schedule
        a = marginal_rate(FilingInput(55000.0, 25000.0), s, "m")
        b = marginal_rate(FilingInput(25000.0, 55000.0), s, "f")
        assert a == pytest.approx(b, abs=1e-12)


class TestParticipationRate:
    def test_flat_tax_equals_rate(self):
        s = TaxSchedule(
            year=2000, brackets=((0.0, 0.25),), standard_deduction=0.0,
            personal_exemption=0.0, num_exemptions=0, fica_rate=0.10,
            state_flat_rate=0.0,
        )
        expected = (0.25 + 0.10) / 1.05
        got = participation_rate(FilingInput(40000.0, 0.0), 15000.0, s)
        assert got == pytest.approx(expected, abs=1e-12)

    def test_zero_potential_rejected(self, flat_schedule):
        with pytest.raises(ZeroDivisionError):
            participation_rate(FilingInput(40000.0, 0.0), 0.0, flat_schedule)

    def test_progressive_hand_walk(self, two_bracket_schedule):
        s = two_bracket_schedule
        y_m, pot = 40000.0, 20000.0
        with_wife = total_tax(FilingInput(y_m, pot), s).total
        without = total_tax(FilingInput(y_m, 0.0), s).total
        expected = (with_wife - without) / pot / (1 + 0.5 * s.fica_rate)
        assert participation_rate(FilingInput(y_m, 0.0), pot, s) == pytest.approx(
            expected
        )

    @given(st.floats(min_value=1000.0, max_value=3e5))
    @settings(max_examples=50, deadline=None)
    def test_linear_schedule_participation_equals_marginal(self, income):
        s = TaxSchedule(
            year=2000, brackets=((0.0, 0.3),), standard_deduction=0.0,
            personal_exemption=0.0, num_exemptions=0, fica_rate=0.12,
            state_flat_rate=0.05,
        )
        f = FilingInput(income, income / 2)
        assert participation_rate(f, income / 2, s) == pytest.approx(
            marginal_rate(f, s, "f"), abs=1e-9
        )


class TestScheduleFiles:
    def test_all_reform_years_shipped(self):
        years = available_years()
        for y in (1986, 1988, 1992, 1996, 2000, 2003, 2017, 2018):
            assert y in years

    def test_year_mismatch_detected(self, tmp_path):
        import json

        doc = {
            "year": 1999, "brackets": [[0, 0.1]], "standard_deduction": 0,
            "personal_exemption": 0, "num_exemptions": 0, "fica_rate": 0,
            "state_flat_rate": 0, "eitc": None,
        }
        (tmp_path / "2000.json").write_text(json.dumps(doc))
        with pytest.raises(SchemaError):
            load_year(2000, tmp_path)

    def test_missing_year_errors(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_year(1955, tmp_path)

    def test_invalid_brackets_rejected(self):
        with pytest.raises(ValueError):
            TaxSchedule(
                year=2000, brackets=((0.0, 0.1), (0.0, 0.2)),
                standard_deduction=0.0, personal_exemption=0.0,
                num_exemptions=0, fica_rate=0.0, state_flat_rate=0.0,
            )
        with pytest.raises(ValueError):
            TaxSchedule(
                year=2000, brackets=((100.0, 0.1),),
                standard_deduction=0.0, personal_exemption=0.0,
                num_exemptions=0, fica_rate=0.0, state_flat_rate=0.0,
            )

"""Acceptance suite: every release-gating criterion with its stated
tolerance and runtime budget.

Criteria covered, one test class each:

1. Linearization bias theta/sigma on randomized economies (closed form to
   1e-10, fully numeric oracle to 1e-3 relative, published anchors).
2. Closed-form allocations vs the numeric solver on the parameter grid;
   budget residual at the equilibrium scale.
3. Curvature-based deadweight-loss formulas: quadratic test tax against a
   finite-difference behavioral oracle (1e-4), log-linear instantiation
   against the closed forms (1e-6).
4. Main welfare formula against a discrete fiscal-externality simulation
   with constructed constant-elasticity responses: O(h^2) convergence,
   halving ratios in [3.5, 4.5].
5. Decomposition additivity, representative-couple equivalence,
   linearity in rate changes.
6. Tax engine: EITC kink continuity, composite interior marginal rates,
   published deduction/exemption parameters.
7. Selection-estimator Monte Carlo: 3-standard-error coverage >= 90%
   over 50 replications; selection-free process matches plain WLS.
8. End-to-end byte determinism across runs and thread settings.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest

import couplewelfare
from couplewelfare.cli import main as cli_main
from couplewelfare.heckman import design_matrix, heckman_impute, HeckmanSpec
from couplewelfare.hsv import (
    HsvEconomy,
    budget_residual,
    disutility,
    equilibrium_scale,
    general_mdwl,
    hsv_curvature_bundle,
    linearization_bias,
    mdwl,
    mdwl_numeric,
    numeric_curvature_bundle,
    optimal_incomes,
    solve_couple_numeric,
)
from couplewelfare.population import (
    CoupleRecord,
    ImputedCouple,
    PopulationConfig,
    generate_synthetic_with_truth,
)
from couplewelfare.tax import (
    FilingInput,
    TaxSchedule,
    eitc_credit,
    load_year,
    marginal_rate,
    total_tax,
)
from couplewelfare.welfare import (
    ElasticityProfile,
    RateBundle,
    income_shares,
    marginal_excess_burden,
    representative_couple,
)

DATA = Path(couplewelfare.__path__[0]) / "data"
BASELINE = ElasticityProfile(0.05, 0.1, -0.05, -0.1, 0.6)


def random_economy(rng, regime, n_draws=100):
    return HsvEconomy(
        sigma=float(rng.uniform(0.5, 5.0)),
        theta=float(rng.uniform(0.0, 0.4)),
        g=float(rng.uniform(0.0, 0.3)),
        regime=regime,
        draws=rng.lognormal(0.0, 0.5, size=(n_draws, 2)),
        weights=np.full(n_draws, 1.0 / n_draws),
    )


class TestCriterion1LinearizationBias:
    def test_closed_form_bias_on_randomized_economies(self):
        start = time.time()
        rng = np.random.default_rng(2024)
        for k in range(50):
            regime = "joint" if k % 2 == 0 else "separate"
            econ = random_economy(rng, regime)
            expected = econ.theta / econ.sigma
            lam = equilibrium_scale(econ)
            true_agg = mdwl(econ, scale=lam)
            lin_agg = mdwl(econ, linearized=True, scale=lam)
            assert abs(lin_agg / true_agg - 1.0 - expected) <= 1e-10
            for draw in econ.draws[:5]:
                t = mdwl(econ, draw, scale=lam)
                l = mdwl(econ, draw, linearized=True, scale=lam)
                assert abs(l / t - 1.0 - expected) <= 1e-10
        assert time.time() - start <= 30.0

    def test_numeric_oracle_reproduces_bias(self):
        rng = np.random.default_rng(7)
        for k in range(6):
            regime = "joint" if k % 2 == 0 else "separate"
            econ = HsvEconomy(
                sigma=float(rng.uniform(0.5, 5.0)),
                theta=float(rng.uniform(0.05, 0.4)),
                g=float(rng.uniform(0.0, 0.3)),
                regime=regime,
                draws=rng.lognormal(0.0, 0.5, size=(4, 2)),
                weights=np.full(4, 0.25),
            )
            lam = equilibrium_scale(econ)
            expected = econ.theta / econ.sigma
            for draw in econ.draws[:2]:
                t = mdwl_numeric(econ, draw, scale=lam)
                l = mdwl_numeric(econ, draw, linearized=True, scale=lam)
                assert abs((l / t - 1.0) / expected - 1.0) <= 1e-3

    def test_published_anchor_values(self):
        assert linearization_bias(0.181, 1.0) == pytest.approx(0.181, abs=1e-15)
        assert linearization_bias(0.181, 5.0) == pytest.approx(0.0362, abs=1e-15)
        # the anchors hold for actual economies, not just the ratio formula
        rng = np.random.default_rng(11)
        draws = rng.lognormal(0.0, 0.4, size=(50, 2))
        for sigma, anchor in ((1.0, 0.181), (5.0, 0.0362)):
            econ = HsvEconomy(sigma, 0.181, 0.1, "joint", draws, np.full(50, 0.02))
            t = mdwl(econ)
            l = mdwl(econ, linearized=True)
            assert l / t - 1.0 == pytest.approx(anchor, abs=1e-10)


class TestCriterion2ClosedForms:
    def test_grid_and_budget(self):
        start = time.time()
        rng = np.random.default_rng(5)
        draws = rng.lognormal(0.0, 0.5, size=(20, 2))
        weights = np.full(20, 0.05)
        for regime in ("joint", "separate"):
            for sigma in (1.0, 2.0, 5.0):
                for theta in (0.0, 0.181, 0.3):
                    econ = HsvEconomy(sigma, theta, 0.12, regime, draws, weights)
                    lam = equilibrium_scale(econ)
                    assert budget_residual(econ, lam) <= 1e-10
                    for draw in econ.draws:
                        closed = optimal_incomes(econ, draw, lam)
                        numeric = solve_couple_numeric(econ, draw, lam)
                        for c, n in zip(closed, numeric):
                            assert abs(n - c) / abs(c) <= 1e-8
        assert time.time() - start <= 5.0


class TestCriterion3GeneralFormulas:
    def test_quadratic_tax_vs_behavioral_oracle(self):
        sigma, kappa, theta = 2.0, 0.03, 0.12
        um, uf = 1.3, 0.8

        def tax(y_m, y_f, th):
            y = y_m + y_f
            return (0.25 + th) * y + 0.5 * kappa * y * y

        def solve(th):
            y = np.array([um, uf]) * 0.5
            for _ in range(200):
                net = 1.0 - (0.25 + th) - kappa * (y[0] + y[1])
                r = np.array(
                    [(y[0] / um) ** sigma - net, (y[1] / uf) ** sigma - net]
                )
                if np.max(np.abs(r)) < 1e-14:
                    break
                jac = np.array(
                    [
                        [sigma * y[0] ** (sigma - 1) / um**sigma + kappa, kappa],
                        [kappa, sigma * y[1] ** (sigma - 1) / uf**sigma + kappa],
                    ]
                )
                y = y - np.linalg.solve(jac, r)
            return y

        y0 = solve(theta)
        bundle = numeric_curvature_bundle(tax, um, uf, sigma, y0[0], y0[1], theta)

        h = 1e-4

        def surplus_loss(th):
            y = solve(th)
            return (
                disutility(y[0], um, sigma) + disutility(y[1], uf, sigma)
                - y[0] - y[1]
            )

        oracle = (surplus_loss(theta + h) - surplus_loss(theta - h)) / (2 * h)
        assert abs(general_mdwl(bundle) / oracle - 1.0) <= 1e-4

    @pytest.mark.parametrize("regime", ["joint", "separate"])
    def test_log_linear_instantiation_matches_closed_forms(self, regime):
        rng = np.random.default_rng(3)
        econ = HsvEconomy(
            2.0, 0.181, 0.1, regime,
            rng.lognormal(0.0, 0.5, size=(15, 2)), np.full(15, 1 / 15),
        )
        lam = equilibrium_scale(econ)
        for draw in econ.draws:
            bundle = hsv_curvature_bundle(econ, draw, lam)
            closed = mdwl(econ, draw, scale=lam)
            closed_lin = mdwl(econ, draw, linearized=True, scale=lam)
            assert abs(general_mdwl(bundle) / closed - 1.0) <= 1e-6
            assert abs(general_mdwl(bundle, True) / closed_lin - 1.0) <= 1e-6


class TestCriterion4DiscreteReformOracle:
    def test_halving_ratio_confirms_second_order_accuracy(self):
        start = time.time()
        rng = np.random.default_rng(123)
        n = 1000
        y_m = rng.uniform(20000, 100000, n)
        y_f0 = rng.uniform(8000, 50000, n)
        prob0 = rng.uniform(0.2, 0.7, n)
        weight = rng.uniform(0.5, 1.5, n)
        tau_m = rng.uniform(0.15, 0.45, n)
        tau_f = rng.uniform(0.15, 0.45, n)
        a0 = rng.uniform(0.15, 0.45, n)
        delta_m = rng.uniform(-0.05, 0.05, n)
        delta_f = rng.uniform(-0.05, 0.05, n)
        delta_a = rng.uniform(-0.05, 0.05, n)
        el = BASELINE

        pop = [
            ImputedCouple(
                CoupleRecord(
                    i, 40, 38, "hs_grad", "hs_grad", y_m[i] / 2000.0, 2000.0,
                    False, None, None, 2, 0, float(weight[i]),
                ),
                float(y_f0[i]),
                float(prob0[i]),
            )
            for i in range(n)
        ]
        agg = income_shares(pop).W

        def fiscal_externality(h):
            """Simulated revenue change minus the mechanical change, per
            unit of aggregate income, for a discrete reform of size h.

            Each couple faces locally linear taxes: the dual-earner
            liability carries marginal rates on each spouse plus a fixed
            participation charge pinning the participation rate at a0.
            Responses are iso-elastic in the relevant net-of-tax rates.
            """
            t_m, t_f, a = tau_m + h * delta_m, tau_f + h * delta_f, a0 + h * delta_a
            y_m2 = (
                y_m
                * ((1 - t_m) / (1 - tau_m)) ** el.eps_m
                * ((1 - t_f) / (1 - tau_f)) ** el.eps_mf
            )
            y_m1 = y_m * ((1 - t_m) / (1 - tau_m)) ** el.eps_m
            y_f = (
                y_f0
                * ((1 - t_f) / (1 - tau_f)) ** el.eps_f
                * ((1 - t_m) / (1 - tau_m)) ** el.eps_fm
            )
            prob = prob0 * ((1 - a) / (1 - a0)) ** el.eta

            def revenue(tm, tf, aa, ym2, ym1, yf, f):
                dual = tm * ym2 + tf * (yf - y_f0) + aa * y_f0
                single = tm * ym1
                return np.sum(weight * (f * dual + (1 - f) * single))

            base = revenue(tau_m, tau_f, a0, y_m, y_m, y_f0, prob0)
            actual = revenue(t_m, t_f, a, y_m2, y_m1, y_f, prob)
            mechanical = revenue(t_m, t_f, a, y_m, y_m, y_f0, prob0)
            return ((actual - base) - (mechanical - base)) / agg

        def formula_prediction(h):
            rates = [
                RateBundle(
                    tau_m[i], tau_f[i], a0[i],
                    h * delta_m[i], h * delta_f[i], h * delta_a[i],
                )
                for i in range(n)
            ]
            return marginal_excess_burden(pop, rates, el).total

        steps = [0.4, 0.2, 0.1, 0.05]
        discrepancy = [
            abs(fiscal_externality(h) - formula_prediction(h)) for h in steps
        ]
        for bigger, smaller in zip(discrepancy, discrepancy[1:]):
            ratio = bigger / smaller
            assert 3.5 <= ratio <= 4.5
        assert time.time() - start <= 60.0


class TestCriterion5Equivalences:
    def _pop_and_rates(self, n, seed):
        rng = np.random.default_rng(seed)
        pop = [
            ImputedCouple(
                CoupleRecord(
                    i, 40, 38, "hs_grad", "hs_grad",
                    float(rng.uniform(10, 60)), 2000.0, False, None, None,
                    2, 0, float(rng.uniform(0.5, 1.5)),
                ),
                float(rng.uniform(8000, 50000)),
                float(rng.uniform(0.1, 0.9)),
            )
            for i in range(n)
        ]
        rates = [
            RateBundle(
                *rng.uniform(0.1, 0.45, size=3),
                *rng.uniform(-0.05, 0.05, size=3),
            )
            for _ in range(n)
        ]
        return pop, rates

    def test_additivity_exact(self):
        pop, rates = self._pop_and_rates(200, 1)
        d = marginal_excess_burden(pop, rates, BASELINE)
        assert (
            d.total
            == d.intensive_m + d.intensive_f + d.extensive_f + d.cross_effects
        )

    def test_representative_couple_on_homogeneous_population(self):
        base = CoupleRecord(
            0, 40, 38, "hs_grad", "hs_grad", 30.0, 2000.0, False, None, None,
            2, 0, 1.0,
        )
        pop = [
            ImputedCouple(
                CoupleRecord(
                    i, 40, 38, "hs_grad", "hs_grad", 30.0, 2000.0, False,
                    None, None, 2, 0, 1.0,
                ),
                25000.0,
                1.0 - 1e-12,
            )
            for i in range(40)
        ]
        r = RateBundle(0.32, 0.32, 0.27, -0.03, -0.03, -0.02)
        d = marginal_excess_burden(pop, [r] * 40, BASELINE)
        s = income_shares(pop)
        rep = representative_couple(
            r, float(np.sum(s.s_m2 + s.s_m1)), float(np.sum(s.s_f)), BASELINE
        )
        assert abs(rep - d.total) <= 1e-12
        del base

    def test_linearity_exact(self):
        pop, rates = self._pop_and_rates(80, 2)
        doubled = [
            RateBundle(
                r.tau_m, r.tau_f, r.a, 2 * r.d_tau_m, 2 * r.d_tau_f, 2 * r.d_a
            )
            for r in rates
        ]
        d1 = marginal_excess_burden(pop, rates, BASELINE)
        d2 = marginal_excess_burden(pop, doubled, BASELINE)
        assert d2.intensive_m == 2 * d1.intensive_m
        assert d2.intensive_f == 2 * d1.intensive_f
        assert d2.extensive_f == 2 * d1.extensive_f
        assert d2.cross_effects == 2 * d1.cross_effects


class TestCriterion6TaxEngine:
    def test_eitc_kink_continuity(self):
        for year in (1988, 1996, 2017):
            s = load_year(year)
            e = s.eitc
            for kink in (e.kink1, e.kink2, e.exhaustion):
                eps = 1e-7
                left = eitc_credit(max(kink - eps, 0.0), e)
                right = eitc_credit(kink + eps, e)
                assert abs(left - right) <= 1e-9 + 0.5 * 2 * eps

    def test_interior_marginal_rate_composite(self):
        s = load_year(2017)
        # joint income far above EITC exhaustion, taxable inside the
        # 25% bracket: composite = (0.25 + state + fica) / (1 + fica/2)
        f = FilingInput(80000.0, 30000.0)
        expected = (0.25 + s.state_flat_rate + s.fica_rate) / (
            1.0 + 0.5 * s.fica_rate
        )
        assert abs(marginal_rate(f, s, "m") - expected) <= 1e-6
        assert abs(marginal_rate(f, s, "f") - expected) <= 1e-6

    def test_published_deduction_parameters_load_and_apply(self):
        expected = {1988: (5000.0, 1950.0), 2017: (12700.0, 4050.0),
                    2018: (24000.0, 0.0)}
        for year, (sd, pe) in expected.items():
            s = load_year(year)
            assert s.standard_deduction == sd
            assert s.personal_exemption == pe
            # the deduction must actually shift the no-tax threshold:
            # bracket tax only starts to accrue above the deduction total
            cutoff = s.deduction_total
            assert cutoff == sd + s.num_exemptions * pe
            taxable_part = total_tax(FilingInput(cutoff + 1000.0, 0.0), s).federal
            below_part = total_tax(FilingInput(cutoff, 0.0), s).federal
            assert taxable_part - below_part > 0.05 * 1000.0


class TestCriterion7SelectionRecovery:
    def test_monte_carlo_coverage(self):
        start = time.time()
        cfg = PopulationConfig(n=20000)
        probit_truth = np.array(
            [cfg.sel_const, cfg.sel_age, cfg.sel_age2, *cfg.sel_educ[1:],
             cfg.sel_children, cfg.sel_husband_earnings, cfg.sel_children_u6]
        )
        wage_truth = np.array(
            [cfg.wage_const, cfg.wage_age, cfg.wage_age2, *cfg.wage_educ[1:],
             cfg.wage_children]
        )
        mills_truth = cfg.selection_rho * cfg.sd_wage_error
        covered = 0
        reps = 50
        for rep in range(reps):
            pop, _ = generate_synthetic_with_truth(cfg, seed=1000 + rep)
            est, _ = heckman_impute(pop)
            z_probit = np.abs(est.probit_coefficients - probit_truth) / est.probit_se
            z_wage = np.abs(est.wage_coefficients - wage_truth) / est.wage_se
            z_mills = abs(est.mills_coefficient - mills_truth) / est.mills_se
            if z_probit.max() <= 3 and z_wage.max() <= 3 and z_mills <= 3:
                covered += 1
        assert covered / reps >= 0.90
        assert time.time() - start <= 120.0

    def test_selection_free_process_matches_plain_wls(self):
        from scipy.special import ndtr
        from scipy.stats import norm

        cfg = PopulationConfig(n=15000, selection_rho=0.0)
        pop, _ = generate_synthetic_with_truth(cfg, seed=77)
        spec = HeckmanSpec()
        est, _ = heckman_impute(pop, spec)
        workers = [r for r in pop if r.works_f]
        x, _ = design_matrix(spec.wage_covariates, workers)
        x_sel, _ = design_matrix(spec.selection_covariates, pop)
        mask = np.array([r.works_f for r in pop])
        index = (x_sel @ est.probit_coefficients)[mask]
        design = np.column_stack([x, norm.pdf(index) / ndtr(index)])
        y = np.log([r.earnings_f for r in workers])
        sw = np.sqrt([r.weight for r in workers])
        ref = np.linalg.lstsq(design * sw[:, None], y * sw, rcond=None)[0]
        assert np.max(np.abs(est.wage_coefficients - ref[:-1])) <= 1e-6
        assert abs(est.mills_coefficient - ref[-1]) <= 1e-6


class TestCriterion8Determinism:
    def test_pipeline_byte_identical_across_runs_and_threads(self, tmp_path):
        scenario = DATA / "scenarios" / "obra93.json"
        outputs = []
        for label, threads in (("run1", 1), ("run2", 1), ("run3", 3)):
            out = tmp_path / label
            assert cli_main([
                "--threads", str(threads),
                "gen-pop", "--out-dir", str(out), "--size", "400", "--seed", "9",
            ]) == 0
            assert cli_main([
                "--threads", str(threads),
                "welfare", "--out-dir", str(out),
                "--population", str(out / "population.csv"),
                "--scenario", str(scenario),
                "--elasticities", "baseline",
            ]) == 0
            assert cli_main([
                "--threads", str(threads),
                "hsv", "--out-dir", str(out),
                "--economy", str(self._economy_file(tmp_path)),
            ]) == 0
            outputs.append({
                p.name: p.read_bytes() for p in sorted(out.iterdir())
            })
        assert outputs[0] == outputs[1] == outputs[2]

    @staticmethod
    def _economy_file(tmp_path):
        path = tmp_path / "economy.json"
        if not path.exists():
            path.write_text(json.dumps({
                "sigma": 2.0, "theta": 0.181, "g": 0.1, "regime": "joint",
                "draws": [[1.0, 0.7, 0.4], [1.5, 1.1, 0.6]],
            }))
        return path

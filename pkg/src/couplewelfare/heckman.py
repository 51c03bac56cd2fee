"""Two-step selection imputation of wives' potential earnings.

Stage 1 is a weighted probit of wife participation on selection
covariates, fit by Newton iterations on the exact log-likelihood.
Stage 2 is weighted least squares of log wife earnings on the wage
covariates plus the inverse Mills ratio evaluated at the stage-1 index,
over working wives only.  Non-working wives get
exp(fitted log earnings + sigma^2/2); everyone gets a participation
probability Phi(x beta).

The selection covariates must include the exclusion restrictions
(husband earnings and children under six); the wage covariates must not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtr
from scipy.stats import norm

from .errors import Collinear, NoConvergence, NoVariation
from .population import EDUC_LEVELS, CoupleRecord, ImputedCouple

_PROB_CLIP = 1e-12
_MAX_ITER = 200
_GRAD_TOL = 1e-8
_LL_RTOL = 1e-10

#: covariates available to build design matrices from a CoupleRecord
WAGE_COVARIATES = ("age_f", "age_f_sq", "educ_f", "n_children")
SELECTION_EXTRAS = ("earnings_m_10k", "n_children_u6")


@dataclass(frozen=True)
class HeckmanSpec:
    """Covariate lists for the two stages.

    Defaults follow the common practice of age, age squared, education
    dummies, and children counts; the selection equation additionally
    carries the exclusion restrictions.
    """

    wage_covariates: tuple = WAGE_COVARIATES
    selection_covariates: tuple = WAGE_COVARIATES + SELECTION_EXTRAS
    variance_correction: bool = True

    def __post_init__(self):
        for req in SELECTION_EXTRAS:
            if req not in self.selection_covariates:
                raise ValueError(f"selection covariates must include {req!r}")
        for banned in SELECTION_EXTRAS:
            if banned in self.wage_covariates:
                raise ValueError(f"wage covariates must exclude {banned!r}")


@dataclass(frozen=True)
class HeckmanEstimate:
    probit_coefficients: np.ndarray
    probit_se: np.ndarray
    wage_coefficients: np.ndarray
    wage_se: np.ndarray
    mills_coefficient: float
    mills_se: float
    sigma_sq: float
    probit_names: tuple
    wage_names: tuple
    n_working: int
    n_total: int

    def __post_init__(self):
        if np.any(self.probit_se <= 0) or np.any(self.wage_se <= 0):
            raise ValueError("standard errors must be positive")


def _column(name: str, pop: Sequence[CoupleRecord]) -> list[np.ndarray] | np.ndarray:
    if name == "age_f":
        return np.array([r.age_f - 40.0 for r in pop])
    if name == "age_f_sq":
        return np.array([(r.age_f - 40.0) ** 2 for r in pop])
    if name == "n_children":
        return np.array([float(r.n_children) for r in pop])
    if name == "n_children_u6":
        return np.array([float(r.n_children_u6) for r in pop])
    if name == "earnings_m_10k":
        return np.array([r.earnings_m / 1e4 for r in pop])
    if name == "educ_f":
        # dummies for all levels above the base category
        return [
            np.array([1.0 if r.educ_f == lvl else 0.0 for r in pop])
            for lvl in EDUC_LEVELS[1:]
        ]
    raise ValueError(f"unknown covariate {name!r}")


def design_matrix(names: Sequence[str], pop: Sequence[CoupleRecord]):
    """Build (matrix, expanded column names) with a leading intercept."""
    cols = [np.ones(len(pop))]
    labels = ["const"]
    for name in names:
        col = _column(name, pop)
        if isinstance(col, list):
            cols.extend(col)
            labels.extend(f"educ_f[{lvl}]" for lvl in EDUC_LEVELS[1:])
        else:
            cols.append(col)
            labels.append(name)
    return np.column_stack(cols), tuple(labels)


def _check_rank(x: np.ndarray, what: str) -> None:
    if np.linalg.matrix_rank(x) < x.shape[1]:
        raise Collinear(f"{what} design matrix is rank-deficient")


def probit_mle(x: np.ndarray, y: np.ndarray, w: np.ndarray):
    """Weighted probit by Newton's method on the exact log-likelihood.

    Returns (beta, covariance).  Convergence when the relative
    log-likelihood change drops below 1e-10 or the gradient norm below
    1e-8, whichever comes first.
    """
    _check_rank(x, "selection")
    n, k = x.shape
    beta = np.zeros(k)
    ll_prev = -np.inf
    for _ in range(_MAX_ITER):
        xb = x @ beta
        phi = norm.pdf(xb)
        big_phi = np.clip(ndtr(xb), _PROB_CLIP, 1 - _PROB_CLIP)
        # generalized residual: phi/Phi for y=1, -phi/(1-Phi) for y=0
        gr = np.where(y > 0, phi / big_phi, -phi / (1.0 - big_phi))
        ll = float(np.sum(w * np.where(y > 0, np.log(big_phi), np.log1p(-big_phi))))
        grad = x.T @ (w * gr)
        # observed-information weights lambda_i(lambda_i + xb) are positive
        info_w = w * gr * (gr + xb)
        hess = x.T @ (x * info_w[:, None])
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError as exc:
            raise Collinear("probit information matrix is singular") from exc
        beta = beta + step
        if np.linalg.norm(grad) <= _GRAD_TOL:
            break
        if ll_prev > -np.inf and abs(ll - ll_prev) <= _LL_RTOL * (abs(ll_prev) + 1.0):
            break
        ll_prev = ll
    else:
        raise NoConvergence("probit did not converge within 200 iterations")
    xb = x @ beta
    phi = norm.pdf(xb)
    big_phi = np.clip(ndtr(xb), _PROB_CLIP, 1 - _PROB_CLIP)
    gr = np.where(y > 0, phi / big_phi, -phi / (1.0 - big_phi))
    info_w = w * gr * (gr + xb)
    cov = np.linalg.inv(x.T @ (x * info_w[:, None]))
    return beta, cov


def _wls(x: np.ndarray, y: np.ndarray, w: np.ndarray):
    sw = np.sqrt(w)
    coef, _, rank, _ = np.linalg.lstsq(x * sw[:, None], y * sw, rcond=None)
    if rank < x.shape[1]:
        raise Collinear("wage design matrix is rank-deficient")
    return coef


def heckman_impute(
    pop: Sequence[CoupleRecord], spec: HeckmanSpec = HeckmanSpec()
) -> tuple[HeckmanEstimate, list[ImputedCouple]]:
    pop = list(pop)
    works = np.array([r.works_f for r in pop])
    if works.all() or not works.any():
        raise NoVariation("population must contain both working and non-working wives")
    weights = np.array([r.weight for r in pop])

    # stage 1: weighted probit of participation
    x_sel, sel_names = design_matrix(spec.selection_covariates, pop)
    beta, cov_beta = probit_mle(x_sel, works.astype(float), weights)
    index = x_sel @ beta
    prob = np.clip(ndtr(index), _PROB_CLIP, 1 - _PROB_CLIP)

    # stage 2: WLS of log earnings on wage covariates + inverse Mills ratio
    mask = works
    sub = [r for r in pop if r.works_f]
    x_wage, wage_names = design_matrix(spec.wage_covariates, sub)
    mills = norm.pdf(index[mask]) / prob[mask]
    x2 = np.column_stack([x_wage, mills])
    _check_rank(x2, "wage")
    log_earn = np.log([r.earnings_f for r in sub])
    w2 = weights[mask]
    coef = _wls(x2, log_earn, w2)
    beta_wage, beta_mills = coef[:-1], float(coef[-1])

    # Heckman variance estimator: sigma^2 = e'e/n + mean(delta) * beta_mills^2
    resid = log_earn - x2 @ coef
    delta = mills * (mills + index[mask])
    wsum = w2.sum()
    sigma_sq = float(
        np.sum(w2 * resid**2) / wsum + np.average(delta, weights=w2) * beta_mills**2
    )
    sigma_sq = max(sigma_sq, 0.0)

    # conventional (homoskedastic WLS) standard errors for stage 2
    xtwx_inv = np.linalg.inv(x2.T @ (x2 * w2[:, None]))
    dof = max(len(sub) - x2.shape[1], 1)
    s2 = float(np.sum(w2 * resid**2) / wsum) * len(sub) / dof
    se2 = np.sqrt(np.diag(xtwx_inv) * s2 * wsum / len(sub))

    estimate = HeckmanEstimate(
        probit_coefficients=beta,
        probit_se=np.sqrt(np.diag(cov_beta)),
        wage_coefficients=beta_wage,
        wage_se=se2[:-1],
        mills_coefficient=beta_mills,
        mills_se=float(se2[-1]),
        sigma_sq=sigma_sq,
        probit_names=sel_names,
        wage_names=wage_names,
        n_working=int(mask.sum()),
        n_total=len(pop),
    )

    # impute: observed earnings for workers, fitted forecast otherwise
    x_all, _ = design_matrix(spec.wage_covariates, pop)
    fitted_log = x_all @ beta_wage
    if spec.variance_correction:
        fitted_log = fitted_log + sigma_sq / 2.0
    imputed = []
    for i, r in enumerate(pop):
        pot = r.earnings_f if r.works_f else math.exp(fitted_log[i])
        imputed.append(
            ImputedCouple(
                base=r,
                potential_earnings_f=float(pot),
                participation_prob=float(prob[i]),
            )
        )
    return estimate, imputed

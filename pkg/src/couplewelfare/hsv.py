"""Log-linear (constant-progressivity) tax analysis for couples.

The tax function is T(y) = y - scale * y^(1-theta), applied to joint
income under joint taxation or to each spouse's income under separate
taxation.  Preferences are quasilinear: consumption minus an iso-elastic
disutility of earning with inverse elasticity sigma and productivity
upsilon per spouse.  The module provides:

* the equilibrium scale parameter balancing the government budget,
* closed-form optimal incomes and a numeric solver as an oracle,
* the marginal deadweight loss of raising progressivity, under the true
  schedule and under its tangent linear schedule, in closed form and by
  numeric expenditure differencing,
* the proportional linearization bias theta/sigma,
* the general curvature-based deadweight-loss formulas for arbitrary
  smooth tax functions, with analytic and finite-difference curvature
  bundles.

Sign convention: deadweight-loss derivatives are reported as increases
in excess burden per unit increase in theta (positive numbers = welfare
losses from more progressivity).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ._kernels import ordered_sum
from .errors import NoConvergence, SchemaError, SingularSystem

_FOC_TOL = 1e-12
_MAX_ITER = 200


@dataclass(frozen=True)
class HsvEconomy:
    sigma: float
    theta: float
    g: float
    regime: str  # "joint" | "separate"
    draws: np.ndarray  # (n, 2) productivities (upsilon_m, upsilon_f)
    weights: np.ndarray  # (n,), sum to 1

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if not (0 <= self.theta < 1):
            raise ValueError("theta must lie in [0, 1)")
        if not (0 <= self.g < 1):
            raise ValueError("g must lie in [0, 1)")
        if self.regime not in ("joint", "separate"):
            raise ValueError("regime must be 'joint' or 'separate'")
        draws = np.atleast_2d(np.asarray(self.draws, dtype=float))
        weights = np.asarray(self.weights, dtype=float)
        if draws.shape[1] != 2 or draws.shape[0] != weights.shape[0]:
            raise ValueError("draws must be (n, 2) with matching weights")
        if np.any(draws <= 0):
            raise ValueError("productivities must be positive")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-8:
            raise ValueError("weights must be non-negative and sum to 1")
        object.__setattr__(self, "draws", draws)
        object.__setattr__(self, "weights", weights)


def economy_from_dict(doc: dict) -> HsvEconomy:
    try:
        rows = [(float(u), float(v), float(w)) for u, v, w in doc["draws"]]
        return HsvEconomy(
            sigma=float(doc["sigma"]),
            theta=float(doc["theta"]),
            g=float(doc["g"]),
            regime=str(doc["regime"]),
            draws=np.array([(u, v) for u, v, _ in rows]),
            weights=np.array([w for _, _, w in rows]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"invalid economy document: {exc}") from exc


def load_economy(path) -> HsvEconomy:
    with open(path, encoding="utf-8") as fh:
        return economy_from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def disutility(y: float, upsilon: float, sigma: float) -> float:
    if y == 0:
        return 0.0
    return upsilon / (sigma + 1.0) * (y / upsilon) ** (sigma + 1.0)


def marginal_disutility(y: float, upsilon: float, sigma: float) -> float:
    return (y / upsilon) ** sigma


def equilibrium_scale(econ: HsvEconomy) -> float:
    """Scale parameter that balances the government budget.

    Solves (1-g) * aggregate income = scale * sum of y^(1-theta) terms,
    using the closed-form optimal incomes; reduces to 1-g at theta=0.
    """
    s, t = econ.sigma, econ.theta
    p_num = s / (s + t)
    p_den = s * (1.0 - t) / (s + t)
    if econ.regime == "joint":
        u = econ.draws.sum(axis=1)
        num = float(np.sum(econ.weights * u**p_num))
        den = float(np.sum(econ.weights * u**p_den))
    else:
        num = float(np.sum(econ.weights * (econ.draws**p_num).sum(axis=1)))
        den = float(np.sum(econ.weights * (econ.draws**p_den).sum(axis=1)))
    return (1.0 - econ.g) ** ((s + t) / s) * (1.0 - t) ** (t / s) * (num / den) ** (
        (s + t) / s
    )


def optimal_incomes(
    econ: HsvEconomy, draw, scale: Optional[float] = None
) -> tuple[float, float, float]:
    """Closed-form optimal incomes and consumption for one couple."""
    if scale is None:
        scale = equilibrium_scale(econ)
    um, uf = float(draw[0]), float(draw[1])
    s, t = econ.sigma, econ.theta
    if econ.regime == "joint":
        u = um + uf
        common = (scale * (1.0 - t)) ** (1.0 / (s + t)) * u ** (-t / (s + t))
        y_m, y_f = common * um, common * uf
        c = scale * (y_m + y_f) ** (1.0 - t)
    else:
        k = (scale * (1.0 - t)) ** (1.0 / (s + t))
        y_m = k * um ** (s / (s + t))
        y_f = k * uf ** (s / (s + t))
        c = scale * (y_m ** (1.0 - t) + y_f ** (1.0 - t))
    return y_m, y_f, c


def aggregate_income(econ: HsvEconomy, scale: Optional[float] = None) -> float:
    if scale is None:
        scale = equilibrium_scale(econ)
    total = np.array(
        [sum(optimal_incomes(econ, d, scale)[:2]) for d in econ.draws]
    )
    return float(ordered_sum(econ.weights * total))


def budget_residual(econ: HsvEconomy, scale: Optional[float] = None) -> float:
    """|g * Y - revenue| / Y at the closed-form allocation."""
    if scale is None:
        scale = equilibrium_scale(econ)
    revenue = 0.0
    income = 0.0
    for d, w in zip(econ.draws, econ.weights):
        y_m, y_f, c = optimal_incomes(econ, d, scale)
        income += w * (y_m + y_f)
        revenue += w * (y_m + y_f - c)
    return abs(econ.g * income - revenue) / income


# ---------------------------------------------------------------------------
# numeric oracle for the allocation
# ---------------------------------------------------------------------------

def _foc_residual(y, um, uf, sigma, theta, scale, regime):
    y_m, y_f = y
    if regime == "joint":
        net = scale * (1.0 - theta) * (y_m + y_f) ** (-theta)
        return np.array(
            [(y_m / um) ** sigma - net, (y_f / uf) ** sigma - net]
        )
    return np.array(
        [
            (y_m / um) ** sigma - scale * (1.0 - theta) * y_m ** (-theta),
            (y_f / uf) ** sigma - scale * (1.0 - theta) * y_f ** (-theta),
        ]
    )


def _foc_jacobian(y, um, uf, sigma, theta, scale, regime):
    y_m, y_f = y
    d_m = sigma * y_m ** (sigma - 1.0) / um**sigma
    d_f = sigma * y_f ** (sigma - 1.0) / uf**sigma
    if regime == "joint":
        cross = theta * scale * (1.0 - theta) * (y_m + y_f) ** (-theta - 1.0)
        return np.array([[d_m + cross, cross], [cross, d_f + cross]])
    return np.array(
        [
            [d_m + theta * scale * (1.0 - theta) * y_m ** (-theta - 1.0), 0.0],
            [0.0, d_f + theta * scale * (1.0 - theta) * y_f ** (-theta - 1.0)],
        ]
    )


def _bisect_coordinate(
    i, y, um, uf, sigma, theta, scale, regime
) -> float:
    """1-d bisection on one spouse's first-order condition, which is
    strictly increasing in own income."""
    lo, hi = 1e-12, 1.0
    def res(v):
        z = y.copy()
        z[i] = v
        return _foc_residual(z, um, uf, sigma, theta, scale, regime)[i]
    while res(hi) < 0:
        hi *= 2.0
        if hi > 1e300:
            raise NoConvergence("bisection bracket blew up")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if res(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _solve_numeric(um, uf, sigma, theta, scale, regime) -> tuple[float, float]:
    if um == 0 and uf == 0:
        return 0.0, 0.0
    if um == 0 or uf == 0:
        # one spouse drops to zero income; the other faces a single-agent
        # problem identical under either regime
        u = max(um, uf)
        y = (scale * (1.0 - theta)) ** (1.0 / (sigma + theta)) * u ** (
            sigma / (sigma + theta)
        )
        return (0.0, y) if um == 0 else (y, 0.0)

    y = np.array([um, uf], dtype=float)
    for _ in range(_MAX_ITER):
        r = _foc_residual(y, um, uf, sigma, theta, scale, regime)
        if np.max(np.abs(r)) <= _FOC_TOL:
            return float(y[0]), float(y[1])
        jac = _foc_jacobian(y, um, uf, sigma, theta, scale, regime)
        step = np.linalg.solve(jac, r)
        # damp to keep incomes strictly positive and residual shrinking
        lam = 1.0
        for _ in range(60):
            trial = y - lam * step
            if np.all(trial > 0):
                r_trial = _foc_residual(trial, um, uf, sigma, theta, scale, regime)
                if np.max(np.abs(r_trial)) < np.max(np.abs(r)):
                    break
            lam *= 0.5
        else:
            # Newton stalled: fall back to alternating bisection
            for _ in range(100):
                y[0] = _bisect_coordinate(0, y, um, uf, sigma, theta, scale, regime)
                y[1] = _bisect_coordinate(1, y, um, uf, sigma, theta, scale, regime)
                r = _foc_residual(y, um, uf, sigma, theta, scale, regime)
                if np.max(np.abs(r)) <= _FOC_TOL:
                    return float(y[0]), float(y[1])
            raise NoConvergence("couple optimum solver stalled")
        y = y - lam * step
    r = _foc_residual(y, um, uf, sigma, theta, scale, regime)
    if np.max(np.abs(r)) <= _FOC_TOL:
        return float(y[0]), float(y[1])
    raise NoConvergence("couple optimum solver hit the iteration budget")


def solve_couple_numeric(
    econ: HsvEconomy, draw, scale: Optional[float] = None
) -> tuple[float, float, float]:
    """Numeric couple optimum by damped Newton on the first-order
    conditions (alternating bisection fallback); oracle for
    :func:`optimal_incomes`."""
    if scale is None:
        scale = equilibrium_scale(econ)
    um, uf = float(draw[0]), float(draw[1])
    y_m, y_f = _solve_numeric(um, uf, econ.sigma, econ.theta, scale, econ.regime)
    if econ.regime == "joint":
        c = scale * (y_m + y_f) ** (1.0 - econ.theta)
    else:
        c = scale * (y_m ** (1.0 - econ.theta) + y_f ** (1.0 - econ.theta))
    return y_m, y_f, c


# ---------------------------------------------------------------------------
# marginal deadweight loss
# ---------------------------------------------------------------------------

def _mdwl_unit(u_power: float, sigma: float, theta: float, scale: float, linearized: bool):
    """Closed-form dD/dtheta for one taxed unit with productivity index
    u_power (couple sum under joint taxation, own upsilon under separate)."""
    s, t = sigma, theta
    a = 1.0 - (scale * (1.0 - t)) ** (s / (s + t)) * u_power ** (-s * t / (s + t))
    b = (scale * (1.0 - t) ** (1.0 - s - t) * u_power**s) ** (1.0 / (s + t))
    c = 1.0 + (1.0 - t) * math.log(scale * (1.0 - t) * u_power**s) / (s + t)
    return a * b * c / (s if linearized else s + t)


def mdwl(
    econ: HsvEconomy,
    draw=None,
    linearized: bool = False,
    scale: Optional[float] = None,
) -> float:
    """Closed-form marginal deadweight loss of raising progressivity.

    Per couple when ``draw`` is given, otherwise aggregated over the
    economy's draws with their weights.
    """
    if scale is None:
        scale = equilibrium_scale(econ)
    if draw is None:
        vals = np.array(
            [mdwl(econ, d, linearized, scale) for d in econ.draws]
        )
        return float(ordered_sum(econ.weights * vals))
    um, uf = float(draw[0]), float(draw[1])
    if econ.regime == "joint":
        return _mdwl_unit(um + uf, econ.sigma, econ.theta, scale, linearized)
    return _mdwl_unit(um, econ.sigma, econ.theta, scale, linearized) + _mdwl_unit(
        uf, econ.sigma, econ.theta, scale, linearized
    )


def linearization_bias(theta: float, sigma: float) -> float:
    """Proportional overstatement of marginal deadweight loss under the
    tangent linear schedule: theta / sigma."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if not (0 <= theta < 1):
        raise ValueError("theta must lie in [0, 1)")
    return theta / sigma


def mdwl_numeric(
    econ: HsvEconomy,
    draw,
    linearized: bool = False,
    dtheta: float = 1e-4,
    scale: Optional[float] = None,
) -> float:
    """Fully numeric marginal deadweight loss by expenditure differencing.

    The couple's optimum is re-solved at theta +/- dtheta with the scale
    parameter held at its baseline equilibrium value; dD/dtheta is the
    central difference of (disutility minus output), which equals the
    behavioral fiscal externality by the envelope theorem.  For the
    linearized variant each spouse instead responds to the marginal
    retention rate of the perturbed schedule evaluated at the *baseline*
    optimum, i.e. to a linear schedule tangent at the unperturbed
    allocation.
    """
    if scale is None:
        scale = equilibrium_scale(econ)
    um, uf = float(draw[0]), float(draw[1])
    s = econ.sigma

    base = _solve_numeric(um, uf, s, econ.theta, scale, econ.regime)

    def surplus_loss(theta_p: float) -> float:
        if linearized:
            # net-of-tax slope of the perturbed schedule at the baseline optimum
            if econ.regime == "joint":
                net = scale * (1.0 - theta_p) * (base[0] + base[1]) ** (-theta_p)
                nets = (net, net)
            else:
                nets = tuple(
                    scale * (1.0 - theta_p) * b ** (-theta_p) for b in base
                )
            y = (um * nets[0] ** (1.0 / s), uf * nets[1] ** (1.0 / s))
        else:
            y = _solve_numeric(um, uf, s, theta_p, scale, econ.regime)
        return (
            disutility(y[0], um, s) + disutility(y[1], uf, s) - y[0] - y[1]
        )

    return (surplus_loss(econ.theta + dtheta) - surplus_loss(econ.theta - dtheta)) / (
        2.0 * dtheta
    )


# ---------------------------------------------------------------------------
# general curvature-based formulas
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CurvatureBundle:
    """First and second derivatives of the tax function and disutility
    curvature, evaluated at a couple's optimum."""

    t_m: float
    t_f: float
    psi_mm: float
    psi_ff: float
    psi_mf: float
    t_mm: float
    t_ff: float
    t_mf: float
    t_mtheta: float
    t_ftheta: float


def general_mdwl(bundle: CurvatureBundle, linearized: bool = False) -> float:
    """Per-couple marginal deadweight loss for an arbitrary smooth tax.

    The linearized variant drops the tax curvature terms from the
    behavioral-response system (the agent perceives a linear schedule)
    while keeping the rate responses to theta.
    """
    b = bundle
    if linearized:
        mm, ff, mf = b.psi_mm, b.psi_ff, b.psi_mf
    else:
        mm, ff, mf = b.psi_mm + b.t_mm, b.psi_ff + b.t_ff, b.psi_mf + b.t_mf
    den = mm * ff - mf * mf
    if den == 0 or not np.isfinite(den):
        raise SingularSystem("second-order condition fails: singular curvature system")
    num = b.t_m * (mf * b.t_ftheta - ff * b.t_mtheta) + b.t_f * (
        mf * b.t_mtheta - mm * b.t_ftheta
    )
    return -num / den


def hsv_curvature_bundle(
    econ: HsvEconomy, draw, scale: Optional[float] = None
) -> CurvatureBundle:
    """Exact curvature bundle for the log-linear tax at a couple's
    closed-form optimum."""
    if scale is None:
        scale = equilibrium_scale(econ)
    y_m, y_f, _ = optimal_incomes(econ, draw, scale)
    um, uf = float(draw[0]), float(draw[1])
    s, t = econ.sigma, econ.theta
    psi_mm = s * y_m ** (s - 1.0) / um**s
    psi_ff = s * y_f ** (s - 1.0) / uf**s
    if econ.regime == "joint":
        y = y_m + y_f
        t_prime = 1.0 - scale * (1.0 - t) * y ** (-t)
        t_second = scale * (1.0 - t) * t * y ** (-t - 1.0)
        t_theta = scale * y ** (-t) * (1.0 + (1.0 - t) * math.log(y))
        return CurvatureBundle(
            t_m=t_prime, t_f=t_prime,
            psi_mm=psi_mm, psi_ff=psi_ff, psi_mf=0.0,
            t_mm=t_second, t_ff=t_second, t_mf=t_second,
            t_mtheta=t_theta, t_ftheta=t_theta,
        )
    return CurvatureBundle(
        t_m=1.0 - scale * (1.0 - t) * y_m ** (-t),
        t_f=1.0 - scale * (1.0 - t) * y_f ** (-t),
        psi_mm=psi_mm, psi_ff=psi_ff, psi_mf=0.0,
        t_mm=scale * (1.0 - t) * t * y_m ** (-t - 1.0),
        t_ff=scale * (1.0 - t) * t * y_f ** (-t - 1.0),
        t_mf=0.0,
        t_mtheta=scale * y_m ** (-t) * (1.0 + (1.0 - t) * math.log(y_m)),
        t_ftheta=scale * y_f ** (-t) * (1.0 + (1.0 - t) * math.log(y_f)),
    )


def numeric_curvature_bundle(
    tax: Callable[[float, float, float], float],
    upsilon_m: float,
    upsilon_f: float,
    sigma: float,
    y_m: float,
    y_f: float,
    theta: float,
    rel_step: float = 1e-5,
) -> CurvatureBundle:
    """Curvature bundle for an arbitrary smooth ``tax(y_m, y_f, theta)``
    by central finite differences at a supplied optimum."""
    h_m = rel_step * max(abs(y_m), 1.0)
    h_f = rel_step * max(abs(y_f), 1.0)
    h_t = rel_step * max(abs(theta), 1.0)

    def t(a, b, th=theta):
        return tax(a, b, th)

    t_m = (t(y_m + h_m, y_f) - t(y_m - h_m, y_f)) / (2 * h_m)
    t_f = (t(y_m, y_f + h_f) - t(y_m, y_f - h_f)) / (2 * h_f)
    t_mm = (t(y_m + h_m, y_f) - 2 * t(y_m, y_f) + t(y_m - h_m, y_f)) / h_m**2
    t_ff = (t(y_m, y_f + h_f) - 2 * t(y_m, y_f) + t(y_m, y_f - h_f)) / h_f**2
    t_mf = (
        t(y_m + h_m, y_f + h_f)
        - t(y_m + h_m, y_f - h_f)
        - t(y_m - h_m, y_f + h_f)
        + t(y_m - h_m, y_f - h_f)
    ) / (4 * h_m * h_f)
    t_mtheta = (
        t(y_m + h_m, y_f, theta + h_t)
        - t(y_m + h_m, y_f, theta - h_t)
        - t(y_m - h_m, y_f, theta + h_t)
        + t(y_m - h_m, y_f, theta - h_t)
    ) / (4 * h_m * h_t)
    t_ftheta = (
        t(y_m, y_f + h_f, theta + h_t)
        - t(y_m, y_f + h_f, theta - h_t)
        - t(y_m, y_f - h_f, theta + h_t)
        + t(y_m, y_f - h_f, theta - h_t)
    ) / (4 * h_f * h_t)
    return CurvatureBundle(
        t_m=t_m, t_f=t_f,
        psi_mm=sigma * y_m ** (sigma - 1.0) / upsilon_m**sigma,
        psi_ff=sigma * y_f ** (sigma - 1.0) / upsilon_f**sigma,
        psi_mf=0.0,
        t_mm=t_mm, t_ff=t_ff, t_mf=t_mf,
        t_mtheta=t_mtheta, t_ftheta=t_ftheta,
    )

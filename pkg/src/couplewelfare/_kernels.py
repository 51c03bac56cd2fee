"""Hot numeric kernels with numba and pure-numpy implementations.

The numba versions are straightforward per-element loops; the numpy
versions use searchsorted / piecewise arithmetic.  Both produce the same
values up to floating-point associativity (the ordered reductions agree to
~1e-15 relative).
"""

import math

import numpy as np

from ._backend import USE_NUMBA, njit


# ---------------------------------------------------------------------------
# bracket-walk federal tax
# ---------------------------------------------------------------------------

@njit
def _bracket_tax_nb(taxable, lowers, rates):
    n = taxable.shape[0]
    nb = lowers.shape[0]
    out = np.empty(n)
    for i in range(n):
        y = taxable[i]
        tax = 0.0
        for b in range(nb):
            lo = lowers[b]
            hi = lowers[b + 1] if b + 1 < nb else np.inf
            if y <= lo:
                break
            tax += rates[b] * (min(y, hi) - lo)
        out[i] = tax
    return out


def _bracket_tax_np(taxable, lowers, rates):
    # cumulative tax owed at each bracket lower bound
    widths = np.diff(lowers)
    base = np.concatenate(([0.0], np.cumsum(rates[:-1] * widths)))
    idx = np.searchsorted(lowers, taxable, side="right") - 1
    idx = np.clip(idx, 0, len(lowers) - 1)
    return base[idx] + rates[idx] * (taxable - lowers[idx])


# ---------------------------------------------------------------------------
# EITC trapezoid
# ---------------------------------------------------------------------------

@njit
def _eitc_nb(earned, phase_in, kink1, kink2, phase_out):
    n = earned.shape[0]
    out = np.empty(n)
    plateau = phase_in * kink1
    for i in range(n):
        y = earned[i]
        if y <= kink1:
            out[i] = phase_in * y
        elif y <= kink2:
            out[i] = plateau
        else:
            c = plateau - phase_out * (y - kink2)
            out[i] = c if c > 0.0 else 0.0
    return out


def _eitc_np(earned, phase_in, kink1, kink2, phase_out):
    plateau = phase_in * kink1
    credit = np.where(
        earned <= kink1,
        phase_in * earned,
        plateau - phase_out * np.maximum(earned - kink2, 0.0),
    )
    return np.maximum(credit, 0.0)


# ---------------------------------------------------------------------------
# ordered compensated reduction
# ---------------------------------------------------------------------------

@njit
def _kahan_sum_nb(x):
    s = 0.0
    c = 0.0
    for i in range(x.shape[0]):
        y = x[i] - c
        t = s + y
        c = (t - s) - y
        s = t
    return s


def _fsum_np(x):
    return math.fsum(x)


if USE_NUMBA:
    bracket_tax = _bracket_tax_nb
    eitc_credit_array = _eitc_nb
    ordered_sum = _kahan_sum_nb
else:
    bracket_tax = _bracket_tax_np
    eitc_credit_array = _eitc_np
    ordered_sum = _fsum_np

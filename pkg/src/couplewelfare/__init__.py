"""Welfare analysis of labor-income tax reforms on married couples.

Subpackages by concern:

* :mod:`couplewelfare.tax` — piecewise-linear schedules and effective rates
* :mod:`couplewelfare.population` — couple records, synthetic data, CSV I/O
* :mod:`couplewelfare.heckman` — two-step selection imputation
* :mod:`couplewelfare.welfare` — marginal excess burden and decomposition
* :mod:`couplewelfare.reform` — reform scenarios and counterfactuals
* :mod:`couplewelfare.hsv` — log-linear tax closed forms and oracles
* :mod:`couplewelfare.cli` — batch runner
"""

from ._backend import BACKEND
from .errors import (
    Collinear,
    CoupleWelfareError,
    DenominatorUnderflow,
    NoConvergence,
    NoVariation,
    SchemaError,
    SingularSystem,
)

__version__ = "1.0.0"

__all__ = [
    "BACKEND",
    "CoupleWelfareError",
    "SchemaError",
    "NoVariation",
    "Collinear",
    "NoConvergence",
    "DenominatorUnderflow",
    "SingularSystem",
    "__version__",
]

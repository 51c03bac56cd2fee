"""Exception types shared across the package."""


class CoupleWelfareError(Exception):
    """Base class for all package-specific errors."""


class SchemaError(CoupleWelfareError):
    """A data file violates its declared schema."""


class NoVariation(CoupleWelfareError):
    """Selection estimation needs both working and non-working wives."""


class Collinear(CoupleWelfareError):
    """Design matrix is rank-deficient."""


class NoConvergence(CoupleWelfareError):
    """Iterative solver failed to converge within its iteration budget."""


class DenominatorUnderflow(CoupleWelfareError):
    """A net-of-tax rate (1 - tau or 1 - a) fell below the safe floor."""


class SingularSystem(CoupleWelfareError):
    """Second-order condition fails: curvature system is singular."""

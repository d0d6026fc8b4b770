"""Exception hierarchy.

Every failure raised by the package derives from :class:`CylflowError` so a
driver can catch one type; the subclasses carry the failure class used for
exit codes in :mod:`cylflow.cli`.
"""


class CylflowError(Exception):
    pass


class InputError(CylflowError, ValueError):
    """Malformed numeric input (non-finite entries, wrong shapes)."""


class ConfigurationError(CylflowError, ValueError):
    pass


class ResolutionError(ConfigurationError):
    """A grid is too coarse for the requested derivative or quadrature."""


class ConditioningError(CylflowError, ArithmeticError):
    def __init__(self, message, smallest_eigenvalue):
        super().__init__(f"{message} (smallest eigenvalue {smallest_eigenvalue:.3e})")
        self.smallest_eigenvalue = smallest_eigenvalue


class GeometryError(CylflowError):
    """The graph map stopped being injective (tube radius exceeded)."""


class DegenerateCurvatureError(CylflowError):
    def __init__(self, message, points):
        self.points = points
        preview = ", ".join(str(tuple(int(i) for i in p)) for p in points[:8])
        more = "" if len(points) <= 8 else f" (+{len(points) - 8} more)"
        super().__init__(f"{message}: {preview}{more}")


class ContractError(CylflowError, ValueError):
    pass


class StiffnessError(CylflowError):
    pass


class FitRejected(CylflowError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3g})")
        self.residual = residual


class DomainError(CylflowError, ValueError):
    """An argument lies outside the hypotheses of the formula being evaluated."""

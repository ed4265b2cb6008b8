"""Exception hierarchy shared by all modules."""


class CauchyMannError(Exception):
    """Base class for all errors raised by this package."""


class InvalidDomain(CauchyMannError, ValueError):
    pass


class TooCoarse(CauchyMannError, ValueError):
    pass


class UnknownSegment(CauchyMannError, KeyError):
    pass


class SingularSystem(CauchyMannError):
    """The discrete mixed problem has no Dirichlet part and is not uniquely solvable."""


class SolverDivergence(CauchyMannError):
    pass


class GridMismatch(CauchyMannError, ValueError):
    pass


class ModeMismatch(CauchyMannError, ValueError):
    pass


class NoConvergence(CauchyMannError):
    """Raised by strict runs that hit ``max_iter`` before the stopping rule fired."""

    def __init__(self, max_iter, record=None):
        super().__init__(f"stopping rule not satisfied within {max_iter} iterations")
        self.max_iter = max_iter
        self.record = record


class BoundViolated(CauchyMannError):
    def __init__(self, message, witness):
        super().__init__(f"{message} (witness: {witness})")
        self.witness = witness


class InequalityViolated(CauchyMannError):
    def __init__(self, j):
        super().__init__(f"mode inequality violated at j={j}")
        self.j = j


class ConfigError(CauchyMannError, ValueError):
    def __init__(self, message, line=None, lineno=None):
        where = f" (line {lineno}: {line!r})" if lineno is not None else ""
        super().__init__(message + where)
        self.line = line
        self.lineno = lineno

"""Exception hierarchy for the uinfc package."""


class UinfcError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(UinfcError, ValueError):
    """An argument is outside its admissible range."""


class EvaluationError(UinfcError, ArithmeticError):
    """A function evaluation returned a non-finite value."""


class ConfigurationError(UinfcError, ValueError):
    """A configuration is inconsistent or cannot be realized."""


class SolverError(UinfcError, RuntimeError):
    """The inner optimizer failed to produce a usable point."""


class RegularizationError(UinfcError, RuntimeError):
    """No point away from the nonsmooth set could be found."""


class ResourceError(UinfcError, MemoryError):
    """A brute-force oracle would exceed its evaluation budget."""


class InfeasibleError(UinfcError, ValueError):
    """The bound inequalities admit no positive solution.

    Parameters
    ----------
    constraint : str
        Name of the binding inequality.
    partial : dict, optional
        Constants computed before the failure, for diagnostics.
    """

    def __init__(self, constraint, message="", partial=None):
        self.constraint = constraint
        self.partial = dict(partial or {})
        super().__init__(f"infeasible: {constraint}" + (f" ({message})" if message else ""))


class DivergenceError(UinfcError, RuntimeError):
    """A closed-loop run left the divergence guard; ``log`` holds the partial trajectory."""

    def __init__(self, message, log=None):
        super().__init__(message)
        self.log = log

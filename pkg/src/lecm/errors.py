"""Exception hierarchy shared by the engine, entanglement and optimizer layers."""


class LecmError(Exception):
    """Base class for all errors raised by this package."""


class InvalidSectorError(LecmError, ValueError):
    pass


class DimensionError(LecmError, ValueError):
    pass


class SizeError(LecmError, ValueError):
    pass


class ConvergenceError(LecmError, RuntimeError):
    """Eigensolver gave up; ``best`` holds the last estimate (a GroundStateResult)."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class InvalidDensityError(LecmError, ValueError):
    pass


class BasisError(LecmError, ValueError):
    pass


class CoverageError(LecmError, ValueError):
    pass


class SymmetryError(LecmError, ValueError):
    pass


class NotSymmetryAdaptedError(SymmetryError):
    pass


class IllDefinedLimitError(LecmError, ArithmeticError):
    """The kernel block of a perturbation does not vanish with the density matrix."""


class InadmissibleETError(LecmError, ValueError):
    pass


class StallError(LecmError, RuntimeError):
    pass

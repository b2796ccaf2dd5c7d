"""Exception hierarchy shared by every module of the package."""


class MKDError(Exception):
    """Base class for all errors raised by :mod:`mkd`."""


class DataIOError(MKDError, OSError):
    """A data or config file could not be read or written."""


class ParseError(MKDError, ValueError):
    """A data cell is not a finite decimal number.

    ``row`` and ``col`` are 1-based positions in the source file.
    """

    def __init__(self, row, col, message=None, source=None):
        self.row = row
        self.col = col
        self.source = source
        where = f"{source}: " if source else ""
        super().__init__(message or f"{where}cannot parse cell at row {row}, column {col}")


class ShapeError(MKDError, ValueError):
    """Array shapes or sample counts are incompatible with the operation."""


class EmptyError(ShapeError):
    """An input contains no data rows."""


class DimensionError(ShapeError):
    """Point dimensions do not match the kernel, model or dataset."""


class DomainError(MKDError, ValueError):
    """An argument lies outside the admissible domain (e.g. parameter box)."""


class ScoreError(MKDError, ValueError):
    """A model could not evaluate its score function."""


class ModelKindError(MKDError, TypeError):
    """The operation needs a model/kernel pairing of a different kind."""


class SingularError(MKDError, ArithmeticError):
    """A matrix that must be positive definite or invertible is not.

    ``min_eigenvalue`` holds the offending eigenvalue when known.
    """

    def __init__(self, message, min_eigenvalue=None):
        self.min_eigenvalue = min_eigenvalue
        super().__init__(message)


class DegenerateError(MKDError, ArithmeticError):
    """A quantity is undefined because a discrepancy vanishes."""


class NonFiniteError(MKDError, ArithmeticError):
    """An objective returned NaN or infinity."""


class MaxIterError(MKDError, RuntimeError):
    """The iteration budget was exhausted before convergence.

    The best point found so far is available as ``result``.
    """

    def __init__(self, message, result=None):
        self.result = result
        super().__init__(message)


class ConfigError(MKDError, ValueError):
    """One or more configuration values are invalid.

    ``problems`` lists every individual complaint so they can be reported
    together.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))

"""Exception hierarchy.

Two broad families matter to callers: ``UsageError`` (bad input, bad
configuration; CLI exit code 1) and ``NumericalError`` (the data defeated the
numerics; CLI exit code 2).
"""


class RiverGlsError(Exception):
    """Base class for all package errors."""


class UsageError(RiverGlsError):
    """Caller-side problem: bad file, bad formula, bad parameter."""


class NumericalError(RiverGlsError):
    """Numerical failure: singular design, non-convergence, bad factorization."""


class SchemaError(UsageError):
    """CSV header missing or a required column absent."""


class DuplicateTimestampError(UsageError):
    """Two rows share the same (site, timestamp) key."""


class InputError(UsageError):
    """Empty or otherwise unusable input."""


class DomainError(UsageError):
    """A value outside its mathematical domain (phi, turbidity, sigma, ...)."""


class OrderingError(UsageError):
    """Times within a correlation group are not strictly increasing."""


class FormulaError(UsageError):
    """Formula cannot be parsed or refers to variables the data lacks."""


class EmptyDesignError(UsageError):
    """No complete rows remain after listwise deletion."""


class PartitionError(UsageError):
    """A site has too few rows for the requested number of blocks."""


class ConsistencyError(UsageError):
    """A model artifact does not match the design it is being applied to."""


class SingularDesignError(NumericalError):
    """Whitened design is rank deficient.

    Carries the labels of the offending columns in ``columns``.
    """

    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"design is rank deficient in columns: {', '.join(self.columns)}")


class ConvergenceError(NumericalError):
    """Optimizer hit its iteration cap; ``best_phi``/``best_objective`` hold the last iterate."""

    def __init__(self, message, best_phi=None, best_objective=None):
        self.best_phi = best_phi
        self.best_objective = best_objective
        super().__init__(message)


class NoIntervalError(NumericalError):
    """No confidence interval can be formed (estimate at a bound or flat profile)."""


class FactorizationError(NumericalError):
    """Dense covariance factorization failed (not positive definite)."""

"""Exception types raised across the package."""


class DegenerateDataError(ValueError):
    """Input data cannot support the requested computation.

    Examples: all pairwise distances zero (bandwidth would be 0), a
    constant feature column, a zero-trace covariance, single-class labels.
    """


class CsvParseError(ValueError):
    """A CSV cell or column violates the expected format; message carries
    the row/column location."""


class StratificationError(ValueError):
    """A train/test split would leave a protected group empty."""


class ConfigurationError(ValueError):
    """A configuration object violates its invariants."""


class RetractionError(RuntimeError):
    """The retraction target matrix is numerically rank deficient; the
    caller should shrink the step."""


class SolverStallError(RuntimeError):
    """Backtracking line search failed at a non-stationary point."""

    def __init__(self, message, *, inner_iter, grad_norm, step, penalty_value):
        super().__init__(message)
        self.inner_iter = inner_iter
        self.grad_norm = grad_norm
        self.step = step
        self.penalty_value = penalty_value

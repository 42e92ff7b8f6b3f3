"""Domain exceptions."""


class FuzzyForestError(Exception):
    """Base class for every error raised by fuzzyforest."""


class TableFormatError(FuzzyForestError, ValueError):
    """Raised when an input table cannot be parsed."""

    def __init__(self, path: str, reason: str) -> None:
        self.path = path
        super().__init__(f"Cannot read table {path}: {reason}")


class InvalidConfigError(FuzzyForestError, ValueError):
    """Raised when a configuration value violates its invariant."""


class MissingValueError(FuzzyForestError, ValueError):
    """Raised when an operation needs a complete table and finds a MISSING cell."""

    def __init__(self, column: str, row: int) -> None:
        self.column = column
        self.row = row
        super().__init__(
            f"Column '{column}' has a missing cell at row {row}; run impute_pmm first"
        )


class ImputationError(FuzzyForestError, ValueError):
    """Raised when PMM cannot find donors for a column."""


class EmptyFeatureSetError(FuzzyForestError, ValueError):
    """Raised when a forest is requested over no features."""


class MissingFeatureValueError(FuzzyForestError, ValueError):
    """Raised when a row lacks a value for a feature the forest uses."""


class NoOutOfBagError(FuzzyForestError):
    """Raised when no row is out-of-bag for any tree."""


class InvalidDissimilarityError(FuzzyForestError, ValueError):
    """Raised when a dissimilarity matrix is asymmetric or negative."""


class PartitionMismatchError(FuzzyForestError, ValueError):
    """Raised when a module partition does not cover the matrix columns."""


class NoSurvivorsError(FuzzyForestError):
    """Raised when screening leaves nothing to select from."""


class SingleClassError(FuzzyForestError, ValueError):
    """Raised when a scorer needs both classes and only one is present."""


class ConvergenceError(FuzzyForestError):
    """Raised when an iterative solver exhausts its iteration budget."""

    def __init__(self, iterations: int, grad_norm: float, tolerance: float) -> None:
        self.iterations = iterations
        self.grad_norm = grad_norm
        self.tolerance = tolerance
        super().__init__(
            f"Solver did not converge in {iterations} iterations "
            f"(gradient norm {grad_norm:.3e} > tolerance {tolerance:.1e}); "
            "raise max_iter or the ridge penalty"
        )

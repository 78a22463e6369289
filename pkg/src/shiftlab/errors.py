"""Exception types shared across the package.

The CLI maps these onto exit codes (see ``shiftlab.cli``), so new error
conditions should subclass one of the categories below rather than raising
bare ValueError.
"""


class ShiftLabError(Exception):
    """Base class for all package errors."""


class ConfigError(ShiftLabError):
    """Malformed or inconsistent experiment configuration."""


class InvalidSpecError(ShiftLabError):
    """A ShiftSpec invariant is violated."""


class DegenerateDimensionError(InvalidSpecError):
    """Core feature dimension is zero."""


class InfeasibleMarginalsError(ShiftLabError):
    """No non-negative integer contingency table satisfies the marginals."""


class DivergenceError(ShiftLabError):
    """Training encountered a non-finite loss."""

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")


class DimensionMismatchError(ShiftLabError):
    """Model weight length does not match the dataset feature dimension."""


class EmptyGroupError(ShiftLabError):
    """A subpopulation received no samples where some were required."""


class DegeneratePopulationError(ShiftLabError):
    """P(Z=1) is 0 or 1, so conditional quantities are undefined."""


class AnalysisError(ShiftLabError):
    """Curve fitting failed (too few points, degenerate design, bad input)."""


class MissingInputsError(ShiftLabError):
    """A pipeline stage requires artifacts that are not on disk."""

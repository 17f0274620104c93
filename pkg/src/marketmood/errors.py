"""Exception types raised across the pipeline.

Every error carries enough context in its message to be actionable from a
CLI failure line (offending file, column, feature, ...).
"""


class MarketMoodError(Exception):
    """Base class for all pipeline errors."""


# --- ingestion -----------------------------------------------------------


class FileUnreadable(MarketMoodError):
    def __init__(self, path, reason=""):
        super().__init__(f"cannot read {path}: {reason}" if reason else f"cannot read {path}")
        self.path = str(path)


class MissingColumn(MarketMoodError):
    def __init__(self, name, path=None):
        where = f" in {path}" if path else ""
        super().__init__(f"required column {name!r} not found{where}")
        self.name = name


class EmptyDataset(MarketMoodError):
    """Zero valid rows survived loading/filtering."""


class NoOverlap(MarketMoodError):
    """News and price date ranges are disjoint; nothing can be joined."""


# --- sentiment -----------------------------------------------------------


class MissingScore(MarketMoodError):
    def __init__(self, title):
        super().__init__(f"no sentiment score for headline: {title!r}")
        self.title = title


class NonPositiveOpen(MarketMoodError):
    """Open price must be strictly positive to define a return."""


class NonPositiveThreshold(MarketMoodError):
    """The sentiment-index threshold s must be strictly positive."""


# --- features ------------------------------------------------------------


class DegenerateFeature(MarketMoodError):
    def __init__(self, name):
        super().__init__(f"feature {name!r} is constant on the training rows; cannot scale")
        self.name = name


class TooFewRows(MarketMoodError):
    """Not enough rows for the requested split/fit."""


class SeriesTooShort(MarketMoodError):
    """Series shorter than the operation requires."""


# --- lstm engine ---------------------------------------------------------


class DimensionMismatch(MarketMoodError):
    """Input block shape does not match the model architecture."""


class StaleCache(MarketMoodError):
    """Backward called with a cache from a different model state."""


class LengthMismatch(MarketMoodError):
    """Paired sequences have different lengths."""


class EmptyBatch(MarketMoodError):
    """Loss/metric over zero elements is undefined."""


class NonFiniteGradient(MarketMoodError):
    """A gradient block contains NaN or infinity."""


class EmptyTrainSplit(MarketMoodError):
    """Training requires at least one train-tagged window."""


# --- arima ---------------------------------------------------------------


class NonConvergence(MarketMoodError):
    def __init__(self, iterations, rel_change):
        super().__init__(
            f"optimizer hit the {iterations}-iteration cap with relative "
            f"objective change {rel_change:.3e} still above tolerance"
        )
        self.iterations = iterations
        self.rel_change = rel_change


class MissingAnchors(MarketMoodError):
    """Undifferencing needs the last d observed levels."""


class WindowTooLarge(MarketMoodError):
    """Rolling window exceeds the series length."""


# --- evaluation ----------------------------------------------------------


class EmptyInput(MarketMoodError):
    """Metrics over zero points are undefined."""


class NonFiniteValue(MarketMoodError):
    """Predictions/targets must be finite."""


class MismatchedTestSets(MarketMoodError):
    """Runs evaluated on different test windows cannot be compared."""


# --- cli -----------------------------------------------------------------


class UsageError(MarketMoodError):
    """Bad invocation or configuration; maps to exit status 2."""

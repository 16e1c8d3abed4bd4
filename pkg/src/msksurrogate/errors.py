"""Exception types shared across the package.

Most derive from ValueError so callers that only know the stdlib hierarchy
still fail sanely; a few runtime conditions derive from RuntimeError.
"""


class DimensionMismatch(ValueError):
    """Matrix operands whose inner dimensions disagree."""


class TooFewSamples(ValueError):
    """Resampling needs at least 4 samples per column."""


class NonPositiveRate(ValueError):
    """Sampling rates must be strictly positive."""


class EmptyInput(ValueError):
    """Descriptive statistics need at least one value."""


class TooFewRows(ValueError):
    """Scaler fitting needs at least two rows per column."""


class MissingFile(FileNotFoundError):
    """A required bundle file is absent."""


class SchemaError(ValueError):
    """A bundle file exists but does not match the documented schema."""


class RowCountMismatch(ValueError):
    """Input/output row counts disagree by more than one frame after resampling."""


class UnsupportedCategory(ValueError):
    """Kinetic normalization does not apply to this output category."""


class TooFewFrames(ValueError):
    """The time feature needs at least two frames."""


class EmptyGroup(ValueError):
    """A muscle group must contain at least one bundle column."""


class TrialTooShort(ValueError):
    """A trial shorter than the window length cannot be windowed."""


class InvalidSpec(ValueError):
    """A network or task specification is outside its admissible domain."""


class ShapeMismatch(ValueError):
    """Array shapes disagree with what the operation requires."""


class WrongArch(ValueError):
    """The network architecture does not support this forward pass."""


class StaleCache(RuntimeError):
    """A backward pass was requested against an outdated forward cache."""


class InvalidProbability(ValueError):
    """Dropout probability must lie in [0, 1)."""


class StateShapeMismatch(ValueError):
    """Optimizer state shapes disagree with the parameter shapes."""


class EmptyTrainingSet(ValueError):
    """Training requires at least one example."""


class DivergedLoss(RuntimeError):
    """The training loss became non-finite."""


class Underdetermined(ValueError):
    """Closed-form least squares needs more rows than features."""


class TooFewTrials(ValueError):
    """Not enough trials to build the subject-exposed split."""


class TooFewSubjects(ValueError):
    """Not enough subjects to build the subject-naive split."""


class EmptyAxis(ValueError):
    """Every grid axis must list at least one value."""


class AllConfigsFailed(RuntimeError):
    """Every configuration in the search failed to train."""


class LeakageDetected(RuntimeError):
    """Test identifiers overlap with training/validation identifiers."""


class ZeroVariance(ValueError):
    """A constant series has no defined correlation or NRMSE."""


class LengthMismatch(ValueError):
    """Paired series must have equal length."""


class EmptyCategory(ValueError):
    """No metric rows exist for the requested output category."""


class LagTooLarge(ValueError):
    """The temporal task lag must be smaller than the window length."""

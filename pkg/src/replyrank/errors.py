"""Exception types shared across the package.

Grouped by the subsystem that raises them.  All inherit from
:class:`ReplyRankError` so callers (notably the CLI) can map any
data-level failure to a single exit code.
"""


class ReplyRankError(Exception):
    """Base class for all errors raised by this package."""


# --- corpus -----------------------------------------------------------------

class EmptyCorpus(ReplyRankError):
    pass


class BankTooSmall(ReplyRankError):
    """Answer bank has fewer than 2 distinct answer texts."""


class InvalidRatio(ReplyRankError):
    pass


class InvalidSpec(ReplyRankError):
    """Synthetic-corpus parameters out of range."""


class DuplicateTranscriptId(ReplyRankError):
    pass


# --- numerics ---------------------------------------------------------------

class ShapeMismatch(ReplyRankError):
    pass


class NonScalarLoss(ReplyRankError):
    pass


class InvalidStep(ReplyRankError):
    """Non-positive step size passed to the finite-difference checker."""


class NonFiniteValue(ReplyRankError):
    """NaN or Inf detected in a value or gradient."""


# --- encoder ----------------------------------------------------------------

class EmptySequence(ReplyRankError):
    pass


class EmptyDataset(ReplyRankError):
    pass


class CorruptCheckpoint(ReplyRankError):
    pass


# --- templates / clustering -------------------------------------------------

class TooFewPoints(ReplyRankError):
    pass


class TooFewDistinct(ReplyRankError):
    """Fewer distinct points than requested cluster count."""


class UnknownTemplateId(ReplyRankError):
    pass


class CurationSyntaxError(ReplyRankError):
    pass


# --- retrieval --------------------------------------------------------------

class ModelPoolMismatch(ReplyRankError):
    """Pool was built from a different model checkpoint."""


class EmptyCandidates(ReplyRankError):
    pass


class EmptyBank(ReplyRankError):
    pass


# --- evaluation -------------------------------------------------------------

class TooFewAnswers(ReplyRankError):
    pass


class EmptyInput(ReplyRankError):
    pass

"""Exception hierarchy for the inkpass package.

Every error raised on a documented failure path subclasses
:class:`InkpassError`, so callers can catch the package-level base or the
specific condition.
"""


class InkpassError(Exception):
    """Base class for all inkpass errors."""


# --- capture / ingestion ---------------------------------------------------

class MalformedFile(InkpassError):
    """Sample file violates the on-disk format (header, row count, fields)."""


class TooShort(InkpassError):
    """Sequence has fewer points than the operation requires."""


class NonMonotonicTime(InkpassError):
    """Timestamps decrease within a sample."""


class EmptyDataset(InkpassError):
    """Dataset root contains no loadable samples."""


class DuplicateKey(InkpassError):
    """Two files map to the same (user, digit, session, repetition)."""


# --- features --------------------------------------------------------------

class AlreadyNormalized(InkpassError):
    """z-normalization applied twice to the same function matrix."""


# --- dtw -------------------------------------------------------------------

class SubsetEmpty(InkpassError):
    """Channel subset for elastic matching is empty."""


class NotNormalized(InkpassError):
    """Operation requires z-normalized function matrices."""


class EmptyTemplate(InkpassError):
    """Template holds no enrolment samples."""


# --- sffs ------------------------------------------------------------------

class EmptyCandidates(InkpassError):
    """Floating search started with no candidates."""


class NonFiniteObjective(InkpassError):
    """Objective returned NaN or infinity for some subset."""


# --- rnn -------------------------------------------------------------------

class MissingSession(InkpassError):
    """Pair construction needs samples from both acquisition sessions."""


class ImpossiblePairing(InkpassError):
    """Dataset cannot produce impostor pairs (e.g. a single user)."""


class DivergedLoss(InkpassError):
    """Training loss became non-finite."""


# --- evaluation ------------------------------------------------------------

class EmptyPool(InkpassError):
    """Genuine or impostor score pool is empty."""


class MissingData(InkpassError):
    """Protocol run needs samples that the dataset does not contain."""


class BadLength(InkpassError):
    """Password length outside the supported 1-8 range."""


class ModeMismatch(InkpassError):
    """Exhaustive password search requested for a length that requires SFFS."""


# --- auth service ----------------------------------------------------------

class TooManySamples(InkpassError):
    """More enrolment samples than the per-digit cap of 4."""


class LabelMismatch(InkpassError):
    """Sample digit label disagrees with the digit being enrolled."""


class StorageFailure(InkpassError):
    """User record could not be persisted."""


class EmptyCandidateSet(InkpassError):
    """Password policy admits no candidate passwords."""


class NotEnrolled(InkpassError):
    """Verification requested for a digit the user has no template for."""


class LengthMismatch(InkpassError):
    """Attempt sample count differs from the expected password length."""


class UnreachableTarget(InkpassError):
    """No threshold in the report satisfies the calibration target."""

"""Exception types raised across the toolkit.

Everything derives from IrisKitError so callers can catch domain failures
with a single except clause while still telling failure modes apart.
Missing input files are reported with the builtin FileNotFoundError.
"""


class IrisKitError(Exception):
    """Base class for all domain errors raised by iriskit."""


class StageError(IrisKitError):
    """A pipeline stage failed; carries the stage name and the original error."""

    def __init__(self, stage, cause):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


# --- image I/O ---------------------------------------------------------------

class UnsupportedFormatError(IrisKitError):
    """File is not a format this toolkit reads (PGM P2/P5 or 8-bit BMP)."""


class CorruptImageError(IrisKitError):
    """File matched a supported format but its contents are inconsistent."""


class DegenerateInputError(IrisKitError):
    """Image too small for the requested operation (e.g. filter support)."""


class DimensionMismatchError(IrisKitError):
    """Two arrays that must share dimensions do not."""


# --- segmentation ------------------------------------------------------------

class ParallelChordsError(IrisKitError):
    """Perpendicular bisectors are (near-)parallel; no unique intersection."""


class TooFewEdgePointsError(IrisKitError):
    """Largest connected edge component has fewer than 5 pixels."""


class DegenerateChordsError(IrisKitError):
    """Every chord pair failed to produce a bisector intersection."""


class NoLimbicPointsError(IrisKitError):
    """Outward scan found fewer than 3 candidate limbic boundary points."""


# --- features ----------------------------------------------------------------

class UnknownFamilyError(IrisKitError):
    """Requested wavelet family is not one of the supported five."""


class MatrixTooSmallError(IrisKitError):
    """Input matrix is empty or not 2-D."""


class UnknownSelectionError(IrisKitError):
    """Coefficient-selection name does not parse."""


class LevelUnavailableError(IrisKitError):
    """Selection references a decomposition level that was not computed."""


# --- matching ----------------------------------------------------------------

class LengthMismatchError(IrisKitError):
    """Feature sequences being compared have different lengths."""


class EmptyGalleryError(IrisKitError):
    """Identification or verification was asked against an empty set."""


# --- evaluation --------------------------------------------------------------

class ClassTooSmallError(IrisKitError):
    """A class needs at least 2 feature vectors."""


class DegenerateFeaturesError(IrisKitError):
    """Every feature was excluded as degenerate (near-zero variance)."""


class InsufficientImagesError(IrisKitError):
    """A subject does not have enough images for the requested protocol."""


class MissingGroundTruthError(IrisKitError):
    """No ground-truth circles available for an image that needs them."""


class BadSpecError(IrisKitError):
    """Synthetic eye spec violates its invariants."""


# --- store / config ----------------------------------------------------------

class StoreError(IrisKitError):
    """Base class for template-store file problems."""


class BadMagicError(StoreError):
    """File does not start with the store magic."""


class TruncatedStoreError(StoreError):
    """Store file ended mid-record."""


class VersionMismatchError(StoreError):
    """Store file was written by an incompatible format version."""


class DuplicateKeyError(StoreError):
    """A (subject, eye, sample) key is already present in the store."""


class ConfigError(IrisKitError):
    """Configuration value failed validation or did not parse."""

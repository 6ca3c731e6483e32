"""Exception hierarchy.

Every error carries a stable ``code`` (the class name) so the CLI can emit it
in its machine-readable error channel.
"""


class RadiomicsError(Exception):
    def __init__(self, message: str = ""):
        super().__init__(message or type(self).__name__)
        self.message = message or type(self).__name__

    @property
    def code(self) -> str:
        return type(self).__name__


# imaging

class UnsupportedDatatype(RadiomicsError):
    """NIfTI datatype outside uint8/int16/float32."""


class CompressedInput(RadiomicsError):
    """Input is gzip-compressed."""


class BadMagic(RadiomicsError):
    """NIfTI magic is not the single-file 'n+1'."""


class DimMismatch(RadiomicsError):
    """Volume is not three-dimensional."""


class NonFiniteVoxel(RadiomicsError):
    """A voxel is NaN or infinite."""


class LengthMismatch(RadiomicsError):
    """Payload size disagrees with the header grid."""


class MalformedHeader(RadiomicsError):
    """Header is missing fields or has invalid values."""


class GridMismatch(RadiomicsError):
    """Mask grid differs from volume grid."""


class EmptyMask(RadiomicsError):
    """Mask contains no voxels."""


class UnassignedSite(RadiomicsError):
    """Site is assigned to neither or both split sides."""


class DuplicateId(RadiomicsError):
    """Patient id occurs more than once."""


class MalformedManifest(RadiomicsError):
    """Manifest JSON does not match the schema."""


# filters

class SigmaTooLargeForVolume(RadiomicsError):
    """LoG support cannot be mirrored on this grid."""


class SliceTooSmall(RadiomicsError):
    """Wavelet needs at least 2x2 axial slices."""


# features

class UnknownFeature(RadiomicsError):
    """Feature key is not in the registry."""


# stats

class TestLeakage(RadiomicsError):
    """Test-split rows reached a fitting routine."""


class KTooLarge(RadiomicsError):
    """Requested more features than available."""


class NonFinite(RadiomicsError):
    """Input contains NaN or infinite values."""


class InsufficientData(RadiomicsError):
    """Too few observations for the requested statistic."""


# models

class SingleClassTraining(RadiomicsError):
    """Training labels contain a single class."""


class UnstandardizedInput(UserWarning):
    """Design matrix looks unscaled (column means far from 0); a warning only."""


class KeyMismatch(RadiomicsError):
    """Row keys differ from the model's keys."""


class SchemaVersionMismatch(RadiomicsError):
    """Unsupported schema version."""


class CorruptModel(RadiomicsError):
    """Model file cannot be parsed."""


class InvalidSpec(RadiomicsError):
    """Model kind or hyperparameters are invalid."""


# eval

class EmptyInput(RadiomicsError):
    """No observations given."""


class OneClassOnly(RadiomicsError):
    """Both classes are required."""


class CaseSetMismatch(RadiomicsError):
    """Score vectors do not cover the same cases."""


# explain

class UnsupportedModel(RadiomicsError):
    """Model family not supported by this explainer."""


class UnsupportedShapeFeature(RadiomicsError):
    """Shape features are not voxel-local."""


# cli

class InvalidConfig(RadiomicsError):
    """Run configuration failed validation."""

"""Exception types shared across the package."""


class IdcomposeError(Exception):
    """Base class for all package errors."""


class DimensionError(IdcomposeError):
    """Spatial or channel shapes of related buffers do not agree."""


class RangeError(IdcomposeError):
    """Pixel values fall outside the required [0, 1] range."""


class EmptyMaskError(IdcomposeError):
    """An operation requiring a nonempty mask received an empty one."""


class DegenerateAugmentationError(IdcomposeError):
    """An augmentation pushed the object fully out of frame."""


class InsufficientFramesError(IdcomposeError):
    """Frame-pair sampling needs at least two frames."""


class DatasetError(IdcomposeError):
    """A dataset or manifest does not satisfy a training precondition."""


class ConfigurationError(IdcomposeError):
    """A model or run configuration is inconsistent."""


class CheckpointFormatError(IdcomposeError):
    """A checkpoint file has an unknown magic or version."""


class CheckpointIntegrityError(IdcomposeError):
    """A checkpoint file is corrupt (checksum or truncation)."""


class DegenerateEmbeddingError(IdcomposeError):
    """A zero-norm embedding cannot be scored."""


class DegenerateLabelError(IdcomposeError):
    """A clustering label with a single member has no silhouette."""


class NumericalError(IdcomposeError):
    """A numerical routine left its supported regime (e.g. non-PSD input)."""

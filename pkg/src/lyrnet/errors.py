"""Exception hierarchy shared across the package."""


class LyrnetError(Exception):
    """Base class for all package errors."""


class ContractError(LyrnetError, ValueError):
    """A documented precondition was violated by the caller."""


class ShapeError(ContractError):
    """Operand shapes are incompatible."""


class InvalidParameterError(ContractError):
    """A hyperparameter lies outside its allowed range."""


class DataError(LyrnetError, ValueError):
    """Input data (corpus file, labels, vocabulary) is malformed or inconsistent."""


class DivergenceError(LyrnetError, FloatingPointError):
    """Training produced a non-finite loss or gradient."""


class CheckpointError(LyrnetError):
    """Base class for checkpoint read/write failures."""


class CheckpointVersionError(CheckpointError):
    """The checkpoint was written by an unsupported format version."""


class CheckpointIntegrityError(CheckpointError):
    """The checkpoint manifest or payload failed validation."""


class CheckpointTruncatedError(CheckpointError):
    """The checkpoint file ends before its declared payload."""


class CheckpointShapeError(CheckpointError):
    """A stored parameter shape does not match the configured model."""

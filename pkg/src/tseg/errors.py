"""Exception hierarchy shared by all tseg modules."""


class TsegError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(TsegError):
    """Tensor/array dimensions do not satisfy an operation's contract."""


class NumericError(TsegError):
    """A numeric invariant was violated (NaN/Inf where finite values are required)."""


class ContractError(TsegError):
    """An API was called in a way its contract forbids."""


class ConfigError(TsegError):
    """Invalid configuration value or combination."""


class FormatError(TsegError):
    """A serialized artifact (sequence, checkpoint, manifest, ...) is malformed."""


class PairingError(TsegError):
    """A labeled run cannot be paired with opposite-class content."""


class SplitError(TsegError):
    """A dataset split cannot be performed as requested."""

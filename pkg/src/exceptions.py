class EmosegError(Exception):
    """
    Base class of all errors raised by the package.

    Each subclass carries the exit code that the command line surface returns when the error reaches it.
    """
    exit_code = 1


class ConfigError(EmosegError, ValueError):
    """
    Raised for unknown configuration keys, unparsable values and violated configuration invariants.
    """
    exit_code = 1


class DimensionError(EmosegError, ValueError):
    """
    Raised when shapes of tensors, masks or maps do not fit together.
    """
    exit_code = 2


class DataIntegrityError(EmosegError):
    """
    Raised for missing or corrupt files and for streams of a sequence that do not match.
    """
    exit_code = 2


class ConfigMismatchError(DataIntegrityError):
    """
    Raised when a checkpoint was written for a different model configuration or image size.
    """
    exit_code = 2


class NumericError(EmosegError, ArithmeticError):
    """
    Raised when an operation produces NaN/Inf values or a gradient check fails.
    """
    exit_code = 3


class TapeError(EmosegError, RuntimeError):
    """
    Raised when backward is run a second time on the same gradient tape.
    """
    exit_code = 3

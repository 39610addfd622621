"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes, so each family corresponds to
one failure class: bad configuration/arguments, I/O, and numerics.
"""


class DiffextError(Exception):
    """Base class for all package errors."""


class ConfigError(DiffextError, ValueError):
    """Invalid parameters, shapes or configuration values."""


class NumericalError(DiffextError, ArithmeticError):
    """A computation produced non-finite or degenerate output."""


class ModelFormatError(DiffextError, IOError):
    """A model container could not be decoded."""


class BadMagicError(ModelFormatError):
    pass


class VersionMismatchError(ModelFormatError):
    pass


class TruncatedFileError(ModelFormatError):
    pass


class ChecksumError(ModelFormatError):
    pass

"""Exception types raised across the package."""


class VisbankError(Exception):
    """Base class for all package errors."""


class InvalidDimension(VisbankError, ValueError):
    pass


class DimensionMismatch(VisbankError, ValueError):
    pass


class ZeroNormInput(VisbankError, ValueError):
    pass


class UnknownCategory(VisbankError, KeyError):
    pass


class EmptyCategory(VisbankError, ValueError):
    pass


class PolicyMismatch(VisbankError, ValueError):
    pass


class NonFiniteInput(VisbankError, ValueError):
    pass


class InvalidTarget(VisbankError, ValueError):
    pass


class SeparationUnsatisfiable(VisbankError, RuntimeError):
    pass


class BankFileError(VisbankError, ValueError):
    pass


class BadMagic(BankFileError):
    pass


class VersionMismatch(BankFileError):
    pass


class TruncatedFile(BankFileError):
    pass


class ConfigError(VisbankError, ValueError):
    """Config failed schema validation; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path

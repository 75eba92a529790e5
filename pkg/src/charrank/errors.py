"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class CharRankError(Exception):
    """Base class for every error raised by the package."""


class InvalidSpecError(CharRankError, ValueError):
    """Problem extents, rank or observation pattern are inconsistent."""


class UnsupportedVariantError(CharRankError, ValueError):
    """Operation called on a problem variant it does not apply to."""


class MaskParseError(CharRankError, ValueError):
    """Malformed mask file. ``line`` is 1-based, or None when not line-specific."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class NumericInputError(CharRankError, ValueError):
    """Matrix handed to the float rank backend contains NaN or inf."""


class ConfigError(CharRankError, ValueError):
    """Invalid configuration value (non-prime modulus, bad tolerance, ...)."""


class BackendDisagreementError(CharRankError):
    """The SVD and finite-field backends returned different ranks."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)

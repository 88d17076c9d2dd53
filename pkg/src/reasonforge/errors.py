"""Exception hierarchy shared across the package."""

from __future__ import annotations


class ReasonForgeError(Exception):
    """Base class for all package errors."""


class ConfigurationError(ReasonForgeError):
    """Bad or missing configuration; aborts a run, never skips an item."""


class RenderError(ReasonForgeError):
    """A prompt template binding was missing or unknown."""

    def __init__(self, asset_id: str, placeholder: str):
        super().__init__(f"prompt asset {asset_id!r}: missing binding {placeholder!r}")
        self.asset_id = asset_id
        self.placeholder = placeholder


class ProviderFailure(ReasonForgeError):
    """A completion could not be obtained after exhausting retries."""

    def __init__(self, message: str, cause: Exception | None = None):
        super().__init__(message)
        self.cause = cause


class ItemRejected(ReasonForgeError):
    """A single pipeline item failed a quality gate and should be dropped.

    ``reason`` is a short stable string used as a ledger histogram key.
    """

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason
        self.detail = detail


class DatasetIntegrityError(ReasonForgeError):
    """Export-time validation found an inconsistent pair."""

"""Exception types shared across the warehouse."""

from __future__ import annotations


class WowError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(WowError):
    """A lexicon or table file is malformed (e.g. overlapping era rows)."""


class QueryError(WowError):
    """A query names an unknown cube/axis/level/member or is otherwise invalid.

    code is a stable machine-readable slug (unknown_cube, unknown_member,
    invalid_spec, ...); field names the offending part of the spec.
    """

    def __init__(self, message: str, code: str = "invalid_spec", field: str | None = None):
        super().__init__(message)
        self.code = code
        self.field = field


class WarehouseError(WowError):
    """Base class for warehouse persistence failures."""


class WarehouseMissingError(WarehouseError):
    """The warehouse directory does not exist or has no manifest."""


class VersionError(WarehouseError):
    """Stored format version is not supported by this code."""


class TruncationError(WarehouseError):
    """A stored file ends before its declared contents do."""


class ChecksumError(WarehouseError):
    """A stored file fails its CRC check."""


class FormatError(WarehouseError):
    """A stored file is structurally invalid (bad magic, bad JSON, ...)."""

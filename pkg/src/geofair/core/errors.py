"""Core domain errors."""


class GeoFairError(Exception):
    """Base error for GeoFair."""

    pass


class ValidationError(GeoFairError):
    """Invariant or precondition violated by caller-supplied data."""

    pass


class ShapeError(ValidationError):
    """Matrix dimensions do not chain."""

    pass


class ConfigError(ValidationError):
    """Experiment configuration is invalid."""

    pass


class ManifestParseError(ValidationError):
    """Manifest CSV row could not be parsed."""

    def __init__(self, message: str, line: int, column: str | None = None):
        location = f"line {line}" if column is None else f"line {line}, column {column!r}"
        super().__init__(f"{location}: {message}")
        self.line = line
        self.column = column


class ContractError(GeoFairError):
    """Activation cache does not belong to the model it is used with."""

    pass


class NumericError(GeoFairError):
    """Non-finite value during optimization."""

    pass


class CheckpointError(GeoFairError):
    """Checkpoint header, version or shape mismatch."""

    pass


class StorageIOError(GeoFairError):
    """Artifact I/O error."""

    pass


class NotFoundError(StorageIOError):
    """Artifact not found."""

    pass

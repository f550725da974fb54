"""Artifact store port interface."""

from typing import Protocol


class ArtifactStorePort(Protocol):
    """Port for reading and writing experiment artifacts.

    Locations are plain path strings. Implementations raise
    ``NotFoundError`` for missing inputs and ``StorageIOError`` for any
    other failure, naming the location in the message.
    """

    def read_text(self, location: str) -> str:
        """Read UTF-8 text."""
        ...

    def write_text(self, location: str, text: str) -> None:
        """Write UTF-8 text, creating parent directories."""
        ...

    def read_bytes(self, location: str) -> bytes:
        """Read raw bytes."""
        ...

    def write_bytes(self, location: str, data: bytes) -> None:
        """Write raw bytes, creating parent directories."""
        ...

    def exists(self, location: str) -> bool:
        """Check whether an artifact exists."""
        ...

    def join(self, *parts: str) -> str:
        """Build a location from path segments."""
        ...

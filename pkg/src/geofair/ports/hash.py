"""Hash port interface."""

from typing import Protocol


class HashPort(Protocol):
    """SHA-256 digests for holdout assignment and artifact provenance."""

    def sha256_bytes(self, data: bytes) -> str:
        """Hex digest of raw bytes."""
        ...

    def sha256_text(self, text: str) -> str:
        """Hex digest of UTF-8 text, e.g. a sample id."""
        ...

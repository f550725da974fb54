"""SHA256 hash adapter."""

import hashlib

from ..ports.hash import HashPort


class Sha256Adapter(HashPort):
    """hashlib implementation of HashPort."""

    def sha256_bytes(self, data: bytes) -> str:
        return hashlib.sha256(data).hexdigest()

    def sha256_text(self, text: str) -> str:
        return self.sha256_bytes(text.encode("utf-8"))

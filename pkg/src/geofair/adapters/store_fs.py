"""Filesystem artifact store."""

from pathlib import Path

from ..core.errors import NotFoundError, StorageIOError
from ..ports.storage import ArtifactStorePort


class FsArtifactStore(ArtifactStorePort):
    """Local-filesystem implementation of ArtifactStorePort.

    Relative locations resolve against ``base_dir``. Text is written with
    ``\\n`` line endings regardless of platform so reruns compare equal.
    """

    def __init__(self, base_dir: Path | None = None):
        self.base_dir = base_dir or Path.cwd()

    def _path(self, location: str) -> Path:
        path = Path(location)
        return path if path.is_absolute() else self.base_dir / path

    def read_text(self, location: str) -> str:
        return self.read_bytes(location).decode("utf-8")

    def write_text(self, location: str, text: str) -> None:
        self.write_bytes(location, text.encode("utf-8"))

    def read_bytes(self, location: str) -> bytes:
        path = self._path(location)
        try:
            return path.read_bytes()
        except FileNotFoundError as e:
            raise NotFoundError(f"File not found: {location}") from e
        except IsADirectoryError as e:
            raise StorageIOError(f"Expected a file but found a directory: {location}") from e
        except OSError as e:
            raise StorageIOError(f"Cannot read {location}: {e.strerror or e}") from e

    def write_bytes(self, location: str, data: bytes) -> None:
        path = self._path(location)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(data)
        except OSError as e:
            raise StorageIOError(f"Cannot write {location}: {e.strerror or e}") from e

    def exists(self, location: str) -> bool:
        return self._path(location).is_file()

    def join(self, *parts: str) -> str:
        return str(Path(*parts))

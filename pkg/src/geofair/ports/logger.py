"""Logger port interface."""

from typing import Any, Protocol


class LoggerPort(Protocol):
    """Structured logging for the core.

    Keyword arguments are structured fields (``epoch=3, loss=0.41``);
    adapters decide how to render them.
    """

    def debug(self, message: str, **kwargs: Any) -> None: ...

    def info(self, message: str, **kwargs: Any) -> None: ...

    def warning(self, message: str, **kwargs: Any) -> None: ...

    def error(self, message: str, **kwargs: Any) -> None: ...

    def log_operation(
        self,
        op: str,
        dataset: str,
        sizes: dict[str, int],
        durations: dict[str, float],
    ) -> None:
        """One record per finished service operation.

        ``op`` is the stage (generate, ingest, train, adapt, report),
        ``dataset`` the manifest location, ``sizes`` row and step counts, and
        ``durations`` per-phase seconds.
        """
        ...

"""Clock port for stage timings."""

from datetime import datetime
from typing import Protocol


class ClockPort(Protocol):
    """Timestamps for log records and stage durations."""

    def now(self) -> datetime:
        """Naive UTC timestamp."""
        ...

    def elapsed(self, start: datetime, end: datetime | None = None) -> float:
        """Seconds from ``start`` to ``end`` (default: now)."""
        ...

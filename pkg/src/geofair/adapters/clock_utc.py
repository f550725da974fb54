"""UTC clock adapter."""

from datetime import UTC, datetime

from ..ports.clock import ClockPort


class UtcClockAdapter(ClockPort):
    """Wall-clock UTC timestamps; durations are never negative."""

    def now(self) -> datetime:
        return datetime.now(UTC).replace(tzinfo=None)

    def elapsed(self, start: datetime, end: datetime | None = None) -> float:
        finish = self.now() if end is None else end
        return max(0.0, (finish - start).total_seconds())

"""Injectable wall clock.

Everything time-driven takes a clock rather than calling datetime.now,
so the whole scheduling surface runs under a virtual clock in tests and
in the simulate command.  Clocks yield aware UTC datetimes and reads
are monotone non-decreasing.
"""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

__all__ = ["RealClock", "VirtualClock"]


class RealClock:
    def now(self) -> datetime:
        return datetime.now(timezone.utc)


class VirtualClock:
    """Manually advanced clock; never moves backwards."""

    def __init__(self, start: datetime):
        if start.tzinfo is None:
            start = start.replace(tzinfo=timezone.utc)
        self._now = start.astimezone(timezone.utc)

    def now(self) -> datetime:
        return self._now

    def advance(self, delta: timedelta) -> datetime:
        if delta < timedelta(0):
            raise ValueError("clock cannot move backwards")
        self._now += delta
        return self._now

    def advance_minutes(self, minutes: int) -> datetime:
        return self.advance(timedelta(minutes=minutes))

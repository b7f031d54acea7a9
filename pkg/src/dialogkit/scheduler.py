"""Daily check-in scheduling.

A check-in config says when, in the user's local day, the bot should
start its prompted engagement.  The due rule is deliberately simple:

    due iff active, today (local) has not fired yet, and the local
    time has reached the slot.

That one predicate gives same-day catch-up after downtime (the slot
passed but the date guard is still open) and next-day skip (once the
local date moves on, the missed day is gone; never double-prompt).

Timezones are fixed UTC offsets in minutes, captured at onboarding.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import date, datetime, timedelta

__all__ = [
    "CheckinConfig",
    "set_checkin",
    "due_users",
    "mark_fired",
    "parse_time_of_day",
    "format_time_of_day",
    "local_day_parts",
    "MINUTES_PER_DAY",
]

MINUTES_PER_DAY = 24 * 60

_TIME_RE = re.compile(r"([01]?\d|2[0-3]):([0-5]\d)\Z")


def parse_time_of_day(text: str) -> int:
    """'19:00' -> 1140 minutes after midnight."""
    m = _TIME_RE.match(text.strip())
    if m is None:
        raise ValueError(f"not a HH:MM time of day: {text!r}")
    return int(m.group(1)) * 60 + int(m.group(2))


def format_time_of_day(minutes: int) -> str:
    return f"{minutes // 60:02d}:{minutes % 60:02d}"


@dataclass
class CheckinConfig:
    bot_id: str
    user_id: str
    time_of_day: int  # minutes after local midnight, 0..1439
    utc_offset_minutes: int = 0
    active: bool = True
    last_fired_date: str | None = None  # ISO local date

    def to_dict(self) -> dict:
        return {
            "bot_id": self.bot_id,
            "user_id": self.user_id,
            "time_of_day": self.time_of_day,
            "utc_offset_minutes": self.utc_offset_minutes,
            "active": self.active,
            "last_fired_date": self.last_fired_date,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CheckinConfig":
        return cls(**data)


def local_day_parts(now: datetime, utc_offset_minutes: int) -> tuple[date, int]:
    """The user's local calendar date and minutes after local midnight."""
    local = now + timedelta(minutes=utc_offset_minutes)
    return local.date(), local.hour * 60 + local.minute


def set_checkin(
    configs: dict[str, CheckinConfig],
    bot_id: str,
    user_id: str,
    time_of_day: int,
    utc_offset_minutes: int = 0,
) -> CheckinConfig:
    """Upsert one user's check-in; re-setting replaces and re-activates."""
    if not 0 <= time_of_day < MINUTES_PER_DAY:
        raise ValueError(f"time_of_day out of range: {time_of_day}")
    existing = configs.get(user_id)
    config = CheckinConfig(
        bot_id=bot_id,
        user_id=user_id,
        time_of_day=time_of_day,
        utc_offset_minutes=utc_offset_minutes,
        active=True,
        last_fired_date=existing.last_fired_date if existing is not None else None,
    )
    configs[user_id] = config
    return config


def _is_due(config: CheckinConfig, now: datetime) -> bool:
    if not config.active:
        return False
    local_date, local_minutes = local_day_parts(now, config.utc_offset_minutes)
    if config.last_fired_date == local_date.isoformat():
        return False
    return local_minutes >= config.time_of_day


def due_users(configs: dict[str, CheckinConfig], now: datetime) -> list[str]:
    """User ids due at ``now``, in a deterministic order."""
    return sorted(u for u, c in configs.items() if _is_due(c, now))


def mark_fired(config: CheckinConfig, now: datetime) -> None:
    local_date, _ = local_day_parts(now, config.utc_offset_minutes)
    config.last_fired_date = local_date.isoformat()

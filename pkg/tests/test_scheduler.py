from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dialogkit.scheduler import (
    CheckinConfig,
    MINUTES_PER_DAY,
    due_users,
    format_time_of_day,
    local_day_parts,
    mark_fired,
    parse_time_of_day,
    set_checkin,
)
from oracles import expected_firings

UTC = timezone.utc


@pytest.mark.parametrize(
    "text,minutes",
    [
        ("00:00", 0),
        ("19:00", 1140),
        ("9:05", 545),
        ("23:59", 1439),
        (" 08:30 ", 510),
    ],
)
def test_parse_time_of_day(text, minutes):
    assert parse_time_of_day(text) == minutes


@pytest.mark.parametrize("text", ["24:00", "19:60", "1900", "7pm", "", "12:3"])
def test_parse_rejects_non_times(text):
    with pytest.raises(ValueError):
        parse_time_of_day(text)


def test_format_round_trips():
    for minutes in (0, 545, 1140, 1439):
        assert parse_time_of_day(format_time_of_day(minutes)) == minutes


def test_set_checkin_range_check():
    with pytest.raises(ValueError):
        set_checkin({}, "b", "u", 1500)
    with pytest.raises(ValueError):
        set_checkin({}, "b", "u", -1)


def test_set_checkin_upsert_keeps_fired_date():
    configs = {}
    first = set_checkin(configs, "b", "u", 1140)
    mark_fired(first, datetime(2026, 1, 5, 19, 30, tzinfo=UTC))
    replaced = set_checkin(configs, "b", "u", 480)
    assert replaced.time_of_day == 480
    assert replaced.last_fired_date == "2026-01-05"
    assert configs["u"] is replaced


def test_reactivates_on_set():
    configs = {}
    set_checkin(configs, "b", "u", 1140)
    configs["u"].active = False
    set_checkin(configs, "b", "u", 1140)
    assert configs["u"].active


def test_due_before_and_after_slot():
    configs = {}
    set_checkin(configs, "b", "u", 1140)  # 19:00
    assert due_users(configs, datetime(2026, 1, 5, 18, 59, tzinfo=UTC)) == []
    assert due_users(configs, datetime(2026, 1, 5, 19, 0, tzinfo=UTC)) == ["u"]


def test_not_due_twice_same_local_day():
    configs = {}
    set_checkin(configs, "b", "u", 1140)
    now = datetime(2026, 1, 5, 19, 0, tzinfo=UTC)
    mark_fired(configs["u"], now)
    assert due_users(configs, now + timedelta(hours=3)) == []
    assert due_users(configs, now + timedelta(days=1)) == ["u"]


def test_missed_day_catches_up_same_day_only():
    configs = {}
    set_checkin(configs, "b", "u", 1140)
    # downtime until 22:40 of the same local day: still due
    assert due_users(configs, datetime(2026, 1, 5, 22, 40, tzinfo=UTC)) == ["u"]
    mark_fired(configs["u"], datetime(2026, 1, 5, 22, 40, tzinfo=UTC))
    # once the local date moved on, only the new day's slot counts
    assert due_users(configs, datetime(2026, 1, 6, 8, 0, tzinfo=UTC)) == []
    assert due_users(configs, datetime(2026, 1, 6, 19, 0, tzinfo=UTC)) == ["u"]


def test_inactive_never_due():
    configs = {}
    set_checkin(configs, "b", "u", 0)
    configs["u"].active = False
    assert due_users(configs, datetime(2026, 1, 5, 12, 0, tzinfo=UTC)) == []


def test_utc_offset_shifts_the_local_day():
    configs = {}
    # 19:00 local at UTC+10: fires at 09:00 UTC
    set_checkin(configs, "b", "east", 1140, utc_offset_minutes=600)
    set_checkin(configs, "b", "west", 1140, utc_offset_minutes=-300)  # UTC-5 -> 00:00 UTC next day
    at_9utc = datetime(2026, 1, 5, 9, 0, tzinfo=UTC)
    assert due_users(configs, at_9utc) == ["east"]
    at_0utc = datetime(2026, 1, 6, 0, 0, tzinfo=UTC)
    mark_fired(configs["east"], at_9utc)
    assert due_users(configs, at_0utc) == ["west"]


def test_local_day_parts_crosses_midnight():
    d, minutes = local_day_parts(datetime(2026, 1, 5, 23, 30, tzinfo=UTC), 60)
    assert d.isoformat() == "2026-01-06" and minutes == 30


def test_due_order_is_sorted():
    configs = {}
    for user in ("zed", "amy", "mid"):
        set_checkin(configs, "b", user, 0)
    assert due_users(configs, datetime(2026, 1, 5, 1, 0, tzinfo=UTC)) == ["amy", "mid", "zed"]


@settings(deadline=None, max_examples=60)
@given(
    time_of_day=st.integers(min_value=0, max_value=MINUTES_PER_DAY - 1),
    offset=st.sampled_from([-720, -300, 0, 60, 330, 600, 840]),
    gaps=st.lists(st.integers(min_value=1, max_value=36 * 60), min_size=5, max_size=40),
)
def test_fires_once_per_local_day_matches_replay_oracle(time_of_day, offset, gaps):
    configs = {}
    set_checkin(configs, "b", "u", time_of_day, utc_offset_minutes=offset)
    start = datetime(2026, 1, 1, 0, 0, tzinfo=UTC)
    now = start
    fired = []
    for gap in gaps:
        now = now + timedelta(minutes=gap)
        if due_users(configs, now):
            mark_fired(configs["u"], now)
            fired.append(int((now - start).total_seconds() // 60))
    ticks = []
    acc = 0
    for gap in gaps:
        acc += gap
        ticks.append(acc)
    assert fired == expected_firings(ticks, time_of_day, offset)

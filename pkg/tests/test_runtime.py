from datetime import datetime, timedelta, timezone

import pytest

from dialogkit import BotRuntime, ContentStore, TurnBusy
from dialogkit.clock import VirtualClock

START = datetime(2026, 1, 5, 9, 0, tzinfo=timezone.utc)


@pytest.fixture
def runtime(published_demo):
    store, _ = published_demo
    return BotRuntime(store, "demo", clock=VirtualClock(START))


def onboard(rt, raw="user-a", answer="19:00"):
    rt.handle_inbound(raw, "hello")
    rt.handle_inbound(raw, answer)
    return rt.pseudonym(raw)


def test_first_inbound_onboards(runtime):
    messages = runtime.handle_inbound("user-a", "hello")
    assert messages, "onboarding should greet"
    assert messages[-1].quick_replies  # the check-in time question
    user = runtime.pseudonym("user-a")
    session = runtime.store.load_session("demo", user)
    assert session is not None and session.origin == "onboarding"
    assert session.day_index == 0


def test_time_answer_registers_checkin(runtime):
    user = onboard(runtime)
    config = runtime.checkin_for(user)
    assert config is not None
    assert config.time_of_day == 19 * 60
    assert config.active
    # persisted too, not just in memory
    assert runtime.store.load_checkins("demo")[user].time_of_day == 19 * 60


def test_unparseable_answer_falls_back_to_default(runtime):
    runtime.handle_inbound("user-a", "hello")
    runtime.handle_inbound("user-a", "whenever")   # reprompt
    runtime.handle_inbound("user-a", "dunno")      # fallback path assigns 19:00
    user = runtime.pseudonym("user-a")
    config = runtime.checkin_for(user)
    assert config is not None and config.time_of_day == 19 * 60


def test_tick_fires_at_the_slot(runtime):
    user = onboard(runtime)
    assert runtime.tick() == []  # 09:00, before the slot
    runtime.clock.advance(timedelta(hours=10))  # 19:00
    firings = runtime.tick()
    assert len(firings) == 1
    firing = firings[0]
    assert firing.user == user
    assert firing.day_index == 1
    assert firing.time_of_day == 19 * 60
    assert not firing.completed
    assert firing.messages
    # same slot does not fire twice in one local day
    runtime.clock.advance(timedelta(minutes=30))
    assert runtime.tick() == []
    # next day it fires again
    runtime.clock.advance(timedelta(days=1))
    assert runtime.tick()[0].day_index == 2


def test_tick_skips_user_mid_turn(runtime):
    user = onboard(runtime)
    runtime.clock.advance(timedelta(hours=10))
    lock = runtime._turn_lock(user)
    lock.acquire()
    try:
        assert runtime.tick() == []
    finally:
        lock.release()
    assert len(runtime.tick()) == 1  # still due once the turn ends


def test_orphaned_checkin_deactivates(runtime):
    user = onboard(runtime)
    runtime.store.delete_session("demo", user)
    runtime.clock.advance(timedelta(hours=10))
    assert runtime.tick() == []
    assert runtime.checkin_for(user).active is False


def test_program_completion_deactivates(published_demo):
    store, version_id = published_demo
    config = store.get_bot("demo")
    config = dict(config, bot_id="short", program_length_days=2,
                  channel=dict(config["channel"], token="tok-short"))
    store.register_bot(config)
    rt = BotRuntime(store, "short", clock=VirtualClock(START))
    user = onboard(rt)
    rt.clock.advance(timedelta(hours=10))
    assert rt.tick()[0].completed is False
    rt.clock.advance(timedelta(days=1))
    firing = rt.tick()[0]
    assert firing.day_index == 2 and firing.completed is True
    assert rt.checkin_for(user).active is False
    rt.clock.advance(timedelta(days=1))
    assert rt.tick() == []
    kinds = [r["kind"] for r in store.iter_events("short")]
    assert kinds.count("program_completed") == 1
    assert kinds.count("reminder_fired") == 2


def test_turn_busy_raises(runtime):
    user = runtime.pseudonym("user-a")
    lock = runtime._turn_lock(user)
    lock.acquire()
    try:
        with pytest.raises(TurnBusy):
            runtime.handle_inbound("user-a", "hello")
    finally:
        lock.release()
    assert runtime.handle_inbound("user-a", "hello")


def test_outbox_rides_on_next_inbound(runtime):
    from dialogkit.engine import OutboundMessage

    user = onboard(runtime)
    held = OutboundMessage(kind="text", body="while you were away")
    runtime.queue_outbox(user, [held])
    messages = runtime.handle_inbound("user-a", "hi again")
    assert messages[0].body == "while you were away"
    assert len(messages) > 1
    # drained, not repeated
    again = runtime.handle_inbound("user-a", "hi")
    assert all(m.body != "while you were away" for m in again)


def test_reset_user_clears_everything(runtime):
    user = onboard(runtime)
    runtime.queue_outbox(user, [])
    runtime.reset_user("user-a")
    assert runtime.store.load_session("demo", user) is None
    assert runtime.checkin_for(user) is None
    # next message starts onboarding over
    messages = runtime.handle_inbound("user-a", "hello")
    assert runtime.store.load_session("demo", user).origin == "onboarding"
    assert messages[-1].quick_replies


def test_events_recorded_per_turn_with_redaction(runtime):
    user = onboard(runtime)
    records = list(runtime.store.iter_events("demo"))
    assert records, "turns should leave events"
    kinds = {r["kind"] for r in records}
    assert {"session_started", "message_in", "message_out"} <= kinds
    for r in records:
        assert r["user_id"] == user
        if r["kind"] == "message_in":
            assert set(r["payload"]) == {"len", "risk"}  # store-side redaction


def test_same_user_same_transcript_across_deployments(tmp_path, demo_graph_text, demo_bot):
    outputs = []
    for name in ("a", "b"):
        store = ContentStore(tmp_path / name)
        meta = store.create_version(demo_graph_text)
        store.publish_version(meta.version_id)
        store.register_bot(dict(demo_bot, published_version=meta.version_id))
        rt = BotRuntime(store, "demo", clock=VirtualClock(START))
        run = [m.body for m in rt.handle_inbound("user-a", "hello")]
        run += [m.body for m in rt.handle_inbound("user-a", "19:00")]
        rt.clock.advance(timedelta(hours=10))
        run += [m.body for f in rt.tick() for m in f.messages]
        outputs.append(run)
    assert outputs[0] == outputs[1]


def test_different_users_get_independent_sessions(runtime):
    onboard(runtime, raw="user-a")
    onboard(runtime, raw="user-b", answer="20:00")
    a = runtime.pseudonym("user-a")
    b = runtime.pseudonym("user-b")
    assert a != b
    assert runtime.checkin_for(a).time_of_day == 19 * 60
    assert runtime.checkin_for(b).time_of_day == 20 * 60
    sa = runtime.store.load_session("demo", a)
    sb = runtime.store.load_session("demo", b)
    assert sa.user_id != sb.user_id
    assert sa.rng_state != sb.rng_state


def test_refresh_picks_up_new_registration(runtime, published_demo):
    store, version_id = published_demo
    config = dict(store.get_bot("demo"), program_length_days=5)
    store.register_bot(config)
    runtime.refresh()
    assert runtime.program_length_days == 5

import json

import pytest

from dialogkit import ContentStore, load_graph
from dialogkit.demo import bot_config, graph_text


def base_doc(nodes: dict, **overrides) -> dict:
    """Minimal well-formed document around a node table.

    Entry points default to the first node for all three unless given.
    """
    first = next(iter(nodes))
    doc = {
        "graph_id": "g",
        "entry_points": {"onboarding": first, "prompted": first, "unprompted": first},
        "nodes": nodes,
    }
    doc.update(overrides)
    return doc


def build_graph(nodes: dict, **overrides):
    return load_graph(json.dumps(base_doc(nodes, **overrides)))


def end_at(node_id: str) -> dict:
    return {node_id: {"kind": "end"}}


@pytest.fixture
def demo_graph_text() -> str:
    return graph_text()


@pytest.fixture
def demo_bot() -> dict:
    return bot_config()


@pytest.fixture
def store(tmp_path) -> ContentStore:
    return ContentStore(tmp_path / "data")


@pytest.fixture
def published_demo(store, demo_graph_text, demo_bot):
    """Store with the demo graph published and the demo bot registered."""
    meta = store.create_version(demo_graph_text)
    store.publish_version(meta.version_id)
    cfg = dict(demo_bot)
    cfg["published_version"] = meta.version_id
    store.register_bot(cfg)
    return store, meta.version_id


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    try:
        from test_acceptance import VERDICTS
    except Exception:
        return
    if VERDICTS:
        terminalreporter.section("acceptance gates")
        for line in VERDICTS:
            terminalreporter.write_line(line)

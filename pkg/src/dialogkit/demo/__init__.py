"""Bundled demo content: a small three-week coaching bot.

The risk lexicon in bot.json is a placeholder for exercising the
escalation path in tests and demos.  It is not a clinically validated
instrument; see the project README before reusing any of it.
"""

from __future__ import annotations

import json
from importlib import resources


def _text(name: str) -> str:
    return resources.files(__package__).joinpath(name).read_text(encoding="utf-8")


def graph_text() -> str:
    """The demo graph document, as serialized JSON."""
    return _text("graph.json")


def bot_config() -> dict:
    """The demo bot registration config."""
    return json.loads(_text("bot.json"))


def script(name: str = "21day") -> str:
    """A bundled simulation script: '21day' or 'escalation'."""
    return _text(f"script-{name}.txt")

"""Shared fixtures: the reference domain, worlds, and script builders.

Scripted-provider fixtures are built programmatically: helpers here emit
the tag -> response entries that a whole pipeline run will look up.
"""

from __future__ import annotations

import json

import pytest

from storyloom.compiler import (
    CompilerConfig,
    coherency_tag,
    fulfillment_tag,
    motivation_tag,
    npc_tag,
    plan_tag,
    player_tag,
)
from storyloom.domain import load_reference_domain
from storyloom.llm import ScriptedProvider
from storyloom.world import default_placement, init_world


@pytest.fixture(scope="session")
def domain():
    return load_reference_domain()


@pytest.fixture
def world(domain):
    return init_world(domain, default_placement(domain))


@pytest.fixture
def scattered_world(domain):
    """Characters spread out: only hunter and deer share a location."""
    return init_world(
        domain,
        {
            "ant": "brook",
            "dove": "mountain",
            "hunter": "forest",
            "witch": "witch_house",
            "cat": "village",
            "deer": "forest",
        },
    )


# ---------------------------------------------------------------------------
# Script builders
# ---------------------------------------------------------------------------

def action_json(subject: str, call: str, thought: str | None = None) -> dict:
    entry = {"subject": subject, "action": call}
    if thought:
        entry["thought"] = thought
    return entry


def plan_response(*entries) -> str:
    """JSON plan reply from (subject, call[, thought]) tuples."""
    return json.dumps([action_json(*e) for e in entries])


def approve_plan_entries(event_index: int, plan_len: int, round_no: int = 1,
                         prefix: str = "") -> dict[str, str]:
    """Reviewer entries that wave a plan through."""
    p = f"{prefix}:" if prefix else ""
    entries = {f"{p}{coherency_tag(event_index, round_no)}": "OK"}
    for i in range(plan_len):
        entries[f"{p}{motivation_tag(event_index, round_no, i)}"] = json.dumps(
            {"established": True, "explanation": ""}
        )
    return entries


def event_entries(event_index: int, plan, round_no: int = 1, prefix: str = "") -> dict[str, str]:
    """Plan + approving review for one outline event."""
    p = f"{prefix}:" if prefix else ""
    entries = {f"{p}{plan_tag(event_index, round_no)}": plan_response(*plan)}
    entries.update(approve_plan_entries(event_index, len(plan), round_no, prefix))
    return entries


def no_fulfillment_entries(event_count: int, prefix: str = "") -> dict[str, str]:
    p = f"{prefix}:" if prefix else ""
    return {
        f"{p}{fulfillment_tag(k)}": json.dumps({"fulfilled": False, "actions": []})
        for k in range(1, event_count)
    }


def npc_pass_entries(turns: int, npc_ids, prefix: str = "") -> dict[str, str]:
    """NPC turns that all pass; npc_ids must follow the loop's rotation."""
    p = f"{prefix}:" if prefix else ""
    return {f"{p}{npc_tag(t, npc_ids[t])}": "pass" for t in range(turns)}


def player_entries(interlude_index: int, ptype: str, actions, prefix: str = "") -> dict[str, str]:
    p = f"{prefix}:" if prefix else ""
    return {f"{p}{player_tag(interlude_index, ptype)}": plan_response(*actions)}


def metric_entries(variant_id: str, intent: str = "0.4", emergence: str = "0.3") -> dict[str, str]:
    """Judged-score entries for one variant (full plot + progression stages)."""
    entries = {
        f"intent#{variant_id}": intent,
        f"emergence#{variant_id}": emergence,
    }
    for pct in (25, 50, 75):
        entries[f"intent#{variant_id}@{pct}"] = intent
        entries[f"emergence#{variant_id}@{pct}"] = emergence
    return entries


def scripted(*entry_dicts, **extra) -> ScriptedProvider:
    script: dict[str, str] = {}
    for d in entry_dicts:
        script.update(d)
    script.update(extra)
    return ScriptedProvider(script)


def queue_player(actions):
    """Player source that feeds a fixed action queue."""
    queue = list(actions)

    def source(world, domain, records, needed, reason):
        take = queue[:needed]
        del queue[:needed]
        return take

    return source


@pytest.fixture
def config_no_npc():
    return CompilerConfig(npc_turns_per_interlude=0)

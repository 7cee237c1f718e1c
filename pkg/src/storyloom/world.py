"""World state and deterministic execution of character actions.

WorldState values are treated as immutable: ``execute`` returns a new
state plus an EventRecord whose deltas replay the transition exactly.
Action semantics:

- ``moveTo(L)``: sets the subject's position; always executable while alive.
- ``speakTo(C, text)``: both colocated and alive; the utterance lands in
  both characters' memories.
- ``attack(C)``: colocated, both alive; target loses 1 health, is flagged
  in danger, and its relationship toward the attacker drops by 1; health
  reaching 0 kills.
- ``kill(C)``: colocated, both alive; target's health 0, dead.
- ``save(C)``: colocated, target alive and in danger; clears the danger
  flag and raises the target's relationship toward the rescuer by 1.
- ``think(text)``: memory entry for the subject only.

Memory entries are plain sentences ("hunter attacked deer at forest") so
they can be pasted verbatim into planner prompts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

from .domain import StoryDomain, action_signature
from .errors import PreconditionError, SnapshotError, UnknownActionError, WorldError

DEFAULT_HEALTH = 3

ORIGIN_PLOT = "plot-execution"
ORIGIN_PLAYER = "player"
ORIGIN_NPC = "npc-simulation"
ORIGINS = (ORIGIN_PLOT, ORIGIN_PLAYER, ORIGIN_NPC)


@dataclass(frozen=True)
class ActionInstance:
    subject: str
    action: str
    arguments: tuple[str, ...] = ()
    thought: str | None = None

    def render(self) -> str:
        """Call-syntax rendering, e.g. ``dove save(ant)``."""
        args = ", ".join(self.arguments)
        return f"{self.subject} {self.action}({args})"


class Delta(NamedTuple):
    """One state-variable change: dotted path, old value, new value."""

    path: str
    old: object
    new: object


@dataclass(frozen=True)
class EventRecord:
    action: ActionInstance
    turn: int
    resulting_deltas: tuple[Delta, ...]
    origin: str = ORIGIN_PLOT


@dataclass
class WorldState:
    positions: dict[str, str]
    alive: dict[str, bool]
    health: dict[str, int]
    in_danger: dict[str, bool]
    relationships: dict[str, dict[str, int]]
    memories: dict[str, list[str]]
    turn_counter: int = 0


class Verdict(NamedTuple):
    """Executability answer: a boolean plus a human-readable reason."""

    ok: bool
    reason: str


def init_world(domain: StoryDomain, placement: dict[str, str]) -> WorldState:
    """Fresh world: everyone alive at their placed location, no history."""
    for char_id in domain.character_ids():
        if char_id not in placement:
            raise WorldError(f"placement missing character {char_id!r}")
    for char_id, loc_id in placement.items():
        if not domain.has_character(char_id):
            raise WorldError(f"placement names unknown character {char_id!r}")
        if not domain.has_location(loc_id):
            raise WorldError(f"placement maps {char_id!r} to unknown location {loc_id!r}")
    chars = domain.character_ids()
    return WorldState(
        positions={c: placement[c] for c in chars},
        alive={c: True for c in chars},
        health={c: DEFAULT_HEALTH for c in chars},
        in_danger={c: False for c in chars},
        relationships={c: {o: 0 for o in chars if o != c} for c in chars},
        memories={c: [] for c in chars},
        turn_counter=0,
    )


def default_placement(domain: StoryDomain) -> dict[str, str]:
    """Everyone starts at the domain's first location."""
    start = domain.locations[0].id
    return {c: start for c in domain.character_ids()}


def validate_action(domain: StoryDomain, a: ActionInstance) -> list[str]:
    """Static schema checks; returns a list of problems (empty = valid)."""
    problems: list[str] = []
    if not domain.has_character(a.subject):
        problems.append(f"unknown subject {a.subject!r}")
    try:
        spec = action_signature(domain, a.action)
    except UnknownActionError as exc:
        problems.append(str(exc))
        return problems
    if len(a.arguments) != len(spec.parameters):
        problems.append(
            f"{a.action} expects {len(spec.parameters)} argument(s), got {len(a.arguments)}"
        )
        return problems
    for value, param in zip(a.arguments, spec.parameters):
        if param.kind == "character" and not domain.has_character(value):
            problems.append(f"{param.role}: unknown character {value!r}")
        elif param.kind == "location" and not domain.has_location(value):
            problems.append(f"{param.role}: unknown location {value!r}")
        elif param.kind == "free-text" and not str(value).strip():
            problems.append(f"{param.role}: empty text")
    return problems


def is_executable(world: WorldState, a: ActionInstance, domain: StoryDomain) -> Verdict:
    """World-level precondition check for a schema-valid action."""
    spec = action_signature(domain, a.action)
    if not world.alive.get(a.subject, False):
        return Verdict(False, "subject not alive")
    targets = [a.arguments[i] for i in spec.character_roles()]
    for target in targets:
        if target == a.subject:
            return Verdict(False, "cannot target self")
        if not world.alive.get(target, False):
            return Verdict(False, f"target {target} not alive")
    if spec.requires_colocation:
        here = world.positions[a.subject]
        for target in targets:
            if world.positions[target] != here:
                return Verdict(False, "not colocated")
    if a.action == "save":
        target = targets[0]
        if not world.in_danger.get(target, False):
            return Verdict(False, f"target {target} not in danger")
    return Verdict(True, "ok")


def _copy(world: WorldState) -> WorldState:
    return WorldState(
        positions=dict(world.positions),
        alive=dict(world.alive),
        health=dict(world.health),
        in_danger=dict(world.in_danger),
        relationships={c: dict(r) for c, r in world.relationships.items()},
        memories={c: list(m) for c, m in world.memories.items()},
        turn_counter=world.turn_counter,
    )


def _add_memory(pre: WorldState, post: WorldState, deltas: list[Delta], char: str, entry: str):
    post.memories[char] = post.memories[char] + [entry]
    deltas.append(Delta(f"memories.{char}", list(pre.memories[char]), list(post.memories[char])))


def execute(
    world: WorldState,
    a: ActionInstance,
    domain: StoryDomain,
    origin: str = ORIGIN_PLOT,
) -> tuple[WorldState, EventRecord]:
    """Apply one action; returns the new world and the event record.

    Raises WorldError on schema problems and PreconditionError with the
    same reason ``is_executable`` reports when preconditions fail.
    """
    problems = validate_action(domain, a)
    if problems:
        raise WorldError(f"invalid action {a.render()}: " + "; ".join(problems))
    verdict = is_executable(world, a, domain)
    if not verdict.ok:
        raise PreconditionError(verdict.reason)

    pre = world
    post = _copy(world)
    deltas: list[Delta] = []
    loc = pre.positions[a.subject]

    def set_value(path: str, old, new):
        deltas.append(Delta(path, old, new))

    if a.action == "moveTo":
        dest = a.arguments[0]
        if dest != loc:
            post.positions[a.subject] = dest
            set_value(f"positions.{a.subject}", loc, dest)
    elif a.action == "speakTo":
        target, text = a.arguments[0], a.arguments[1]
        entry = f'{a.subject} said to {target} at {loc}: "{text}"'
        _add_memory(pre, post, deltas, a.subject, entry)
        _add_memory(pre, post, deltas, target, entry)
    elif a.action == "attack":
        target = a.arguments[0]
        # target alive implies health >= 1, so this never goes negative
        new_health = pre.health[target] - 1
        post.health[target] = new_health
        set_value(f"health.{target}", pre.health[target], new_health)
        if not pre.in_danger[target]:
            post.in_danger[target] = True
            set_value(f"in_danger.{target}", False, True)
        new_rel = pre.relationships[target][a.subject] - 1
        post.relationships[target][a.subject] = new_rel
        set_value(f"relationships.{target}.{a.subject}", new_rel + 1, new_rel)
        if new_health == 0:
            post.alive[target] = False
            set_value(f"alive.{target}", True, False)
        entry = f"{a.subject} attacked {target} at {loc}"
        _add_memory(pre, post, deltas, a.subject, entry)
        _add_memory(pre, post, deltas, target, entry)
    elif a.action == "kill":
        target = a.arguments[0]
        if pre.health[target] != 0:
            post.health[target] = 0
            set_value(f"health.{target}", pre.health[target], 0)
        post.alive[target] = False
        set_value(f"alive.{target}", True, False)
        entry = f"{a.subject} killed {target} at {loc}"
        _add_memory(pre, post, deltas, a.subject, entry)
        _add_memory(pre, post, deltas, target, entry)
    elif a.action == "save":
        target = a.arguments[0]
        post.in_danger[target] = False
        set_value(f"in_danger.{target}", True, False)
        new_rel = pre.relationships[target][a.subject] + 1
        post.relationships[target][a.subject] = new_rel
        set_value(f"relationships.{target}.{a.subject}", new_rel - 1, new_rel)
        entry = f"{a.subject} saved {target} at {loc}"
        _add_memory(pre, post, deltas, a.subject, entry)
        _add_memory(pre, post, deltas, target, entry)
    elif a.action == "think":
        entry = f'{a.subject} thought: "{a.arguments[0]}"'
        _add_memory(pre, post, deltas, a.subject, entry)
    else:
        # Actions outside the canonical six execute as no-ops beyond the
        # turn tick; alternative domains can extend the semantics table.
        pass

    post.turn_counter = pre.turn_counter + 1
    deltas.append(Delta("turn_counter", pre.turn_counter, post.turn_counter))

    record = EventRecord(
        action=a,
        turn=pre.turn_counter,
        resulting_deltas=tuple(deltas),
        origin=origin,
    )
    return post, record


def apply_deltas(world: WorldState, deltas: tuple[Delta, ...] | list[Delta]) -> WorldState:
    """Replay recorded deltas onto a state (used to verify completeness)."""
    post = _copy(world)
    for path, _old, new in deltas:
        parts = path.split(".")
        if parts[0] == "turn_counter":
            post.turn_counter = int(new)  # type: ignore[arg-type]
        elif parts[0] == "positions":
            post.positions[parts[1]] = str(new)
        elif parts[0] == "alive":
            post.alive[parts[1]] = bool(new)
        elif parts[0] == "health":
            post.health[parts[1]] = int(new)  # type: ignore[arg-type]
        elif parts[0] == "in_danger":
            post.in_danger[parts[1]] = bool(new)
        elif parts[0] == "relationships":
            post.relationships[parts[1]][parts[2]] = int(new)  # type: ignore[arg-type]
        elif parts[0] == "memories":
            post.memories[parts[1]] = list(new)  # type: ignore[arg-type]
        else:
            raise WorldError(f"unknown delta path {path!r}")
    return post


# ---------------------------------------------------------------------------
# Serialization, snapshots
# ---------------------------------------------------------------------------

def world_to_dict(world: WorldState) -> dict:
    return {
        "positions": dict(sorted(world.positions.items())),
        "alive": dict(sorted(world.alive.items())),
        "health": dict(sorted(world.health.items())),
        "in_danger": dict(sorted(world.in_danger.items())),
        "relationships": {
            c: dict(sorted(r.items())) for c, r in sorted(world.relationships.items())
        },
        "memories": {c: list(m) for c, m in sorted(world.memories.items())},
        "turn_counter": world.turn_counter,
    }


def world_from_dict(doc: dict) -> WorldState:
    try:
        return WorldState(
            positions=dict(doc["positions"]),
            alive={k: bool(v) for k, v in doc["alive"].items()},
            health={k: int(v) for k, v in doc["health"].items()},
            in_danger={k: bool(v) for k, v in doc["in_danger"].items()},
            relationships={k: {o: int(s) for o, s in v.items()} for k, v in doc["relationships"].items()},
            memories={k: list(v) for k, v in doc["memories"].items()},
            turn_counter=int(doc["turn_counter"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise WorldError(f"malformed world document: {exc}") from exc


def world_to_json(world: WorldState) -> str:
    """Canonical serialization with stable key order."""
    return json.dumps(world_to_dict(world), sort_keys=True, ensure_ascii=False)


def worlds_equal(a: WorldState, b: WorldState) -> bool:
    return world_to_dict(a) == world_to_dict(b)


def snapshot(world: WorldState) -> str:
    """Opaque immutable token for the given state."""
    return world_to_json(world)


def restore(token: str) -> WorldState:
    try:
        doc = json.loads(token)
        if not isinstance(doc, dict):
            raise WorldError("not a world document")
        return world_from_dict(doc)
    except (json.JSONDecodeError, WorldError) as exc:
        raise SnapshotError(f"unknown snapshot token: {exc}") from exc


# ---------------------------------------------------------------------------
# Prompt rendering
# ---------------------------------------------------------------------------

def describe_world(world: WorldState, domain: StoryDomain, memory_limit: int = 8) -> str:
    """Compact, deterministic world description for planner prompts."""
    lines = []
    for char_id in domain.character_ids():
        if world.alive[char_id]:
            status = f"at {world.positions[char_id]}, health {world.health[char_id]}"
            if world.in_danger[char_id]:
                status += ", IN DANGER"
        else:
            status = "dead"
        lines.append(f"- {char_id}: {status}")
        for entry in world.memories[char_id][-memory_limit:]:
            lines.append(f"    remembers: {entry}")
    return "\n".join(lines)

"""Story world definition: characters, locations, and the action schema.

A domain document is a JSON file with top-level keys ``title``,
``characters``, ``locations`` and ``actions``. A validated domain is
immutable and safe to share across threads.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from pathlib import Path

from .errors import DomainParseError, DomainValidationError, UnknownActionError

PARAMETER_KINDS = ("character", "location", "free-text")

DATA_DIR = Path(__file__).parent / "data"
REFERENCE_DOMAIN_PATH = DATA_DIR / "fairytale_forest.json"


@dataclass(frozen=True)
class Character:
    id: str
    name: str
    description: str
    is_player_controllable: bool = False


@dataclass(frozen=True)
class Location:
    id: str
    name: str


@dataclass(frozen=True)
class ActionParameter:
    role: str
    kind: str  # one of PARAMETER_KINDS


@dataclass(frozen=True)
class ActionSpec:
    name: str
    parameters: tuple[ActionParameter, ...]
    requires_colocation: bool
    mutates_world: bool

    def character_roles(self) -> list[int]:
        """Indices of parameters that name a character."""
        return [i for i, p in enumerate(self.parameters) if p.kind == "character"]


@dataclass(frozen=True)
class StoryDomain:
    title: str
    characters: tuple[Character, ...]
    locations: tuple[Location, ...]
    schema: tuple[ActionSpec, ...]

    def character(self, char_id: str) -> Character:
        for c in self.characters:
            if c.id == char_id:
                return c
        raise KeyError(char_id)

    def has_character(self, char_id: str) -> bool:
        return any(c.id == char_id for c in self.characters)

    def has_location(self, loc_id: str) -> bool:
        return any(l.id == loc_id for l in self.locations)

    def character_ids(self) -> list[str]:
        return [c.id for c in self.characters]

    def location_ids(self) -> list[str]:
        return [l.id for l in self.locations]

    def player_characters(self) -> list[str]:
        return [c.id for c in self.characters if c.is_player_controllable]


def action_signature(domain: StoryDomain, name: str) -> ActionSpec:
    """Resolve an action name to its spec, or raise UnknownActionError."""
    for spec in domain.schema:
        if spec.name == name:
            return spec
    known = ", ".join(s.name for s in domain.schema)
    raise UnknownActionError(f"unknown action {name!r} (known: {known})")


def _require(doc: dict, key: str, path: str) -> object:
    if key not in doc:
        raise DomainValidationError(f"{path}{key}: missing")
    return doc[key]


def _check_unique(ids: list[str], path: str) -> None:
    seen = set()
    for i, value in enumerate(ids):
        if value in seen:
            raise DomainValidationError(f"{path}[{i}]: duplicate {value!r}")
        seen.add(value)


def load_domain(source: bytes | str) -> StoryDomain:
    """Parse and validate a domain document.

    Raises DomainParseError for malformed JSON and DomainValidationError
    (message prefixed with a field path) for structural problems.
    """
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise DomainParseError(f"malformed domain document: {exc}") from exc
    if not isinstance(doc, dict):
        raise DomainValidationError(": document must be a JSON object")

    title = str(_require(doc, "title", ""))

    raw_chars = _require(doc, "characters", "")
    if not raw_chars:
        raise DomainValidationError("characters: empty")
    characters = []
    for i, entry in enumerate(raw_chars):
        path = f"characters[{i}]."
        char_id = sys.intern(str(_require(entry, "id", path)))
        description = str(_require(entry, "description", path))
        if not description.strip():
            raise DomainValidationError(f"{path}description: empty")
        characters.append(
            Character(
                id=char_id,
                name=str(entry.get("name", char_id)),
                description=description,
                is_player_controllable=bool(entry.get("player_controllable", False)),
            )
        )
    _check_unique([c.id for c in characters], "characters")

    raw_locs = _require(doc, "locations", "")
    if not raw_locs:
        raise DomainValidationError("locations: empty")
    locations = []
    for i, entry in enumerate(raw_locs):
        path = f"locations[{i}]."
        loc_id = sys.intern(str(_require(entry, "id", path)))
        locations.append(Location(id=loc_id, name=str(entry.get("name", loc_id))))
    _check_unique([l.id for l in locations], "locations")

    raw_actions = _require(doc, "actions", "")
    if not raw_actions:
        raise DomainValidationError("actions: empty")
    actions = []
    for i, entry in enumerate(raw_actions):
        path = f"actions[{i}]."
        name = sys.intern(str(_require(entry, "name", path)))
        params = []
        for j, p in enumerate(entry.get("parameters", [])):
            ppath = f"{path}parameters[{j}]."
            role = str(_require(p, "role", ppath))
            kind = str(_require(p, "kind", ppath))
            if kind not in PARAMETER_KINDS:
                raise DomainValidationError(f"{ppath}kind: unknown kind {kind!r}")
            params.append(ActionParameter(role=role, kind=kind))
        _check_unique([p.role for p in params], f"{path}parameters")
        actions.append(
            ActionSpec(
                name=name,
                parameters=tuple(params),
                requires_colocation=bool(entry.get("requires_colocation", False)),
                mutates_world=bool(entry.get("mutates_world", True)),
            )
        )
    _check_unique([a.name for a in actions], "actions")

    return StoryDomain(
        title=title,
        characters=tuple(characters),
        locations=tuple(locations),
        schema=tuple(actions),
    )


def load_domain_file(path: str | Path) -> StoryDomain:
    return load_domain(Path(path).read_bytes())


def load_reference_domain() -> StoryDomain:
    """The bundled Fairytale Forest domain."""
    return load_domain_file(REFERENCE_DOMAIN_PATH)


def domain_to_dict(domain: StoryDomain) -> dict:
    return {
        "title": domain.title,
        "characters": [
            {
                "id": c.id,
                "name": c.name,
                "description": c.description,
                "player_controllable": c.is_player_controllable,
            }
            for c in domain.characters
        ],
        "locations": [{"id": l.id, "name": l.name} for l in domain.locations],
        "actions": [
            {
                "name": a.name,
                "parameters": [{"role": p.role, "kind": p.kind} for p in a.parameters],
                "requires_colocation": a.requires_colocation,
                "mutates_world": a.mutates_world,
            }
            for a in domain.schema
        ],
    }


def serialize_domain(domain: StoryDomain) -> str:
    """Canonical JSON rendering; load_domain(serialize_domain(d)) == d."""
    return json.dumps(domain_to_dict(domain), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def describe_schema(domain: StoryDomain) -> str:
    """Action schema rendered for prompts."""
    lines = []
    for spec in domain.schema:
        params = ", ".join(f"{p.role}: {p.kind}" for p in spec.parameters)
        extra = " (actors must be colocated)" if spec.requires_colocation else ""
        lines.append(f"- {spec.name}({params}){extra}")
    return "\n".join(lines)


def describe_characters(domain: StoryDomain) -> str:
    return "\n".join(f"- {c.id}: {c.description}" for c in domain.characters)

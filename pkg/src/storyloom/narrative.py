"""The narrative space and its three representations: pivot, outline, variants."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import NamedTuple

from . import llm
from .domain import StoryDomain, describe_schema
from .errors import ExtractionError
from .plots import GamePlot, PlotSegment, plot_from_dict, plot_to_dict
from .world import ActionInstance, EventRecord, validate_action

log = logging.getLogger("storyloom.narrative")

PLAYER_TYPES = ("positive", "negative", "roleplayer", "human")


class AbstractionLevel(enum.IntEnum):
    """Outline abstraction ladder, ordered from concrete to abstract."""

    BEAT = 0
    SCENE = 1
    SEQUENCE = 2
    ACT = 3
    STORY = 4

    @classmethod
    def parse(cls, name: str) -> "AbstractionLevel":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            valid = ", ".join(l.name.lower() for l in cls)
            raise ValueError(f"unknown abstraction level {name!r} (valid: {valid})") from None

    @property
    def label(self) -> str:
        return self.name.lower()


@dataclass
class OutlineEvent:
    index: int
    text: str


@dataclass
class Outline:
    events: list[OutlineEvent]
    level: AbstractionLevel
    moral: str = ""
    user_spec: str | None = None

    def texts(self) -> list[str]:
        return [e.text for e in self.events]


def make_outline(texts: list[str], level: AbstractionLevel, moral: str = "",
                 user_spec: str | None = None) -> Outline:
    cleaned = [t.strip() for t in texts if t and t.strip()]
    if not cleaned:
        raise ValueError("outline must contain at least one event")
    return Outline(
        events=[OutlineEvent(index=i, text=t) for i, t in enumerate(cleaned)],
        level=level,
        moral=moral,
        user_spec=user_spec,
    )


class ProgressionPoint(NamedTuple):
    stage: float
    intent_distance: float
    emergence_distance: float


@dataclass
class Variant:
    id: str
    plot: GamePlot
    player_type: str = "human"
    intent_distance: float = 0.0
    emergence_distance: float = 0.0
    progression: list[ProgressionPoint] = field(default_factory=list)
    rejected: bool = False
    source_text: str = ""


@dataclass
class NarrativeSpace:
    id: str
    domain_ref: str
    pivot_id: str
    moral: str
    outline: Outline | None = None
    variants: list[Variant] = field(default_factory=list)

    def variant(self, variant_id: str) -> Variant:
        for v in self.variants:
            if v.id == variant_id:
                return v
        raise KeyError(f"unknown variant {variant_id!r}")

    def pivot(self) -> Variant:
        return self.variant(self.pivot_id)

    def active_variants(self) -> list[Variant]:
        """Non-rejected variants, the inputs for outline regeneration."""
        return [v for v in self.variants if not v.rejected]


# ---------------------------------------------------------------------------
# Space operations
# ---------------------------------------------------------------------------

def set_pivot(space: NarrativeSpace, variant_id: str) -> NarrativeSpace:
    """Move the pivot flag; exactly one variant is the pivot at all times."""
    variant = space.variant(variant_id)
    if variant.rejected:
        raise ValueError(f"variant {variant_id!r} is rejected and cannot become the pivot")
    space.pivot_id = variant.id
    return space


def reject_variant(space: NarrativeSpace, variant_id: str) -> NarrativeSpace:
    variant = space.variant(variant_id)
    if variant.id == space.pivot_id:
        raise ValueError("pivot cannot be rejected")
    variant.rejected = True
    return space


def restore_variant(space: NarrativeSpace, variant_id: str) -> NarrativeSpace:
    space.variant(variant_id).rejected = False
    return space


def extract_pivot(
    narrative_text: str,
    domain: StoryDomain,
    provider,
    moral: str = "",
    variant_id: str = "pivot",
) -> Variant:
    """Turn a prose narrative into a pivot variant of grounded events.

    Sentences that cannot be grounded in the domain are skipped with a
    warning; extracting nothing at all is an error.
    """
    if not narrative_text or not narrative_text.strip():
        raise ExtractionError("no events: narrative text is empty")

    request = llm.CompletionRequest(
        template_id="pivot_extract",
        variables={
            "domain_title": domain.title,
            "characters": "\n".join(f"- {c.id}: {c.description}" for c in domain.characters),
            "locations": "\n".join(f"- {l.id}" for l in domain.locations),
            "schema": describe_schema(domain),
            "narrative": narrative_text.strip(),
        },
        temperature=llm.JUDGE_TEMPERATURE,
        tag="pivot_extract",
    )
    entries = llm.complete_structured(provider, request, parse_action_list)

    records: list[EventRecord] = []
    for entry in entries:
        problems = validate_action(domain, entry)
        if problems:
            log.warning("skipping unparseable event %s: %s", entry.render(), "; ".join(problems))
            continue
        records.append(
            EventRecord(action=entry, turn=len(records), resulting_deltas=(), origin="plot-execution")
        )
    if not records:
        raise ExtractionError("no events could be grounded in the domain")

    plot = GamePlot(segments=[PlotSegment(event_index=0, records=records)])
    return Variant(id=variant_id, plot=plot, player_type="human", source_text=narrative_text)


def parse_action_list(raw: str) -> list[ActionInstance]:
    """Parse a model reply holding a JSON array of action entries."""
    value = llm.extract_json_block(raw)
    if not isinstance(value, list):
        raise ValueError("expected a JSON array of actions")
    return [parse_action_entry(item) for item in value]


def parse_action_entry(item: object) -> ActionInstance:
    """One action entry; accepts call syntax or separate arguments."""
    if not isinstance(item, dict):
        raise ValueError(f"action entry must be an object, got {type(item).__name__}")
    if "subject" not in item or "action" not in item:
        raise ValueError("action entry needs 'subject' and 'action'")
    subject = str(item["subject"]).strip()
    action_field = str(item["action"]).strip()
    if "arguments" in item and item["arguments"] is not None:
        name = action_field
        args = [str(a) for a in item["arguments"]]
        if "(" in name:
            name, _ = llm.parse_call_syntax(name)
    else:
        name, args = llm.parse_call_syntax(action_field)
    thought = item.get("thought")
    return ActionInstance(
        subject=subject,
        action=name,
        arguments=tuple(args),
        thought=str(thought) if thought else None,
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def outline_to_dict(outline: Outline) -> dict:
    return {
        "events": outline.texts(),
        "level": outline.level.label,
        "moral": outline.moral,
        "user_spec": outline.user_spec,
    }


def outline_from_dict(doc: dict) -> Outline:
    return make_outline(
        [str(t) for t in doc["events"]],
        AbstractionLevel.parse(str(doc["level"])),
        moral=str(doc.get("moral", "")),
        user_spec=doc.get("user_spec"),
    )


def variant_to_dict(v: Variant) -> dict:
    return {
        "id": v.id,
        "player_type": v.player_type,
        "intent_distance": v.intent_distance,
        "emergence_distance": v.emergence_distance,
        "progression": [
            {"stage": p.stage, "intent_distance": p.intent_distance,
             "emergence_distance": p.emergence_distance}
            for p in v.progression
        ],
        "rejected": v.rejected,
        "source_text": v.source_text,
        "plot": plot_to_dict(v.plot),
    }


def variant_from_dict(doc: dict) -> Variant:
    return Variant(
        id=str(doc["id"]),
        plot=plot_from_dict(doc["plot"]),
        player_type=str(doc.get("player_type", "human")),
        intent_distance=float(doc.get("intent_distance", 0.0)),
        emergence_distance=float(doc.get("emergence_distance", 0.0)),
        progression=[
            ProgressionPoint(float(p["stage"]), float(p["intent_distance"]),
                             float(p["emergence_distance"]))
            for p in doc.get("progression", [])
        ],
        rejected=bool(doc.get("rejected", False)),
        source_text=str(doc.get("source_text", "")),
    )


def space_to_dict(space: NarrativeSpace) -> dict:
    return {
        "id": space.id,
        "domain_ref": space.domain_ref,
        "pivot": space.pivot_id,
        "moral": space.moral,
        "outline": outline_to_dict(space.outline) if space.outline else None,
        "variants": [variant_to_dict(v) for v in space.variants],
    }


def space_from_dict(doc: dict) -> NarrativeSpace:
    return NarrativeSpace(
        id=str(doc["id"]),
        domain_ref=str(doc["domain_ref"]),
        pivot_id=str(doc["pivot"]),
        moral=str(doc.get("moral", "")),
        outline=outline_from_dict(doc["outline"]) if doc.get("outline") else None,
        variants=[variant_from_dict(v) for v in doc.get("variants", [])],
    )

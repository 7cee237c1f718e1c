"""Outline generation at configurable abstraction, and fine-grained edits.

The instances -> outline chain runs in three stages: (1) creative plot
variations over the input instances, (2) candidate outlines at every
ladder level, (3) tailoring to the author's free-text requirement. The
tooltip produces word/phrase-level rewrites in either direction of the
abstraction hierarchy.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from . import llm
from .domain import StoryDomain, describe_characters
from .narrative import AbstractionLevel, Outline, Variant, make_outline
from .plots import render_plot_text

log = logging.getLogger("storyloom.abstraction")

DEFAULT_VARIATION_COUNT = 3
DEFAULT_SUGGESTION_COUNT = 3

DIRECTIONS = ("more_abstract", "more_concrete")
_DIRECTION_INSTRUCTIONS = {
    "more_abstract": (
        "Suggest MORE ABSTRACT replacements: superordinate terms higher in "
        "the linguistic taxonomy (as 'cat' generalizes to 'small animal' and "
        "then 'animal'), loosening who or what can fill the role."
    ),
    "more_concrete": (
        "Suggest MORE CONCRETE replacements: subordinate terms lower in the "
        "linguistic taxonomy (as 'cat' specializes to 'tabby cat'), "
        "consistent with the story domain."
    ),
}


def _instance_text(instance: Variant | str) -> str:
    if isinstance(instance, str):
        return instance
    rendered = render_plot_text(instance.plot)
    return rendered or instance.source_text


def _parse_string_list(raw: str, minimum: int = 1) -> list[str]:
    value = llm.extract_json_block(raw)
    if not isinstance(value, list):
        raise ValueError("expected a JSON array of strings")
    items = [str(s).strip() for s in value if str(s).strip()]
    if len(items) < minimum:
        raise ValueError(f"expected at least {minimum} non-empty string(s)")
    return items


def generate_outline_candidates(
    instances: list[Variant] | list[str],
    domain: StoryDomain,
    provider,
    moral: str = "",
    variation_count: int = DEFAULT_VARIATION_COUNT,
) -> dict[str, list[str]]:
    """Stages 1+2 of the chain: one candidate outline per ladder level."""
    texts = []
    for inst in instances:
        if isinstance(inst, Variant) and inst.rejected:
            continue
        rendered = _instance_text(inst)
        if rendered.strip():
            texts.append(rendered.strip())
    if not texts:
        raise ValueError("need at least one non-rejected instance")
    instances_block = "\n\n".join(f"Instance {i + 1}:\n{t}" for i, t in enumerate(texts))

    variations = llm.complete_structured(
        provider,
        llm.CompletionRequest(
            template_id="outline_variations",
            variables={
                "domain_title": domain.title,
                "characters": describe_characters(domain),
                "instances": instances_block,
                "count": str(variation_count),
            },
            tag="outline_variations",
        ),
        _parse_string_list,
    )

    def parse_candidates(raw: str) -> dict[str, list[str]]:
        value = llm.extract_json_block(raw)
        if not isinstance(value, dict):
            raise ValueError("expected a JSON object keyed by ladder level")
        candidates = {}
        for lvl in AbstractionLevel:
            events = value.get(lvl.label)
            if not isinstance(events, list) or not any(str(e).strip() for e in events):
                raise ValueError(f"missing or empty outline for level {lvl.label!r}")
            candidates[lvl.label] = [str(e).strip() for e in events if str(e).strip()]
        return candidates

    return llm.complete_structured(
        provider,
        llm.CompletionRequest(
            template_id="outline_candidates",
            variables={
                "domain_title": domain.title,
                "moral": moral,
                "instances": instances_block,
                "variations": "\n".join(f"- {v}" for v in variations),
            },
            tag="outline_candidates",
        ),
        parse_candidates,
    )


def instances_to_outline(
    instances: list[Variant] | list[str],
    level: AbstractionLevel,
    user_spec: str | None,
    domain: StoryDomain,
    provider,
    moral: str = "",
    variation_count: int = DEFAULT_VARIATION_COUNT,
) -> Outline:
    """Summarize instance commonalities into an outline at one ladder level."""
    candidates = generate_outline_candidates(
        instances, domain, provider, moral=moral, variation_count=variation_count
    )
    for lvl in AbstractionLevel:
        if lvl is not level:
            log.debug("alternate %s outline: %s", lvl.label, candidates[lvl.label])
    events = candidates[level.label]

    if user_spec and user_spec.strip():
        events = llm.complete_structured(
            provider,
            llm.CompletionRequest(
                template_id="outline_tailor",
                variables={
                    "outline": "\n".join(f"- {e}" for e in events),
                    "level": level.label,
                    "moral": moral,
                    "user_spec": user_spec.strip(),
                },
                tag="outline_tailor",
            ),
            _parse_string_list,
        )

    return make_outline(events, level, moral=moral, user_spec=user_spec)


# ---------------------------------------------------------------------------
# Abstraction tooltip
# ---------------------------------------------------------------------------

def abstraction_suggest(
    snippet: str,
    direction: str,
    context: Outline,
    provider,
    count: int = DEFAULT_SUGGESTION_COUNT,
) -> list[str]:
    """Replacement phrasings for a snippet of the outline."""
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}")
    outline_text = "\n".join(context.texts())
    if snippet not in outline_text:
        raise ValueError(f"snippet {snippet!r} not found in the outline")
    return llm.complete_structured(
        provider,
        llm.CompletionRequest(
            template_id="abstraction_suggest",
            variables={
                "snippet": snippet,
                "outline": outline_text,
                "direction_instruction": _DIRECTION_INSTRUCTIONS[direction],
                "count": str(count),
            },
            tag=f"abstraction#{direction}#{snippet}",
        ),
        _parse_string_list,
    )


def apply_suggestion(outline: Outline, snippet: str, replacement: str) -> Outline:
    """Replace the first occurrence of the snippet; result is a valid outline."""
    replaced = False
    events = []
    for text in outline.texts():
        if not replaced and snippet in text:
            text = text.replace(snippet, replacement, 1)
            replaced = True
        events.append(text)
    if not replaced:
        raise ValueError(f"snippet {snippet!r} not found in the outline")
    return make_outline(events, outline.level, moral=outline.moral, user_spec=outline.user_spec)


# ---------------------------------------------------------------------------
# Outline -> pivot mapping
# ---------------------------------------------------------------------------

@dataclass
class OutlineMapping:
    """Per outline event a half-open [start, end) range of pivot entries."""

    ranges: list[tuple[int, int]]
    uncovered: list[int]


def map_outline_to_pivot(outline: Outline, pivot: Variant, provider) -> OutlineMapping:
    """Ask the model which pivot entries support each outline event.

    Ranges are repaired to be ordered and disjoint: a range that would
    overlap its predecessor collapses to an empty range with a warning.
    """
    pivot_records = pivot.plot.all_records()
    if not outline.events or not pivot_records:
        raise ValueError("outline and pivot must both be non-empty")

    def parse(raw: str) -> dict[int, tuple[int, int]]:
        value = llm.extract_json_block(raw)
        if not isinstance(value, list):
            raise ValueError("expected a JSON array of range objects")
        mapping = {}
        for item in value:
            if not isinstance(item, dict) or not {"event", "start", "end"} <= set(item):
                raise ValueError("each range needs 'event', 'start' and 'end'")
            mapping[int(item["event"])] = (int(item["start"]), int(item["end"]))
        return mapping

    raw_ranges = llm.complete_structured(
        provider,
        llm.CompletionRequest(
            template_id="outline_mapping",
            variables={
                "outline": "\n".join(f"{e.index}: {e.text}" for e in outline.events),
                "pivot": "\n".join(f"{i}: {r.action.render()}" for i, r in enumerate(pivot_records)),
            },
            temperature=llm.JUDGE_TEMPERATURE,
            tag="outline_mapping",
        ),
        parse,
    )

    total = len(pivot_records)
    ranges: list[tuple[int, int]] = []
    cursor = 0
    for event in outline.events:
        start, end = raw_ranges.get(event.index, (cursor, cursor))
        start = max(0, min(start, total))
        end = max(start, min(end, total))
        if start < cursor:
            log.warning(
                "mapping for outline event %d overlaps its predecessor; recorded as unsupported",
                event.index,
            )
            start = end = cursor
        if start == end and event.index in raw_ranges and raw_ranges[event.index][0] != raw_ranges[event.index][1]:
            log.warning("outline event %d has no usable support range", event.index)
        ranges.append((start, end))
        cursor = max(cursor, end)

    covered = {i for start, end in ranges for i in range(start, end)}
    uncovered = [i for i in range(total) if i not in covered]
    if uncovered:
        log.warning("pivot entries not covered by any outline event: %s", uncovered)
    return OutlineMapping(ranges=ranges, uncovered=uncovered)

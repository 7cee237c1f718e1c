"""Simulated player behavior for variant generation.

Three proxy models drive play-throughs: positive players help, negative
players kill, role players stay in character. Each proposed action is
checked against the simulation before it is accepted.
"""

from __future__ import annotations

import enum
import logging

from . import llm, metrics
from .compiler import CompilerConfig, FALLBACK_THINK_TEXT, player_tag, run_game_loop
from .domain import StoryDomain, describe_schema
from .errors import PreconditionError, ProviderError, StructuredParseError
from .narrative import NarrativeSpace, Variant, parse_action_list
from .plots import render_records
from .world import ActionInstance, WorldState, default_placement, describe_world, init_world, is_executable, validate_action

log = logging.getLogger("storyloom.players")

PROPOSE_RETRIES = 2


class PlayerType(enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    ROLEPLAYER = "roleplayer"

    @property
    def template_id(self) -> str:
        return {
            PlayerType.POSITIVE: "player_positive",
            PlayerType.NEGATIVE: "player_negative",
            PlayerType.ROLEPLAYER: "player_roleplay",
        }[self]


def propose_action(
    ptype: PlayerType,
    player_character: str,
    world: WorldState,
    domain: StoryDomain,
    plot_so_far,
    provider,
    count: int = 1,
    interlude_index: int = 0,
    reject_reason: str | None = None,
) -> list[ActionInstance]:
    """Propose ``count`` executable actions for the player character.

    Invalid proposals are retried with the rejection reason appended to
    the prompt; after the retry budget the remaining slots fall back to a
    ``think`` action, which is always executable.
    """
    if not world.alive.get(player_character, False):
        raise PreconditionError("subject not alive")
    character = domain.character(player_character)

    base_variables = {
        "player": player_character,
        "player_description": character.description,
        "schema": describe_schema(domain),
        "world_state": describe_world(world, domain),
        "plot": render_records(list(plot_so_far)) or "(the story has not started)",
        "count": str(count),
        "memories": "\n".join(world.memories.get(player_character, [])) or "(none)",
    }

    reason = reject_reason
    for attempt in range(PROPOSE_RETRIES + 1):
        tag = player_tag(interlude_index, ptype.value)
        if attempt:
            tag += f"#retry{attempt}"
        feedback = f"\nYour previous proposal was rejected: {reason}. Choose differently.\n" if reason else ""
        request = llm.CompletionRequest(
            template_id=ptype.template_id,
            variables={**base_variables, "feedback": feedback},
            tag=tag,
        )
        try:
            actions = llm.complete_structured(provider, request, parse_action_list)
        except (StructuredParseError, ProviderError) as exc:
            log.warning("player proxy %s failed to answer: %s", ptype.value, exc)
            reason = "the reply could not be parsed"
            continue
        accepted, reason = _validate_proposal(actions, player_character, world, domain, count)
        if accepted is not None:
            return accepted
        log.warning("player proxy %s proposal rejected: %s", ptype.value, reason)

    log.warning("player proxy %s out of retries; falling back to think", ptype.value)
    return [
        ActionInstance(subject=player_character, action="think", arguments=(FALLBACK_THINK_TEXT,))
        for _ in range(count)
    ]


def _validate_proposal(actions, player_character, world, domain, count):
    """All-or-nothing check of a proposed action list against the world."""
    if len(actions) < count:
        return None, f"expected {count} action(s), got {len(actions)}"
    actions = actions[:count]
    current = world
    for a in actions:
        if a.subject != player_character:
            return None, f"you control {player_character}, not {a.subject}"
        problems = validate_action(domain, a)
        if problems:
            return None, "; ".join(problems)
        ok, why = is_executable(current, a, domain)
        if not ok:
            return None, f"{a.render()}: {why}"
        from .world import execute

        current, _ = execute(current, a, domain)
    return actions, None


def make_proxy_source(ptype: PlayerType, player_character: str, provider):
    """Adapt a proxy model to the game loop's player-source callable."""
    state = {"interlude": -1}

    def source(world, domain, plot_so_far, needed, reject_reason):
        # a fresh interlude starts whenever the loop asks without a rejection
        if reject_reason is None:
            state["interlude"] += 1
        return propose_action(
            ptype,
            player_character,
            world,
            domain,
            plot_so_far,
            provider,
            count=needed,
            interlude_index=state["interlude"],
            reject_reason=reject_reason,
        )

    return source


def generate_variants(
    space: NarrativeSpace,
    n_sets: int,
    domain: StoryDomain,
    provider,
    config: CompilerConfig | None = None,
    player_character: str | None = None,
) -> list[Variant]:
    """Simulate ``n_sets`` x 3 play-throughs, one per player type per set.

    Every variant carries intent/emergence coordinates and a progression
    series. A compilation failure yields an incomplete variant, never a
    batch failure.
    """
    if space.outline is None or not space.outline.events:
        raise ValueError("narrative space has no outline; generate one first")
    if not 1 <= n_sets <= 5:
        raise ValueError("n_sets must be between 1 and 5")
    config = config or CompilerConfig()
    if player_character is None:
        controllable = domain.player_characters()
        player_character = controllable[0] if controllable else domain.character_ids()[0]
    pivot = space.pivot()

    variants: list[Variant] = []
    for set_index in range(n_sets):
        for ptype in PlayerType:
            variant_id = f"v{set_index}-{ptype.value}"
            loop_provider = llm.PrefixedProvider(provider, f"set{set_index}.{ptype.value}")
            world = init_world(domain, default_placement(domain))
            plot = run_game_loop(
                space.outline,
                domain,
                world,
                make_proxy_source(ptype, player_character, loop_provider),
                loop_provider,
                config=config,
                player_character=player_character,
            )
            variant = Variant(id=variant_id, plot=plot, player_type=ptype.value)
            variant.intent_distance = metrics.intent_distance(variant, space.moral, provider)
            variant.emergence_distance = metrics.emergence_distance(variant, pivot, provider)
            variant.progression = metrics.progression_series(variant, pivot, space.moral, provider)
            variants.append(variant)
    return variants

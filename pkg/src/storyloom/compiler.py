"""Unfolds outline events into causally sound action sequences.

Each outline event goes through a generate -> review loop: a model drafts
an action sequence, a reviewer critiques coherency and per-character
motivation, and the simulated world checks causal soundness by actually
executing the draft against a snapshot. Causal failures block execution;
motivation failures are advisory. The main game loop alternates plot
execution, player actions, and NPC simulation until the outline is
exhausted.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

from . import llm
from .domain import StoryDomain, describe_characters, describe_schema
from .errors import CompilationError, PreconditionError, ProviderError, StructuredParseError, WorldError
from .narrative import Outline, OutlineEvent, parse_action_entry, parse_action_list
from .plots import GamePlot, Interlude, PlotSegment, render_plot_transcript
from .world import (
    ActionInstance,
    EventRecord,
    ORIGIN_NPC,
    ORIGIN_PLAYER,
    ORIGIN_PLOT,
    WorldState,
    describe_world,
    execute,
    is_executable,
    restore,
    snapshot,
    validate_action,
    world_from_dict,
    world_to_dict,
)

log = logging.getLogger("storyloom.compiler")

FALLBACK_THINK_TEXT = "I hesitate, unsure of what to do."
MAX_PLAYER_REASKS = 5

ForwardPlayerSource = Callable[
    [WorldState, StoryDomain, list[EventRecord], int, "str | None"],
    "list[ActionInstance]",
]


@dataclass
class ActionSequence:
    actions: list[ActionInstance]
    source_event: int = 0
    iteration: int = 1


class SoundnessVerdict(NamedTuple):
    index: int
    ok: bool
    reason: str


@dataclass
class ReviewFeedback:
    coherency_notes: str = ""
    motivation_failures: list[tuple[int, str]] = field(default_factory=list)
    causal_failures: list[tuple[int, str]] = field(default_factory=list)

    @property
    def approved(self) -> bool:
        return not self.coherency_notes and not self.motivation_failures and not self.causal_failures

    def render(self) -> str:
        parts = []
        if self.coherency_notes:
            parts.append(f"Coherency feedback: {self.coherency_notes}")
        for i, why in self.motivation_failures:
            parts.append(f"Action {i}: motivation not established - {why}")
        for i, reason in self.causal_failures:
            parts.append(f"Action {i}: failed in the game simulation - {reason}")
        return "\n".join(parts)


@dataclass
class CompilerConfig:
    max_review_rounds: int = 3
    npc_turns_per_interlude: int = 1
    player_actions_per_turn: int = 2

    def __post_init__(self):
        if self.max_review_rounds < 1:
            raise ValueError("max_review_rounds must be >= 1")
        if self.npc_turns_per_interlude < 0:
            raise ValueError("npc_turns_per_interlude must be >= 0")
        if self.player_actions_per_turn < 1:
            raise ValueError("player_actions_per_turn must be >= 1")


# ---------------------------------------------------------------------------
# Prompt tags (also used by tests and record/replay script builders)
# ---------------------------------------------------------------------------

def plan_tag(event_index: int, round_no: int) -> str:
    return f"plan#{event_index}#r{round_no}"


def coherency_tag(event_index: int, round_no: int) -> str:
    return f"coherency#{event_index}#r{round_no}"


def motivation_tag(event_index: int, round_no: int, action_index: int) -> str:
    return f"motivation#{event_index}#r{round_no}#{action_index}"


def npc_tag(turn_index: int, npc: str) -> str:
    return f"npc#{turn_index}#{npc}"


def player_tag(interlude_index: int, player_type: str) -> str:
    return f"player#{interlude_index}#{player_type}"


def fulfillment_tag(event_index: int) -> str:
    return f"fulfillment#{event_index}"


# ---------------------------------------------------------------------------
# Plan generation and review
# ---------------------------------------------------------------------------

def generate_plan(
    event: OutlineEvent,
    world: WorldState,
    domain: StoryDomain,
    provider,
    prior_feedback: ReviewFeedback | None = None,
    round_no: int = 1,
) -> ActionSequence:
    """Draft a schema-valid action sequence acting out one outline event."""
    if not event.text.strip():
        raise ValueError("outline event text is empty")
    feedback = ""
    if prior_feedback is not None and not prior_feedback.approved:
        feedback = "Feedback on your previous attempt; fix these issues:\n" + prior_feedback.render()

    def parse(raw: str) -> list[ActionInstance]:
        actions = parse_action_list(raw)
        if not actions:
            raise ValueError("plan must contain at least one action")
        for a in actions:
            problems = validate_action(domain, a)
            if problems:
                raise ValueError(f"invalid action {a.render()}: " + "; ".join(problems))
        return actions

    request = llm.CompletionRequest(
        template_id="plan_generate",
        variables={
            "event": event.text,
            "characters": describe_characters(domain),
            "schema": describe_schema(domain),
            "world_state": describe_world(world, domain),
            "feedback": feedback,
        },
        tag=plan_tag(event.index, round_no),
    )
    actions = llm.complete_structured(provider, request, parse)
    return ActionSequence(actions=actions, source_event=event.index, iteration=round_no)


def check_causal_soundness(
    plan: ActionSequence, world: WorldState, domain: StoryDomain
) -> list[SoundnessVerdict]:
    """Dry-run the plan against a snapshot; deterministic, no model calls.

    The simulation stops advancing at the first failed action; later
    actions still get static schema checks but are otherwise reported as
    not evaluated.
    """
    token = snapshot(world)
    sim = restore(token)
    verdicts: list[SoundnessVerdict] = []
    failed = False
    for i, a in enumerate(plan.actions):
        problems = validate_action(domain, a)
        if problems:
            verdicts.append(SoundnessVerdict(i, False, "; ".join(problems)))
            continue
        if failed:
            verdicts.append(SoundnessVerdict(i, False, "not evaluated: an earlier action failed"))
            continue
        ok, reason = is_executable(sim, a, domain)
        if ok:
            sim, _ = execute(sim, a, domain)
            verdicts.append(SoundnessVerdict(i, True, "ok"))
        else:
            verdicts.append(SoundnessVerdict(i, False, reason))
            failed = True
    return verdicts


def review_plan(
    plan: ActionSequence,
    world: WorldState,
    domain: StoryDomain,
    provider,
    round_no: int | None = None,
) -> ReviewFeedback:
    """Coherency judge + per-action motivation role-play + causal dry-run."""
    round_no = round_no if round_no is not None else plan.iteration
    plan_text = "\n".join(f"{i}: {a.render()}" for i, a in enumerate(plan.actions))

    coherency = llm.complete(
        provider,
        llm.CompletionRequest(
            template_id="plan_coherency",
            variables={"event": f"event {plan.source_event}", "plan": plan_text},
            temperature=llm.JUDGE_TEMPERATURE,
            tag=coherency_tag(plan.source_event, round_no),
        ),
    ).strip()
    notes = "" if coherency.upper() == "OK" else coherency

    motivation_failures: list[tuple[int, str]] = []
    for i, a in enumerate(plan.actions):
        try:
            character = domain.character(a.subject)
        except KeyError:
            continue  # schema problem; the causal check reports it
        verdict = llm.complete_structured(
            provider,
            llm.CompletionRequest(
                template_id="plan_motivation",
                variables={
                    "character": character.id,
                    "character_description": character.description,
                    "world_state": describe_world(world, domain),
                    "memories": "\n".join(world.memories.get(character.id, [])) or "(none)",
                    "action": a.render(),
                },
                temperature=llm.JUDGE_TEMPERATURE,
                tag=motivation_tag(plan.source_event, round_no, i),
            ),
            _parse_motivation,
        )
        established, explanation = verdict
        if not established:
            motivation_failures.append((i, explanation))

    causal_failures = [
        (v.index, v.reason) for v in check_causal_soundness(plan, world, domain) if not v.ok
    ]
    return ReviewFeedback(
        coherency_notes=notes,
        motivation_failures=motivation_failures,
        causal_failures=causal_failures,
    )


def _parse_motivation(raw: str) -> tuple[bool, str]:
    stripped = raw.strip()
    lowered = stripped.lower()
    if lowered.startswith("yes"):
        return True, ""
    if lowered.startswith("no"):
        return False, stripped.partition(":")[2].strip() or stripped
    value = llm.extract_json_block(raw)
    if not isinstance(value, dict) or "established" not in value:
        raise ValueError("expected {'established': bool, 'explanation': str}")
    return bool(value["established"]), str(value.get("explanation", ""))


def compile_event(
    event: OutlineEvent,
    world: WorldState,
    domain: StoryDomain,
    provider,
    config: CompilerConfig,
) -> tuple[ActionSequence, WorldState, list[EventRecord]]:
    """Generate -> review until approved or the round budget runs out.

    On exhaustion the last causally sound plan is executed anyway
    (motivation and coherency feedback are advisory); with no causally
    sound plan at all, compilation fails and the world is unchanged.
    """
    feedback: ReviewFeedback | None = None
    fallback: ActionSequence | None = None
    chosen: ActionSequence | None = None
    for round_no in range(1, config.max_review_rounds + 1):
        plan = generate_plan(event, world, domain, provider, feedback, round_no=round_no)
        feedback = review_plan(plan, world, domain, provider, round_no=round_no)
        if not feedback.causal_failures:
            fallback = plan
        if feedback.approved:
            chosen = plan
            break
    if chosen is None:
        chosen = fallback
    if chosen is None:
        raise CompilationError(event.text, "no causally sound plan within the review budget")

    records: list[EventRecord] = []
    current = world
    for a in chosen.actions:
        current, record = execute(current, a, domain, origin=ORIGIN_PLOT)
        records.append(record)
    return chosen, current, records


def simulate_npc_turn(
    world: WorldState,
    domain: StoryDomain,
    provider,
    npc: str,
    turn_index: int = 0,
) -> ActionInstance | None:
    """One in-character action for an NPC, or None for a deliberate pass.

    Provider failures and unusable replies degrade to a pass with a
    warning; a dead NPC is a caller error.
    """
    if not world.alive.get(npc, False):
        raise PreconditionError("subject not alive")
    character = domain.character(npc)

    def parse(raw: str) -> ActionInstance | None:
        if raw.strip().lower() in ("pass", '"pass"'):
            return None
        action = parse_action_entry(llm.extract_json_block(raw))
        if action.subject != npc:
            raise ValueError(f"action subject must be {npc!r}")
        problems = validate_action(domain, action)
        if problems:
            raise ValueError("; ".join(problems))
        return action

    request = llm.CompletionRequest(
        template_id="npc_turn",
        variables={
            "npc": npc,
            "npc_description": character.description,
            "characters": describe_characters(domain),
            "schema": describe_schema(domain),
            "world_state": describe_world(world, domain),
        },
        tag=npc_tag(turn_index, npc),
    )
    try:
        action = llm.complete_structured(provider, request, parse)
    except (StructuredParseError, ProviderError) as exc:
        log.warning("npc %s passes: %s", npc, exc)
        return None
    if action is None:
        return None
    ok, reason = is_executable(world, action, domain)
    if not ok:
        log.warning("npc %s proposed non-executable action %s (%s); passing",
                    npc, action.render(), reason)
        return None
    return action


# ---------------------------------------------------------------------------
# Main game loop
# ---------------------------------------------------------------------------

class GameLoop:
    """Stepwise engine for one play-through of an outline.

    Phase machine: ``compile`` -> (``player`` -> ``npc`` ->) ``compile``
    ... -> ``done`` | ``failed``. Interludes only exist when a player
    character is set; without one the outline unfolds segment after
    segment. The HTTP service drives this object incrementally; batch
    callers use :func:`run_game_loop`.
    """

    PHASES = ("compile", "player", "npc", "done", "failed")

    def __init__(
        self,
        outline: Outline,
        domain: StoryDomain,
        world: WorldState,
        provider,
        config: CompilerConfig | None = None,
        player_character: str | None = None,
    ):
        if not outline.events:
            raise ValueError("outline is empty")
        if player_character is not None and not domain.has_character(player_character):
            raise WorldError(f"unknown player character {player_character!r}")
        self.outline = outline
        self.domain = domain
        self.world = world
        self.provider = provider
        self.config = config or CompilerConfig()
        self.player_character = player_character
        self.segments: list[PlotSegment] = []
        self.interludes: list[Interlude] = []
        self.next_event = 0
        self.npc_turns_taken = 0
        self.failure: str | None = None
        self.summary = ""
        self.phase = "compile"

    # -- state inspection -----------------------------------------------------

    @property
    def events_exhausted(self) -> bool:
        return self.next_event >= len(self.outline.events)

    @property
    def finished(self) -> bool:
        return self.phase in ("done", "failed")

    @property
    def awaiting_player(self) -> bool:
        return self.phase == "player"

    def _player_actions_taken(self) -> int:
        if not self.interludes or self.interludes[-1].after_event != self.next_event - 1:
            return 0
        return sum(1 for r in self.interludes[-1].records if r.origin == ORIGIN_PLAYER)

    def _current_interlude(self) -> Interlude:
        if not self.interludes or self.interludes[-1].after_event != self.next_event - 1:
            self.interludes.append(Interlude(after_event=self.next_event - 1))
        return self.interludes[-1]

    def all_records(self) -> list[EventRecord]:
        return self.plot().all_records()

    # -- phases ---------------------------------------------------------------

    def compile_next_event(self) -> PlotSegment:
        """Compile the next outline event (honoring player fulfillment)."""
        if self.phase != "compile":
            raise ValueError(f"cannot compile during phase {self.phase!r}")
        event = self.outline.events[self.next_event]
        if self._event_fulfilled_by_player(event):
            segment = PlotSegment(event_index=event.index, records=[], fulfilled_by_player=True)
        else:
            try:
                _, new_world, records = compile_event(
                    event, self.world, self.domain, self.provider, self.config
                )
            except CompilationError as exc:
                self.failure = str(exc)
                self.phase = "failed"
                raise
            self.world = new_world
            segment = PlotSegment(event_index=event.index, records=records)
        self.segments.append(segment)
        self.next_event += 1
        if self.events_exhausted:
            self.phase = "done"
        elif self.player_character is not None:
            if self.world.alive.get(self.player_character, False):
                self.phase = "player"
            else:
                # a dead player cannot act; hand the interlude to the NPCs
                log.warning("player character %s is dead; skipping the player turn",
                            self.player_character)
                self.phase = "npc"
        return segment

    def _event_fulfilled_by_player(self, event: OutlineEvent) -> bool:
        if event.index == 0 or self.player_character is None:
            return False
        player_records = [
            r
            for gap in self.interludes
            if gap.after_event == event.index - 1
            for r in gap.records
            if r.origin == ORIGIN_PLAYER
        ]
        if not player_records:
            return False

        def parse(raw: str) -> bool:
            value = llm.extract_json_block(raw)
            if not isinstance(value, dict) or "fulfilled" not in value:
                raise ValueError("expected {'fulfilled': bool, 'actions': [...]}")
            return bool(value["fulfilled"])

        request = llm.CompletionRequest(
            template_id="fulfillment",
            variables={
                "event": event.text,
                "player_actions": "\n".join(
                    f"{i}: {r.action.render()}" for i, r in enumerate(player_records)
                ),
            },
            temperature=llm.JUDGE_TEMPERATURE,
            tag=fulfillment_tag(event.index),
        )
        try:
            return llm.complete_structured(self.provider, request, parse)
        except (StructuredParseError, ProviderError) as exc:
            log.warning("fulfillment check failed for event %d: %s", event.index, exc)
            return False

    def player_action(self, action: ActionInstance) -> EventRecord:
        """Validate and execute one player action; raises on rejection."""
        if not self.awaiting_player:
            raise ValueError("not awaiting a player action")
        if action.subject != self.player_character:
            raise WorldError(f"player controls {self.player_character!r}, not {action.subject!r}")
        problems = validate_action(self.domain, action)
        if problems:
            raise WorldError("; ".join(problems))
        ok, reason = is_executable(self.world, action, self.domain)
        if not ok:
            raise PreconditionError(reason)
        self.world, record = execute(self.world, action, self.domain, origin=ORIGIN_PLAYER)
        self._current_interlude().records.append(record)
        if self._player_actions_taken() >= self.config.player_actions_per_turn:
            self.phase = "npc"
        return record

    def npc_phase(self) -> list[EventRecord]:
        """Run the configured number of NPC simulation turns."""
        if self.phase != "npc":
            raise ValueError(f"cannot run NPC simulation during phase {self.phase!r}")
        records: list[EventRecord] = []
        for _ in range(self.config.npc_turns_per_interlude):
            living = [
                c for c in self.domain.character_ids()
                if c != self.player_character and self.world.alive[c]
            ]
            if not living:
                break
            npc = living[self.npc_turns_taken % len(living)]
            action = simulate_npc_turn(
                self.world, self.domain, self.provider, npc, turn_index=self.npc_turns_taken
            )
            self.npc_turns_taken += 1
            if action is None:
                continue
            self.world, record = execute(self.world, action, self.domain, origin=ORIGIN_NPC)
            self._current_interlude().records.append(record)
            records.append(record)
        self.phase = "compile"
        return records

    def finish(self) -> GamePlot:
        """Seal the plot; generates the end-of-game summary when complete."""
        plot = self.plot()
        if plot.complete and not self.summary:
            try:
                self.summary = llm.complete(
                    self.provider,
                    llm.CompletionRequest(
                        template_id="summary",
                        variables={"plot": render_plot_transcript(plot, self.outline.texts())},
                        tag="summary",
                    ),
                ).strip()
            except ProviderError as exc:
                log.warning("summary generation failed: %s", exc)
            plot.summary = self.summary
        return plot

    def plot(self) -> GamePlot:
        return GamePlot(
            segments=list(self.segments),
            interludes=[gap for gap in self.interludes if gap.records],
            summary=self.summary,
            complete=self.failure is None,
            failure=self.failure,
        )

    # -- persistence ----------------------------------------------------------

    def to_state(self) -> dict:
        from .plots import plot_to_dict

        return {
            "world": world_to_dict(self.world),
            "plot": plot_to_dict(self.plot()),
            "next_event": self.next_event,
            "npc_turns_taken": self.npc_turns_taken,
            "summary": self.summary,
            "failure": self.failure,
            "phase": self.phase,
        }

    @classmethod
    def from_state(
        cls,
        state: dict,
        outline: Outline,
        domain: StoryDomain,
        provider,
        config: CompilerConfig | None = None,
        player_character: str | None = None,
    ) -> "GameLoop":
        from .plots import plot_from_dict

        loop = cls(outline, domain, world_from_dict(state["world"]), provider,
                   config=config, player_character=player_character)
        saved = plot_from_dict(state["plot"])
        loop.segments = saved.segments
        loop.interludes = saved.interludes
        loop.next_event = int(state["next_event"])
        loop.npc_turns_taken = int(state.get("npc_turns_taken", 0))
        loop.summary = str(state.get("summary", ""))
        loop.failure = state.get("failure")
        loop.phase = str(state.get("phase", "compile"))
        return loop


def run_game_loop(
    outline: Outline,
    domain: StoryDomain,
    world: WorldState,
    player_source: ForwardPlayerSource | None,
    provider,
    config: CompilerConfig | None = None,
    player_character: str | None = None,
) -> GamePlot:
    """Play an outline to the end; returns the plot (partial on failure).

    With no player source the outline is unfolded without interludes.
    """
    loop = GameLoop(
        outline, domain, world, provider,
        config=config,
        player_character=player_character if player_source is not None else None,
    )
    try:
        while not loop.finished:
            if loop.phase == "compile":
                loop.compile_next_event()
            elif loop.phase == "player":
                assert player_source is not None  # phase requires a player
                _collect_player_actions(loop, player_source)
            elif loop.phase == "npc":
                loop.npc_phase()
    except CompilationError:
        return loop.plot()
    return loop.finish()


def _collect_player_actions(loop: GameLoop, player_source: ForwardPlayerSource) -> None:
    """Pull actions from the source until the turn is filled.

    Invalid actions are rejected back to the source with the reason; a
    source that makes no progress for several rounds is replaced by
    always-executable think actions so the loop cannot stall.
    """
    needed = loop.config.player_actions_per_turn
    reason: str | None = None
    fruitless_rounds = 0
    while loop.awaiting_player:
        taken_before = loop._player_actions_taken()
        actions = player_source(
            loop.world, loop.domain, loop.all_records(), needed - taken_before, reason
        )
        reason = None
        for action in actions:
            if not loop.awaiting_player:
                break
            try:
                loop.player_action(action)
            except (PreconditionError, WorldError) as exc:
                reason = getattr(exc, "reason", str(exc))
                break
        if loop._player_actions_taken() == taken_before:
            fruitless_rounds += 1
            if reason is None:
                reason = "no executable action provided"
            if fruitless_rounds >= MAX_PLAYER_REASKS:
                log.warning("player source made no progress; falling back to think")
                while loop.awaiting_player:
                    loop.player_action(
                        ActionInstance(
                            subject=loop.player_character or "",
                            action="think",
                            arguments=(FALLBACK_THINK_TEXT,),
                        )
                    )
                return

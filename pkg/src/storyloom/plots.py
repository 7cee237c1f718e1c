"""Game-plot data model: executed action records grouped by outline event.

A plot alternates segments (records acting out one outline event) with
interludes (player and NPC records between events). The text export marks
segment boundaries with "New Event is Happening" separators.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .world import ActionInstance, Delta, EventRecord, ORIGIN_PLAYER

EVENT_SEPARATOR = "------ New Event is Happening ------"
PLAYER_SEPARATOR = "------ [Player Taking Actions Through Pinpad] ------"
END_SEPARATOR = "------ The End of the Narrative ------"


@dataclass
class PlotSegment:
    event_index: int
    records: list[EventRecord] = field(default_factory=list)
    fulfilled_by_player: bool = False


@dataclass
class Interlude:
    after_event: int
    records: list[EventRecord] = field(default_factory=list)


@dataclass
class GamePlot:
    segments: list[PlotSegment] = field(default_factory=list)
    interludes: list[Interlude] = field(default_factory=list)
    summary: str = ""
    complete: bool = True
    failure: str | None = None

    def all_records(self) -> list[EventRecord]:
        """Records in chronological order: segment k, then its interlude."""
        out: list[EventRecord] = []
        interludes = {i.after_event: i for i in self.interludes}
        for seg in self.segments:
            out.extend(seg.records)
            gap = interludes.get(seg.event_index)
            if gap:
                out.extend(gap.records)
        return out


def records_after_player(plot: GamePlot) -> list[EventRecord]:
    """Records strictly after the first player-origin record.

    Plots generated entirely downstream of a player action contain no
    player records; all of their records count.
    """
    records = plot.all_records()
    for i, rec in enumerate(records):
        if rec.origin == ORIGIN_PLAYER:
            return records[i + 1 :]
    return records


def render_records(records: list[EventRecord]) -> str:
    """One line per record, ``subject action(args)``, thoughts excluded."""
    return "\n".join(rec.action.render() for rec in records)


def render_plot_text(plot: GamePlot) -> str:
    return render_records(plot.all_records())


def render_plot_transcript(plot: GamePlot, outline_events: list[str] | None = None) -> str:
    """Readable play transcript with event separators and thoughts."""
    lines: list[str] = []
    interludes = {i.after_event: i for i in plot.interludes}
    for seg in plot.segments:
        lines.append(EVENT_SEPARATOR)
        if outline_events and seg.event_index < len(outline_events):
            lines.append(f"({outline_events[seg.event_index]})")
        if seg.fulfilled_by_player:
            lines.append("(fulfilled by the player's actions)")
        for rec in seg.records:
            lines.append(_transcript_line(rec))
        gap = interludes.get(seg.event_index)
        if gap and gap.records:
            lines.append(PLAYER_SEPARATOR)
            for rec in gap.records:
                lines.append(_transcript_line(rec))
    lines.append(END_SEPARATOR)
    if plot.summary:
        lines.append(f"summary of the story: {plot.summary}")
    if not plot.complete:
        lines.append(f"[incomplete: {plot.failure}]")
    return "\n".join(lines)


def _transcript_line(rec: EventRecord) -> str:
    line = rec.action.render()
    if rec.origin != "plot-execution":
        line = f"[{rec.origin}] {line}"
    if rec.action.thought:
        line += f' thinking "{rec.action.thought}"'
    return line


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def action_to_dict(a: ActionInstance) -> dict:
    doc = {"subject": a.subject, "action": a.action, "arguments": list(a.arguments)}
    if a.thought is not None:
        doc["thought"] = a.thought
    return doc


def action_from_dict(doc: dict) -> ActionInstance:
    return ActionInstance(
        subject=str(doc["subject"]),
        action=str(doc["action"]),
        arguments=tuple(str(v) for v in doc.get("arguments", [])),
        thought=doc.get("thought"),
    )


def record_to_dict(rec: EventRecord) -> dict:
    doc = action_to_dict(rec.action)
    doc["origin"] = rec.origin
    doc["turn"] = rec.turn
    doc["deltas"] = [[d.path, d.old, d.new] for d in rec.resulting_deltas]
    return doc


def record_from_dict(doc: dict) -> EventRecord:
    return EventRecord(
        action=action_from_dict(doc),
        turn=int(doc.get("turn", 0)),
        resulting_deltas=tuple(Delta(str(p), o, n) for p, o, n in doc.get("deltas", [])),
        origin=str(doc.get("origin", "plot-execution")),
    )


def plot_to_dict(plot: GamePlot) -> dict:
    return {
        "segments": [
            {
                "event_index": seg.event_index,
                "fulfilled_by_player": seg.fulfilled_by_player,
                "records": [record_to_dict(r) for r in seg.records],
            }
            for seg in plot.segments
        ],
        "interludes": [
            {
                "after_event": gap.after_event,
                "records": [record_to_dict(r) for r in gap.records],
            }
            for gap in plot.interludes
        ],
        "summary": plot.summary,
        "complete": plot.complete,
        "failure": plot.failure,
    }


def plot_from_dict(doc: dict) -> GamePlot:
    return GamePlot(
        segments=[
            PlotSegment(
                event_index=int(seg["event_index"]),
                records=[record_from_dict(r) for r in seg.get("records", [])],
                fulfilled_by_player=bool(seg.get("fulfilled_by_player", False)),
            )
            for seg in doc.get("segments", [])
        ],
        interludes=[
            Interlude(
                after_event=int(gap["after_event"]),
                records=[record_from_dict(r) for r in gap.get("records", [])],
            )
            for gap in doc.get("interludes", [])
        ],
        summary=str(doc.get("summary", "")),
        complete=bool(doc.get("complete", True)),
        failure=doc.get("failure"),
    )

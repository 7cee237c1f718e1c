"""Plot serialization and text export."""

import json

from storyloom.plots import (
    EVENT_SEPARATOR,
    GamePlot,
    Interlude,
    PLAYER_SEPARATOR,
    PlotSegment,
    plot_from_dict,
    plot_to_dict,
    records_after_player,
    render_plot_text,
    render_plot_transcript,
)
from storyloom.world import ActionInstance, Delta, EventRecord


def rec(subject, action, args=(), origin="plot-execution", thought=None, deltas=()):
    return EventRecord(
        action=ActionInstance(subject, action, tuple(args), thought=thought),
        turn=0,
        resulting_deltas=tuple(deltas),
        origin=origin,
    )


def sample_plot():
    return GamePlot(
        segments=[
            PlotSegment(0, [rec("hunter", "attack", ["deer"], thought="found my dinner")]),
            PlotSegment(1, [rec("witch", "save", ["deer"])]),
        ],
        interludes=[
            Interlude(0, [rec("dove", "speakTo", ["hunter", "leave the deer alone"],
                              origin="player")]),
        ],
        summary="The dove talked the hunter down.",
    )


def test_all_records_chronological():
    plot = sample_plot()
    order = [r.action.subject for r in plot.all_records()]
    assert order == ["hunter", "dove", "witch"]


def test_render_plot_text_excludes_thoughts():
    text = render_plot_text(sample_plot())
    assert text.splitlines() == [
        "hunter attack(deer)",
        "dove speakTo(hunter, leave the deer alone)",
        "witch save(deer)",
    ]
    assert "dinner" not in text


def test_transcript_markers_and_summary():
    transcript = render_plot_transcript(sample_plot(), ["danger", "rescue"])
    assert transcript.count(EVENT_SEPARATOR) == 2
    assert PLAYER_SEPARATOR in transcript
    assert "(danger)" in transcript and "(rescue)" in transcript
    assert 'thinking "found my dinner"' in transcript
    assert transcript.rstrip().endswith("summary of the story: The dove talked the hunter down.")


def test_transcript_marks_incomplete():
    plot = sample_plot()
    plot.complete = False
    plot.failure = "could not compile event 'rescue'"
    assert "[incomplete: could not compile event 'rescue']" in render_plot_transcript(plot)


def test_records_after_player():
    plot = sample_plot()
    after = records_after_player(plot)
    assert [r.action.subject for r in after] == ["witch"]
    # a plot without player records counts everything
    no_player = GamePlot(segments=[PlotSegment(0, [rec("cat", "think", ["hm"])])])
    assert len(records_after_player(no_player)) == 1


def test_plot_round_trip_preserves_deltas():
    plot = sample_plot()
    plot.segments[0].records[0] = rec(
        "hunter", "attack", ["deer"],
        deltas=[Delta("health.deer", 3, 2), Delta("turn_counter", 0, 1)],
    )
    doc = plot_to_dict(plot)
    again = plot_to_dict(plot_from_dict(doc))
    assert doc == again
    assert json.dumps(doc, sort_keys=True) == json.dumps(again, sort_keys=True)
    revived = plot_from_dict(doc)
    assert revived.segments[0].records[0].resulting_deltas[0] == Delta("health.deer", 3, 2)

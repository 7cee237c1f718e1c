"""Command-line front door for batch authoring and evaluation runs.

Everything the technical evaluation measures is reproducible here without
the UI: abstraction-level reports over story corpora, plot diversity over
outline sets, and player-impact reports from contrasting action pairs.
Reports print as a human table or machine JSON (``--format``), with
mean +/- sample standard deviation columns.
"""

from __future__ import annotations

import copy
import functools
import json
import statistics
import sys
from pathlib import Path

import click

from . import abstraction, graph as graph_mod, llm, metrics, players
from .compiler import CompilerConfig, GameLoop
from .domain import StoryDomain, load_domain_file, load_reference_domain
from .errors import CompilationError, StoryloomError
from .narrative import (
    AbstractionLevel,
    NarrativeSpace,
    extract_pivot,
    space_from_dict,
    space_to_dict,
)
from .plots import records_after_player, render_plot_text, render_records
from .store import canonical_json
from .world import ActionInstance, default_placement, init_world


class CliContext:
    def __init__(self, provider_kind, script, seed, out, fmt, record=None):
        self.provider_kind = provider_kind
        self.script = script
        self.seed = seed
        self.out = out
        self.fmt = fmt
        self.record = record
        self._provider = None

    def provider(self):
        if self._provider is None:
            self._provider = llm.make_provider(self.provider_kind, self.script)
        return self._provider


@click.group()
@click.option("--provider", "provider_kind", type=click.Choice(["scripted", "http"]),
              default="scripted", show_default=True, help="Text-model provider.")
@click.option("--script", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Script file for the scripted provider (tag -> response JSON).")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Run seed, recorded in reports.")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the machine-readable result to this path.")
@click.option("--format", "fmt", type=click.Choice(["table", "json"]), default="table",
              show_default=True, help="Stdout rendering.")
@click.option("--record", "record_path", type=click.Path(dir_okay=False), default=None,
              help="After the run, dump every provider call as a replayable script file.")
@click.pass_context
def main(ctx, provider_kind, script, seed, out, fmt, record_path):
    """Narrative-space authoring and evaluation toolkit."""
    ctx.obj = CliContext(provider_kind, script, seed, out, fmt, record=record_path)


@main.result_callback()
@click.pass_obj
def _dump_recording(ctx_obj, _result, **_kwargs):
    if ctx_obj and ctx_obj.record and ctx_obj._provider is not None:
        Path(ctx_obj.record).write_text(
            canonical_json(ctx_obj._provider.to_script()), encoding="utf-8"
        )
        click.echo(f"recorded {len(ctx_obj._provider.calls)} provider call(s) to {ctx_obj.record}")


def engine_errors(command):
    """Turn engine failures into clean exit-1 messages instead of tracebacks."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except (StoryloomError, ValueError) as exc:
            raise click.ClickException(str(exc)) from exc

    return wrapper


def _load_domain_arg(path_or_id: str) -> StoryDomain:
    if path_or_id in ("fairytale_forest", ""):
        return load_reference_domain()
    return load_domain_file(path_or_id)


def _emit(ctx_obj: CliContext, doc: dict, table_lines: list[str]):
    if ctx_obj.fmt == "json":
        click.echo(json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False))
    else:
        for line in table_lines:
            click.echo(line)
    if ctx_obj.out:
        Path(ctx_obj.out).write_text(canonical_json(doc), encoding="utf-8")


def _mean_std(values) -> tuple[float, float]:
    values = list(values)
    if not values:
        return 0.0, 0.0
    mean = statistics.fmean(values)
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, std


def _fmt_ms(mean: float, std: float, digits: int = 2) -> str:
    return f"{mean:.{digits}f}±{std:.{digits}f}"


def _write_space(ctx_obj: CliContext, space: NarrativeSpace):
    doc = space_to_dict(space)
    if ctx_obj.out:
        Path(ctx_obj.out).write_text(canonical_json(doc), encoding="utf-8")
        click.echo(f"wrote {ctx_obj.out}")
    else:
        click.echo(json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False))


def _read_space(path: str) -> NarrativeSpace:
    return space_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# domain
# ---------------------------------------------------------------------------

@main.group()
def domain():
    """Story-domain utilities."""


@domain.command("validate")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
def domain_validate(file):
    """Validate a domain document; exit 0 when it is well-formed."""
    try:
        dom = load_domain_file(file)
    except StoryloomError as exc:
        click.echo(f"invalid: {exc}", err=True)
        sys.exit(1)
    click.echo(
        f"ok: {dom.title!r} with {len(dom.characters)} characters, "
        f"{len(dom.locations)} locations, {len(dom.schema)} actions"
    )


# ---------------------------------------------------------------------------
# pivot / outline / variants / graph
# ---------------------------------------------------------------------------

@main.group()
def pivot():
    """Pivot-instance commands."""


@pivot.command("extract")
@click.option("--domain", "domain_arg", default="fairytale_forest", show_default=True,
              help="Domain file path or 'fairytale_forest'.")
@click.option("--narrative", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Plain-text story file.")
@click.option("--moral", default="", help="Story moral carried by the space.")
@click.option("--space-id", default="space-0001", show_default=True)
@click.pass_obj
@engine_errors
def pivot_extract(ctx_obj, domain_arg, narrative, moral, space_id):
    """Extract a pivot from a narrative and emit a fresh space document."""
    dom = _load_domain_arg(domain_arg)
    text = Path(narrative).read_text(encoding="utf-8")
    variant = extract_pivot(text, dom, ctx_obj.provider(), moral=moral)
    space = NarrativeSpace(
        id=space_id,
        domain_ref=domain_arg if domain_arg else "fairytale_forest",
        pivot_id=variant.id,
        moral=moral,
        variants=[variant],
    )
    _write_space(ctx_obj, space)


@main.group()
def outline():
    """Outline commands."""


@outline.command("gen")
@click.option("--space", "space_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--domain", "domain_arg", default="fairytale_forest", show_default=True)
@click.option("--level", default="act", show_default=True,
              help="Ladder level: beat, scene, sequence, act or story.")
@click.option("--spec", "user_spec", default=None, help="Free-text author requirement.")
@click.option("--source", type=click.Choice(["pivot", "variants"]), default="pivot",
              show_default=True)
@click.pass_obj
@engine_errors
def outline_gen(ctx_obj, space_path, domain_arg, level, user_spec, source):
    """Generate the outline for a space document."""
    space = _read_space(space_path)
    dom = _load_domain_arg(domain_arg)
    instances = [space.pivot()] if source == "pivot" else space.active_variants()
    space.outline = abstraction.instances_to_outline(
        instances, AbstractionLevel.parse(level), user_spec, dom, ctx_obj.provider(),
        moral=space.moral,
    )
    _write_space(ctx_obj, space)


@main.group()
def variants():
    """Variant-generation commands."""


@variants.command("gen")
@click.option("--space", "space_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--domain", "domain_arg", default="fairytale_forest", show_default=True)
@click.option("--sets", type=int, default=1, show_default=True)
@click.option("--player", default=None, help="Player character id (default: first controllable).")
@click.pass_obj
@engine_errors
def variants_gen(ctx_obj, space_path, domain_arg, sets, player):
    """Simulate sets x 3 player-driven variants into the space document."""
    space = _read_space(space_path)
    dom = _load_domain_arg(domain_arg)
    generated = players.generate_variants(
        space, sets, dom, ctx_obj.provider(), player_character=player
    )
    space.variants.extend(generated)
    _write_space(ctx_obj, space)


@main.group()
def graph():
    """Event-graph commands."""


@graph.command("merge")
@click.option("--space", "space_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--comparator", type=click.Choice(["exact", "judged"]), default="exact",
              show_default=True)
@click.option("--dot", is_flag=True, help="Also print a DOT rendering.")
@click.pass_obj
@engine_errors
def graph_merge(ctx_obj, space_path, comparator, dot):
    """Merge the space's non-rejected variant paths into event graphs."""
    space = _read_space(space_path)
    cmp = graph_mod.exact_comparator
    if comparator == "judged":
        cmp = graph_mod.JudgedComparator(ctx_obj.provider())
    paths = graph_mod.paths_from_variants(space.active_variants())
    result = graph_mod.merge_paths(paths, cmp)
    doc = graph_mod.export_graph(result)
    lines = [f"{len(doc['graphs'])} graph(s) from {len(paths)} path(s)"]
    for i, g in enumerate(doc["graphs"]):
        lines.append(f"  graph {i}: {len(g['nodes'])} nodes, {len(g['edges'])} edges")
    if dot:
        lines.append(graph_mod.to_dot(result))
    _emit(ctx_obj, doc, lines)


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

@main.group(name="eval")
def eval_group():
    """Technical-evaluation reports."""


@eval_group.command("abstraction")
@click.option("--stories", type=click.Path(exists=True, file_okay=False), required=True,
              help="Directory of plain-text story files.")
@click.option("--levels", default="scene,sequence,act", show_default=True)
@click.option("--domain", "domain_arg", default="fairytale_forest", show_default=True)
@click.option("--lexicon", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Concreteness lexicon TSV (default: bundled mini lexicon).")
@click.option("--imageability-lexicon", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--stopwords", type=click.Path(exists=True, dir_okay=False), default=None)
@click.pass_obj
@engine_errors
def eval_abstraction(ctx_obj, stories, levels, domain_arg, lexicon, imageability_lexicon, stopwords):
    """Concreteness/imageability of generated outlines per ladder level."""
    dom = _load_domain_arg(domain_arg)
    level_names = [l.strip() for l in levels.split(",") if l.strip()]
    parsed_levels = [AbstractionLevel.parse(l) for l in level_names]
    conc = (metrics.load_lexicon(lexicon, "concreteness", stopwords)
            if lexicon else metrics.load_bundled_lexicon("concreteness"))
    imag = (metrics.load_lexicon(imageability_lexicon, "imageability", stopwords)
            if imageability_lexicon else metrics.load_bundled_lexicon("imageability"))

    story_files = sorted(Path(stories).glob("*.txt"))
    if not story_files:
        click.echo("no .txt stories found", err=True)
        sys.exit(1)

    per_level: dict[str, dict[str, list[float]]] = {
        lvl.label: {"concreteness": [], "imageability": [], "coverage": []}
        for lvl in parsed_levels
    }
    outlines: list[dict] = []
    for i, story_file in enumerate(story_files):
        text = story_file.read_text(encoding="utf-8")
        provider = llm.PrefixedProvider(ctx_obj.provider(), f"story{i}")
        candidates = abstraction.generate_outline_candidates([text], dom, provider)
        for lvl in parsed_levels:
            outline_text = " ".join(candidates[lvl.label])
            c = metrics.concreteness_rate(outline_text, conc)
            m = metrics.imageability_score(outline_text, imag)
            per_level[lvl.label]["concreteness"].append(c.value)
            per_level[lvl.label]["imageability"].append(m.value)
            per_level[lvl.label]["coverage"].append(c.coverage)
            outlines.append({"story": story_file.name, "level": lvl.label,
                             "events": candidates[lvl.label]})

    rows = {}
    lines = [f"abstraction report over {len(story_files)} stories (seed {ctx_obj.seed})",
             f"{'level':<10} {'concreteness':>16} {'imageability':>16} {'coverage':>10}"]
    for lvl in parsed_levels:
        cm, cs = _mean_std(per_level[lvl.label]["concreteness"])
        im, istd = _mean_std(per_level[lvl.label]["imageability"])
        cov, _ = _mean_std(per_level[lvl.label]["coverage"])
        rows[lvl.label] = {
            "concreteness_mean": cm, "concreteness_std": cs,
            "imageability_mean": im, "imageability_std": istd,
            "coverage_mean": cov,
        }
        lines.append(f"{lvl.label:<10} {_fmt_ms(cm, cs):>16} {_fmt_ms(im, istd):>16} {cov:>10.2f}")
    doc = {"report": "abstraction", "seed": ctx_obj.seed, "stories": len(story_files),
           "levels": rows, "outlines": outlines}
    _emit(ctx_obj, doc, lines)


@eval_group.command("diversity")
@click.option("--outlines", type=click.Path(exists=True, file_okay=False), required=True,
              help="Directory of outline files, one event sentence per line.")
@click.option("--plots-per-outline", type=int, default=20, show_default=True)
@click.option("--domain", "domain_arg", default="fairytale_forest", show_default=True)
@click.option("--level", default="act", show_default=True)
@click.pass_obj
@engine_errors
def eval_diversity(ctx_obj, outlines, plots_per_outline, domain_arg, level):
    """Mean ROUGE distance among plots unfolded from each outline."""
    from .narrative import make_outline

    dom = _load_domain_arg(domain_arg)
    outline_files = sorted(Path(outlines).glob("*.txt"))
    if not outline_files:
        click.echo("no .txt outlines found", err=True)
        sys.exit(1)
    if plots_per_outline < 2:
        click.echo("--plots-per-outline must be >= 2", err=True)
        sys.exit(1)

    d1_values, dmacro_values, per_outline = [], [], []
    for oi, outline_file in enumerate(outline_files):
        events = [l.strip() for l in outline_file.read_text(encoding="utf-8").splitlines() if l.strip()]
        outline_obj = make_outline(events, AbstractionLevel.parse(level))
        texts = []
        incomplete = 0
        for bi in range(plots_per_outline):
            provider = llm.PrefixedProvider(ctx_obj.provider(), f"o{oi}.b{bi}")
            from .compiler import run_game_loop

            world = init_world(dom, default_placement(dom))
            plot = run_game_loop(outline_obj, dom, world, None, provider)
            if not plot.complete:
                incomplete += 1
            texts.append(render_plot_text(plot))
        d1, dmacro = metrics.plot_diversity(texts)
        d1_values.append(d1)
        dmacro_values.append(dmacro)
        per_outline.append({"outline": outline_file.name, "d1": d1, "d_macro": dmacro,
                            "plots": plots_per_outline, "incomplete": incomplete})

    m1, s1 = _mean_std(d1_values)
    mm, sm = _mean_std(dmacro_values)
    lines = [
        f"plot diversity over {len(outline_files)} outlines x {plots_per_outline} plots (seed {ctx_obj.seed})",
        f"{'metric':<10} {'value':>12}",
        f"{'d1':<10} {_fmt_ms(m1, s1):>12}",
        f"{'d_macro':<10} {_fmt_ms(mm, sm):>12}",
    ]
    doc = {"report": "diversity", "seed": ctx_obj.seed,
           "d1_mean": m1, "d1_std": s1, "d_macro_mean": mm, "d_macro_std": sm,
           "outlines": per_outline}
    _emit(ctx_obj, doc, lines)


@eval_group.command("impact")
@click.option("--outline", "outline_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="Outline file with exactly two events (acts).")
@click.option("--batch", type=int, default=20, show_default=True)
@click.option("--domain", "domain_arg", default="fairytale_forest", show_default=True)
@click.option("--player", default=None, help="Player character (default: first controllable).")
@click.option("--positive-action", default='speakTo(witch, "Please help! The deer is in danger!")',
              show_default=True, help="Positive player action in call syntax.")
@click.option("--negative-action", default="kill(deer)", show_default=True,
              help="Negative player action in call syntax.")
@click.pass_obj
@engine_errors
def eval_impact(ctx_obj, outline_path, batch, domain_arg, player, positive_action, negative_action):
    """Player-impact report from a contrasting action pair after act one."""
    from .narrative import make_outline

    dom = _load_domain_arg(domain_arg)
    events = [l.strip() for l in Path(outline_path).read_text(encoding="utf-8").splitlines() if l.strip()]
    if len(events) != 2:
        click.echo("eval impact expects an outline with exactly two events", err=True)
        sys.exit(1)
    outline_obj = make_outline(events, AbstractionLevel.ACT)
    if player is None:
        controllable = dom.player_characters()
        player = controllable[0] if controllable else dom.character_ids()[0]

    def parse_player_action(text: str) -> ActionInstance:
        name, args = llm.parse_call_syntax(text)
        return ActionInstance(subject=player, action=name, arguments=tuple(args))

    actions = {"pos": parse_player_action(positive_action),
               "neg": parse_player_action(negative_action)}

    config = CompilerConfig(player_actions_per_turn=1)
    base_provider = llm.PrefixedProvider(ctx_obj.provider(), "impact.base")
    world = init_world(dom, default_placement(dom))
    base = GameLoop(outline_obj, dom, world, base_provider, config=config, player_character=player)
    base.compile_next_event()
    base_state = base.to_state()

    batches: dict[str, list] = {"pos": [], "neg": []}
    for branch, action in actions.items():
        for bi in range(batch):
            provider = llm.PrefixedProvider(ctx_obj.provider(), f"impact.{branch}{bi}")
            loop = GameLoop.from_state(copy.deepcopy(base_state), outline_obj, dom, provider,
                                       config=config, player_character=player)
            try:
                loop.player_action(action)
                while not loop.finished:
                    if loop.phase == "npc":
                        loop.npc_phase()
                    elif loop.phase == "compile":
                        loop.compile_next_event()
                batches[branch].append(loop.finish())
            except (CompilationError, StoryloomError) as exc:
                click.echo(f"{branch} batch {bi} failed: {exc}", err=True)
                batches[branch].append(loop.plot())

    pos_texts = [render_records(records_after_player(p)) for p in batches["pos"]]
    neg_texts = [render_records(records_after_player(p)) for p in batches["neg"]]
    d1, dmacro = metrics.divergence_after_actions(pos_texts, neg_texts)
    involvement = metrics.character_involvement(batches["pos"], player)
    victim = actions["neg"].arguments[0] if actions["neg"].action == "kill" else None
    change_rate = None
    if victim:
        change_rate = metrics.world_state_change_rate(batches["neg"], victim)

    lines = [
        f"player impact over 2x{batch} plots (player {player}, seed {ctx_obj.seed})",
        f"{'metric':<28} {'value':>10}",
        f"{'subsequent divergence d1':<28} {d1:>10.2f}",
        f"{'subsequent divergence d_macro':<28} {dmacro:>10.2f}",
        f"{'world-state change (neg)':<28} "
        + (f"{change_rate:>10.2f}" if change_rate is not None else "       n/a"),
        f"{'character involvement (pos)':<28} {involvement:>10.2f}",
    ]
    doc = {"report": "impact", "seed": ctx_obj.seed, "batch": batch, "player": player,
           "d1": d1, "d_macro": dmacro, "world_state_change_neg": change_rate,
           "character_involvement_pos": involvement,
           "positive_action": positive_action, "negative_action": negative_action}
    _emit(ctx_obj, doc, lines)


# ---------------------------------------------------------------------------
# serve
# ---------------------------------------------------------------------------

@main.command("serve")
@click.option("--port", type=int, default=None, help="Port (default: env PORT or 8000).")
@click.option("--host", default="127.0.0.1", show_default=True)
def serve(port, host):
    """Run the HTTP service (configuration via env vars)."""
    import os

    import uvicorn

    from .service import app_from_env

    port = port or int(os.environ.get("PORT", "8000"))
    uvicorn.run(app_from_env(), host=host, port=port)


if __name__ == "__main__":
    main()

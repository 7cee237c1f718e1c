"""Acceptance criteria, one test per criterion.

Run with ``pytest tests/test_acceptance.py -v`` for one pass/fail line per
criterion. Randomized suites are seeded and sized per the stated budgets;
each test also prints an explicit PASS line (visible with ``-s``).
"""

import json
import os
import random
import time

import pytest

from conftest import (
    approve_plan_entries,
    event_entries,
    metric_entries,
    no_fulfillment_entries,
    npc_pass_entries,
    plan_response,
    player_entries,
    queue_player,
    scripted,
)
from storyloom import metrics
from storyloom.abstraction import instances_to_outline
from storyloom.compiler import (
    ActionSequence,
    CompilerConfig,
    GameLoop,
    check_causal_soundness,
    plan_tag,
    review_plan,
    run_game_loop,
)
from storyloom.domain import load_reference_domain
from storyloom.errors import PreconditionError
from storyloom.graph import EventNode, merge_paths
from storyloom.llm import ScriptedProvider
from storyloom.narrative import AbstractionLevel, NarrativeSpace, extract_pivot, space_to_dict
from storyloom.players import generate_variants
from storyloom.plots import plot_to_dict
from storyloom.world import (
    ActionInstance,
    apply_deltas,
    default_placement,
    execute,
    init_world,
    is_executable,
    worlds_equal,
)

A = ActionInstance
DOMAIN = load_reference_domain()


def report(name):
    print(f"PASS  {name}")


# ---------------------------------------------------------------------------
# Criterion 1: merge-algorithm oracle (>= 500 instances, < 5 s)
# ---------------------------------------------------------------------------

class UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def oracle_partition(paths):
    uf = UnionFind(len(paths))
    keys = [{n.key for n in p} for p in paths]
    for i in range(len(paths)):
        for j in range(i + 1, len(paths)):
            if keys[i] & keys[j]:
                uf.union(i, j)
    groups = {}
    for i, path in enumerate(paths):
        groups.setdefault(uf.find(i), set()).update(n.id for n in path)
    return {frozenset(g) for g in groups.values()}


def test_merge_algorithm_matches_union_find_oracle():
    rng = random.Random(2024)
    alphabet = [chr(ord("A") + i) for i in range(12)]
    started = time.monotonic()
    instances = 0
    for case in range(500):
        paths = [
            [
                EventNode.from_text(f"p{i}.{j}", rng.choice(alphabet))
                for j in range(rng.randint(1, 8))
            ]
            for i in range(rng.randint(1, 10))
        ]
        assert merge_paths(paths).partition() == oracle_partition(paths)
        instances += 1
    elapsed = time.monotonic() - started
    assert instances == 500
    assert elapsed < 5.0, f"merge oracle suite took {elapsed:.2f}s"
    report(f"merge-algorithm oracle: 500/500 exact matches in {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# Criterion 2: ROUGE correctness and diversity brute force
# ---------------------------------------------------------------------------

def test_rouge_correctness_and_diversity_oracle():
    hand = metrics.rouge_scores("the ant fell", "the dove fell")
    assert abs(hand.d1 - 1 / 3) < 1e-9
    assert metrics.rouge_scores("same text here", "same text here").d1 == 0.0
    assert metrics.rouge_scores("wholly different", "other words").d1 == 1.0

    rng = random.Random(7)
    vocabulary = "dove ant hunter witch cat deer brook forest village save attack".split()
    for case in range(100):
        plots = [
            " ".join(rng.choices(vocabulary, k=rng.randint(2, 10)))
            for _ in range(rng.randint(2, 6))
        ]
        got_d1, got_dm = metrics.plot_diversity(plots)
        n = len(plots)
        exp_d1 = exp_dm = 0.0
        for i in range(n):
            row_d1 = row_dm = 0.0
            for j in range(n):
                if i != j:
                    s = metrics.rouge_scores(plots[i], plots[j])
                    row_d1 += s.d1
                    row_dm += s.d_macro
            exp_d1 += row_d1 / (n - 1)
            exp_dm += row_dm / (n - 1)
        assert abs(got_d1 - exp_d1 / n) < 1e-9
        assert abs(got_dm - exp_dm / n) < 1e-9
    report("ROUGE correctness: hand cases exact, 100/100 diversity sets match brute force")


# ---------------------------------------------------------------------------
# Criterion 3: game-environment invariants over randomized sequences
# ---------------------------------------------------------------------------

def random_candidate(rng, domain):
    spec = rng.choice(domain.schema)
    subject = rng.choice(domain.character_ids())
    args = []
    for param in spec.parameters:
        if param.kind == "character":
            args.append(rng.choice(domain.character_ids()))
        elif param.kind == "location":
            args.append(rng.choice(domain.location_ids()))
        else:
            args.append(rng.choice(["hello there", "hmm", "watch out"]))
    return A(subject, spec.name, tuple(args))


def test_game_environment_invariants_randomized():
    rng = random.Random(31337)
    sequences = 0
    for case in range(1000):
        placement = {c: rng.choice(DOMAIN.location_ids()) for c in DOMAIN.character_ids()}
        world = init_world(DOMAIN, placement)
        died: set[str] = set()
        for step in range(6):
            accepted = None
            for _ in range(30):
                action = random_candidate(rng, DOMAIN)
                verdict = is_executable(world, action, DOMAIN)
                if verdict.ok:
                    post, record = execute(world, action, DOMAIN)
                    # agreement: executable implies execute succeeds
                    # delta completeness: replay reproduces the post state
                    assert worlds_equal(apply_deltas(world, record.resulting_deltas), post)
                    # dead-stay-dead: no executed subject was ever dead
                    assert record.action.subject not in died
                    died |= {c for c, alive in post.alive.items() if not alive}
                    world = post
                    accepted = action
                    break
                else:
                    with pytest.raises(PreconditionError) as err:
                        execute(world, action, DOMAIN)
                    assert err.value.reason == verdict.reason
            if accepted is None:
                break
        sequences += 1
    assert sequences == 1000
    report("game-environment invariants: 1000/1000 randomized sequences clean")


# ---------------------------------------------------------------------------
# Criterion 4: causal-soundness dominance
# ---------------------------------------------------------------------------

def approving_judges(max_len=5):
    entries = {"coherency#0#r1": "OK"}
    for i in range(max_len):
        entries[f"motivation#0#r1#{i}"] = json.dumps({"established": True, "explanation": ""})
    return ScriptedProvider(entries)


def test_causal_dominance_fuzzed():
    rng = random.Random(4242)
    judges = approving_judges()
    approved_count = 0
    for case in range(300):
        placement = {c: rng.choice(DOMAIN.location_ids()) for c in DOMAIN.character_ids()}
        world = init_world(DOMAIN, placement)
        if rng.random() < 0.5:  # sometimes somebody is already dead
            victim = rng.choice([c for c in DOMAIN.character_ids() if c != "hunter"])
            if world.positions[victim] != world.positions["hunter"]:
                world, _ = execute(world, A("hunter", "moveTo", (world.positions[victim],)), DOMAIN)
            world, _ = execute(world, A("hunter", "kill", (victim,)), DOMAIN)
        plan = ActionSequence(
            actions=[random_candidate(rng, DOMAIN) for _ in range(rng.randint(1, 4))]
        )
        feedback = review_plan(plan, world, DOMAIN, judges)
        if feedback.approved:
            approved_count += 1
            current = world
            for action in plan.actions:  # approved plans execute without error
                current, _ = execute(current, action, DOMAIN)
        else:
            assert feedback.causal_failures, "judges approve everything else"
    assert approved_count > 10, "fuzz produced too few approved plans to be meaningful"
    report(f"causal dominance: {approved_count} approved plans all executed cleanly")


def test_dead_subject_plan_rejected_with_correct_index():
    world = init_world(DOMAIN, default_placement(DOMAIN))
    world, _ = execute(world, A("hunter", "kill", ("deer",)), DOMAIN)
    plan = ActionSequence(
        actions=[
            A("dove", "moveTo", ("brook",)),
            A("deer", "moveTo", ("mountain",)),  # dead subject at index 1
            A("cat", "think", ("hm",)),
        ]
    )
    feedback = review_plan(plan, world, DOMAIN, approving_judges())
    assert not feedback.approved
    assert feedback.causal_failures[0] == (1, "subject not alive")
    verdicts = check_causal_soundness(plan, world, DOMAIN)
    assert [v.ok for v in verdicts] == [True, False, False]
    report("dead-subject plans rejected at the correct index")


# ---------------------------------------------------------------------------
# Criterion 5: end-to-end scripted determinism
# ---------------------------------------------------------------------------

E2E_TEXT = "The ant fell into water. A dove dropped a leaf next to the ant. The ant was saved."

E2E_ACT_EVENTS = [
    "a small creature gets into an accident",
    "one character helps the other character who is in danger",
    "the favor is returned",
]


def e2e_script():
    parts = [
        {
            "pivot_extract": json.dumps(
                [
                    {"subject": "ant", "action": "moveTo(brook)"},
                    {"subject": "dove", "action": "moveTo(brook)"},
                    {"subject": "dove", "action": "save(ant)"},
                ]
            ),
            "outline_variations": json.dumps(["v1", "v2", "v3"]),
            "outline_candidates": json.dumps(
                {
                    "beat": ["b1", "b2", "b3"],
                    "scene": ["s1"],
                    "sequence": ["q1"],
                    "act": E2E_ACT_EVENTS,
                    "story": ["one line"],
                }
            ),
        },
        # human session (default config: 2 player actions, 1 npc turn)
        event_entries(0, [("dove", "moveTo(brook)"), ("hunter", "moveTo(brook)"),
                          ("hunter", "attack(dove)")]),
        event_entries(1, [("witch", "moveTo(brook)"), ("witch", "attack(hunter)")]),
        event_entries(2, [("hunter", "moveTo(forest)"), ("cat", "think(What a day)")]),
        no_fulfillment_entries(3),
        npc_pass_entries(2, ["ant", "hunter"]),
        {"summary": "The dove sought help and the forest found peace."},
    ]
    for ptype in ("positive", "negative", "roleplayer"):
        prefix = f"set0.{ptype}"
        parts.append(event_entries(
            0, [("ant", "moveTo(brook)"), ("hunter", "moveTo(brook)"), ("hunter", "attack(ant)")],
            prefix=prefix,
        ))
        parts.append(player_entries(0, ptype,
                                    [("dove", "moveTo(brook)"), ("dove", "save(ant)")],
                                    prefix=prefix))
        parts.append(npc_pass_entries(2, ["cat", "cat"], prefix=prefix))
        parts.append(no_fulfillment_entries(3, prefix=prefix))
        parts.append(event_entries(1, [("witch", "think(The forest is restless)")], prefix=prefix))
        parts.append(player_entries(1, ptype,
                                    [("dove", "think(all quiet)"), ("dove", "moveTo(forest)")],
                                    prefix=prefix))
        parts.append(event_entries(2, [("cat", "moveTo(village)")], prefix=prefix))
        parts.append({f"{prefix}:summary": f"Summary for {prefix}."})
        parts.append(metric_entries(f"v0-{ptype}"))
    return parts


def run_e2e_flow():
    provider = scripted(*e2e_script())
    pivot = extract_pivot(E2E_TEXT, DOMAIN, provider, moral="kindness is never wasted")
    space = NarrativeSpace(
        id="space-0001", domain_ref="fairytale_forest", pivot_id=pivot.id,
        moral="kindness is never wasted", variants=[pivot],
    )
    space.outline = instances_to_outline(
        [pivot], AbstractionLevel.ACT, None, DOMAIN, provider, moral=space.moral
    )
    space.variants.extend(generate_variants(space, 1, DOMAIN, provider))

    world = init_world(DOMAIN, default_placement(DOMAIN))
    session_actions = [
        A("dove", "moveTo", ("forest",)),
        A("dove", "speakTo", ("witch", "Can you help us?")),
        A("dove", "think", ("I hope the ant is safe.",)),
        A("dove", "moveTo", ("brook",)),
    ]
    plot = run_game_loop(space.outline, DOMAIN, world, queue_player(session_actions),
                         provider, player_character="dove")
    space_json = json.dumps(space_to_dict(space), sort_keys=True, ensure_ascii=False)
    plot_json = json.dumps(plot_to_dict(plot), sort_keys=True, ensure_ascii=False)
    return space_json, plot_json, plot


def test_end_to_end_scripted_determinism():
    started = time.monotonic()
    first_space, first_plot, plot = run_e2e_flow()
    second_space, second_plot, _ = run_e2e_flow()
    elapsed = time.monotonic() - started
    assert first_space == second_space, "space artifacts differ between runs"
    assert first_plot == second_plot, "plot artifacts differ between runs"
    assert len(plot.segments) == 3
    assert plot.complete
    assert elapsed < 10.0, f"two scripted runs took {elapsed:.2f}s"
    report(f"end-to-end determinism: byte-identical artifacts, 3 segments, {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# Criterion 6: world-state change rate is exactly 1.00 over 20 plots
# ---------------------------------------------------------------------------

def test_world_state_change_rate_is_exact_one():
    from storyloom.llm import PrefixedProvider
    from storyloom.narrative import make_outline

    outline = make_outline(["danger finds a creature", "the forest reacts"], AbstractionLevel.ACT)
    config = CompilerConfig(player_actions_per_turn=1, npc_turns_per_interlude=0)
    follow_up = [("hunter", "moveTo(mountain)"), ("witch", "think(So it goes)")]

    script = dict(event_entries(0, [("hunter", "attack(deer)")], prefix="base"))
    for i in range(20):
        prefix = f"neg{i}"
        script.update(no_fulfillment_entries(2, prefix=prefix))
        if i == 0:
            # this batch first proposes a plan using the dead deer; the
            # engine rejects it and the second round goes through
            script[f"{prefix}:{plan_tag(1, 1)}"] = plan_response(("deer", "moveTo(brook)"))
            script.update(approve_plan_entries(1, 1, round_no=1, prefix=prefix))
            script[f"{prefix}:{plan_tag(1, 2)}"] = plan_response(*follow_up)
            script.update(approve_plan_entries(1, 2, round_no=2, prefix=prefix))
        else:
            script.update(event_entries(1, follow_up, prefix=prefix))
        script[f"{prefix}:summary"] = "s"
    provider = ScriptedProvider(script)

    world = init_world(DOMAIN, default_placement(DOMAIN))
    base = GameLoop(outline, DOMAIN, world, PrefixedProvider(provider, "base"),
                    config=config, player_character="dove")
    base.compile_next_event()
    base_state = base.to_state()

    plots = []
    for i in range(20):
        loop = GameLoop.from_state(base_state, outline, DOMAIN,
                                   PrefixedProvider(provider, f"neg{i}"),
                                   config=config, player_character="dove")
        loop.player_action(A("dove", "kill", ("deer",)))
        while not loop.finished:
            if loop.phase == "npc":
                loop.npc_phase()
            elif loop.phase == "compile":
                loop.compile_next_event()
        plots.append(loop.finish())

    assert all(p.complete for p in plots)
    rate = metrics.world_state_change_rate(plots, "deer")
    assert rate == 1.0
    report("world-state change rate: exactly 1.00 over 20 plots")


# ---------------------------------------------------------------------------
# Criterion 7: lexical metrics
# ---------------------------------------------------------------------------

def test_lexical_hand_cases_and_monotonicity():
    lex = metrics.load_bundled_lexicon("concreteness")
    assert abs(metrics.concreteness_rate("the cat", lex).value - 4.8) < 1e-9
    assert abs(metrics.concreteness_rate("the cat and the animal", lex).value - 4.15) < 1e-9

    rng = random.Random(77)
    words = sorted(lex.entries)
    substitutions = 0
    while substitutions < 200:
        tokens = rng.sample(words, rng.randint(2, 8))
        index = rng.randrange(len(tokens))
        lower_pool = [w for w in words if lex.entries[w] < lex.entries[tokens[index]]]
        if not lower_pool:
            continue
        replacement = rng.choice(lower_pool)
        before = metrics.concreteness_rate(" ".join(tokens), lex).value
        tokens[index] = replacement
        after = metrics.concreteness_rate(" ".join(tokens), lex).value
        assert after < before, "replacing one token with a lower-scored token must lower the mean"
        substitutions += 1
    report("lexical metrics: hand cases exact, 200/200 substitutions strictly monotone")


# ---------------------------------------------------------------------------
# Criterion 8 (optional, live provider): directional abstraction ordering
# ---------------------------------------------------------------------------

@pytest.mark.skipif(
    not os.environ.get("STORYLOOM_LIVE"),
    reason="live-provider directional check; set STORYLOOM_LIVE=1 with LLM_* configured",
)
def test_live_concreteness_ordering_over_stories():
    from storyloom.abstraction import generate_outline_candidates
    from storyloom.llm import HttpProvider, PrefixedProvider

    provider = HttpProvider()
    lex = metrics.load_bundled_lexicon("concreteness")
    stories_dir = os.environ.get("STORYLOOM_LIVE_STORIES")
    if stories_dir:
        from pathlib import Path

        stories = [p.read_text() for p in sorted(Path(stories_dir).glob("*.txt"))][:25]
    else:
        from storyloom.domain import DATA_DIR

        base = [(DATA_DIR / "stories" / n).read_text()
                for n in ("kindness_never_wasted.txt", "kindness_not_always_rewarded.txt")]
        stories = (base * 10)[:20]
    assert len(stories) >= 20

    per_level = {"scene": [], "sequence": [], "act": []}
    for i, story in enumerate(stories):
        candidates = generate_outline_candidates([story], DOMAIN,
                                                 PrefixedProvider(provider, f"live{i}"))
        for level in per_level:
            text = " ".join(candidates[level])
            try:
                per_level[level].append(metrics.concreteness_rate(text, lex).value)
            except Exception:
                per_level[level].append(0.0)

    mean = lambda xs: sum(xs) / len(xs)
    assert mean(per_level["scene"]) > mean(per_level["sequence"]) > mean(per_level["act"])
    report("live directional check: scene > sequence > act concreteness ordering")

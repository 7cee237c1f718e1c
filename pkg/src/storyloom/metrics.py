"""Quantitative measures over outlines and plots.

ROUGE-based distances (word-level d1 = 1 - ROUGE-1 F, macro distance
d_macro = 1 - mean of ROUGE-1/2/L F), lexicon-based concreteness and
imageability, judged intent/emergence coordinates for the variant scatter
plot, and the player-impact metrics.
"""

from __future__ import annotations

import logging
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

from . import llm
from .errors import MetricError
from .narrative import ProgressionPoint, Variant
from .plots import GamePlot, records_after_player, render_plot_text, render_records

log = logging.getLogger("storyloom.metrics")

DATA_DIR = Path(__file__).parent / "data"
PROGRESSION_STAGES = (0.25, 0.5, 0.75, 1.0)

_PUNCTUATION = re.compile(r"[^\w\s]", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase, treat punctuation as boundaries, split on whitespace."""
    return _PUNCTUATION.sub(" ", text.lower()).split()


# ---------------------------------------------------------------------------
# ROUGE
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RougeScores:
    r1: float
    r2: float
    rl: float

    @property
    def r_macro(self) -> float:
        return (self.r1 + self.r2 + self.rl) / 3.0

    @property
    def d1(self) -> float:
        return 1.0 - self.r1

    @property
    def d_macro(self) -> float:
        return 1.0 - self.r_macro


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _f_measure(matches: int, cand_total: int, ref_total: int) -> float:
    # two empty sides are identical by definition; one empty side matches nothing
    if cand_total == 0 and ref_total == 0:
        return 1.0
    if cand_total == 0 or ref_total == 0:
        return 0.0
    precision = matches / cand_total
    recall = matches / ref_total
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _rouge_n(cand: list[str], ref: list[str], n: int) -> float:
    cand_grams = _ngrams(cand, n)
    ref_grams = _ngrams(ref, n)
    matches = sum((cand_grams & ref_grams).values())
    return _f_measure(matches, sum(cand_grams.values()), sum(ref_grams.values()))


def _lcs_length(a: list[str], b: list[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        current = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                current.append(prev[j - 1] + 1)
            else:
                current.append(max(prev[j], current[-1]))
        prev = current
    return prev[-1]


def _rouge_l(cand: list[str], ref: list[str]) -> float:
    return _f_measure(_lcs_length(cand, ref), len(cand), len(ref))


def rouge_scores(candidate: str, reference: str) -> RougeScores:
    """F-measure ROUGE-1/2/L between two texts."""
    cand = tokenize(candidate)
    ref = tokenize(reference)
    return RougeScores(
        r1=_rouge_n(cand, ref, 1),
        r2=_rouge_n(cand, ref, 2),
        rl=_rouge_l(cand, ref),
    )


def plot_diversity(plot_texts: Sequence[str]) -> tuple[float, float]:
    """Mean distance of each plot to the other N-1 plots, then mean over plots.

    Returns (mean d1, mean d_macro). Needs at least two plots.
    """
    n = len(plot_texts)
    if n < 2:
        raise MetricError("plot diversity needs at least 2 plots")
    d1_means = []
    dmacro_means = []
    for i, text in enumerate(plot_texts):
        scores = [rouge_scores(text, other) for j, other in enumerate(plot_texts) if j != i]
        d1_means.append(sum(s.d1 for s in scores) / (n - 1))
        dmacro_means.append(sum(s.d_macro for s in scores) / (n - 1))
    return sum(d1_means) / n, sum(dmacro_means) / n


def divergence_after_actions(
    plots_pos: Sequence[str], plots_neg: Sequence[str]
) -> tuple[float, float]:
    """Mean pairwise cross-list distance between two plot batches."""
    if not plots_pos or not plots_neg:
        raise MetricError("divergence needs plots on both sides")
    scores = [rouge_scores(p, q) for p in plots_pos for q in plots_neg]
    count = len(scores)
    return (
        sum(s.d1 for s in scores) / count,
        sum(s.d_macro for s in scores) / count,
    )


# ---------------------------------------------------------------------------
# Lexicon-based abstraction measures
# ---------------------------------------------------------------------------

LEXICON_KINDS = ("concreteness", "imageability")


@dataclass(frozen=True)
class Lexicon:
    entries: dict[str, float]
    kind: str
    stopwords: frozenset[str]


class LexicalScore(NamedTuple):
    value: float
    coverage: float  # scored / non-stopword tokens
    scored_tokens: int
    total_tokens: int


def load_lexicon(path: str | Path, kind: str, stopwords_path: str | Path | None = None) -> Lexicon:
    """Tab-separated ``word<TAB>score`` lines, UTF-8; '#' lines are comments."""
    if kind not in LEXICON_KINDS:
        raise MetricError(f"unknown lexicon kind {kind!r}")
    entries: dict[str, float] = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise MetricError(f"{path}:{line_no}: expected word<TAB>score")
        word, score = parts
        value = float(score)
        if not math.isfinite(value):
            raise MetricError(f"{path}:{line_no}: score must be finite")
        entries[word.strip().lower()] = value
    stop = load_stopwords(stopwords_path) if stopwords_path else load_stopwords()
    return Lexicon(entries=entries, kind=kind, stopwords=stop)


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    path = Path(path) if path else DATA_DIR / "stopwords.txt"
    words = {
        line.strip().lower()
        for line in path.read_text(encoding="utf-8").splitlines()
        if line.strip() and not line.startswith("#")
    }
    return frozenset(words)


def load_bundled_lexicon(kind: str) -> Lexicon:
    """The 50-word test lexicons shipped with the package."""
    name = {"concreteness": "mini_concreteness.tsv", "imageability": "mini_imageability.tsv"}
    if kind not in name:
        raise MetricError(f"unknown lexicon kind {kind!r}")
    return load_lexicon(DATA_DIR / name[kind], kind)


def _lexical_mean(text: str, lexicon: Lexicon, kind: str) -> LexicalScore:
    if lexicon.kind != kind:
        raise MetricError(f"lexicon kind {lexicon.kind!r} does not match {kind!r}")
    tokens = tokenize(text)
    scorable = [t for t in tokens if t not in lexicon.stopwords]
    scores = [lexicon.entries[t] for t in scorable if t in lexicon.entries]
    if not scores:
        raise MetricError("no scorable tokens")
    return LexicalScore(
        value=sum(scores) / len(scores),
        coverage=len(scores) / len(scorable),
        scored_tokens=len(scores),
        total_tokens=len(tokens),
    )


def concreteness_rate(text: str, lexicon: Lexicon) -> LexicalScore:
    """Mean concreteness of non-stopword tokens found in the lexicon."""
    return _lexical_mean(text, lexicon, "concreteness")


def imageability_score(text: str, lexicon: Lexicon) -> LexicalScore:
    """Mean imageability of non-stopword tokens found in the lexicon."""
    return _lexical_mean(text, lexicon, "imageability")


# ---------------------------------------------------------------------------
# Judged variant coordinates
# ---------------------------------------------------------------------------

def _judged_score(provider, template_id: str, variables: dict[str, str], tag: str) -> float:
    raw = llm.complete_structured(
        provider,
        llm.CompletionRequest(
            template_id=template_id,
            variables=variables,
            temperature=llm.JUDGE_TEMPERATURE,
            tag=tag,
        ),
        llm.parse_score,
    )
    if not 0.0 <= raw <= 1.0:
        clamped = min(1.0, max(0.0, raw))
        log.warning("judge score %s out of range for %s; clamped to %s", raw, tag, clamped)
        return clamped
    return raw


def intent_distance(variant: Variant, moral: str, provider) -> float:
    """Judged distance between the variant's expressed moral and the target."""
    return _judged_score(
        provider,
        "intent_distance",
        {"moral": moral, "plot": render_plot_text(variant.plot)},
        tag=f"intent#{variant.id}",
    )


def emergence_distance(variant: Variant, pivot: Variant, provider) -> float:
    """Judged deviation of the variant's progression from the pivot's."""
    variant_text = render_plot_text(variant.plot)
    pivot_text = render_plot_text(pivot.plot)
    if variant_text == pivot_text:
        return 0.0
    return _judged_score(
        provider,
        "emergence_distance",
        {"pivot_plot": pivot_text, "variant_plot": variant_text},
        tag=f"emergence#{variant.id}",
    )


def progression_series(
    variant: Variant,
    pivot: Variant,
    moral: str,
    provider,
    stages: Sequence[float] = PROGRESSION_STAGES,
) -> list[ProgressionPoint]:
    """Distances on plot prefixes at fixed stage fractions of plot length.

    The final stage (1.0) delegates to the full-plot distance functions so
    it is always consistent with them.
    """
    variant_records = variant.plot.all_records()
    pivot_records = pivot.plot.all_records()
    points: list[ProgressionPoint] = []
    for stage in stages:
        if not 0.0 < stage <= 1.0:
            raise MetricError(f"stage fraction {stage} outside (0, 1]")
        if stage == 1.0:
            points.append(
                ProgressionPoint(
                    stage=1.0,
                    intent_distance=intent_distance(variant, moral, provider),
                    emergence_distance=emergence_distance(variant, pivot, provider),
                )
            )
            continue
        pct = int(round(stage * 100))
        v_prefix = render_records(variant_records[: _prefix_len(len(variant_records), stage)])
        p_prefix = render_records(pivot_records[: _prefix_len(len(pivot_records), stage)])
        intent = _judged_score(
            provider, "intent_distance", {"moral": moral, "plot": v_prefix},
            tag=f"intent#{variant.id}@{pct}",
        )
        if v_prefix == p_prefix:
            emergence = 0.0
        else:
            emergence = _judged_score(
                provider, "emergence_distance",
                {"pivot_plot": p_prefix, "variant_plot": v_prefix},
                tag=f"emergence#{variant.id}@{pct}",
            )
        points.append(ProgressionPoint(stage=stage, intent_distance=intent, emergence_distance=emergence))
    return points


def _prefix_len(total: int, stage: float) -> int:
    return min(total, math.ceil(total * stage))


# ---------------------------------------------------------------------------
# Player-impact metrics
# ---------------------------------------------------------------------------

def world_state_change_rate(plots: Sequence[GamePlot], victim: str) -> float:
    """Fraction of plots where the killed character never acts again.

    1.0 means the kill persisted in every plot. Every plot must contain a
    kill of the victim.
    """
    if not plots:
        raise MetricError("no plots given")
    persistent = 0
    for i, plot in enumerate(plots):
        records = plot.all_records()
        kill_index = next(
            (
                k
                for k, rec in enumerate(records)
                if rec.action.action == "kill" and victim in rec.action.arguments
            ),
            None,
        )
        if kill_index is None:
            raise MetricError(f"plot {i} contains no kill of {victim!r}")
        reappears = any(rec.action.subject == victim for rec in records[kill_index + 1 :])
        if not reappears:
            persistent += 1
    return persistent / len(plots)


def character_involvement(plots: Sequence[GamePlot], player_character: str) -> float:
    """Mean per-plot count of records involving the player character.

    Counts records after the player's action whose subject or character
    argument is the player character.
    """
    if not plots:
        return 0.0
    counts = []
    for plot in plots:
        records = records_after_player(plot)
        counts.append(
            sum(
                1
                for rec in records
                if rec.action.subject == player_character
                or player_character in rec.action.arguments
            )
        )
    return sum(counts) / len(counts)

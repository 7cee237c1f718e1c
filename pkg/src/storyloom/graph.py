"""Merging variant paths into event graphs for export to branching tools.

Each variant play-through is a linked list of event nodes. Paths that
share an event (under an exact or judged equality function) are merged
into one graph; the export layer additionally deduplicates equal nodes
and records directed edges for path adjacency.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from . import llm
from .narrative import Variant

log = logging.getLogger("storyloom.graph")


@dataclass(frozen=True)
class EventNode:
    id: str
    label: str
    key: tuple

    @classmethod
    def from_text(cls, node_id: str, text: str) -> "EventNode":
        return cls(id=node_id, label=text, key=(text,))

    @classmethod
    def from_action(cls, node_id: str, subject: str, action: str,
                    arguments: tuple[str, ...], location: str = "") -> "EventNode":
        label = f"{subject} {action}({', '.join(arguments)})"
        return cls(id=node_id, label=label, key=(subject, action, tuple(arguments), location))


def exact_comparator(a: EventNode, b: EventNode) -> bool:
    return a.key == b.key


class JudgedComparator:
    """Model-judged event equality with an exact-match short circuit.

    Pairwise judgments are memoized per instance so repeated comparisons
    never repeat model calls. Judged equality is not required to be
    transitive; the merge's union behavior handles chains either way.
    """

    def __init__(self, provider):
        self.provider = provider
        self._memo: dict[tuple[str, str], bool] = {}

    def __call__(self, a: EventNode, b: EventNode) -> bool:
        if a.key == b.key:
            return True
        memo_key = (a.id, b.id) if a.id <= b.id else (b.id, a.id)
        if memo_key in self._memo:
            return self._memo[memo_key]
        reply = llm.complete(
            self.provider,
            llm.CompletionRequest(
                template_id="event_equality",
                variables={"event_a": a.label, "event_b": b.label},
                temperature=llm.JUDGE_TEMPERATURE,
                tag=f"event_eq#{memo_key[0]}#{memo_key[1]}",
            ),
        )
        verdict = reply.strip().lower().startswith("yes")
        self._memo[memo_key] = verdict
        return verdict


def events_equal(a: EventNode, b: EventNode, comparator=exact_comparator) -> bool:
    """True iff the two event nodes describe the same narrative event."""
    return comparator(a, b)


@dataclass
class MergedGraph:
    nodes: list[EventNode]
    edges: list[tuple[str, str]]  # between representative node ids

    def node_ids(self) -> frozenset[str]:
        return frozenset(n.id for n in self.nodes)


@dataclass
class MergeResult:
    graphs: list[MergedGraph]
    representatives: dict[str, str] = field(default_factory=dict)  # node id -> rep id

    def partition(self) -> set[frozenset[str]]:
        return {g.node_ids() for g in self.graphs}


def merge_paths(paths: list[list[EventNode]], comparator=exact_comparator) -> MergeResult:
    """Merge narrative paths into graphs of event nodes.

    For each path, collect the graph indices of all already-known events
    equal to one of the path's events: more than one index unions those
    graphs plus the path into a new graph, exactly one absorbs the path,
    none opens a new graph.
    """
    if not paths:
        return MergeResult(graphs=[])
    seen_ids: set[str] = set()
    for path in paths:
        for node in path:
            if node.id in seen_ids:
                raise ValueError(f"duplicate node id {node.id!r}")
            seen_ids.add(node.id)

    event_to_graph: dict[str, int] = {}  # node id -> graph id
    known: list[EventNode] = []  # insertion-ordered view of the dictionary's keys
    graphs: dict[int, list[EventNode]] = {}
    next_graph_id = 0
    equal_pairs: list[tuple[EventNode, EventNode]] = []

    for path in paths:
        graph_indices: set[int] = set()
        for node in path:
            for other in known:
                if comparator(node, other):
                    graph_indices.add(event_to_graph[other.id])
                    equal_pairs.append((node, other))

        if len(graph_indices) > 1:
            union: list[EventNode] = []
            for gid in sorted(graph_indices):
                union.extend(graphs.pop(gid))
            union.extend(path)
            graphs[next_graph_id] = union
            for node in union:
                event_to_graph[node.id] = next_graph_id
            next_graph_id += 1
        elif len(graph_indices) == 1:
            gid = graph_indices.pop()
            graphs[gid].extend(path)
            for node in path:
                event_to_graph[node.id] = gid
        else:
            graphs[next_graph_id] = list(path)
            for node in path:
                event_to_graph[node.id] = next_graph_id
            next_graph_id += 1

        known.extend(path)

    ordered = [graphs[gid] for gid in sorted(graphs)]
    representatives = _representatives(ordered, equal_pairs)
    merged = [
        MergedGraph(nodes=nodes, edges=_path_edges(paths, nodes, representatives))
        for nodes in ordered
    ]
    return MergeResult(graphs=merged, representatives=representatives)


def _representatives(graph_nodes, equal_pairs) -> dict[str, str]:
    """Collapse equal nodes within each graph onto their first occurrence.

    Uses exact key equality plus the judgments the merge already made, so
    export never spends extra comparator (model) calls.
    """
    known_equal = {(a.id, b.id) for a, b in equal_pairs}
    known_equal |= {(b, a) for a, b in known_equal}
    reps: dict[str, str] = {}
    for nodes in graph_nodes:
        firsts: list[EventNode] = []
        for node in nodes:
            rep = None
            for candidate in firsts:
                if node.key == candidate.key or (node.id, candidate.id) in known_equal:
                    rep = candidate
                    break
            if rep is None:
                firsts.append(node)
                reps[node.id] = node.id
            else:
                reps[node.id] = rep.id
    return reps


def _path_edges(paths, nodes, representatives) -> list[tuple[str, str]]:
    member_ids = {n.id for n in nodes}
    edges: list[tuple[str, str]] = []
    seen: set[tuple[str, str]] = set()
    for path in paths:
        for a, b in zip(path, path[1:]):
            if a.id not in member_ids:
                continue
            edge = (representatives[a.id], representatives[b.id])
            if edge[0] == edge[1] or edge in seen:
                continue
            seen.add(edge)
            edges.append(edge)
    return edges


# ---------------------------------------------------------------------------
# Building paths and exporting
# ---------------------------------------------------------------------------

def paths_from_variants(variants: list[Variant]) -> list[list[EventNode]]:
    """One node path per variant, one node per executed record."""
    paths = []
    for variant in variants:
        path = []
        for i, rec in enumerate(variant.plot.all_records()):
            path.append(
                EventNode.from_action(
                    node_id=f"{variant.id}.{i}",
                    subject=rec.action.subject,
                    action=rec.action.action,
                    arguments=rec.action.arguments,
                )
            )
        if path:
            paths.append(path)
    return paths


def export_graph(result: MergeResult) -> dict:
    """Graph document with deduplicated nodes and directed edges."""
    graphs = []
    for graph in result.graphs:
        rep_ids = []
        seen = set()
        for node in graph.nodes:
            rep = result.representatives.get(node.id, node.id)
            if rep not in seen:
                seen.add(rep)
                rep_ids.append(rep)
        labels = {n.id: n.label for n in graph.nodes}
        graphs.append(
            {
                "nodes": [{"id": rid, "label": labels[rid]} for rid in rep_ids],
                "edges": [{"from": a, "to": b} for a, b in graph.edges],
            }
        )
    return {"graphs": graphs}


def to_dot(result: MergeResult) -> str:
    """DOT rendering for quick visualization."""
    lines = ["digraph narrative {"]
    doc = export_graph(result)
    for gi, graph in enumerate(doc["graphs"]):
        lines.append(f"  subgraph cluster_{gi} {{")
        for node in graph["nodes"]:
            label = node["label"].replace('"', "'")
            lines.append(f'    "{node["id"]}" [label="{label}"];')
        for edge in graph["edges"]:
            lines.append(f'    "{edge["from"]}" -> "{edge["to"]}";')
        lines.append("  }")
    lines.append("}")
    return "\n".join(lines)

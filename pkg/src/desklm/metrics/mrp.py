"""Semantic graph scoring via maximum common edge subgraph alignment.

Graphs carry optional node labels, property/value pairs, character-range
anchors, directed labeled edges with optional attributes, and a top-node
set.  Scoring first searches for the partial injective node mapping that
maximizes the total number of matched items across all six facets (tops,
labels, properties, anchors, edges, attributes), then reports per-facet
precision/recall/F1 plus a pooled micro-average.

The search is exact (branch and bound over injective mappings) up to a
node limit, and seeded hill-climbing with greedy restarts beyond it; the
result records which method produced it.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .counts import PrfCounts

FACETS = ("tops", "labels", "properties", "anchors", "edges", "attributes")


class MrpError(Exception):
    """Malformed graph or alignment."""


@dataclass(frozen=True)
class MrpNode:
    id: int
    label: str | None = None
    properties: tuple[tuple[str, str], ...] = ()
    anchors: tuple[tuple[int, int], ...] = ()


@dataclass(frozen=True)
class MrpEdge:
    source: int
    target: int
    label: str | None = None
    attributes: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class MrpGraph:
    id: str
    nodes: tuple[MrpNode, ...] = ()
    edges: tuple[MrpEdge, ...] = ()
    tops: frozenset[int] = frozenset()
    input: str | None = None

    def __post_init__(self):
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise MrpError(f"graph {self.id}: duplicate node ids")
        known = set(ids)
        for edge in self.edges:
            if edge.source not in known or edge.target not in known:
                raise MrpError(
                    f"graph {self.id}: edge {edge.source}->{edge.target} "
                    "references unknown node"
                )
        for top in self.tops:
            if top not in known:
                raise MrpError(f"graph {self.id}: top {top} references unknown node")
        if self.input is not None:
            for node in self.nodes:
                for start, end in node.anchors:
                    if not (0 <= start <= end <= len(self.input)):
                        raise MrpError(
                            f"graph {self.id}: anchor ({start},{end}) outside input"
                        )

    def node_by_id(self, node_id: int) -> MrpNode:
        for node in self.nodes:
            if node.id == node_id:
                return node
        raise MrpError(f"graph {self.id}: unknown node {node_id}")


# ---------------------------------------------------------------------------
# JSON-lines interchange


def _pairs_from_parallel(names, values) -> tuple[tuple[str, str], ...]:
    names = names or []
    values = values or []
    if len(names) != len(values):
        raise MrpError(f"properties/values length mismatch: {names} vs {values}")
    return tuple((str(n), str(v)) for n, v in zip(names, values))


def read_mrp_jsonl(text: str) -> list[MrpGraph]:
    """Parse JSON-lines graphs (one object per line)."""
    graphs = []
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MrpError(f"line {number}: invalid JSON: {exc}") from None
        nodes = tuple(
            MrpNode(
                id=int(n["id"]),
                label=n.get("label"),
                properties=_pairs_from_parallel(n.get("properties"), n.get("values")),
                anchors=tuple(
                    (int(a["from"]), int(a["to"])) for a in n.get("anchors") or []
                ),
            )
            for n in obj.get("nodes") or []
        )
        edges = tuple(
            MrpEdge(
                source=int(e["source"]),
                target=int(e["target"]),
                label=e.get("label"),
                attributes=_pairs_from_parallel(e.get("attributes"), e.get("values")),
            )
            for e in obj.get("edges") or []
        )
        graphs.append(
            MrpGraph(
                id=str(obj.get("id", number)),
                nodes=nodes,
                edges=edges,
                tops=frozenset(int(t) for t in obj.get("tops") or []),
                input=obj.get("input"),
            )
        )
    return graphs


def write_mrp_jsonl(graphs: Iterable[MrpGraph]) -> str:
    lines = []
    for graph in graphs:
        obj = {
            "id": graph.id,
            "input": graph.input,
            "tops": sorted(graph.tops),
            "nodes": [
                {
                    "id": n.id,
                    "label": n.label,
                    "properties": [p for p, _ in n.properties],
                    "values": [v for _, v in n.properties],
                    "anchors": [{"from": a, "to": b} for a, b in n.anchors],
                }
                for n in graph.nodes
            ],
            "edges": [
                {
                    "source": e.source,
                    "target": e.target,
                    "label": e.label,
                    "attributes": [a for a, _ in e.attributes],
                    "values": [v for _, v in e.attributes],
                }
                for e in graph.edges
            ],
        }
        lines.append(json.dumps(obj, ensure_ascii=False, sort_keys=True))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Facet items


@dataclass(frozen=True)
class _FacetIndex:
    tops: frozenset[int]
    labels: dict
    properties: Counter
    anchors: dict
    edges: Counter
    attributes: Counter

    @classmethod
    def build(cls, graph: MrpGraph) -> "_FacetIndex":
        labels = {n.id: n.label for n in graph.nodes if n.label is not None}
        anchors = {n.id: frozenset(n.anchors) for n in graph.nodes if n.anchors}
        properties: Counter = Counter()
        for n in graph.nodes:
            for name, value in n.properties:
                properties[(n.id, name, value)] += 1
        edges: Counter = Counter()
        attributes: Counter = Counter()
        for e in graph.edges:
            edges[(e.source, e.target, e.label)] += 1
            for name, value in e.attributes:
                attributes[(e.source, e.target, e.label, name, value)] += 1
        return cls(frozenset(graph.tops), labels, properties, anchors, edges, attributes)

    def totals(self) -> dict[str, int]:
        return {
            "tops": len(self.tops),
            "labels": len(self.labels),
            "properties": sum(self.properties.values()),
            "anchors": len(self.anchors),
            "edges": sum(self.edges.values()),
            "attributes": sum(self.attributes.values()),
        }


def _facet_correct(
    gold: _FacetIndex, system: _FacetIndex, mapping: dict[int, int]
) -> dict[str, int]:
    correct = dict.fromkeys(FACETS, 0)
    for g, s in mapping.items():
        if g in gold.tops and s in system.tops:
            correct["tops"] += 1
        if g in gold.labels and gold.labels[g] == system.labels.get(s):
            correct["labels"] += 1
        if g in gold.anchors and gold.anchors[g] == system.anchors.get(s):
            correct["anchors"] += 1
    mapped_properties = Counter(
        {
            (mapping[node], name, value): count
            for (node, name, value), count in gold.properties.items()
            if node in mapping
        }
    )
    correct["properties"] = sum((mapped_properties & system.properties).values())
    mapped_edges = Counter(
        {
            (mapping[src], mapping[tgt], label): count
            for (src, tgt, label), count in gold.edges.items()
            if src in mapping and tgt in mapping
        }
    )
    correct["edges"] = sum((mapped_edges & system.edges).values())
    mapped_attributes = Counter(
        {
            (mapping[src], mapping[tgt], label, name, value): count
            for (src, tgt, label, name, value), count in gold.attributes.items()
            if src in mapping and tgt in mapping
        }
    )
    correct["attributes"] = sum((mapped_attributes & system.attributes).values())
    return correct


def _mapping_score(gold: _FacetIndex, system: _FacetIndex, mapping: dict[int, int]) -> int:
    return sum(_facet_correct(gold, system, mapping).values())


# ---------------------------------------------------------------------------
# Alignment search


@dataclass(frozen=True)
class McesAlignment:
    """Partial injective gold-to-system node correspondence."""

    mapping: dict[int, int] = field(default_factory=dict)
    matched_items: int = 0
    exact: bool = True


def _pair_score(gold: _FacetIndex, system: _FacetIndex, g: int, s: int) -> int:
    score = 0
    if g in gold.tops and s in system.tops:
        score += 1
    if g in gold.labels and gold.labels[g] == system.labels.get(s):
        score += 1
    if g in gold.anchors and gold.anchors[g] == system.anchors.get(s):
        score += 1
    gold_props = Counter(
        {(n, v): c for (node, n, v), c in gold.properties.items() if node == g}
    )
    system_props = Counter(
        {(n, v): c for (node, n, v), c in system.properties.items() if node == s}
    )
    score += sum((gold_props & system_props).values())
    return score


def _exact_search(
    gold_graph: MrpGraph, gold: _FacetIndex, system_graph: MrpGraph, system: _FacetIndex
) -> dict[int, int]:
    gold_ids = [n.id for n in gold_graph.nodes]
    system_ids = [n.id for n in system_graph.nodes]

    pair_scores = {
        (g, s): _pair_score(gold, system, g, s) for g in gold_ids for s in system_ids
    }
    best_pair = {g: max((pair_scores[(g, s)] for s in system_ids), default=0) for g in gold_ids}

    edge_weight: dict[int, int] = dict.fromkeys(gold_ids, 0)
    for (src, tgt, label), count in gold.edges.items():
        bonus = count + sum(
            c
            for (a, b, l, _, _), c in gold.attributes.items()
            if (a, b, l) == (src, tgt, label)
        )
        edge_weight[src] += bonus
        if tgt != src:
            edge_weight[tgt] += bonus

    # Order gold nodes by optimistic contribution, largest first, so good
    # assignments surface early and the bound prunes aggressively.
    gold_ids.sort(key=lambda g: -(best_pair[g] + edge_weight[g]))
    # Optimistic remaining gain from suffix [i:]: unmapped pair scores plus
    # every gold edge/attribute touching an unmapped node.
    suffix_bound = [0] * (len(gold_ids) + 1)
    for i in range(len(gold_ids) - 1, -1, -1):
        suffix_bound[i] = suffix_bound[i + 1] + best_pair[gold_ids[i]] + edge_weight[gold_ids[i]]

    best_mapping: dict[int, int] = {}
    best_score = _mapping_score(gold, system, best_mapping)

    def recurse(index: int, mapping: dict[int, int], used: set[int]):
        nonlocal best_mapping, best_score
        current = _mapping_score(gold, system, mapping)
        if current + suffix_bound[index] <= best_score:
            return
        if index == len(gold_ids):
            if current > best_score:
                best_score = current
                best_mapping = dict(mapping)
            return
        g = gold_ids[index]
        candidates = sorted(
            (s for s in system_ids if s not in used),
            key=lambda s: -pair_scores[(g, s)],
        )
        for s in candidates:
            mapping[g] = s
            used.add(s)
            recurse(index + 1, mapping, used)
            del mapping[g]
            used.remove(s)
        recurse(index + 1, mapping, used)

    recurse(0, {}, set())
    return best_mapping


def _greedy_start(
    gold_ids: list[int],
    system_ids: list[int],
    gold: _FacetIndex,
    system: _FacetIndex,
    rng: random.Random,
) -> dict[int, int]:
    order = list(gold_ids)
    rng.shuffle(order)
    available = set(system_ids)
    mapping: dict[int, int] = {}
    for g in order:
        if not available:
            break
        best_s = max(
            sorted(available), key=lambda s: (_pair_score(gold, system, g, s), -s)
        )
        mapping[g] = best_s
        available.remove(best_s)
    return mapping


def _hill_climb(
    gold_graph: MrpGraph,
    gold: _FacetIndex,
    system_graph: MrpGraph,
    system: _FacetIndex,
    restarts: int,
    seed: int,
) -> dict[int, int]:
    gold_ids = [n.id for n in gold_graph.nodes]
    system_ids = [n.id for n in system_graph.nodes]
    best_mapping: dict[int, int] = {}
    best_score = _mapping_score(gold, system, best_mapping)
    for restart in range(restarts):
        rng = random.Random(seed * 1_000_003 + restart)
        mapping = _greedy_start(gold_ids, system_ids, gold, system, rng)
        score = _mapping_score(gold, system, mapping)
        improved = True
        while improved:
            improved = False
            for g in gold_ids:
                current_s = mapping.get(g)
                for s in system_ids + [None]:
                    if s == current_s:
                        continue
                    trial = dict(mapping)
                    if s is None:
                        trial.pop(g, None)
                    else:
                        owner = next((k for k, v in trial.items() if v == s), None)
                        if owner is not None:
                            if current_s is None:
                                del trial[owner]
                            else:
                                trial[owner] = current_s
                        trial[g] = s
                    trial_score = _mapping_score(gold, system, trial)
                    if trial_score > score:
                        mapping, score = trial, trial_score
                        improved = True
                        break
                if improved:
                    break
        if score > best_score:
            best_mapping, best_score = mapping, score
    return best_mapping


def mces_align(
    gold: MrpGraph, system: MrpGraph, node_limit: int = 10, restarts: int = 16, seed: int = 0
) -> McesAlignment:
    """Find the injective node mapping maximizing total matched items.

    Exact (certified) when the larger graph has at most ``node_limit``
    nodes; otherwise seeded hill-climbing with greedy restarts.
    """
    gold_index = _FacetIndex.build(gold)
    system_index = _FacetIndex.build(system)
    exact = max(len(gold.nodes), len(system.nodes)) <= node_limit
    if exact:
        mapping = _exact_search(gold, gold_index, system, system_index)
    else:
        mapping = _hill_climb(gold, gold_index, system, system_index, restarts, seed)
    return McesAlignment(
        mapping=mapping,
        matched_items=_mapping_score(gold_index, system_index, mapping),
        exact=exact,
    )


# ---------------------------------------------------------------------------
# Scoring


@dataclass(frozen=True)
class MrpScore:
    """Per-facet counts plus the pooled micro-average."""

    tops: PrfCounts
    labels: PrfCounts
    properties: PrfCounts
    anchors: PrfCounts
    edges: PrfCounts
    attributes: PrfCounts

    @property
    def average(self) -> PrfCounts:
        total = PrfCounts(0, 0, 0)
        for facet in FACETS:
            total = total + getattr(self, facet)
        return total

    def facet_f1(self) -> dict[str, float]:
        values = {facet: getattr(self, facet).f1 for facet in FACETS}
        values["average"] = self.average.f1
        return values

    def __add__(self, other: "MrpScore") -> "MrpScore":
        return MrpScore(
            *(getattr(self, facet) + getattr(other, facet) for facet in FACETS)
        )


def mrp_score(gold: MrpGraph, system: MrpGraph, alignment: McesAlignment) -> MrpScore:
    """Count matched items per facet under ``alignment``."""
    gold_ids = {n.id for n in gold.nodes}
    system_ids = {n.id for n in system.nodes}
    for g, s in alignment.mapping.items():
        if g not in gold_ids or s not in system_ids:
            raise MrpError(f"alignment references unknown nodes ({g} -> {s})")
    values = list(alignment.mapping.values())
    if len(set(values)) != len(values):
        raise MrpError("alignment is not injective")
    gold_index = _FacetIndex.build(gold)
    system_index = _FacetIndex.build(system)
    correct = _facet_correct(gold_index, system_index, alignment.mapping)
    gold_totals = gold_index.totals()
    system_totals = system_index.totals()
    return MrpScore(
        **{
            facet: PrfCounts(correct[facet], system_totals[facet], gold_totals[facet])
            for facet in FACETS
        }
    )


def mrp_score_corpus(
    pairs: Sequence[tuple[MrpGraph, MrpGraph]], node_limit: int = 10, seed: int = 0
) -> MrpScore:
    """Pool per-graph counts across a corpus of (gold, system) pairs."""
    if not pairs:
        raise MrpError("no graph pairs to score")
    total: MrpScore | None = None
    for gold, system in pairs:
        alignment = mces_align(gold, system, node_limit=node_limit, seed=seed)
        score = mrp_score(gold, system, alignment)
        total = score if total is None else total + score
    return total

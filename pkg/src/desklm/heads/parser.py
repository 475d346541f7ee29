"""Biaffine arc/label scoring and maximum-spanning-arborescence decoding.

Arc score(i, j) = Hi' U Dj + u'Hi + v'Dj + b over head representations H
(artificial root prepended, n+1 rows) and dependent representations D
(n rows).  Decoding finds the highest-scoring arborescence rooted at the
artificial root via Chu-Liu/Edmonds, with at most one root child by
default; score ties prefer the smaller head index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..neural.tensor import Tensor

NEG_INF = float("-inf")


@dataclass(eq=False)
class DepArcScores:
    """Arc scores (n+1, n) and per-relation label scores (n+1, n, R)."""

    arc: Tensor
    label: Tensor | None = None

    @property
    def sentence_length(self) -> int:
        return self.arc.shape[1]


def init_biaffine_params(
    repr_dim: int, num_relations: int, seed: int = 0, dtype=np.float32
) -> dict[str, Tensor]:
    rng = np.random.Generator(np.random.PCG64(seed))
    scale = 1.0 / math.sqrt(repr_dim)

    def uniform(shape):
        return Tensor(rng.uniform(-scale, scale, size=shape).astype(dtype), requires_grad=True)

    return {
        "arc.U": uniform((repr_dim, repr_dim)),
        "arc.u": uniform((repr_dim, 1)),
        "arc.v": uniform((repr_dim, 1)),
        "arc.b": Tensor(np.zeros((), dtype=dtype), requires_grad=True),
        "label.U": uniform((num_relations, repr_dim, repr_dim)),
        "label.u": uniform((repr_dim, num_relations)),
        "label.v": uniform((repr_dim, num_relations)),
        "label.b": Tensor(np.zeros(num_relations, dtype=dtype), requires_grad=True),
    }


def biaffine_scores(heads: Tensor, dependents: Tensor, params: dict[str, Tensor]) -> DepArcScores:
    """Score all (head candidate, dependent) pairs.

    ``heads`` has n+1 rows (root first), ``dependents`` n rows.
    """
    if heads.shape[1] != dependents.shape[1]:
        raise ValueError(
            f"representation dims disagree: {heads.shape[1]} vs {dependents.shape[1]}"
        )
    arc = (
        (heads @ params["arc.U"]) @ dependents.transpose(1, 0)
        + heads @ params["arc.u"]
        + (dependents @ params["arc.v"]).transpose(1, 0)
        + params["arc.b"]
    )
    label = None
    if "label.U" in params:
        # (R, n+1, d) @ (d, n) -> (R, n+1, n) -> (n+1, n, R)
        bilinear = ((heads @ params["label.U"]) @ dependents.transpose(1, 0)).transpose(1, 2, 0)
        label = (
            bilinear
            + (heads @ params["label.u"]).reshape(heads.shape[0], 1, -1)
            + (dependents @ params["label.v"]).reshape(1, dependents.shape[0], -1)
            + params["label.b"]
        )
    return DepArcScores(arc=arc, label=label)


def _find_cycle(head_of: dict[int, int]) -> list[int] | None:
    state: dict[int, int] = {}
    for start in head_of:
        if state.get(start, 0) == 2:
            continue
        path = []
        node = start
        while node in head_of and state.get(node, 0) == 0:
            state[node] = 1
            path.append(node)
            node = head_of[node]
        if node in head_of and state.get(node) == 1:
            cycle = path[path.index(node) :]
            return cycle
        for visited in path:
            state[visited] = 2
    return None


def _chu_liu_edmonds(
    scores: dict[tuple[int, int], float], nodes: list[int], root: int, fresh: list[int]
) -> dict[int, int]:
    """Return the best head for every non-root node.

    ``scores`` maps (head, dependent) to weight; missing arcs are
    forbidden.  Ties prefer the smaller head id.
    """
    best: dict[int, int] = {}
    for dependent in nodes:
        if dependent == root:
            continue
        candidates = [h for h in nodes if (h, dependent) in scores]
        if not candidates:
            raise ValueError(f"node {dependent} has no incoming arcs")
        best[dependent] = max(candidates, key=lambda h: (scores[(h, dependent)], -h))

    cycle = _find_cycle(best)
    if cycle is None:
        return best

    cycle_set = set(cycle)
    cycle_score = sum(scores[(best[d], d)] for d in cycle)
    contracted = fresh[0]
    fresh[0] += 1

    new_scores: dict[tuple[int, int], float] = {}
    entering: dict[int, tuple[int, int]] = {}
    leaving: dict[int, tuple[int, int]] = {}
    for (head, dependent), weight in scores.items():
        head_in, dep_in = head in cycle_set, dependent in cycle_set
        if head_in and dep_in:
            continue
        if dep_in:
            adjusted = weight + cycle_score - scores[(best[dependent], dependent)]
            key = (head, contracted)
            if key not in new_scores or adjusted > new_scores[key] or (
                adjusted == new_scores[key] and dependent < entering[head][1]
            ):
                new_scores[key] = adjusted
                entering[head] = (head, dependent)
        elif head_in:
            key = (contracted, dependent)
            if key not in new_scores or weight > new_scores[key] or (
                weight == new_scores[key] and head < leaving[dependent][0]
            ):
                new_scores[key] = weight
                leaving[dependent] = (head, dependent)
        else:
            new_scores[(head, dependent)] = weight

    new_nodes = [n for n in nodes if n not in cycle_set] + [contracted]
    solution = _chu_liu_edmonds(new_scores, new_nodes, root, fresh)

    expanded: dict[int, int] = {}
    for dependent, head in solution.items():
        if dependent == contracted:
            enter_head, enter_dep = entering[head]
            expanded[enter_dep] = enter_head
            for d in cycle:
                if d != enter_dep:
                    expanded[d] = best[d]
        elif head == contracted:
            expanded[dependent] = leaving[dependent][0]
        else:
            expanded[dependent] = head
    return expanded


def _decode_with_arcs(arc: np.ndarray, allowed_root_children: set[int] | None) -> dict[int, int]:
    n = arc.shape[1]
    scores: dict[tuple[int, int], float] = {}
    for dependent in range(1, n + 1):
        for head in range(0, n + 1):
            if head == dependent:
                continue
            if head == 0 and allowed_root_children is not None:
                if dependent not in allowed_root_children:
                    continue
            scores[(head, dependent)] = float(arc[head, dependent - 1])
    return _chu_liu_edmonds(scores, list(range(n + 1)), 0, [n + 1])


def _tree_score(arc: np.ndarray, heads: dict[int, int]) -> float:
    return sum(arc[h, d - 1] for d, h in heads.items())


def decode_tree(
    scores: DepArcScores, single_root: bool = True
) -> tuple[list[int], list[int] | None]:
    """Decode the maximum-sum arborescence; returns (heads, labels).

    ``heads[i]`` is the head of token i+1 (0 = artificial root); labels
    are per-token relation ids (argmax over the selected arc) or None
    when label scores are absent.
    """
    arc = np.asarray(scores.arc.data, dtype=np.float64)
    if not np.isfinite(arc).all():
        raise ValueError("arc scores must be finite")
    n = arc.shape[1]
    if n == 0:
        return [], [] if scores.label is not None else None

    heads = _decode_with_arcs(arc, None)
    if single_root:
        root_children = [d for d, h in heads.items() if h == 0]
        if len(root_children) != 1:
            best_heads, best_score = None, NEG_INF
            for candidate in range(1, n + 1):
                forced = _decode_with_arcs(arc, {candidate})
                score = _tree_score(arc, forced)
                if score > best_score:
                    best_heads, best_score = forced, score
            heads = best_heads

    head_list = [heads[d] for d in range(1, n + 1)]
    labels = None
    if scores.label is not None:
        label_data = np.asarray(scores.label.data)
        labels = [
            int(np.argmax(label_data[head_list[d - 1], d - 1])) for d in range(1, n + 1)
        ]
    return head_list, labels

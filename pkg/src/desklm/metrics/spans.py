"""Exact-match span F1 for (possibly nested) entity sets."""

from __future__ import annotations

from collections import Counter
from typing import Iterable

from ..corpus import EntitySpan
from .counts import PrfCounts


def span_f1(gold: Iterable[EntitySpan], system: Iterable[EntitySpan]) -> PrfCounts:
    """Multiset matching of (start, end, type) triples: a system span is
    correct iff an identical triple exists in gold."""
    gold_counts = Counter(tuple(s) for s in gold)
    system_counts = Counter(tuple(s) for s in system)
    correct = sum((gold_counts & system_counts).values())
    return PrfCounts(
        correct=correct,
        system_total=sum(system_counts.values()),
        gold_total=sum(gold_counts.values()),
    )

"""Candidate ranking and recall-at-k."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .corpus import CandidateSet
from .numcore.autodiff import no_grad


@dataclass
class RankedSet:
    logits: list[float]
    order: list[int]          # candidate indices, best first
    positive_index: int


def rank_candidates(model, cset: CandidateSet,
                    resp_cache: Optional[dict] = None) -> RankedSet:
    """Score every candidate under the model's augmentation plan and sort
    by descending logit, ties broken by ascending candidate index."""
    with no_grad():
        logits = [float(node.value)
                  for node in model.candidate_logits(cset.context, cset.candidates,
                                                     resp_cache)]
    for value in logits:
        if not math.isfinite(value):
            raise ValueError("non-finite candidate logit")
    order = sorted(range(len(logits)), key=lambda idx: (-logits[idx], idx))
    return RankedSet(logits=logits, order=order, positive_index=cset.positive_index)


def rank_all(model, sets: Sequence[CandidateSet]) -> list[RankedSet]:
    """Rank every set, reusing response-side encodings across sets."""
    cache: dict = {}
    return [rank_candidates(model, cset, cache) for cset in sets]


def recall_at_k(ranked: Sequence[RankedSet], k: int) -> float:
    """Fraction of sets whose true response ranks within the top k."""
    if k < 1:
        raise ValueError(f"recall_at_k needs k >= 1, got {k}")
    if not ranked:
        raise ValueError("recall_at_k over an empty list")
    hits = sum(1 for r in ranked if r.positive_index in r.order[:k])
    return hits / len(ranked)

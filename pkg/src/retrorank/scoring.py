"""Base and combined score functions.

Base scoring is a single bilinear form (dual encoder) or dot product
(matching network) squashed by a sigmoid.  Combined scoring sums one such
term per (context view i, response view j) pair, each with its own
weights, inside a single sigmoid; with only the (0, 0) pair it reduces to
the base score exactly.  Ranking uses the pre-sigmoid logits, which order
candidates identically and avoid saturation.
"""

from __future__ import annotations

from functools import reduce
from typing import Mapping

from .numcore.autodiff import Node, add, dot, matmul, sigmoid
from .numcore.prng import Prng
from .encoders import INIT_HI, INIT_LO
from .numcore.autodiff import parameter


class ScoringError(ValueError):
    """Combined scoring asked for a view pair that was never encoded."""


def logit_de(v_m: Node, v_r: Node, weight: Node) -> Node:
    """Bilinear logit v_m . (W v_r)."""
    return dot(v_m, matmul(weight, v_r))


def score_de(v_m: Node, v_r: Node, weight: Node) -> Node:
    return sigmoid(logit_de(v_m, v_r, weight))


def logit_smn(v_mr: Node, weight: Node) -> Node:
    return dot(weight, v_mr)


def score_smn(v_mr: Node, weight: Node) -> Node:
    return sigmoid(logit_smn(v_mr, weight))


def combined_logit_de(enc_m: Mapping[int, Node], enc_r: Mapping[int, Node],
                      weights: Mapping[tuple[int, int], Node]) -> Node:
    """Sum of per-pair bilinear logits over every (i, j) in the plan."""
    terms = []
    for (i, j) in sorted(weights):
        if i not in enc_m or j not in enc_r:
            raise ScoringError(f"no encoding for view pair ({i}, {j})")
        terms.append(logit_de(enc_m[i], enc_r[j], weights[(i, j)]))
    if not terms:
        raise ScoringError("combined scoring needs at least one view pair")
    return reduce(add, terms)


def combined_score_de(enc_m, enc_r, weights) -> Node:
    return sigmoid(combined_logit_de(enc_m, enc_r, weights))


def combined_logit_smn(encodings: Mapping[tuple[int, int], Node],
                       weights: Mapping[tuple[int, int], Node]) -> Node:
    terms = []
    for pair in sorted(weights):
        if pair not in encodings:
            raise ScoringError(f"no encoding for view pair {pair}")
        terms.append(logit_smn(encodings[pair], weights[pair]))
    if not terms:
        raise ScoringError("combined scoring needs at least one view pair")
    return reduce(add, terms)


def combined_score_smn(encodings, weights) -> Node:
    return sigmoid(combined_logit_smn(encodings, weights))


def init_pair_weights_de(rng: Prng, pairs: list[tuple[int, int]], context_dim: int,
                         response_dim: int) -> dict[tuple[int, int], Node]:
    """One bilinear matrix per view pair, independently initialized."""
    return {pair: parameter(rng.fill_uniform((context_dim, response_dim),
                                             INIT_LO, INIT_HI),
                            f"pair_{pair[0]}_{pair[1]}")
            for pair in sorted(pairs)}


def init_pair_weights_smn(rng: Prng, pairs: list[tuple[int, int]],
                          dim: int) -> dict[tuple[int, int], Node]:
    return {pair: parameter(rng.fill_uniform((dim,), INIT_LO, INIT_HI),
                            f"pair_{pair[0]}_{pair[1]}")
            for pair in sorted(pairs)}

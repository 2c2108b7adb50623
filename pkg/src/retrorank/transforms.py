"""Deterministic context/response transforms and augmentation plans.

Two transform families over a conversation:

* permutation — swap the last two context messages (PERMUTE_LAST) or the
  two before the response slot (PERMUTE_PENULT); contexts too short for
  the swap pass through unchanged.
* flipping — split an utterance at the punctuation boundary nearest its
  middle (or at the exact middle if it has none) and concatenate the two
  halves in reversed order.

An AugmentationPlan lists which transforms produce the context views
(index i) and response views (index j); view (0, 0) is always the
untransformed example, and every view is recomputed the same way at
train and test time.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .corpus import DEFAULT_PUNCTUATION, Example, Message

CONTEXT_ONLY = "context_only"
CONTEXT_AND_RESPONSE = "context_and_response"


class TransformKind(enum.Enum):
    IDENTITY = "identity"
    PERMUTE_LAST = "permute_last"
    PERMUTE_PENULT = "permute_penult"
    FLIP = "flip"

    @classmethod
    def parse(cls, name: str) -> "TransformKind":
        try:
            return cls(name.strip().lower())
        except ValueError:
            options = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown transform {name!r} (choose from {options})") from None


def _validate_kinds(kinds: tuple[TransformKind, ...], side: str) -> None:
    if not kinds or kinds[0] is not TransformKind.IDENTITY:
        raise ValueError(f"{side} transforms must start with identity")
    if len(set(kinds)) != len(kinds):
        raise ValueError(f"{side} transforms contain duplicates: {kinds}")
    if kinds.count(TransformKind.IDENTITY) != 1:
        raise ValueError(f"{side} transforms must contain identity exactly once")


@dataclass(frozen=True)
class AugmentationPlan:
    context_transforms: tuple[TransformKind, ...] = (TransformKind.IDENTITY,)
    response_transforms: tuple[TransformKind, ...] = (TransformKind.IDENTITY,)

    def __post_init__(self):
        _validate_kinds(tuple(self.context_transforms), "context")
        _validate_kinds(tuple(self.response_transforms), "response")
        for kind in self.response_transforms:
            if kind in (TransformKind.PERMUTE_LAST, TransformKind.PERMUTE_PENULT):
                raise ValueError("permutations reorder context messages and do not "
                                 "apply to a single response")

    @classmethod
    def parse(cls, context_spec: str, response_spec: str = "identity") -> "AugmentationPlan":
        ctx = tuple(TransformKind.parse(s) for s in context_spec.split(",") if s.strip())
        resp = tuple(TransformKind.parse(s) for s in response_spec.split(",") if s.strip())
        return cls(ctx, resp)

    def effective_response(self, scope: str) -> tuple[TransformKind, ...]:
        if scope == CONTEXT_ONLY:
            return (TransformKind.IDENTITY,)
        if scope == CONTEXT_AND_RESPONSE:
            return tuple(self.response_transforms)
        raise ValueError(f"unknown scope {scope!r}")

    def pairs(self, scope: str) -> list[tuple[int, int]]:
        resp = self.effective_response(scope)
        return [(i, j) for i in range(len(self.context_transforms))
                for j in range(len(resp))]


def permute_context(context: list[Message], kind: TransformKind) -> list[Message]:
    """Swap two adjacent messages near the end of the context; shorter
    contexts pass through unchanged."""
    ctx = list(context)
    n = len(ctx)
    if kind is TransformKind.PERMUTE_LAST and n >= 2:
        ctx[n - 1], ctx[n - 2] = ctx[n - 2], ctx[n - 1]
    elif kind is TransformKind.PERMUTE_PENULT and n >= 3:
        ctx[n - 2], ctx[n - 3] = ctx[n - 3], ctx[n - 2]
    elif kind not in (TransformKind.PERMUTE_LAST, TransformKind.PERMUTE_PENULT):
        raise ValueError(f"permute_context got non-permutation kind {kind}")
    return ctx


def flip_utterance(tokens: list[str],
                   punctuation: frozenset[str] = DEFAULT_PUNCTUATION) -> list[str]:
    """Rotate the utterance around the break boundary nearest its middle.

    Candidate boundaries sit immediately after each punctuation token
    except a final one (punctuation stays attached to its left half).
    Ties go to the leftmost candidate; with no candidate the utterance
    breaks at floor(n/2).  Utterances of length <= 1 are returned as is.
    """
    n = len(tokens)
    if n <= 1:
        return list(tokens)
    candidates = [idx + 1 for idx, tok in enumerate(tokens[:-1]) if tok in punctuation]
    if candidates:
        middle = n / 2.0
        break_at = min(candidates, key=lambda b: abs(b - middle))
    else:
        break_at = n // 2
    return tokens[break_at:] + tokens[:break_at]


def transform_context(context: list[Message], kind: TransformKind,
                      punctuation: frozenset[str] = DEFAULT_PUNCTUATION) -> list[Message]:
    """Apply one transform to a context, never mutating the input."""
    if kind is TransformKind.IDENTITY:
        return [Message(m.speaker, list(m.tokens)) for m in context]
    if kind is TransformKind.FLIP:
        return [Message(m.speaker, flip_utterance(m.tokens, punctuation)) for m in context]
    return [Message(m.speaker, list(m.tokens)) for m in permute_context(context, kind)]


def transform_response(tokens: list[str], kind: TransformKind,
                       punctuation: frozenset[str] = DEFAULT_PUNCTUATION) -> list[str]:
    if kind is TransformKind.IDENTITY:
        return list(tokens)
    if kind is TransformKind.FLIP:
        return flip_utterance(tokens, punctuation)
    raise ValueError(f"responses support identity and flip, got {kind}")


def context_views(context: list[Message], plan: AugmentationPlan,
                  punctuation: frozenset[str] = DEFAULT_PUNCTUATION) -> list[list[Message]]:
    return [transform_context(context, kind, punctuation)
            for kind in plan.context_transforms]


def response_views(tokens: list[str], plan: AugmentationPlan, scope: str,
                   punctuation: frozenset[str] = DEFAULT_PUNCTUATION) -> list[list[str]]:
    return [transform_response(tokens, kind, punctuation)
            for kind in plan.effective_response(scope)]


def apply_plan(example: Example, plan: AugmentationPlan, scope: str,
               punctuation: frozenset[str] = DEFAULT_PUNCTUATION,
               ) -> list[tuple[int, int, Example]]:
    """Cartesian product of context and response views, as (i, j, example)
    triples; entry (0, 0) equals the input example."""
    ctxs = context_views(example.context, plan, punctuation)
    resps = response_views(example.response, plan, scope, punctuation)
    out = []
    for i, ctx in enumerate(ctxs):
        for j, resp in enumerate(resps):
            ctx_copy = ctx if len(resps) == 1 else [Message(m.speaker, list(m.tokens))
                                                    for m in ctx]
            out.append((i, j, Example(context=ctx_copy, response=list(resp),
                                      label=example.label)))
    return out

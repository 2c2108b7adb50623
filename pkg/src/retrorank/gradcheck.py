"""Central finite-difference checks for analytic gradients.

Every parameter coordinate is perturbed by +-h and the numeric slope is
compared with the tape gradient.  Relative error uses a small floor in
the denominator so exactly-zero gradients do not divide by zero.
"""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from .numcore.autodiff import Node, backward, no_grad, zero_grad

DEFAULT_H = 1e-5
DEFAULT_TOLERANCE = 1e-4
_REL_FLOOR = 1e-6


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), _REL_FLOOR)
    return float(np.max(np.abs(analytic - numeric) / denom))


def finite_difference_check(loss_fn: Callable[[], Node],
                            params: Mapping[str, Node],
                            h: float = DEFAULT_H) -> dict[str, float]:
    """Max relative error per parameter.  loss_fn must rebuild the graph
    from the parameters' current values and be deterministic."""
    zero_grad(params.values())
    backward(loss_fn())
    analytic = {name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.value))
                for name, p in params.items()}

    errors = {}
    with no_grad():
        for name, p in params.items():
            numeric = np.zeros_like(p.value)
            flat_value = p.value.reshape(-1)
            flat_numeric = numeric.reshape(-1)
            for idx in range(flat_value.size):
                orig = flat_value[idx]
                flat_value[idx] = orig + h
                up = float(loss_fn().value)
                flat_value[idx] = orig - h
                down = float(loss_fn().value)
                flat_value[idx] = orig
                flat_numeric[idx] = (up - down) / (2.0 * h)
            errors[name] = relative_error(analytic[name], numeric)
    zero_grad(params.values())
    return errors


def max_error(errors: Mapping[str, float]) -> float:
    return max(errors.values())


def toy_model_errors(model_kind: str, dims: int = 4, seed: int = 3,
                     augmented: bool = False, t: float = 0.05,
                     h: float = DEFAULT_H) -> dict[str, float]:
    """Finite-difference errors for a full model loss (bce + consistency
    penalty) at toy dimensions, for one positive and one negative pair.

    ``augmented`` switches from the identity-only plan to a 2x2
    identity/flip plan over both sides, exercising every per-pair weight.
    """
    from .corpus import Example, Message, Vocab
    from .numcore.autodiff import add, scale
    from .numcore.prng import Prng
    from .training import TrainingConfig, build_model, pair_loss, shared_context_reg
    from . import models as model_zoo

    context = [Message("u", ["aa", "bb", "cc", "."]),
               Message("a", ["dd", "ee"]),
               Message("u", ["ff", "gg", "hh", "?"])]
    example = Example(context=context, response=["hh", "aa", "bb", "."], label=1)
    negative = ["cc", "dd", "ee"]
    vocab = Vocab.build([example, Example(context=context, response=negative)],
                        min_count=1)

    plan_kwargs = ({"ctx_transforms": "identity,flip", "resp_transforms": "identity,flip",
                    "scope": "context_and_response"}
                   if augmented else {})
    config = TrainingConfig(model_kind=model_kind, t=t, seed=seed,
                            embed_dim=dims, hidden_size=dims,
                            smn_filters=2, smn_feature_dim=dims,
                            smn_accum_hidden=dims, smn_utterance_len=4,
                            **plan_kwargs)
    model = build_model(config, vocab, Prng(seed).substream("init"))

    def loss_fn():
        if isinstance(model, model_zoo.SmnModel):
            ctx_side = model.context_states(example.context)
            shared = None
        else:
            ctx_side = model.encode_context_views(example.context)
            shared = shared_context_reg(model, ctx_side, t)
        pos = pair_loss(model.forward_parts(ctx_side, example.response), 1, t, shared)
        neg = pair_loss(model.forward_parts(ctx_side, negative), 0, t, shared)
        return scale(add(pos, neg), 0.5)

    return finite_difference_check(loss_fn, model.named_params(), h=h)

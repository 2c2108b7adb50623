"""Training: regularized loss, dropout, the Adam epoch loop with seeded
shuffling/negative sampling, and early stopping on validation recall.

Per (context, response) pair the loss is binary cross-entropy on the
combined score plus ``t`` times the summed squared distances between each
transformed view's encoding and the untransformed one, which pushes the
encoders toward transform-invariant representations.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from functools import reduce
from typing import Mapping, Optional, Sequence

import numpy as np

from . import evaluation, models, scoring
from .corpus import CandidateSet, Example, Vocab, sample_negative
from .models import DeForward, SmnForward
from .numcore import AdamState, Prng, adam_step
from .numcore.autodiff import (
    Node,
    add,
    backward,
    constant,
    mul,
    scale,
    softplus,
    sq_norm,
    sub,
    zero_grad,
)
from .transforms import AugmentationPlan


class DivergenceError(RuntimeError):
    """Non-finite loss; message names the epoch and batch."""


def read_config_values(path) -> dict[str, str]:
    """Parse a flat key=value config file (blank lines and # comments ok)."""
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}: line {line_no}: expected key=value")
            key, _, raw = line.partition("=")
            values[key.strip()] = raw.strip()
    return values


@dataclass
class TrainingConfig:
    model_kind: str = "lstm_de"
    t: float = 0.05
    learning_rate: float = 0.001
    dropout_rate: float = 0.0
    max_epochs: int = 20
    patience: int = 3
    batch_size: int = 32
    seed: int = 0
    ctx_transforms: str = "identity"
    resp_transforms: str = "identity"
    scope: str = ""                 # empty -> model default
    embed_dim: int = 0              # 0 -> family default (300 DE / 200 SMN)
    hidden_size: int = 0
    smn_filters: int = 8
    smn_feature_dim: int = 50
    smn_accum_hidden: int = 50
    smn_utterance_len: int = 50
    candidate_k: int = 10
    min_count: int = 2
    grad_clip: float = 0.0          # 0 -> off

    def __post_init__(self):
        if self.model_kind not in models.MODEL_KINDS:
            raise ValueError(f"unknown model_kind {self.model_kind!r}")
        if self.t < 0:
            raise ValueError("t must be >= 0")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.embed_dim == 0:
            self.embed_dim = 200 if self.model_kind == "smn" else 300
        if self.hidden_size == 0:
            self.hidden_size = 200 if self.model_kind == "smn" else 300
        if not self.scope:
            self.scope = models.default_scope(self.model_kind)

    @property
    def plan(self) -> AugmentationPlan:
        return AugmentationPlan.parse(self.ctx_transforms, self.resp_transforms)

    @classmethod
    def from_file(cls, path, overrides: Optional[dict] = None) -> "TrainingConfig":
        """Flat key=value text; later lines win, CLI overrides win over all."""
        values: dict = dict(read_config_values(path))
        if overrides:
            values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_mapping(values)

    @classmethod
    def from_mapping(cls, values: Mapping) -> "TrainingConfig":
        fields = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in fields:
                raise ValueError(f"unknown config key {key!r}")
            ftype = fields[key].type
            if ftype == "int":
                kwargs[key] = int(raw)
            elif ftype == "float":
                kwargs[key] = float(raw)
            else:
                kwargs[key] = str(raw)
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class TrainReport:
    train_losses: list[float] = field(default_factory=list)
    valid_recalls: list[float] = field(default_factory=list)
    best_epoch: int = 0
    wall_clock_seconds: float = 0.0
    seed: int = 0

    def to_json(self, include_wall_clock: bool = True) -> str:
        payload = dataclasses.asdict(self)
        if not include_wall_clock:
            payload.pop("wall_clock_seconds")
        return json.dumps(payload, sort_keys=True)


def bce_loss(logit: Node, label: int) -> Node:
    """Cross-entropy of sigmoid(logit) against a 0/1 label, computed in
    log space: softplus(logit) - label * logit."""
    if label not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {label}")
    sp = softplus(logit)
    if label == 0:
        return sp
    return sub(sp, logit)


def dropout_mask(shape, rate: float, rng: Prng) -> np.ndarray:
    """Inverted-dropout mask: zero with probability ``rate``, survivors
    scaled by 1/(1-rate)."""
    u = rng.fill_uniform(shape)
    return np.where(u >= rate, 1.0 / (1.0 - rate), 0.0)


def dropout_apply(x: np.ndarray, rate: float, rng: Prng, mode: str = "train") -> np.ndarray:
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if mode == "eval" or rate == 0.0:
        return np.asarray(x, dtype=np.float64)
    if mode != "train":
        raise ValueError(f"dropout mode must be train or eval, got {mode!r}")
    return np.asarray(x, dtype=np.float64) * dropout_mask(np.shape(x), rate, rng)


class Dropout:
    """Graph-side dropout; one fresh mask per call from its own stream."""

    def __init__(self, rate: float, rng: Prng):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.rng = rng

    def __call__(self, node: Node) -> Node:
        if self.rate == 0.0:
            return node
        return mul(node, constant(dropout_mask(node.value.shape, self.rate, self.rng)))


def _view_distances(encodings: Mapping, base_key) -> list[Node]:
    base = encodings[base_key]
    return [sq_norm(sub(encodings[key], base))
            for key in sorted(encodings) if key != base_key]


def reg_term_de(ctx_encodings: Mapping[int, Node], resp_encodings: Mapping[int, Node],
                t: float) -> Optional[Node]:
    """t * (sum_i ||v(m^i) - v(m)||^2 + sum_j ||v(r^j) - v(r)||^2) over the
    non-identity views; None when every term vanishes identically."""
    if t == 0.0:
        return None
    terms = _view_distances(ctx_encodings, 0) + _view_distances(resp_encodings, 0)
    if not terms:
        return None
    return scale(reduce(add, terms), t)


def reg_term_smn(encodings: Mapping[tuple[int, int], Node], t: float) -> Optional[Node]:
    """t * sum_{ij} ||v(m^i, r^j) - v(m, r)||^2 over non-(0,0) views."""
    if t == 0.0:
        return None
    terms = _view_distances(encodings, (0, 0))
    if not terms:
        return None
    return scale(reduce(add, terms), t)


def pair_loss(forward, label: int, t: float,
              shared_ctx_reg: Optional[Node] = None) -> Node:
    """bce + t * consistency penalty for one scored pair; a precomputed
    context-side penalty node may be shared across candidates."""
    loss = bce_loss(forward.logit, label)
    reg = None
    if isinstance(forward, DeForward):
        if t != 0.0:
            terms = _view_distances(forward.resp_encodings, 0)
            reg = scale(reduce(add, terms), t) if terms else None
        if shared_ctx_reg is not None:
            reg = shared_ctx_reg if reg is None else add(reg, shared_ctx_reg)
    elif isinstance(forward, SmnForward):
        reg = reg_term_smn(forward.encodings, t)
    else:
        raise TypeError(f"unexpected forward result {type(forward)!r}")
    if reg is not None:
        loss = add(loss, reg)
    return loss


def shared_context_reg(model, ctx_side, t: float) -> Optional[Node]:
    """Context part of the penalty, reusable across a group's candidates."""
    if t == 0.0:
        return None
    if isinstance(model, models.SmnModel):
        return None  # joint encodings: nothing context-only to share
    terms = _view_distances(ctx_side, 0)
    if not terms:
        return None
    return scale(reduce(add, terms), t)


def _chunks(items: list, size: int):
    for start in range(0, len(items), size):
        yield items[start:start + size]


def build_model(config: TrainingConfig, vocab: Vocab, rng: Prng,
                pretrained: Optional[np.ndarray] = None,
                punctuation=None):
    from .corpus import DEFAULT_PUNCTUATION
    punct = DEFAULT_PUNCTUATION if punctuation is None else punctuation
    plan = config.plan
    if config.model_kind == "smn":
        return models.SmnModel(vocab, plan, config.scope, rng,
                               embed_dim=config.embed_dim, hidden=config.hidden_size,
                               filters=config.smn_filters,
                               feature_dim=config.smn_feature_dim,
                               accum_hidden=config.smn_accum_hidden,
                               utterance_len=config.smn_utterance_len,
                               punctuation=punct, pretrained=pretrained)
    return models.DualEncoderModel(vocab, plan, config.scope, rng,
                                   hierarchical=config.model_kind == "hre_de",
                                   embed_dim=config.embed_dim,
                                   hidden=config.hidden_size,
                                   punctuation=punct, pretrained=pretrained)


def _group_losses(model, example: Example, responses: list[tuple[list, int]],
                  t: float, drop, base_mode: bool) -> list[Node]:
    """Losses for one context scored against several labeled responses,
    sharing the context-side encodings."""
    out = []
    if base_mode:
        # single-view base score functions, with the same context sharing
        # as the combined path so the two reduce to each other exactly
        if isinstance(model, models.SmnModel):
            ctx_states = model.context_states(example.context, drop)
            for resp, label in responses:
                resp_states = model.response_states(resp, drop)
                encs = model.joint_encodings(ctx_states, resp_states, drop)
                logit = scoring.logit_smn(encs[(0, 0)], model.pair_weights[(0, 0)])
                out.append(bce_loss(logit, label))
        else:
            ctx_enc = model.encode_context_views(example.context, drop)[0]
            for resp, label in responses:
                resp_enc = model.encode_response_views(resp, drop)[0]
                logit = scoring.logit_de(ctx_enc, resp_enc, model.pair_weights[(0, 0)])
                out.append(bce_loss(logit, label))
        return out
    if isinstance(model, models.SmnModel):
        ctx_side = model.context_states(example.context, drop)
        shared = None
    else:
        ctx_side = model.encode_context_views(example.context, drop)
        shared = shared_context_reg(model, ctx_side, t)
    for resp, label in responses:
        fwd = model.forward_parts(ctx_side, resp, drop)
        out.append(pair_loss(fwd, label, t, shared))
    return out


def train(config: TrainingConfig, train_examples: Sequence[Example],
          valid_sets: Sequence[CandidateSet], vocab: Vocab,
          pretrained: Optional[np.ndarray] = None, punctuation=None,
          base_mode: bool = False):
    """Train one model; returns (model, TrainReport) with the model holding
    the best-validation-epoch parameters.

    ``base_mode`` scores through the single-view base functions instead of
    the combined sum; it requires the identity-only plan and t=0 and exists
    so reduction equivalence can be checked end to end.
    """
    if base_mode and (config.t != 0.0 or config.plan.pairs(config.scope) != [(0, 0)]):
        raise ValueError("base_mode requires the identity-only plan and t=0")

    started = time.monotonic()
    rng = Prng(config.seed)
    model = build_model(config, vocab, rng.substream("init"), pretrained, punctuation)
    shuffle_rng = rng.substream("shuffle")
    negative_rng = rng.substream("negative")
    dropout_rng = rng.substream("dropout")
    drop = Dropout(config.dropout_rate, dropout_rng) if config.dropout_rate > 0 else None

    params = model.named_params()
    state = AdamState(config.learning_rate)
    positives = [ex for ex in train_examples if ex.label == 1]
    given_negatives = [ex for ex in train_examples if ex.label == 0]
    if not positives:
        raise ValueError("training needs at least one positive example")
    pool = [ex.response for ex in positives]

    report = TrainReport(seed=config.seed)
    best_recall = -1.0
    best_snapshot = None
    for epoch in range(1, config.max_epochs + 1):
        order = list(range(len(positives)))
        shuffle_rng.shuffle(order)
        groups = []
        for idx in order:
            ex = positives[idx]
            neg = sample_negative(pool, lambda r: r == ex.response, negative_rng)
            groups.append((ex, [(ex.response, 1), (neg, 0)]))
        for ex in given_negatives:
            groups.append((ex, [(ex.response, 0)]))

        loss_sum = 0.0
        loss_count = 0
        for batch_no, batch in enumerate(_chunks(groups, config.batch_size)):
            zero_grad(params.values())
            batch_losses = []
            for ex, responses in batch:
                batch_losses.extend(_group_losses(model, ex, responses, config.t,
                                                  drop, base_mode))
            batch_loss = scale(reduce(add, batch_losses), 1.0 / len(batch_losses))
            if not np.isfinite(batch_loss.value):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch}, batch {batch_no}")
            backward(batch_loss)
            _clip_grads(params, config.grad_clip)
            if model.embedding.grad is not None:
                model.embedding.grad[Vocab.PAD] = 0.0
            adam_step(params, state)
            loss_sum += float(batch_loss.value) * len(batch_losses)
            loss_count += len(batch_losses)

        report.train_losses.append(loss_sum / loss_count)
        recall = evaluation.recall_at_k(evaluation.rank_all(model, valid_sets), 1)
        report.valid_recalls.append(recall)
        if recall > best_recall:
            best_recall = recall
            report.best_epoch = epoch
            best_snapshot = {name: node.value.copy() for name, node in params.items()}
        if epoch - report.best_epoch >= config.patience:
            break

    if best_snapshot is not None:
        for name, node in params.items():
            node.value[...] = best_snapshot[name]
    report.wall_clock_seconds = time.monotonic() - started
    return model, report


def _clip_grads(params: Mapping[str, Node], max_norm: float) -> None:
    if max_norm <= 0:
        return
    total = 0.0
    for p in params.values():
        if p.grad is not None:
            total += float(np.dot(p.grad.ravel(), p.grad.ravel()))
    norm = np.sqrt(total)
    if norm > max_norm:
        factor = max_norm / norm
        for p in params.values():
            if p.grad is not None:
                p.grad *= factor

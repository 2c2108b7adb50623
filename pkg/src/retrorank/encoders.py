"""Sequence encoders: LSTM cell, flat and hierarchical context encoders,
and the matching/accumulation pipeline for the matching-network scorer.

All encoders consume token id sequences (PAD=0 steps carry state through
unchanged, so right-padding never changes an encoding) and produce
autodiff Nodes.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from .corpus import Vocab
from .numcore import kernels
from .numcore.autodiff import (
    Node,
    ShapeError,
    add,
    concat,
    conv2d_maxpool,
    dot,
    gather_rows,
    matmul,
    mul,
    narrow,
    parameter,
    reshape,
    row,
    sigmoid,
    stack_rows,
    tanh,
)
from .numcore.autodiff import _accum, _make  # shared graph plumbing
from .numcore.prng import Prng

DropFn = Optional[Callable[[Node], Node]]

INIT_LO, INIT_HI = -0.05, 0.05


class LstmParams:
    """Gate weights for one LSTM layer, gate order [input, forget, cell, output].

    The forget-gate bias starts at 1.0 so early training does not wipe the
    cell state.
    """

    def __init__(self, w_in: Node, w_rec: Node, bias: Node):
        self.w_in = w_in
        self.w_rec = w_rec
        self.bias = bias
        self.hidden = w_rec.value.shape[1]
        self.input_dim = w_in.value.shape[1]

    @classmethod
    def init(cls, rng: Prng, input_dim: int, hidden: int, name: str) -> "LstmParams":
        w_in = rng.fill_uniform((4 * hidden, input_dim), INIT_LO, INIT_HI)
        w_rec = rng.fill_uniform((4 * hidden, hidden), INIT_LO, INIT_HI)
        bias = rng.fill_uniform((4 * hidden,), INIT_LO, INIT_HI)
        bias[hidden:2 * hidden] = 1.0
        return cls(parameter(w_in, f"{name}.w_in"),
                   parameter(w_rec, f"{name}.w_rec"),
                   parameter(bias, f"{name}.bias"))

    def named(self, prefix: str) -> dict[str, Node]:
        return {f"{prefix}.w_in": self.w_in, f"{prefix}.w_rec": self.w_rec,
                f"{prefix}.bias": self.bias}


def lstm_step(params: LstmParams, x: Node, h_prev: Node, c_prev: Node) -> tuple[Node, Node]:
    """One LSTM step built from elementary ops (the fused sequence kernel
    must agree with this bit for bit on unmasked steps)."""
    h = params.hidden
    if x.value.shape != (params.input_dim,):
        raise ShapeError(f"lstm_step: input shape {x.value.shape}, "
                         f"expected ({params.input_dim},)")
    pre = add(add(matmul(params.w_in, x), matmul(params.w_rec, h_prev)), params.bias)
    i_gate = sigmoid(narrow(pre, 0, 0, h))
    f_gate = sigmoid(narrow(pre, 0, h, h))
    g_cell = tanh(narrow(pre, 0, 2 * h, h))
    o_gate = sigmoid(narrow(pre, 0, 3 * h, h))
    c = add(mul(f_gate, c_prev), mul(i_gate, g_cell))
    h_out = mul(o_gate, tanh(c))
    return h_out, c


def lstm_sequence(params: LstmParams, inputs: Node,
                  mask: Optional[np.ndarray] = None) -> Node:
    """Run the layer over a (T, D) input node, returning all hiddens (T, H).

    Fused op: the whole recurrence is one tape entry backed by the kernel
    backend, with the batched weight-gradient matmuls done here.
    """
    x = inputs.value
    steps = x.shape[0]
    if x.shape[1] != params.input_dim:
        raise ShapeError(f"lstm_sequence: input dim {x.shape[1]}, "
                         f"expected {params.input_dim}")
    if mask is None:
        mask = np.ones(steps, dtype=np.uint8)
    else:
        mask = np.asarray(mask, dtype=np.uint8)
    w_in, w_rec, bias = params.w_in, params.w_rec, params.bias
    ax = x @ w_in.value.T
    hs, cs, gates = kernels.lstm_forward(ax, w_rec.value, bias.value, mask)

    def backward(out):
        da = kernels.lstm_backward(w_rec.value, mask, hs, cs, gates, out.grad)
        if w_in.requires_grad:
            _accum(w_in, da.T @ x)
        if w_rec.requires_grad:
            h_prev = np.vstack([np.zeros((1, params.hidden)), hs[:-1]])
            _accum(w_rec, da.T @ h_prev)
        if bias.requires_grad:
            _accum(bias, da.sum(axis=0))
        if inputs.requires_grad:
            _accum(inputs, da @ w_in.value)

    return _make(hs, (w_in, w_rec, bias, inputs), backward)


def _pad_mask(ids: Sequence[int]) -> np.ndarray:
    return np.fromiter((1 if t != Vocab.PAD else 0 for t in ids),
                       dtype=np.uint8, count=len(ids))


def _run_lstm(params: LstmParams, embedding: Node, ids: Sequence[int],
              drop: DropFn = None) -> Node:
    if not ids:
        raise ValueError("cannot encode an empty token sequence")
    x = gather_rows(embedding, list(ids))
    if drop is not None:
        x = drop(x)
    return lstm_sequence(params, x, _pad_mask(ids))


def final_hidden(states: Node) -> Node:
    return row(states, states.value.shape[0] - 1)


class DeParams:
    """Dual-encoder parameters: shared embedding, a word-level LSTM, and
    (for the hierarchical variant) an utterance-level LSTM."""

    def __init__(self, embedding: Node, word: LstmParams,
                 utterance: Optional[LstmParams] = None):
        self.embedding = embedding
        self.word = word
        self.utterance = utterance

    @classmethod
    def init(cls, rng: Prng, vocab_size: int, embed_dim: int, hidden: int,
             hierarchical: bool, pretrained: Optional[np.ndarray] = None) -> "DeParams":
        emb = rng.fill_uniform((vocab_size, embed_dim), INIT_LO, INIT_HI)
        if pretrained is not None:
            if pretrained.shape != emb.shape:
                raise ShapeError(f"pretrained embeddings {pretrained.shape}, "
                                 f"expected {emb.shape}")
            emb = pretrained.copy()
        emb[Vocab.PAD] = 0.0
        word = LstmParams.init(rng, embed_dim, hidden, "word")
        utterance = LstmParams.init(rng, hidden, hidden, "utterance") if hierarchical else None
        return cls(parameter(emb, "embedding"), word, utterance)

    def named(self) -> dict[str, Node]:
        out = {"embedding": self.embedding}
        out.update(self.word.named("word"))
        if self.utterance is not None:
            out.update(self.utterance.named("utterance"))
        return out

    @property
    def context_dim(self) -> int:
        base = self.word.hidden
        return 2 * base if self.utterance is not None else base


def encode_context_lstm(params: DeParams, context_ids: Sequence[Sequence[int]],
                        eou_id: int, drop: DropFn = None) -> Node:
    """Flat context encoding: concatenate messages oldest-first with a
    separator token between them, return the final hidden state."""
    flat: list[int] = []
    for idx, msg in enumerate(context_ids):
        if idx > 0:
            flat.append(eou_id)
        flat.extend(msg)
    return final_hidden(_run_lstm(params.word, params.embedding, flat, drop))


def encode_context_hre(params: DeParams, context_ids: Sequence[Sequence[int]],
                       eou_id: int, drop: DropFn = None) -> Node:
    """Hierarchical context encoding: utterance-level LSTM over per-message
    word-level finals, concatenated with the flat encoding."""
    if params.utterance is None:
        raise ValueError("this parameter bundle has no utterance-level layer")
    finals = [final_hidden(_run_lstm(params.word, params.embedding, msg, drop))
              for msg in context_ids]
    utt_in = stack_rows(finals)
    if drop is not None:
        utt_in = drop(utt_in)
    utt_states = lstm_sequence(params.utterance, utt_in)
    flat_enc = encode_context_lstm(params, context_ids, eou_id, drop)
    return concat([final_hidden(utt_states), flat_enc])


def encode_response(params: DeParams, response_ids: Sequence[int],
                    drop: DropFn = None) -> Node:
    return final_hidden(_run_lstm(params.word, params.embedding, response_ids, drop))


# ------------------------------------------------------------------ matching

class SmnParams:
    """Matching-network parameters: word embeddings/LSTM, a bilinear
    hidden-similarity matrix, conv+pool feature extraction over the two
    similarity channels, and the accumulation LSTM."""

    def __init__(self, embedding: Node, word: LstmParams, sim: Node, conv: Node,
                 proj_w: Node, proj_b: Node, accum: LstmParams, utterance_len: int):
        self.embedding = embedding
        self.word = word
        self.sim = sim
        self.conv = conv
        self.proj_w = proj_w
        self.proj_b = proj_b
        self.accum = accum
        self.utterance_len = utterance_len

    @classmethod
    def init(cls, rng: Prng, vocab_size: int, embed_dim: int = 200,
             hidden: int = 200, filters: int = 8, feature_dim: int = 50,
             accum_hidden: int = 50, utterance_len: int = 50,
             pretrained: Optional[np.ndarray] = None) -> "SmnParams":
        emb = rng.fill_uniform((vocab_size, embed_dim), INIT_LO, INIT_HI)
        if pretrained is not None:
            if pretrained.shape != emb.shape:
                raise ShapeError(f"pretrained embeddings {pretrained.shape}, "
                                 f"expected {emb.shape}")
            emb = pretrained.copy()
        emb[Vocab.PAD] = 0.0
        word = LstmParams.init(rng, embed_dim, hidden, "word")
        sim = rng.fill_uniform((hidden, hidden), INIT_LO, INIT_HI)
        conv = rng.fill_uniform((filters, 2, 3, 3), INIT_LO, INIT_HI)
        pooled = ((utterance_len + 1) // 2) ** 2 * filters
        proj_w = rng.fill_uniform((feature_dim, pooled), INIT_LO, INIT_HI)
        proj_b = rng.fill_uniform((feature_dim,), INIT_LO, INIT_HI)
        accum = LstmParams.init(rng, feature_dim, accum_hidden, "accum")
        return cls(parameter(emb, "embedding"), word, parameter(sim, "sim"),
                   parameter(conv, "conv"), parameter(proj_w, "proj_w"),
                   parameter(proj_b, "proj_b"), accum, utterance_len)

    def named(self) -> dict[str, Node]:
        out = {"embedding": self.embedding}
        out.update(self.word.named("word"))
        out.update({"sim": self.sim, "conv": self.conv,
                    "proj_w": self.proj_w, "proj_b": self.proj_b})
        out.update(self.accum.named("accum"))
        return out


class UtteranceStates:
    """Per-utterance matching inputs: padded embeddings and masked hiddens."""

    __slots__ = ("emb", "hid")

    def __init__(self, emb: Node, hid: Node):
        self.emb = emb
        self.hid = hid


def smn_word_states(params: SmnParams, ids: Sequence[int],
                    drop: DropFn = None) -> UtteranceStates:
    """Pad/cut to the fixed matching length, embed, and run the word LSTM.
    Embedding and hidden rows at padding positions are zeroed so nothing
    at a pad position can leak into the similarity maps."""
    length = params.utterance_len
    padded = list(ids[:length]) + [Vocab.PAD] * max(0, length - len(ids))
    mask = _pad_mask(padded)
    x = gather_rows(params.embedding, padded)
    if drop is not None:
        x = drop(x)
    states = lstm_sequence(params.word, x, mask)
    col = mask.astype(np.float64)[:, None]
    emb = mul(x, Node(np.repeat(col, params.word.input_dim, axis=1)))
    hid = mul(states, Node(np.repeat(col, params.word.hidden, axis=1)))
    return UtteranceStates(emb=emb, hid=hid)


def _transpose(a: Node) -> Node:
    out_val = np.ascontiguousarray(a.value.T)

    def backward(out):
        if a.requires_grad:
            _accum(a, out.grad.T)

    return _make(out_val, (a,), backward)


def smn_match(params: SmnParams, message: UtteranceStates,
              response: UtteranceStates) -> Node:
    """Fixed-size relatedness feature for one (message, response) pair.

    Channel 1 is the word-embedding dot-product map, channel 2 the
    bilinear map over LSTM hiddens; conv+maxpool over the stacked
    channels, then a tanh projection down to the feature dimension.
    """
    ch1 = matmul(message.emb, _transpose(response.emb))
    ch2 = matmul(matmul(message.hid, params.sim), _transpose(response.hid))
    pooled = conv2d_maxpool(stack_rows([ch1, ch2]), params.conv)
    flat = reshape(pooled, (-1,))
    return tanh(add(matmul(params.proj_w, flat), params.proj_b))


def smn_accumulate(params: SmnParams, features: Sequence[Node],
                   drop: DropFn = None) -> Node:
    """Final hidden of the accumulation LSTM over per-message features in
    turn order."""
    if not features:
        raise ValueError("need at least one matching feature to accumulate")
    seq = stack_rows(list(features))
    if drop is not None:
        seq = drop(seq)
    return final_hidden(lstm_sequence(params.accum, seq))


def encode_smn(params: SmnParams, context_ids: Sequence[Sequence[int]],
               response_ids: Sequence[int], drop: DropFn = None) -> Node:
    """Joint context/response encoding: match each message against the
    response, then accumulate in turn order."""
    resp = smn_word_states(params, response_ids, drop)
    features = [smn_match(params, smn_word_states(params, msg, drop), resp)
                for msg in context_ids]
    return smn_accumulate(params, features, drop)

"""Model bundles tying a vocabulary, an augmentation plan, encoder
parameters and per-pair combination weights into one scorable object.

Three families share the interface:

* ``lstm_de``  — flat word-level context encoder, bilinear scoring
* ``hre_de``   — hierarchical context encoder, bilinear scoring
* ``smn``      — per-message matching features accumulated by an LSTM,
                 dot-product scoring

``forward_parts`` exposes the per-view encodings so the trainer can add
the consistency penalty; ``candidate_logits`` scores a whole candidate
set while reusing the context-side work (and an optional cross-set
response cache during evaluation).
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from . import encoders, scoring, transforms
from .corpus import DEFAULT_PUNCTUATION, Message, Vocab
from .encoders import DeParams, DropFn, SmnParams
from .numcore.autodiff import Node
from .numcore.prng import Prng
from .transforms import CONTEXT_AND_RESPONSE, CONTEXT_ONLY, AugmentationPlan

MODEL_KINDS = ("lstm_de", "hre_de", "smn")


def default_scope(model_kind: str) -> str:
    """Context-side transforms only for the dual encoders; the matching
    network transforms responses too."""
    return CONTEXT_AND_RESPONSE if model_kind == "smn" else CONTEXT_ONLY


class DeForward:
    """Per-example forward results for a dual encoder."""

    __slots__ = ("logit", "ctx_encodings", "resp_encodings")

    def __init__(self, logit, ctx_encodings, resp_encodings):
        self.logit = logit
        self.ctx_encodings = ctx_encodings
        self.resp_encodings = resp_encodings


class SmnForward:
    __slots__ = ("logit", "encodings")

    def __init__(self, logit, encodings):
        self.logit = logit
        self.encodings = encodings


class DualEncoderModel:
    def __init__(self, vocab: Vocab, plan: AugmentationPlan, scope: str,
                 rng: Prng, hierarchical: bool, embed_dim: int = 300,
                 hidden: int = 300, punctuation=DEFAULT_PUNCTUATION,
                 pretrained: Optional[np.ndarray] = None):
        self.kind = "hre_de" if hierarchical else "lstm_de"
        self.vocab = vocab
        self.plan = plan
        self.scope = scope
        self.punctuation = punctuation
        self.params = DeParams.init(rng, len(vocab), embed_dim, hidden,
                                    hierarchical, pretrained)
        self.pair_weights = scoring.init_pair_weights_de(
            rng, plan.pairs(scope), self.params.context_dim, hidden)

    def named_params(self) -> dict[str, Node]:
        out = self.params.named()
        for pair, node in sorted(self.pair_weights.items()):
            out[f"pair_{pair[0]}_{pair[1]}"] = node
        return out

    @property
    def embedding(self) -> Node:
        return self.params.embedding

    def _encode_context(self, context_ids, drop):
        if self.params.utterance is not None:
            return encoders.encode_context_hre(self.params, context_ids,
                                               self.vocab.eou_id, drop)
        return encoders.encode_context_lstm(self.params, context_ids,
                                            self.vocab.eou_id, drop)

    def encode_context_views(self, context: Sequence[Message],
                             drop: DropFn = None) -> dict[int, Node]:
        views = transforms.context_views(list(context), self.plan, self.punctuation)
        out = {}
        for i, view in enumerate(views):
            ids = [self.vocab.encode(m.tokens) for m in view]
            out[i] = self._encode_context(ids, drop)
        return out

    def encode_response_views(self, response: Sequence[str],
                              drop: DropFn = None) -> dict[int, Node]:
        views = transforms.response_views(list(response), self.plan, self.scope,
                                          self.punctuation)
        return {j: encoders.encode_response(self.params, self.vocab.encode(view), drop)
                for j, view in enumerate(views)}

    def forward_parts(self, ctx_encodings: dict[int, Node],
                      response: Sequence[str], drop: DropFn = None) -> DeForward:
        resp_encodings = self.encode_response_views(response, drop)
        logit = scoring.combined_logit_de(ctx_encodings, resp_encodings,
                                          self.pair_weights)
        return DeForward(logit, ctx_encodings, resp_encodings)

    def candidate_logits(self, context: Sequence[Message],
                         candidates: Sequence[Sequence[str]],
                         resp_cache: Optional[dict] = None) -> list[Node]:
        ctx_encodings = self.encode_context_views(context)
        logits = []
        for cand in candidates:
            key = tuple(cand)
            if resp_cache is not None and key in resp_cache:
                resp_encodings = resp_cache[key]
            else:
                resp_encodings = self.encode_response_views(cand)
                if resp_cache is not None:
                    resp_cache[key] = resp_encodings
            logits.append(scoring.combined_logit_de(ctx_encodings, resp_encodings,
                                                    self.pair_weights))
        return logits

    def base_logit(self, context: Sequence[Message],
                   response: Sequence[str], drop: DropFn = None) -> Node:
        """Single-view logit through the plain score function (no view sum)."""
        ctx = self.encode_context_views(context, drop)[0]
        resp = self.encode_response_views(response, drop)[0]
        return scoring.logit_de(ctx, resp, self.pair_weights[(0, 0)])


class SmnModel:
    def __init__(self, vocab: Vocab, plan: AugmentationPlan, scope: str,
                 rng: Prng, embed_dim: int = 200, hidden: int = 200,
                 filters: int = 8, feature_dim: int = 50, accum_hidden: int = 50,
                 utterance_len: int = 50, punctuation=DEFAULT_PUNCTUATION,
                 pretrained: Optional[np.ndarray] = None):
        self.kind = "smn"
        self.vocab = vocab
        self.plan = plan
        self.scope = scope
        self.punctuation = punctuation
        self.params = SmnParams.init(rng, len(vocab), embed_dim, hidden, filters,
                                     feature_dim, accum_hidden, utterance_len,
                                     pretrained)
        self.pair_weights = scoring.init_pair_weights_smn(
            rng, plan.pairs(scope), accum_hidden)

    def named_params(self) -> dict[str, Node]:
        out = self.params.named()
        for pair, node in sorted(self.pair_weights.items()):
            out[f"pair_{pair[0]}_{pair[1]}"] = node
        return out

    @property
    def embedding(self) -> Node:
        return self.params.embedding

    def context_states(self, context: Sequence[Message],
                       drop: DropFn = None) -> dict[int, list]:
        """Word-level matching states for every context view; independent
        of any response, so shareable across candidates."""
        views = transforms.context_views(list(context), self.plan, self.punctuation)
        out = {}
        for i, view in enumerate(views):
            out[i] = [encoders.smn_word_states(self.params,
                                               self.vocab.encode(m.tokens), drop)
                      for m in view]
        return out

    def response_states(self, response: Sequence[str], drop: DropFn = None) -> dict:
        views = transforms.response_views(list(response), self.plan, self.scope,
                                          self.punctuation)
        return {j: encoders.smn_word_states(self.params, self.vocab.encode(view), drop)
                for j, view in enumerate(views)}

    def joint_encodings(self, ctx_states: dict, resp_states: dict,
                        drop: DropFn = None) -> dict[tuple[int, int], Node]:
        out = {}
        for i, messages in ctx_states.items():
            for j, resp in resp_states.items():
                features = [encoders.smn_match(self.params, msg, resp)
                            for msg in messages]
                out[(i, j)] = encoders.smn_accumulate(self.params, features, drop)
        return out

    def forward_parts(self, ctx_states: dict, response: Sequence[str],
                      drop: DropFn = None) -> SmnForward:
        resp_states = self.response_states(response, drop)
        encodings = self.joint_encodings(ctx_states, resp_states, drop)
        logit = scoring.combined_logit_smn(encodings, self.pair_weights)
        return SmnForward(logit, encodings)

    def candidate_logits(self, context: Sequence[Message],
                         candidates: Sequence[Sequence[str]],
                         resp_cache: Optional[dict] = None) -> list[Node]:
        ctx_states = self.context_states(context)
        logits = []
        for cand in candidates:
            key = tuple(cand)
            if resp_cache is not None and key in resp_cache:
                resp_states = resp_cache[key]
            else:
                resp_states = self.response_states(cand)
                if resp_cache is not None:
                    resp_cache[key] = resp_states
            encodings = self.joint_encodings(ctx_states, resp_states)
            logits.append(scoring.combined_logit_smn(encodings, self.pair_weights))
        return logits

    def base_logit(self, context: Sequence[Message],
                   response: Sequence[str], drop: DropFn = None) -> Node:
        ctx_states = self.context_states(context, drop)
        resp_states = self.response_states(response, drop)
        encodings = self.joint_encodings({0: ctx_states[0]}, {0: resp_states[0]}, drop)
        return scoring.logit_smn(encodings[(0, 0)], self.pair_weights[(0, 0)])

"""Corpus ingestion, tokenization, vocabulary, negative sampling and
pretrained-embedding loading.

The on-disk corpus is UTF-8 JSON Lines, one object per line:

    {"context": [{"speaker": "a", "text": "hi there"}, ...],
     "response": "hello !",
     "label": 1}

"label" is optional and defaults to 1; negatives are usually synthesized
by sampling from the corpus.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .numcore import Prng

DEFAULT_PUNCTUATION = frozenset(
    [".", ",", "!", "?", ";", ":", "。", "，", "！", "？", "；", "："])

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
EOU_TOKEN = "<eou>"

DEFAULT_MAX_CONTEXT_TURNS = 10
DEFAULT_MAX_TOKENS_PER_MESSAGE = 50


class CorpusError(ValueError):
    """Malformed corpus or embedding file."""


class SamplingExhaustedError(RuntimeError):
    """Negative sampling found no eligible response within its retry budget."""


@dataclass
class Message:
    speaker: str
    tokens: list[str]


@dataclass
class Example:
    context: list[Message]
    response: list[str]
    label: int = 1


@dataclass
class CandidateSet:
    context: list[Message]
    candidates: list[list[str]]
    positive_index: int


def _is_cjk(ch: str) -> bool:
    code = ord(ch)
    return 0x4E00 <= code <= 0x9FFF or 0x3400 <= code <= 0x4DBF


def tokenize(text: str, punctuation: frozenset[str] = DEFAULT_PUNCTUATION,
             cjk_per_char: bool = False) -> list[str]:
    """Whitespace split, with punctuation detached into its own tokens and
    (optionally) CJK characters split one per token."""
    tokens: list[str] = []
    for chunk in text.split():
        word = []
        for ch in chunk:
            if ch in punctuation or (cjk_per_char and _is_cjk(ch)):
                if word:
                    tokens.append("".join(word))
                    word = []
                tokens.append(ch)
            else:
                word.append(ch)
        if word:
            tokens.append("".join(word))
    return tokens


class Vocab:
    """Token <-> id maps with reserved PAD=0 and UNK=1 rows."""

    PAD = 0
    UNK = 1

    def __init__(self, id_to_token: list[str], min_count: int = 2):
        if id_to_token[:2] != [PAD_TOKEN, UNK_TOKEN]:
            raise CorpusError("vocab must start with the PAD and UNK tokens")
        self.id_to_token = list(id_to_token)
        self.token_to_id = {tok: i for i, tok in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise CorpusError("vocab contains duplicate tokens")
        self.min_count = min_count

    @classmethod
    def build(cls, examples: Iterable[Example], min_count: int = 2,
              extra_tokens: Sequence[str] = (EOU_TOKEN,)) -> "Vocab":
        """Frequency-filtered vocabulary; ids are assigned by descending
        frequency (ties alphabetically) so builds are reproducible."""
        counts: dict[str, int] = {}
        for ex in examples:
            for msg in ex.context:
                for tok in msg.tokens:
                    counts[tok] = counts.get(tok, 0) + 1
            for tok in ex.response:
                counts[tok] = counts.get(tok, 0) + 1
        id_to_token = [PAD_TOKEN, UNK_TOKEN]
        id_to_token.extend(t for t in extra_tokens if t not in counts)
        kept = sorted((t for t, c in counts.items() if c >= min_count),
                      key=lambda t: (-counts[t], t))
        id_to_token.extend(kept)
        return cls(id_to_token, min_count=min_count)

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def encode(self, tokens: Sequence[str]) -> list[int]:
        get = self.token_to_id.get
        return [get(tok, self.UNK) for tok in tokens]

    @property
    def eou_id(self) -> int:
        return self.token_to_id[EOU_TOKEN]


def _parse_line(obj, line_no: int, punctuation, cjk_per_char,
                max_context_turns, max_tokens_per_message) -> Example:
    if not isinstance(obj, dict):
        raise CorpusError(f"line {line_no}: expected a JSON object")
    if "context" not in obj or not isinstance(obj["context"], list):
        raise CorpusError(f"line {line_no}: missing or invalid \"context\" field")
    if "response" not in obj or not isinstance(obj["response"], str):
        raise CorpusError(f"line {line_no}: missing or invalid \"response\" field")
    label = obj.get("label", 1)
    if label not in (0, 1):
        raise CorpusError(f"line {line_no}: label must be 0 or 1, got {label!r}")

    context = []
    for msg in obj["context"]:
        if not isinstance(msg, dict) or "text" not in msg:
            raise CorpusError(f"line {line_no}: context message needs a \"text\" field")
        tokens = tokenize(msg["text"], punctuation, cjk_per_char)
        if tokens:
            context.append(Message(str(msg.get("speaker", "")),
                                   tokens[:max_tokens_per_message]))
    if not context:
        raise CorpusError(f"line {line_no}: context is empty after tokenization")
    response = tokenize(obj["response"], punctuation, cjk_per_char)
    if not response:
        raise CorpusError(f"line {line_no}: response is empty after tokenization")
    return Example(context=context[-max_context_turns:],
                   response=response[:max_tokens_per_message],
                   label=int(label))


def load_corpus(path, punctuation: frozenset[str] = DEFAULT_PUNCTUATION,
                cjk_per_char: bool = False,
                max_context_turns: int = DEFAULT_MAX_CONTEXT_TURNS,
                max_tokens_per_message: int = DEFAULT_MAX_TOKENS_PER_MESSAGE,
                ) -> list[Example]:
    """Read a JSONL corpus; errors carry 1-based line numbers."""
    examples = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {line_no}: invalid JSON ({exc.msg})") from exc
            examples.append(_parse_line(obj, line_no, punctuation, cjk_per_char,
                                        max_context_turns, max_tokens_per_message))
    return examples


def example_to_json(ex: Example) -> dict:
    return {
        "context": [{"speaker": m.speaker, "text": " ".join(m.tokens)} for m in ex.context],
        "response": " ".join(ex.response),
        "label": ex.label,
    }


def save_corpus(examples: Iterable[Example], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(example_to_json(ex), ensure_ascii=False) + "\n")


def sample_negative(pool: Sequence[list[str]], exclude: Callable[[list[str]], bool],
                    rng: Prng) -> list[str]:
    """Uniform draw from the non-excluded responses, retrying at most
    len(pool) times before giving up."""
    if not pool:
        raise SamplingExhaustedError("negative sampling from an empty pool")
    for _ in range(len(pool)):
        candidate = pool[rng.randrange(len(pool))]
        if not exclude(candidate):
            return candidate
    raise SamplingExhaustedError(
        f"no eligible negative response after {len(pool)} attempts")


def build_candidate_sets(examples: Sequence[Example], k: int, rng: Prng) -> list[CandidateSet]:
    """One k-way candidate set per positive example: its true response plus
    k-1 distinct sampled distractors, shuffled."""
    if k < 2:
        raise ValueError(f"candidate sets need k >= 2, got {k}")
    positives = [ex for ex in examples if ex.label == 1]
    pool = [ex.response for ex in positives]
    distinct = {tuple(r) for r in pool}
    sets = []
    for ex in positives:
        truth = tuple(ex.response)
        if len(distinct - {truth}) < k - 1:
            raise SamplingExhaustedError(
                f"need {k - 1} distinct distractors, corpus only offers "
                f"{len(distinct - {truth})}")
        chosen: list[list[str]] = []
        seen = {truth}
        budget = 1000 * k
        while len(chosen) < k - 1:
            budget -= 1
            if budget < 0:
                raise SamplingExhaustedError("distractor sampling exceeded retry budget")
            cand = pool[rng.randrange(len(pool))]
            if tuple(cand) not in seen:
                seen.add(tuple(cand))
                chosen.append(list(cand))
        candidates = [list(ex.response)] + chosen
        rng.shuffle(candidates)
        positive_index = next(i for i, c in enumerate(candidates) if tuple(c) == truth)
        sets.append(CandidateSet(context=ex.context, candidates=candidates,
                                 positive_index=positive_index))
    return sets


def load_embeddings(path, vocab: Vocab, dim: int, rng: Prng) -> np.ndarray:
    """word2vec text format: header "count dim", then "token v1 ... v_dim".

    Vocab tokens present in the file get their stored vectors; the rest are
    initialized Uniform(-0.05, 0.05).  The PAD row is always zero.
    """
    matrix = rng.fill_uniform((len(vocab), dim), -0.05, 0.05)
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise CorpusError("line 1: embedding header must be \"count dim\"")
        try:
            file_dim = int(header[1])
        except ValueError as exc:
            raise CorpusError("line 1: embedding header must be \"count dim\"") from exc
        if file_dim != dim:
            raise CorpusError(
                f"line 1: embedding file has dim {file_dim}, expected {dim}")
        for line_no, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split(" ")
            token, values = parts[0], parts[1:]
            if len(values) != dim:
                raise CorpusError(
                    f"line {line_no}: expected {dim} values, got {len(values)}")
            if token in vocab.token_to_id:
                try:
                    matrix[vocab.token_to_id[token]] = [float(v) for v in values]
                except ValueError as exc:
                    raise CorpusError(f"line {line_no}: non-numeric vector entry") from exc
    matrix[Vocab.PAD] = 0.0
    return matrix

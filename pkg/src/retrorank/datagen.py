"""Seeded synthetic chat corpora for tests and demos.

A small template grammar writes (context, response) pairs where the
response is determined by a key token planted in the context ("topic"
-> "fact" bijection), so a scorer must associate the two to rank
candidates.  Two layouts:

* topic corpus    — the key sits in the last context message
* position corpus — the key sits in the last or the penultimate message
                    (50/50), the layout that message permutation targets
"""

from __future__ import annotations

import argparse

from .corpus import Example, Message, save_corpus
from .numcore.prng import Prng

FILLERS = [
    "hello", "hi", "hey", "morning", "evening", "thanks", "cheers", "ok",
    "okay", "right", "sure", "fine", "great", "good", "nice", "cool",
    "sorry", "wait", "hold", "on", "one", "moment", "busy", "back", "soon",
    "later", "today", "tomorrow", "still", "here", "there", "listening",
    "checking", "looking", "working", "done", "ready", "maybe", "perhaps",
    "really", "quite", "very", "just", "also", "again", "anyway", "so",
    "well", "hmm", "yes", "no", "indeed", "true", "friend", "folks",
]

QUESTION_TEMPLATES = [
    ["please", "tell", "me", "about", None],
    ["what", "do", "you", "know", "about", None, "?"],
    ["i", "want", "details", "on", None],
    ["any", "news", "about", None, "?"],
]

RESPONSE_TEMPLATES = [
    ["sure", ",", "the", "answer", "is", None],
    ["well", "our", "records", "show", None],
    ["i", "can", "confirm", "it", "is", None],
]


def _topic_token(i: int) -> str:
    return f"topic{i}"


def _fact_token(i: int) -> str:
    return f"fact{i}"


def _fill(template: list, token: str) -> list[str]:
    return [token if slot is None else slot for slot in template]


def _filler_message(rng: Prng, speaker: str) -> Message:
    length = 2 + rng.randrange(4)
    return Message(speaker, [rng.choice(FILLERS) for _ in range(length)])


def _question(rng: Prng, topic: str, speaker: str) -> Message:
    return Message(speaker, _fill(rng.choice(QUESTION_TEMPLATES), topic))


def _response(topic_id: int) -> list[str]:
    # template fixed by the key, so each key maps to exactly one response
    # string and no distractor can carry the right fact in other words
    template = RESPONSE_TEMPLATES[topic_id % len(RESPONSE_TEMPLATES)]
    return _fill(template, _fact_token(topic_id))


def make_topic_corpus(n_examples: int, seed: int, n_topics: int = 20) -> list[Example]:
    """Key token always in the final context message."""
    rng = Prng(seed).substream("topic-corpus")
    examples = []
    for _ in range(n_examples):
        topic_id = rng.randrange(n_topics)
        context = []
        if rng.next_float() < 0.3:
            context.append(_filler_message(rng, "user"))
        context.append(_question(rng, _topic_token(topic_id), "user"))
        examples.append(Example(context=context,
                                response=_response(topic_id),
                                label=1))
    return examples


def make_position_corpus(n_examples: int, seed: int, n_topics: int = 20) -> list[Example]:
    """Key token in the last message half the time, in the penultimate
    message otherwise, where a long unrelated message follows it and
    buries the key for a recency-biased flat encoder."""
    rng = Prng(seed).substream("position-corpus")
    examples = []
    for _ in range(n_examples):
        topic_id = rng.randrange(n_topics)
        context = []
        if rng.next_float() < 0.5:
            context.append(_filler_message(rng, "user"))
        context.append(_question(rng, _topic_token(topic_id), "user"))
        if rng.next_float() < 0.5:
            tail = [rng.choice(FILLERS) for _ in range(5 + rng.randrange(3))]
            context.append(Message("user", tail))
        examples.append(Example(context=context,
                                response=_response(topic_id),
                                label=1))
    return examples


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="python -m retrorank.datagen",
        description="Write a synthetic template-grammar corpus as JSONL.")
    parser.add_argument("--out", required=True)
    parser.add_argument("--n", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--topics", type=int, default=20)
    parser.add_argument("--layout", choices=["topic", "position"], default="topic")
    args = parser.parse_args(argv)
    maker = make_topic_corpus if args.layout == "topic" else make_position_corpus
    save_corpus(maker(args.n, args.seed, args.topics), args.out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

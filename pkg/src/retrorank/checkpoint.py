"""Self-describing binary checkpoints (magic "RRK1").

Layout: 4 magic bytes, a u32 little-endian header length, a UTF-8 JSON
header (model kind, config snapshot, seed, plan, vocabulary, parameter
names/shapes in order), then each parameter's raw little-endian float64
buffer.  Loading rebuilds the model from the header alone and restores
every tensor bit for bit.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .corpus import Vocab
from .numcore.prng import Prng
from .training import TrainingConfig, build_model

MAGIC = b"RRK1"


class CheckpointError(RuntimeError):
    """Corrupt or truncated checkpoint file."""


def save_checkpoint(path, model, config: TrainingConfig) -> None:
    params = model.named_params()
    header = {
        "model_kind": model.kind,
        "seed": config.seed,
        "config": config.to_dict(),
        "plan": {"context": [k.value for k in model.plan.context_transforms],
                 "response": [k.value for k in model.plan.response_transforms]},
        "scope": model.scope,
        "punctuation": sorted(model.punctuation),
        "vocab": model.vocab.id_to_token,
        "min_count": model.vocab.min_count,
        "params": [{"name": name, "shape": list(node.value.shape)}
                   for name, node in params.items()],
    }
    blob = json.dumps(header, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for node in params.values():
            fh.write(np.ascontiguousarray(node.value, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Returns (model, config) with parameters restored exactly."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise CheckpointError(f"bad magic {magic!r}, expected {MAGIC!r}")
        raw_len = fh.read(4)
        if len(raw_len) != 4:
            raise CheckpointError("truncated header length")
        (header_len,) = struct.unpack("<I", raw_len)
        blob = fh.read(header_len)
        if len(blob) != header_len:
            raise CheckpointError("truncated header")
        try:
            header = json.loads(blob.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"unreadable header: {exc}") from exc

        try:
            config = TrainingConfig(**header["config"])
            vocab = Vocab(header["vocab"], min_count=header.get("min_count", 2))
            punctuation = frozenset(header.get("punctuation", []))
            declared = header["params"]
        except (KeyError, TypeError, ValueError) as exc:
            raise CheckpointError(f"invalid header contents: {exc}") from exc

        model = build_model(config, vocab, Prng(config.seed).substream("init"),
                            punctuation=punctuation or None)
        params = model.named_params()
        if [p["name"] for p in declared] != list(params):
            raise CheckpointError("parameter list does not match the model kind")
        for meta in declared:
            node = params[meta["name"]]
            shape = tuple(meta["shape"])
            if shape != node.value.shape:
                raise CheckpointError(
                    f"parameter {meta['name']}: stored shape {shape}, "
                    f"model expects {node.value.shape}")
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(8 * count)
            if len(raw) != 8 * count:
                raise CheckpointError(f"truncated tensor data for {meta['name']}")
            node.value[...] = np.frombuffer(raw, dtype="<f8").reshape(shape)
    return model, config

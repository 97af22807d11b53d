"""Versioned binary checkpoints: magic bytes, JSON header (kind, model
config, vocabulary, metadata), raw little-endian weight tensors, and a
trailing SHA-256 over everything before it. Loading reproduces bitwise-
identical forward outputs.
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np
import torch

from .model import (ModelConfig, TransformerLM, VerifierModel,
                    init_generator_model, init_verifier_model)
from .vocab import Vocabulary

MAGIC = b"PLANVERC"
FORMAT_VERSION = 1


class ChecksumError(ValueError):
    pass


class VersionMismatch(ValueError):
    pass


def _model_kind(model) -> str:
    return "verifier" if isinstance(model, VerifierModel) else "generator"


def save_checkpoint(path, model, vocab: Vocabulary, meta: dict | None = None) -> None:
    names = []
    blobs = []
    for name, tensor in model.state_dict().items():
        arr = tensor.detach().cpu().numpy()
        names.append({"name": name, "shape": list(arr.shape), "dtype": str(arr.dtype)})
        blobs.append(np.ascontiguousarray(arr).tobytes())
    cfg = model.backbone.cfg if isinstance(model, VerifierModel) else model.cfg
    header = {
        "kind": _model_kind(model),
        "model_config": cfg.to_dict(),
        "vocab": vocab.tokens,
        "tensors": names,
        "meta": meta or {},
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<I", FORMAT_VERSION)
    buf += struct.pack("<Q", len(header_bytes))
    buf += header_bytes
    for blob in blobs:
        buf += blob
    buf += hashlib.sha256(bytes(buf)).digest()
    with open(path, "wb") as fh:
        fh.write(bytes(buf))


def load_checkpoint(path, expected_vocab: Vocabulary | None = None):
    """Returns (model, vocab, meta). Raises ChecksumError on corruption and
    VersionMismatch on format or vocabulary incompatibilities."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(MAGIC) + 12 + 32 or raw[: len(MAGIC)] != MAGIC:
        raise ChecksumError(f"{path}: not a checkpoint file")
    body, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ChecksumError(f"{path}: checksum mismatch (truncated or corrupted)")
    off = len(MAGIC)
    (version,) = struct.unpack_from("<I", raw, off)
    off += 4
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"{path}: format version {version}, "
                              f"expected {FORMAT_VERSION}")
    (hlen,) = struct.unpack_from("<Q", raw, off)
    off += 8
    header = json.loads(raw[off : off + hlen].decode("utf-8"))
    off += hlen
    vocab = Vocabulary.from_tokens(header["vocab"])
    if expected_vocab is not None and vocab != expected_vocab:
        raise VersionMismatch(f"{path}: checkpoint vocabulary does not match")
    cfg = ModelConfig.from_dict(header["model_config"])
    if header["kind"] == "verifier":
        model = init_verifier_model(cfg, len(vocab), seed=0)
    else:
        model = init_generator_model(cfg, len(vocab), seed=0)
    state = {}
    for spec in header["tensors"]:
        arr = np.frombuffer(raw, dtype=np.dtype(spec["dtype"]), offset=off,
                            count=int(np.prod(spec["shape"], dtype=np.int64)))
        off += arr.nbytes
        state[spec["name"]] = torch.from_numpy(
            arr.reshape(spec["shape"]).copy())
    model.load_state_dict(state)
    model.eval()
    return model, vocab, header["meta"]

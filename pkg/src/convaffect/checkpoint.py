"""Checkpoint format: a JSON manifest plus a sibling binary blob.

The manifest records the format version, the run config and its hash, the
vocabulary, and for every tensor its name, shape, and byte offset into the
blob. The blob is the tensors' row-major 64-bit little-endian float data,
concatenated in manifest order. Writing is fully deterministic: identical
parameters and config produce identical bytes.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .embed import Vocabulary, WordEmbeddingTable
from .errors import CheckpointError
from .model import GRUCellParams, ModelParams
from .numkit import Tensor

FORMAT_VERSION = 1

_CELL_FIELDS = ("Wz", "Uz", "bz", "Wr", "Ur", "br", "Wh", "Uh", "bh")
_CELL_PREFIXES = ("lower_fwd", "lower_bwd", "upper_fwd", "upper_bwd")


def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def save_checkpoint(path: str | Path, params: ModelParams, config: dict) -> None:
    """Write `<path>` (manifest JSON) and its sibling blob `<stem>.bin`."""
    path = Path(path)
    blob_path = path.with_suffix(".bin")
    tensors = []
    chunks = []
    offset = 0
    for name, t in params.named_tensors():
        raw = np.ascontiguousarray(t.data, dtype="<f8").tobytes()
        tensors.append({"name": name, "shape": list(t.data.shape), "offset": offset})
        chunks.append(raw)
        offset += len(raw)
    manifest = {
        "format_version": FORMAT_VERSION,
        "config": config,
        "config_hash": config_hash(config),
        "vocabulary": list(params.embedding.vocab.tokens),
        "coverage": params.embedding.coverage,
        "blob": blob_path.name,
        "blob_bytes": offset,
        "tensors": tensors,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    blob_path.write_bytes(b"".join(chunks))


def _read_manifest(path: Path) -> dict:
    if not path.is_file():
        raise CheckpointError(f"checkpoint manifest not found: {path}")
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: manifest is not valid JSON ({exc})") from exc
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: format version {version!r} unsupported (expected {FORMAT_VERSION})"
        )
    stored = manifest.get("config_hash")
    actual = config_hash(manifest.get("config", {}))
    if stored != actual:
        raise CheckpointError(
            f"{path}: config hash mismatch (stored {stored}, recomputed {actual})"
        )
    return manifest


def load_checkpoint(path: str | Path, trainable: bool = True) -> tuple[ModelParams, dict]:
    """Rebuild the model and its config from a checkpoint pair."""
    path = Path(path)
    manifest = _read_manifest(path)
    blob_path = path.parent / manifest["blob"]
    if not blob_path.is_file():
        raise CheckpointError(f"checkpoint blob not found: {blob_path}")
    blob = blob_path.read_bytes()
    if len(blob) != manifest["blob_bytes"]:
        raise CheckpointError(
            f"{blob_path}: blob is {len(blob)} bytes, manifest says {manifest['blob_bytes']}"
        )

    arrays: dict[str, np.ndarray] = {}
    for rec in manifest["tensors"]:
        shape = tuple(rec["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = rec["offset"]
        end = start + count * 8
        if end > len(blob):
            raise CheckpointError(f"{blob_path}: tensor {rec['name']} overruns the blob")
        arrays[rec["name"]] = np.frombuffer(blob[start:end], dtype="<f8").reshape(shape).copy()

    expected = {"embedding", "proj_W", "proj_b", "head_W", "head_b"}
    for prefix in _CELL_PREFIXES:
        expected.update(f"{prefix}.{f}" for f in _CELL_FIELDS)
    if set(arrays) != expected:
        missing = expected - set(arrays)
        extra = set(arrays) - expected
        raise CheckpointError(
            f"{path}: tensor set mismatch (missing {sorted(missing)}, unexpected {sorted(extra)})"
        )

    tokens = manifest["vocabulary"]
    vocab = Vocabulary(tokens=tuple(tokens), index={t: i for i, t in enumerate(tokens)})
    emb = arrays["embedding"]
    if emb.shape[0] != len(tokens):
        raise CheckpointError(
            f"{path}: embedding has {emb.shape[0]} rows for {len(tokens)} vocabulary entries"
        )
    table = WordEmbeddingTable(
        vocab=vocab,
        tensor=Tensor(emb, requires_grad=trainable),
        dim=emb.shape[1],
        coverage=float(manifest.get("coverage", 0.0)),
    )

    def cell(prefix: str) -> GRUCellParams:
        return GRUCellParams(
            **{
                f: Tensor(arrays[f"{prefix}.{f}"], requires_grad=trainable)
                for f in _CELL_FIELDS
            }
        )

    params = ModelParams(
        embedding=table,
        lower_fwd=cell("lower_fwd"),
        lower_bwd=cell("lower_bwd"),
        proj_W=Tensor(arrays["proj_W"], requires_grad=trainable),
        proj_b=Tensor(arrays["proj_b"], requires_grad=trainable),
        upper_fwd=cell("upper_fwd"),
        upper_bwd=cell("upper_bwd"),
        head_W=Tensor(arrays["head_W"], requires_grad=trainable),
        head_b=Tensor(arrays["head_b"], requires_grad=trainable),
    )
    return params, manifest["config"]

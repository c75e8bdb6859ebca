"""Versioned binary checkpoint container.

Layout, all integers little-endian:

    magic            8 bytes   b"MMANCKPT"
    version          uint32
    config digest    64 bytes  ascii sha256 hex
    header length    uint64
    header           utf-8 JSON: manifest, config text, iteration, rng state, trace,
                     optimizer steps, and name/dtype/shape/offset/nbytes per tensor
    tensor blocks    raw little-endian arrays, offsets relative to the first block
    checksum         32 bytes  sha256 of everything above

The checksum is verified before anything is parsed, so a damaged file never yields a
partial model.
"""
import hashlib
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from mman.training.optimizer import AdamState

logger = logging.getLogger(__name__)

MAGIC = b"MMANCKPT"
VERSION = 1
_PREAMBLE = struct.Struct("<8sI64sQ")
_CHECKSUM_BYTES = 32


@dataclass
class Checkpoint:
    manifest: str
    """architecture manifest text"""
    config_text: str
    config_digest: str
    iteration: int
    params: dict[str, dict[str, np.ndarray]]
    """module name -> parameter name -> array"""
    optimizer: dict[str, AdamState]
    """module name -> Adam state"""
    rng_state: dict[str, Any] = field(default_factory=dict)
    trace: list[dict[str, float]] = field(default_factory=list)


def _tensor_entries(ckpt: Checkpoint) -> list[tuple[str, np.ndarray]]:
    entries = []
    for module, params in sorted(ckpt.params.items()):
        for name, array in params.items():
            entries.append((f"param/{module}/{name}", array))
    for module, state in sorted(ckpt.optimizer.items()):
        for name in state.m:
            entries.append((f"adam/{module}/m/{name}", state.m[name]))
            entries.append((f"adam/{module}/v/{name}", state.v[name]))
    return entries


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    tensors, blocks, offset = [], [], 0
    for name, array in _tensor_entries(ckpt):
        array = np.ascontiguousarray(array)
        little = array.astype(array.dtype.newbyteorder("<"), copy=False)
        raw = little.tobytes()
        tensors.append({
            "name": name, "dtype": little.dtype.str, "shape": list(array.shape), "offset": offset, "nbytes": len(raw),
        })
        blocks.append(raw)
        offset += len(raw)

    header = {
        "manifest": ckpt.manifest,
        "config": ckpt.config_text,
        "iteration": ckpt.iteration,
        "rng": ckpt.rng_state,
        "trace": ckpt.trace,
        "optimizer_steps": {module: state.step for module, state in sorted(ckpt.optimizer.items())},
        "optimizer_order": {module: list(state.m) for module, state in sorted(ckpt.optimizer.items())},
        "param_order": {module: list(params) for module, params in sorted(ckpt.params.items())},
        "tensors": tensors,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    digest = ckpt.config_digest.encode("ascii")
    if len(digest) != 64:
        raise ValueError(f"Config digest must be a sha256 hex string. Got `{ckpt.config_digest}`.")
    body = _PREAMBLE.pack(MAGIC, VERSION, digest, len(header_bytes)) + header_bytes + b"".join(blocks)
    return body + hashlib.sha256(body).digest()


def decode_checkpoint(data: bytes) -> Checkpoint:
    if len(data) < _PREAMBLE.size + _CHECKSUM_BYTES:
        raise ValueError(f"Checkpoint is truncated: {len(data)} bytes.")
    body, checksum = data[:-_CHECKSUM_BYTES], data[-_CHECKSUM_BYTES:]
    if hashlib.sha256(body).digest() != checksum:
        raise ValueError("Checkpoint checksum mismatch; the file is corrupted.")

    magic, version, digest, header_length = _PREAMBLE.unpack_from(body)
    if magic != MAGIC:
        raise ValueError(f"Not a checkpoint file (magic {magic!r}).")
    if version != VERSION:
        raise ValueError(f"Checkpoint version {version} is not supported; expected {VERSION}.")
    start = _PREAMBLE.size
    header = json.loads(body[start:start + header_length].decode("utf-8"))
    blocks = body[start + header_length:]

    arrays: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        raw = blocks[entry["offset"]:entry["offset"] + entry["nbytes"]]
        if len(raw) != entry["nbytes"]:
            raise ValueError(f"Tensor `{entry['name']}` runs past the end of the checkpoint.")
        array = np.frombuffer(raw, dtype=np.dtype(entry["dtype"])).reshape(entry["shape"])
        arrays[entry["name"]] = array.astype(array.dtype.newbyteorder("="))

    params = {
        module: {name: arrays[f"param/{module}/{name}"] for name in names}
        for module, names in header["param_order"].items()
    }
    optimizer = {
        module: AdamState(
            m={name: arrays[f"adam/{module}/m/{name}"] for name in names},
            v={name: arrays[f"adam/{module}/v/{name}"] for name in names},
            step=int(header["optimizer_steps"][module]),
        )
        for module, names in header["optimizer_order"].items()
    }
    return Checkpoint(
        manifest=header["manifest"],
        config_text=header["config"],
        config_digest=digest.decode("ascii"),
        iteration=int(header["iteration"]),
        params=params,
        optimizer=optimizer,
        rng_state=header["rng"],
        trace=header["trace"],
    )


def checkpoint_save(ckpt: Checkpoint, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = encode_checkpoint(ckpt)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)
    logger.info(f"saved checkpoint at iteration {ckpt.iteration} to {path} ({len(data)} bytes)")
    return path


def checkpoint_load(path: str | Path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Checkpoint `{path}` does not exist.")
    return decode_checkpoint(path.read_bytes())

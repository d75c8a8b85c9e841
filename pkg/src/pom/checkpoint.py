"""Portable checkpoint container (.pomck).

Layout: 8-byte magic "POMCKPT1", 8-byte little-endian header length,
UTF-8 JSON header, then a payload of raw little-endian float32 tensors.
The header records tensor names, shapes, byte offsets into the payload,
the model config, and the training step.  Round trips are bit-exact.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"POMCKPT1"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """Malformed, truncated, or incompatible checkpoint file."""


def save_checkpoint(params: dict[str, np.ndarray], path: str | Path,
                    config: dict | None = None, step: int = 0) -> None:
    tensors = {}
    payload = bytearray()
    for name in sorted(params):
        arr = np.asarray(params[name], dtype="<f4", order="C")
        tensors[name] = {"dtype": "float32", "shape": list(arr.shape),
                         "offset": len(payload), "nbytes": arr.nbytes}
        payload += arr.tobytes()
    header = {"version": FORMAT_VERSION, "config": config or {},
              "step": step, "tensors": tensors}
    header_bytes = json.dumps(header).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(header_bytes)))
        f.write(header_bytes)
        f.write(payload)


def load_checkpoint(path: str | Path,
                    expect_config: dict | None = None
                    ) -> tuple[dict[str, np.ndarray], dict]:
    """Read a checkpoint, returning (params, header).

    Rejects bad magic, unknown versions, truncation, overlapping or
    out-of-range tensor offsets, and (when expect_config is given) any
    config mismatch, reporting the differing keys.
    """
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    header_len = struct.unpack("<Q", data[8:16])[0]
    if 16 + header_len > len(data):
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(data[16:16 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header: {exc}") from exc
    if header.get("version") != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: unknown checkpoint version {header.get('version')}")

    payload = data[16 + header_len:]
    spans = []
    params = {}
    for name, info in header["tensors"].items():
        offset, nbytes = info["offset"], info["nbytes"]
        if offset < 0 or offset + nbytes > len(payload):
            raise CheckpointError(
                f"{path}: tensor '{name}' extends past payload "
                f"({offset}+{nbytes} > {len(payload)})")
        spans.append((offset, offset + nbytes, name))
        arr = np.frombuffer(payload, dtype="<f4", count=nbytes // 4,
                            offset=offset).reshape(info["shape"])
        params[name] = arr.copy()
    spans.sort()
    for (_, end_a, name_a), (start_b, _, name_b) in zip(spans, spans[1:]):
        if start_b < end_a:
            raise CheckpointError(
                f"{path}: tensors '{name_a}' and '{name_b}' overlap")

    if expect_config is not None and header["config"] != expect_config:
        keys = sorted(set(header["config"]) | set(expect_config))
        diff = {k: (header["config"].get(k), expect_config.get(k))
                for k in keys if header["config"].get(k) != expect_config.get(k)}
        raise CheckpointError(
            f"{path}: checkpoint config does not match; differing "
            f"entries (found, expected): {diff}")
    return params, header

"""NFTCK1 checkpoint format.

Layout (little endian): magic ``NFTCK1`` (6 bytes), u32 spec-JSON length,
spec JSON, 32-byte SHA-256 of the spec, u64 parameter count, then the f32
parameters, f32 first moments, f32 second moments, and a u64 step count.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError, IncompatibleCheckpoint
from .model import ModelSpec, ModelState, count_params, spec_hash

__all__ = ["MAGIC", "save_checkpoint", "load_checkpoint", "checkpoint_bytes"]

MAGIC = b"NFTCK1"


def checkpoint_bytes(state: ModelState) -> bytes:
    spec_json = json.dumps(state.spec.to_dict(), sort_keys=True).encode()
    n = state.parameters.size
    return b"".join(
        [
            MAGIC,
            struct.pack("<I", len(spec_json)),
            spec_json,
            spec_hash(state.spec),
            struct.pack("<Q", n),
            state.parameters.astype("<f4").tobytes(),
            state.adam_m.astype("<f4").tobytes(),
            state.adam_v.astype("<f4").tobytes(),
            struct.pack("<Q", state.step_count),
        ]
    )


def save_checkpoint(state: ModelState, path) -> None:
    Path(path).write_bytes(checkpoint_bytes(state))


def load_checkpoint(path, expect: ModelSpec | None = None) -> ModelState:
    """Read a checkpoint.

    Raises
    ------
    FormatError
        Bad magic or truncated/trailing data, with the byte offset.
    IncompatibleCheckpoint
        Stored hash does not match the stored spec, or ``expect`` differs.
    """
    data = Path(path).read_bytes()
    pos = 0

    def take(k, what):
        nonlocal pos
        if pos + k > len(data):
            raise FormatError(f"truncated checkpoint while reading {what}", offset=pos)
        out = data[pos:pos + k]
        pos += k
        return out

    if take(len(MAGIC), "magic") != MAGIC:
        raise FormatError("bad magic, not an NFTCK1 checkpoint", offset=0)
    (jlen,) = struct.unpack("<I", take(4, "spec length"))
    jpos = pos
    try:
        spec = ModelSpec.from_dict(json.loads(take(jlen, "spec").decode()))
    except FormatError:
        raise
    except Exception as exc:
        raise FormatError(f"unreadable model spec: {exc}", offset=jpos) from None
    stored = take(32, "spec hash")
    if stored != spec_hash(spec):
        raise IncompatibleCheckpoint("spec hash does not match the stored spec", offset=pos - 32)
    if expect is not None and spec_hash(expect) != stored:
        raise IncompatibleCheckpoint("checkpoint was written for a different model spec", offset=pos - 32)
    (n,) = struct.unpack("<Q", take(8, "parameter count"))
    if n != count_params(spec):
        raise FormatError(f"parameter count {n} does not match spec ({count_params(spec)})", offset=pos - 8)
    arrays = [np.frombuffer(take(4 * n, name), dtype="<f4").astype(np.float32) for name in ("parameters", "adam_m", "adam_v")]
    (steps,) = struct.unpack("<Q", take(8, "step count"))
    if pos != len(data):
        raise FormatError("trailing bytes after checkpoint", offset=pos)
    return ModelState(spec, arrays[0], arrays[1], arrays[2], int(steps))

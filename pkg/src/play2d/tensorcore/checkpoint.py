"""Model checkpoint file: magic, JSON header, float32 parameter payload."""

from __future__ import annotations

import json
import struct

import numpy as np

from ..errors import FormatError
from .tensor import ParamSet

MAGIC = b"PLATOCKPT1"
CKPT_VERSION = 1


def save_checkpoint(path, params: ParamSet, header: dict) -> None:
    """Write params plus a caller-supplied header (model config, metadata)."""
    meta = dict(header)
    meta["version"] = CKPT_VERSION
    meta["param_names"] = params.names
    meta["param_shapes"] = {n: list(params.shapes[n]) for n in params.names}
    raw = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = params.flat_data.astype("<f4", copy=False)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(raw)))
        f.write(raw)
        f.write(payload.tobytes())


def load_checkpoint(path) -> tuple[dict, ParamSet]:
    """Read header and parameters; inverse of save_checkpoint."""
    with open(path, "rb") as f:
        magic = f.read(len(MAGIC))
        if magic != MAGIC:
            raise FormatError(f"bad checkpoint magic {magic!r}")
        raw_len = f.read(4)
        if len(raw_len) < 4:
            raise FormatError("truncated checkpoint header")
        (hlen,) = struct.unpack("<I", raw_len)
        raw = f.read(hlen)
        if len(raw) < hlen:
            raise FormatError("truncated checkpoint header")
        try:
            header = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"unreadable checkpoint header: {exc}") from exc
        if header.get("version") != CKPT_VERSION:
            raise FormatError(f"checkpoint version {header.get('version')} "
                              f"!= {CKPT_VERSION}")
        names = header["param_names"]
        shapes = header["param_shapes"]
        total = sum(int(np.prod(shapes[n])) for n in names)
        payload = f.read(total * 4)
        if len(payload) < total * 4:
            raise FormatError("truncated checkpoint payload")
        flat = np.frombuffer(payload, dtype="<f4")
    params = ParamSet(dtype=np.float32)
    offset = 0
    for n in names:
        size = int(np.prod(shapes[n]))
        params.stage(n, flat[offset:offset + size].reshape(shapes[n]))
        offset += size
    params.finalize()
    return header, params

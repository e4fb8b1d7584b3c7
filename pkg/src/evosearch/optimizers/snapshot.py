"""Versioned binary snapshots of optimizer state ("EVOS" format).

A snapshot captures everything needed to resume a run bitwise-identically:
constructor configuration, scalar and array state, and the RNG state.
Snapshots are taken at generation boundaries only (between a tell and the
next ask).

Layout (version 1, all integers little-endian):

    bytes 0:4    magic "EVOS"
    bytes 4:6    u16 format version
    bytes 6:8    u16 optimizer kind code
    bytes 8:16   u64 dimension d
    bytes 16:24  u64 generation counter t
    bytes 24:32  u64 JSON header length n
    bytes 32:32+n  UTF-8 JSON: kind, config, scalars, rng state,
                   array manifest [[name, shape], ...]
    then per manifest entry: raw little-endian float64 data, C order
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .base import AskTellOptimizer
from .cholesky import CholeskyCMA
from .diagonal import DiagonalCMA
from .ga import GA
from .random_search import RandomSearch
from .sphere import SphereCMA

__all__ = ["SnapshotFormatError", "save_state", "load_state", "dump_state"]

MAGIC = b"EVOS"
VERSION = 1

_KINDS: dict[int, type[AskTellOptimizer]] = {
    cls.kind_code: cls
    for cls in (CholeskyCMA, DiagonalCMA, SphereCMA, GA, RandomSearch)
}

_HEADER = struct.Struct("<4sHHQQQ")


class SnapshotFormatError(ValueError):
    """Snapshot bytes are truncated, corrupt, or of an unknown version/kind."""


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_json_safe(v) for v in obj.tolist()]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def dump_state(opt: AskTellOptimizer) -> bytes:
    """Serialize an optimizer to EVOS bytes."""
    opt._check_snapshot_allowed()
    arrays = opt.snapshot_arrays()
    manifest = [[name, list(a.shape)] for name, a in arrays.items()]
    header = {
        "kind": opt.kind,
        "config": _json_safe(opt.snapshot_config()),
        "scalars": _json_safe(opt.snapshot_scalars()),
        "rng": _json_safe(opt._rng.bit_generator.state),
        "arrays": manifest,
    }
    blob = json.dumps(header, separators=(",", ":")).encode("utf-8")
    parts = [
        _HEADER.pack(MAGIC, VERSION, opt.kind_code, opt.dim, opt.generation, len(blob)),
        blob,
    ]
    for name, a in arrays.items():
        parts.append(np.ascontiguousarray(a, dtype="<f8").tobytes())
    return b"".join(parts)


def save_state(opt: AskTellOptimizer, path) -> None:
    """Write an optimizer snapshot to ``path``."""
    data = dump_state(opt)
    with open(path, "wb") as fh:
        fh.write(data)


def load_state(source) -> AskTellOptimizer:
    """Rebuild an optimizer from EVOS bytes, a file path, or a file object."""
    if isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    elif hasattr(source, "read"):
        data = source.read()
    else:
        with open(source, "rb") as fh:
            data = fh.read()

    if len(data) < _HEADER.size:
        raise SnapshotFormatError(f"truncated header: {len(data)} bytes")
    magic, version, kind_code, dim, t, blob_len = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise SnapshotFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotFormatError(f"unsupported format version {version}")
    cls = _KINDS.get(kind_code)
    if cls is None:
        raise SnapshotFormatError(f"unknown optimizer kind code {kind_code}")

    offset = _HEADER.size
    if len(data) < offset + blob_len:
        raise SnapshotFormatError("truncated JSON header")
    try:
        header = json.loads(data[offset : offset + blob_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SnapshotFormatError(f"corrupt JSON header: {exc}") from exc
    offset += blob_len

    if header.get("kind") != cls.kind:
        raise SnapshotFormatError(
            f"kind mismatch: code {kind_code} vs name {header.get('kind')!r}"
        )
    config = header["config"]
    if int(config.get("dim", dim)) != dim:
        raise SnapshotFormatError("dimension disagrees between header and config")

    arrays: dict[str, np.ndarray] = {}
    for name, shape in header["arrays"]:
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if len(data) < offset + nbytes:
            raise SnapshotFormatError(f"truncated array {name!r}")
        flat = np.frombuffer(data, dtype="<f8", count=count, offset=offset)
        arrays[name] = flat.astype(float).reshape(shape)
        offset += nbytes
    if offset != len(data):
        raise SnapshotFormatError(f"{len(data) - offset} trailing bytes")

    opt = cls.from_snapshot_parts(config, header["scalars"], arrays, t)
    opt._rng.bit_generator.state = header["rng"]
    return opt

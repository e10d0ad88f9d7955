"""Checkpoint files: a text manifest followed by raw little-endian float arrays.

Layout::

    COUNTPOINT-CHECKPOINT 1
    meta <key> <value>            (zero or more)
    array <name> <dtype> <shape> <byte offset> <byte length>
    ...
    end
    <raw bytes of every array, concatenated in manifest order>

``dtype`` is ``f4`` (32-bit IEEE-754) for trained networks; float64 arrays
are written as ``f8`` so that a round trip is always bit-exact. Offsets are
relative to the first byte after the ``end`` line.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Optional

import numpy as np

from .net import PARAM_NAMES, NetworkParams

MAGIC = "COUNTPOINT-CHECKPOINT 1"
_DTYPES = {"f4": np.dtype("<f4"), "f8": np.dtype("<f8")}


class CheckpointError(ValueError):
    pass


def _code(arr: np.ndarray) -> str:
    if arr.dtype == np.float64:
        return "f8"
    if arr.dtype == np.float32:
        return "f4"
    raise CheckpointError("cannot store dtype %s" % arr.dtype)


def save_arrays(path, arrays: dict[str, np.ndarray], meta: Optional[dict[str, str]] = None) -> None:
    lines = [MAGIC]
    for k, v in (meta or {}).items():
        if any(c.isspace() for c in str(k)) or "\n" in str(v):
            raise CheckpointError("meta entries must be single tokens / single lines")
        lines.append("meta %s %s" % (k, v))
    blobs = []
    offset = 0
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        code = _code(arr)
        raw = np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes()
        shape = ",".join(str(s) for s in arr.shape) or "-"
        lines.append("array %s %s %s %d %d" % (name, code, shape, offset, len(raw)))
        blobs.append(raw)
        offset += len(raw)
    lines.append("end")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("utf-8"))
        for raw in blobs:
            fh.write(raw)
    os.replace(tmp, path)


def load_arrays(path) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    data = Path(path).read_bytes()
    pos = 0
    arrays_meta = []
    meta: dict[str, str] = {}

    def next_line():
        nonlocal pos
        end = data.index(b"\n", pos)
        line = data[pos:end].decode("utf-8")
        pos = end + 1
        return line

    try:
        if next_line() != MAGIC:
            raise CheckpointError("%s is not a checkpoint" % path)
        while True:
            line = next_line()
            if line == "end":
                break
            kind, rest = line.split(" ", 1)
            if kind == "meta":
                k, _, v = rest.partition(" ")
                meta[k] = v
            elif kind == "array":
                name, code, shape, off, length = rest.split()
                dims = () if shape == "-" else tuple(int(s) for s in shape.split(","))
                arrays_meta.append((name, code, dims, int(off), int(length)))
            else:
                raise CheckpointError("bad manifest line %r" % line)
    except ValueError as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError("corrupt manifest in %s: %s" % (path, exc)) from None
    body = data[pos:]
    arrays = {}
    for name, code, dims, off, length in arrays_meta:
        dt = _DTYPES[code]
        if off + length > len(body) or length != int(np.prod(dims, dtype=np.int64)) * dt.itemsize:
            raise CheckpointError("array %s is truncated or mis-sized" % name)
        arrays[name] = np.frombuffer(body[off:off + length], dtype=dt).reshape(dims).astype(dt.newbyteorder("="))
    return arrays, meta


def save_checkpoint(path, params: NetworkParams, meta: Optional[dict] = None,
                    extra: Optional[dict[str, np.ndarray]] = None) -> None:
    arrays = dict(params.items())
    arrays.update(extra or {})
    m = {"conv_activation": params.conv_activation}
    m.update({k: str(v) for k, v in (meta or {}).items()})
    save_arrays(path, arrays, m)


def load_checkpoint(path) -> tuple[NetworkParams, dict[str, str], dict[str, np.ndarray]]:
    """Returns ``(params, meta, extra arrays)``."""
    arrays, meta = load_arrays(path)
    missing = [n for n in PARAM_NAMES if n not in arrays]
    if missing:
        raise CheckpointError("checkpoint lacks %s" % ", ".join(missing))
    params = NetworkParams(**{n: arrays.pop(n) for n in PARAM_NAMES},
                           conv_activation=meta.get("conv_activation", "logistic"))
    return params, meta, arrays

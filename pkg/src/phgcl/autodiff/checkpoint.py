"""Binary named-tensor archive.

Layout::

    8 bytes   magic  b"PHGCLCKP"
    uint32    format version (little endian)
    uint32    header length in bytes
    header    UTF-8 JSON: {"meta": {...}, "tensors": [{"name", "shape"}, ...]}
    payload   each tensor's values as little-endian float64, in header order
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from phgcl.autodiff.optim import OptimizerState
from phgcl.errors import ParseError

MAGIC = b"PHGCLCKP"
VERSION = 1
_M_PREFIX = "adam.m/"
_V_PREFIX = "adam.v/"


def save_archive(path, tensors: dict[str, np.ndarray], meta: dict | None = None) -> None:
    entries = []
    chunks = []
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        entries.append({"name": name, "shape": list(arr.shape)})
        chunks.append(arr.tobytes())
    header = json.dumps({"meta": meta or {}, "tensors": entries}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(header)))
        fh.write(header)
        for c in chunks:
            fh.write(c)


def load_archive(path) -> tuple[dict[str, np.ndarray], dict]:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ParseError(f"{path}: not a checkpoint archive")
    if len(raw) < 16:
        raise ParseError(f"{path}: truncated header")
    version, hlen = struct.unpack("<II", raw[8:16])
    if version != VERSION:
        raise ParseError(f"{path}: unsupported archive version {version}")
    try:
        header = json.loads(raw[16:16 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: bad header ({exc})") from None
    offset = 16 + hlen
    tensors: dict[str, np.ndarray] = {}
    for i, entry in enumerate(header["tensors"]):
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        if end > len(raw):
            raise ParseError(f"{path}: payload truncated at tensor {entry['name']!r}", record=i)
        tensors[entry["name"]] = np.frombuffer(raw[offset:end], dtype="<f8").reshape(shape).astype(np.float64)
        offset = end
    return tensors, header["meta"]


def save_checkpoint(path, params: dict, state: OptimizerState | None = None, meta: dict | None = None) -> None:
    """Write parameters (Tensors or arrays) plus optional Adam state."""
    tensors = {name: getattr(p, "data", p) for name, p in params.items()}
    meta = dict(meta or {})
    if state is not None:
        meta["optimizer"] = {
            "step": state.step, "lr": state.lr, "period": state.period, "floor": state.floor,
            "beta1": state.beta1, "beta2": state.beta2, "eps": state.eps,
        }
        for name, m in state.m.items():
            tensors[_M_PREFIX + name] = m
        for name, v in state.v.items():
            tensors[_V_PREFIX + name] = v
    save_archive(path, tensors, meta)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], OptimizerState | None, dict]:
    tensors, meta = load_archive(path)
    params = {k: v for k, v in tensors.items() if not k.startswith((_M_PREFIX, _V_PREFIX))}
    state = None
    opt = meta.pop("optimizer", None)
    if opt is not None:
        state = OptimizerState(**opt)
        state.m = {k[len(_M_PREFIX):]: v for k, v in tensors.items() if k.startswith(_M_PREFIX)}
        state.v = {k[len(_V_PREFIX):]: v for k, v in tensors.items() if k.startswith(_V_PREFIX)}
    return params, state, meta

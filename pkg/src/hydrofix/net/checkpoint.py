"""HCM1 checkpoint container for named float32 tensors.

Layout (little-endian): magic "HCM1", version u32, then a spec block
(depth u32, base channels u32, input feature count u32, focal gamma f32),
tensor count u32, and per tensor: name length u16 + UTF-8 name, rank u8,
dims u32 x rank, f32 data. Optimizer state uses the same container in a
sibling file, with moments stored as "m.<name>" / "v.<name>" and the step
counter as a one-element tensor named "step".
"""

from __future__ import annotations

import struct

import numpy as np

from .adam import AdamState
from .model import ModelSpec

MAGIC = b"HCM1"


class CheckpointError(Exception):
    pass


def _write_tensors(fh, tensors: dict[str, np.ndarray]) -> None:
    fh.write(struct.pack("<I", len(tensors)))
    for name, arr in tensors.items():
        encoded = name.encode("utf-8")
        arr = np.ascontiguousarray(arr, dtype="<f4")
        fh.write(struct.pack("<H", len(encoded)))
        fh.write(encoded)
        fh.write(struct.pack("<B", arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(arr.tobytes())


def _read_tensors(fh) -> dict[str, np.ndarray]:
    (count,) = struct.unpack("<I", _need(fh, 4))
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", _need(fh, 2))
        name = _need(fh, name_len).decode("utf-8")
        (rank,) = struct.unpack("<B", _need(fh, 1))
        dims = struct.unpack(f"<{rank}I", _need(fh, 4 * rank))
        n = int(np.prod(dims)) if rank else 1
        data = np.frombuffer(_need(fh, 4 * n), dtype="<f4")
        tensors[name] = data.reshape(dims).copy()
    return tensors


def _need(fh, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise CheckpointError("truncated checkpoint")
    return data


def save_checkpoint(path, params: dict[str, np.ndarray], spec: ModelSpec,
                    gamma: float) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIIIf", 1, spec.depth, spec.base_channels,
                             spec.in_features, gamma))
        _write_tensors(fh, params)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], ModelSpec, float]:
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise CheckpointError(f"{path}: not an HCM1 checkpoint")
        version, depth, c0, feats, gamma = struct.unpack("<IIIIf", _need(fh, 20))
        if version != 1:
            raise CheckpointError(f"{path}: unsupported version {version}")
        params = _read_tensors(fh)
    return params, ModelSpec(depth=depth, base_channels=c0, in_features=feats), float(gamma)


def save_adam_state(path, state: AdamState, spec: ModelSpec, gamma: float) -> None:
    tensors = {"step": np.array([state.t], dtype=np.float32)}
    for name, arr in state.m.items():
        tensors[f"m.{name}"] = arr
    for name, arr in state.v.items():
        tensors[f"v.{name}"] = arr
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIIIf", 1, spec.depth, spec.base_channels,
                             spec.in_features, gamma))
        _write_tensors(fh, tensors)


def load_adam_state(path) -> AdamState:
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise CheckpointError(f"{path}: not an HCM1 checkpoint")
        _need(fh, 20)
        tensors = _read_tensors(fh)
    step = int(tensors.pop("step")[0])
    moments1 = {k[2:]: arr for k, arr in tensors.items() if k.startswith("m.")}
    moments2 = {k[2:]: arr for k, arr in tensors.items() if k.startswith("v.")}
    return AdamState(m=moments1, v=moments2, t=step)

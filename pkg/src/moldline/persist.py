"""Exact JSON packing for float arrays used by the model file formats.

Weights are stored as base64 of little-endian float64 bytes, so a save/load
round trip is bitwise exact and fast even for multi-megabyte tensors.
"""
from __future__ import annotations

import base64

import numpy as np


def pack_array(a: np.ndarray) -> dict:
    a = np.asarray(a, dtype=np.float64)
    return {
        "shape": list(a.shape),
        "dtype": "float64",
        "b64": base64.b64encode(a.astype("<f8").tobytes()).decode("ascii"),
    }


def unpack_array(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["b64"])
    return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(d["shape"])

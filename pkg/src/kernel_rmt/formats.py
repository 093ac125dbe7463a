"""Flat little-endian binary formats for datasets and kernels.

* dataset: ``b"KRMTDSET"``, ``p`` (u32), ``n`` (u32), then ``X`` row-major f64
* dense kernel: ``b"KRMTKDNS"``, ``n`` (u64), then the matrix row-major f64
* ternary kernel: ``b"KRMTKTRN"``, ``n`` (u64), ``t``, ``r``, ``scale`` (f64),
  then the packed code bytes
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .kernel import KernelMatrix, TernaryKernel

DATASET_MAGIC = b"KRMTDSET"
DENSE_MAGIC = b"KRMTKDNS"
TERNARY_MAGIC = b"KRMTKTRN"


def save_dataset(path: str | Path, X: np.ndarray) -> None:
    p, n = X.shape
    with open(path, "wb") as fh:
        fh.write(DATASET_MAGIC + struct.pack("<II", p, n))
        fh.write(np.ascontiguousarray(X, dtype="<f8").tobytes())


def load_dataset(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:8] != DATASET_MAGIC:
        raise ValueError("not a dataset file")
    p, n = struct.unpack("<II", raw[8:16])
    return np.frombuffer(raw, dtype="<f8", offset=16).reshape(p, n).copy()


def save_kernel(path: str | Path, K: KernelMatrix) -> None:
    with open(path, "wb") as fh:
        fh.write(DENSE_MAGIC + struct.pack("<Q", K.n))
        fh.write(np.ascontiguousarray(K.data, dtype="<f8").tobytes())


def load_kernel(path: str | Path) -> KernelMatrix:
    raw = Path(path).read_bytes()
    if raw[:8] != DENSE_MAGIC:
        raise ValueError("not a dense kernel file")
    (n,) = struct.unpack("<Q", raw[8:16])
    return KernelMatrix(np.frombuffer(raw, dtype="<f8", offset=16).reshape(n, n).copy())


def save_ternary(path: str | Path, tk: TernaryKernel) -> None:
    with open(path, "wb") as fh:
        fh.write(TERNARY_MAGIC + struct.pack("<Qddd", tk.n, tk.t, tk.r, tk.scale))
        fh.write(tk.codes.tobytes())


def load_ternary(path: str | Path) -> TernaryKernel:
    raw = Path(path).read_bytes()
    if raw[:8] != TERNARY_MAGIC:
        raise ValueError("not a ternary kernel file")
    n, t, r, scale = struct.unpack("<Qddd", raw[8:40])
    codes = np.frombuffer(raw, dtype=np.uint8, offset=40).copy()
    return TernaryKernel(n=n, codes=codes, t=t, r=r, scale=scale)

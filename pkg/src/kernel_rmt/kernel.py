"""Inner-product kernel matrices and their 2-bit packed ternary form.

For data ``X`` (``p x n``) the kernel is ``K_ij = f(x_i' x_j / sqrt(p)) / sqrt(p)``
off the diagonal and ``K_ii = 0``. The Gram matrix is formed first and ``f``
is then applied entrywise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .hermite import KernelFunc
from .prototype import PiecewiseProto

GRAM_BLOCK = 512


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Dense symmetric kernel with zero diagonal."""

    data: np.ndarray

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def nbytes(self) -> int:
        return self.data.nbytes

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.data @ v

    def __sub__(self, other: "KernelMatrix") -> "KernelMatrix":
        return KernelMatrix(self.data - other.data)


@dataclass(frozen=True, eq=False)
class TernaryKernel:
    """Kernel with entries in ``{-r t, 0, t} / sqrt(p)`` stored as 2-bit codes.

    Attributes
    ----------
    n : int
    codes : ndarray of uint8
        Packed strict upper triangle, four entries per byte.
    t, r : float
        Positive level ``t`` (negative when the prototype is sign flipped) and
        ratio ``r``; code 1 means ``t`` and code 2 means ``-r t``.
    scale : float
        ``1 / sqrt(p)``.
    """

    n: int
    codes: np.ndarray
    t: float
    r: float
    scale: float

    HEADER_BYTES = 40

    def __post_init__(self) -> None:
        if self.codes.dtype != np.uint8 or self.codes.size != _kernels.n_code_bytes(self.n):
            raise ValueError(f"codes must hold {_kernels.n_code_bytes(self.n)} bytes")

    def levels(self) -> tuple[float, float]:
        """Unscaled values of codes 2 and 1."""
        return -(self.r * self.t), self.t

    @property
    def nbytes(self) -> int:
        """Code bytes plus the fixed header."""
        return int(self.codes.nbytes) + self.HEADER_BYTES

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return ternary_matvec(self, v)

    def decompress(self) -> np.ndarray:
        """Dense ``n x n`` matrix equal to the kernel this was packed from."""
        C = _kernels.unpack_codes(self.codes, self.n)
        neg, pos = self.levels()
        out = np.zeros((self.n, self.n))
        out[C == _kernels.CODE_POS] = pos * self.scale
        out[C == _kernels.CODE_NEG] = neg * self.scale
        return out

    def code_counts(self) -> dict[str, int]:
        flat = _kernels._unpack_codes_numpy(self.codes, self.n)
        counts = np.bincount(flat, minlength=3)
        return {"zero": int(counts[0]), "pos": int(counts[1]), "neg": int(counts[2])}


def _as_data(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"expected a non-empty p x n matrix, got shape {X.shape}")
    return X


def gram(X: np.ndarray, block: int = GRAM_BLOCK) -> np.ndarray:
    """Scaled Gram matrix ``G = X' X / sqrt(p)``.

    The upper triangle is computed in row blocks and mirrored, so ``G`` is
    exactly symmetric.
    """
    X = _as_data(X)
    p, n = X.shape
    Xt = np.ascontiguousarray(X.T)
    G = np.empty((n, n))
    for i0 in range(0, n, block):
        i1 = min(n, i0 + block)
        G[i0:i1, i0:] = Xt[i0:i1] @ X[:, i0:]
    G /= math.sqrt(p)
    iu = np.tril_indices(n, k=-1)
    G[iu] = G.T[iu]
    return G


def kernel_from_gram(G: np.ndarray, f: KernelFunc, p: int) -> KernelMatrix:
    """Apply ``f`` entrywise to ``G``, scale by ``1/sqrt(p)``, zero the diagonal."""
    K = np.asarray(f(G), dtype=np.float64) * (1.0 / math.sqrt(p))
    if K.shape != G.shape:
        raise ValueError("kernel function must act entrywise")
    np.fill_diagonal(K, 0.0)
    return KernelMatrix(K)


def build_kernel(X: np.ndarray, f: KernelFunc) -> KernelMatrix:
    """Kernel ``K_ij = f(x_i' x_j / sqrt(p)) / sqrt(p)`` with zero diagonal."""
    X = _as_data(X)
    return kernel_from_gram(gram(X), f, X.shape[0])


def build_null_kernel(Z: np.ndarray, f: KernelFunc) -> KernelMatrix:
    """Kernel built on the noise matrix alone."""
    return build_kernel(Z, f)


def ternary_from_gram(G: np.ndarray, proto: PiecewiseProto, p: int) -> TernaryKernel:
    """Pack the prototype kernel of a precomputed Gram matrix."""
    lo, hi = proto.thresholds()
    codes = _kernels.pack_codes(G, lo, hi)
    t = -proto.t if proto.sign_flip else proto.t
    return TernaryKernel(n=G.shape[0], codes=codes, t=t, r=proto.r, scale=1.0 / math.sqrt(p))


def quantize_ternary(X: np.ndarray, proto: PiecewiseProto) -> TernaryKernel:
    """Packed kernel of the three-level prototype.

    Entries with ``G_ij <= sqrt(2) s_minus`` get code 2 and entries with
    ``G_ij > sqrt(2) s_plus`` get code 1. Decompressing gives exactly
    ``build_kernel(X, proto.to_kernel_func()).data``.
    """
    X = _as_data(X)
    return ternary_from_gram(gram(X), proto, X.shape[0])


def ternary_matvec(tk: TernaryKernel, v: np.ndarray) -> np.ndarray:
    """``K v`` from two masked partial sums scaled by ``t/sqrt(p)`` and ``-r t/sqrt(p)``."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (tk.n,):
        raise ValueError(f"vector has shape {v.shape}, expected ({tk.n},)")
    pos, neg = _kernels.partial_sums(tk.codes, tk.n, v)
    neg_level, pos_level = tk.levels()
    return (pos_level * tk.scale) * pos + (neg_level * tk.scale) * neg

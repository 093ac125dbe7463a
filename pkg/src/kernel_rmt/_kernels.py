"""Hot loops for the 2-bit packed ternary kernel.

Entry ``k`` of the strict upper triangle (row-major, ``k = i*n - i*(i+1)/2 +
(j - i - 1)``) is stored in bits ``2*(k % 4)`` of byte ``k // 4``. Codes are
``0`` (zero), ``1`` (positive level) and ``2`` (negative level).

Each operation exists as a numba loop and as a numpy fallback. The public
wrappers dispatch on :data:`kernel_rmt._accel.BACKEND`.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from ._accel import BACKEND, njit

CODE_ZERO = 0
CODE_POS = 1
CODE_NEG = 2


def n_pairs(n: int) -> int:
    """Number of strict upper-triangle entries of an ``n x n`` matrix."""
    return n * (n - 1) // 2


def n_code_bytes(n: int) -> int:
    """Bytes needed to hold ``n(n-1)/2`` two-bit codes."""
    return (n_pairs(n) + 3) // 4


@lru_cache(maxsize=4)
def _triu(n: int) -> tuple[np.ndarray, np.ndarray]:
    iu, ju = np.triu_indices(n, k=1)
    return iu.astype(np.intp), ju.astype(np.intp)


# ---------------------------------------------------------------- numba path


@njit
def _pack_codes_numba(G, lo, hi):
    n = G.shape[0]
    out = np.zeros(((n * (n - 1) // 2) + 3) // 4, dtype=np.uint8)
    k = 0
    for i in range(n):
        for j in range(i + 1, n):
            g = G[i, j]
            if g <= lo:
                code = 2
            elif g > hi:
                code = 1
            else:
                code = 0
            if code != 0:
                out[k >> 2] |= np.uint8(code << (2 * (k & 3)))
            k += 1
    return out


@njit
def _partial_sums_numba(codes, n, v):
    pos = np.zeros(n, dtype=np.float64)
    neg = np.zeros(n, dtype=np.float64)
    k = 0
    for i in range(n):
        vi = v[i]
        acc_pos = 0.0
        acc_neg = 0.0
        for j in range(i + 1, n):
            code = (codes[k >> 2] >> (2 * (k & 3))) & 3
            if code == 1:
                acc_pos += v[j]
                pos[j] += vi
            elif code == 2:
                acc_neg += v[j]
                neg[j] += vi
            k += 1
        pos[i] += acc_pos
        neg[i] += acc_neg
    return pos, neg


# ---------------------------------------------------------------- numpy path


def _unpack_codes_numpy(codes: np.ndarray, n: int) -> np.ndarray:
    shifts = np.array([0, 2, 4, 6], dtype=np.uint8)
    flat = (codes[:, None] >> shifts[None, :]) & np.uint8(3)
    return flat.reshape(-1)[: n_pairs(n)]


def _pack_codes_numpy(G: np.ndarray, lo: float, hi: float) -> np.ndarray:
    n = G.shape[0]
    iu, ju = _triu(n)
    g = G[iu, ju]
    codes = np.zeros(g.shape, dtype=np.uint8)
    codes[g > hi] = CODE_POS
    codes[g <= lo] = CODE_NEG
    pad = (-codes.size) % 4
    if pad:
        codes = np.concatenate([codes, np.zeros(pad, dtype=np.uint8)])
    quads = codes.reshape(-1, 4)
    return (quads[:, 0] | (quads[:, 1] << 2) | (quads[:, 2] << 4) | (quads[:, 3] << 6)).astype(np.uint8)


def _partial_sums_numpy(codes: np.ndarray, n: int, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    iu, ju = _triu(n)
    flat = _unpack_codes_numpy(codes, n)
    sums = []
    for code in (CODE_POS, CODE_NEG):
        sel = flat == code
        a, b = iu[sel], ju[sel]
        s = np.bincount(a, weights=v[b], minlength=n) + np.bincount(b, weights=v[a], minlength=n)
        sums.append(s)
    return sums[0], sums[1]


# ---------------------------------------------------------------- dispatch


def _use_numba(backend: str | None) -> bool:
    name = backend or BACKEND
    if name not in ("numba", "numpy"):
        raise ValueError(f"backend must be 'numba' or 'numpy', got {name!r}")
    return name == "numba"


def pack_codes(G: np.ndarray, lo: float, hi: float, backend: str | None = None) -> np.ndarray:
    """Pack the strict upper triangle of ``G`` into 2-bit threshold codes.

    Parameters
    ----------
    G : ndarray, shape (n, n)
        Matrix whose upper triangle is coded.
    lo, hi : float
        Entries ``<= lo`` get the negative code, entries ``> hi`` the
        positive code, everything else zero.
    backend : {"numba", "numpy"}, optional
        Override the import-time backend.
    """
    G = np.ascontiguousarray(G, dtype=np.float64)
    if _use_numba(backend):
        return _pack_codes_numba(G, float(lo), float(hi))
    return _pack_codes_numpy(G, float(lo), float(hi))


def partial_sums(codes: np.ndarray, n: int, v: np.ndarray, backend: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(P v, N v)`` where ``P`` and ``N`` are the symmetric 0/1 masks of
    the positive and negative codes."""
    v = np.ascontiguousarray(v, dtype=np.float64)
    if _use_numba(backend):
        return _partial_sums_numba(codes, int(n), v)
    return _partial_sums_numpy(codes, int(n), v)


def unpack_codes(codes: np.ndarray, n: int) -> np.ndarray:
    """Decode the packed codes into a symmetric ``uint8`` code matrix."""
    iu, ju = _triu(n)
    flat = _unpack_codes_numpy(codes, n)
    C = np.zeros((n, n), dtype=np.uint8)
    C[iu, ju] = flat
    C[ju, iu] = flat
    return C

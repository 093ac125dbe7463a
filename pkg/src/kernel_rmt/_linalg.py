"""Extremal eigenpairs of symmetric operators given only by a matvec."""
from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

DENSE_CUTOFF = 32


class EigenConvergenceError(RuntimeError):
    """The iterative eigensolver stopped before converging.

    Attributes
    ----------
    last_iterate : ndarray or None
        Best available eigenvector estimate.
    residual : float
        ``||A v - lambda v||`` for that estimate (``inf`` if none).
    """

    def __init__(self, message: str, last_iterate: np.ndarray | None, residual: float):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


def start_vector(n: int, seed: int) -> np.ndarray:
    return np.random.default_rng([int(seed), 0x51EED]).standard_normal(n)


def extremal_eigs(
    matvec: Callable[[np.ndarray], np.ndarray],
    n: int,
    which: str = "LA",
    k: int = 1,
    seed: int = 0,
    tol: float = 1e-6,
    maxiter: int = 2000,
) -> tuple[np.ndarray, np.ndarray]:
    """Extremal eigenpairs by implicitly restarted Lanczos (ARPACK).

    Small problems are solved densely. Returns ``(values, vectors)`` sorted by
    value.

    Raises
    ------
    EigenConvergenceError
    """
    if n <= DENSE_CUTOFF:
        dense = np.column_stack([matvec(e) for e in np.eye(n)])
        w, V = np.linalg.eigh(0.5 * (dense + dense.T))
        if which == "LA":
            idx = np.arange(n - k, n)
        elif which == "SA":
            idx = np.arange(k)
        elif which == "LM":
            idx = np.sort(np.argsort(np.abs(w))[-k:])
        else:  # "BE"
            idx = np.unique(np.concatenate([np.arange(k // 2), np.arange(n - (k - k // 2), n)]))
        return w[idx], V[:, idx]
    op = LinearOperator((n, n), matvec=matvec, dtype=np.float64)
    v0 = start_vector(n, seed)
    try:
        w, V = eigsh(op, k=k, which=which, v0=v0, tol=tol, maxiter=maxiter)
    except ArpackNoConvergence as exc:
        if exc.eigenvectors is not None and exc.eigenvectors.size:
            v = exc.eigenvectors[:, -1]
            lam = exc.eigenvalues[-1]
            res = float(np.linalg.norm(matvec(v) - lam * v))
        else:
            v, res = None, float("inf")
        raise EigenConvergenceError(f"eigensolver did not converge in {maxiter} iterations", v, res) from exc
    order = np.argsort(w)
    return w[order], V[:, order]

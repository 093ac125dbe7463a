"""Low-rank information carried by a kernel on mixture data.

Under the mixture model the kernel ``K`` built on ``X`` splits into the null
kernel ``K_N`` built on the noise ``Z`` plus an informative part. For a
nonlinearity with Hermite coefficients ``(a1, a2)`` that part is, in operator
norm, the rank-at-most-4 matrix

    K_I = (a1/p) (J M'M J' + J M'Z + Z'M J') + (a2 / (sqrt(2) p)) J (T + S) J'

with class means ``M = [mu1, mu2]``, indicators ``J``,
``T_ab = tr(E_a + E_b)/sqrt(p)`` and ``S_ab = tr(E_a E_b)/sqrt(p)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._linalg import extremal_eigs
from .hermite import HermiteCoeffs, double_factorial
from .kernel import KernelMatrix, gram
from .model import MixtureParams, trace_product


@dataclass(frozen=True, eq=False)
class ClassStats:
    """Means ``M`` (``p x 2``), trace matrices ``T`` and ``S`` (``2 x 2``) and
    class indicators ``J`` (``n x 2``)."""

    M: np.ndarray
    T: np.ndarray
    S: np.ndarray
    J: np.ndarray

    @property
    def n(self) -> int:
        return self.J.shape[0]

    @property
    def p(self) -> int:
        return self.M.shape[0]


def indicator_matrix(labels: Sequence[int]) -> np.ndarray:
    """``J_ia = 1`` iff ``labels[i] == a + 1``."""
    labels = np.asarray(labels)
    if not np.all((labels == 1) | (labels == 2)):
        raise ValueError("labels must take values in {1, 2}")
    return np.column_stack([(labels == 1), (labels == 2)]).astype(np.float64)


def class_stats(params: MixtureParams, labels: Sequence[int]) -> ClassStats:
    """Exact ``M``, ``T``, ``S`` and ``J``; traces use the descriptors directly."""
    labels = np.asarray(labels)
    if labels.shape != (params.n,):
        raise ValueError(f"expected {params.n} labels, got shape {labels.shape}")
    p = params.p
    es = (params.e1, params.e2)
    tr = [e.trace(p) for e in es]
    sq = math.sqrt(p)
    T = np.array([[(tr[a] + tr[b]) / sq for b in range(2)] for a in range(2)])
    S = np.array([[trace_product(es[a], es[b], p) / sq for b in range(2)] for a in range(2)])
    M = np.column_stack([params.mu1, params.mu2])
    return ClassStats(M=M, T=T, S=S, J=indicator_matrix(labels))


def build_monomial_KI(Z: np.ndarray, params: MixtureParams, labels: Sequence[int], k: int) -> np.ndarray:
    """Second-order informative part of the monomial kernel ``f(x) = x^k``.

    With ``G = Z'Z/sqrt(p)`` and the expansion
    ``x_i'x_j/sqrt(p) = G_ij + A_ij + B_ij + ...`` where

    * ``A_ij = z_i'(E_a + E_b) z_j / (2 sqrt(p))``
    * ``B_ij = (mu_a'mu_b + mu_a'z_j + mu_b'z_i)/sqrt(p) - z_i'(E_a - E_b)^2 z_j / (8 sqrt(p))``

    (``a``, ``b`` the classes of ``i``, ``j``, diagonals of ``A``, ``B`` zero),
    returns ``(k/sqrt(p)) G^(k-1) o (A + B) + (k(k-1)/(2 sqrt(p))) G^(k-2) o A^2``.
    """
    if not 2 <= k <= 6:
        raise ValueError(f"k must lie in [2, 6], got {k}")
    Z = np.asarray(Z, dtype=np.float64)
    p, n = Z.shape
    if (p, n) != (params.p, params.n):
        raise ValueError("Z does not match the scenario dimensions")
    cls = np.asarray(labels) - 1
    sq = math.sqrt(p)
    G = gram(Z)

    Q = [Z.T @ e.apply(Z, p) for e in (params.e1, params.e2)]
    Qi = np.where(cls[:, None] == 0, Q[0], Q[1])
    Qj = np.where(cls[None, :] == 0, Q[0], Q[1])
    A = (Qi + Qj) / (2.0 * sq)

    M = np.column_stack([params.mu1, params.mu2])
    MM = M.T @ M
    MZ = (M.T @ Z)[cls, :]  # row i holds mu_{a(i)}' z_j
    DZ = params.e1.apply(Z, p) - params.e2.apply(Z, p)
    R = DZ.T @ DZ
    cross = cls[:, None] != cls[None, :]
    B = (MM[np.ix_(cls, cls)] + MZ + MZ.T) / sq - np.where(cross, R, 0.0) / (8.0 * sq)

    np.fill_diagonal(A, 0.0)
    np.fill_diagonal(B, 0.0)
    return (k / sq) * G ** (k - 1) * (A + B) + (k * (k - 1) / (2.0 * sq)) * G ** (k - 2) * A**2


@dataclass(frozen=True, eq=False)
class SpikeModel:
    """Factored informative matrix ``K_I = U C U'`` with ``U = [J, Z'M]``.

    Attributes
    ----------
    U : ndarray, shape (n, 4)
    C : ndarray, shape (4, 4)
    a1, a2 : float
    stats : ClassStats
    """

    U: np.ndarray
    C: np.ndarray
    a1: float
    a2: float
    stats: ClassStats

    @property
    def n(self) -> int:
        return self.U.shape[0]

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.U @ (self.C @ (self.U.T @ v))

    def dense(self) -> np.ndarray:
        """Materialize the ``n x n`` matrix (small problems only)."""
        return self.U @ self.C @ self.U.T

    def eigs(self) -> tuple[np.ndarray, np.ndarray]:
        """Nonzero spectrum from the factors: eigenpairs of ``U C U'``."""
        Qf, Rf = np.linalg.qr(self.U)
        core = Rf @ self.C @ Rf.T
        w, V = np.linalg.eigh(0.5 * (core + core.T))
        return w, Qf @ V


def build_spike(Z: np.ndarray, coeffs: HermiteCoeffs, stats: ClassStats) -> SpikeModel:
    """Spiked-model informative matrix for a nonlinearity with ``(a1, a2)``.

    The mean terms carry ``a1/p`` and the covariance term ``J (T + S) J'``
    carries ``a2/(sqrt(2) p)``; the latter is the scaling that makes the
    quadratic case ``f = x^2`` (where ``a2 = sqrt(2)``) come out as
    ``(1/p) J (T + S) J'``.
    """
    Z = np.asarray(Z, dtype=np.float64)
    p, n = Z.shape
    if stats.J.shape[0] != n or stats.M.shape[0] != p:
        raise ValueError("Z does not match the class statistics")
    a1, a2 = float(coeffs.a1), float(coeffs.a2)
    W = Z.T @ stats.M
    U = np.hstack([stats.J, W])
    C = np.zeros((4, 4))
    C[:2, :2] = a1 * (stats.M.T @ stats.M) / p + a2 * (stats.T + stats.S) / (math.sqrt(2.0) * p)
    C[:2, 2:] = a1 * np.eye(2) / p
    C[2:, :2] = a1 * np.eye(2) / p
    return SpikeModel(U=U, C=C, a1=a1, a2=a2, stats=stats)


def _matvec_of(op):
    if isinstance(op, (KernelMatrix, SpikeModel)) or hasattr(op, "matvec"):
        return op.matvec
    arr = np.asarray(op, dtype=np.float64)
    return lambda v: arr @ v


def opnorm_diff(A, B, seed: int = 0, tol: float = 1e-6, maxiter: int = 2000) -> float:
    """Spectral norm of ``A - B`` for symmetric operators.

    ``B`` may be a single operator or a sequence whose sum is subtracted
    (typically ``(K_N, spike_model)``). The two extreme eigenvalues of the
    difference are found by Lanczos iteration with a seeded start vector.

    Raises
    ------
    EigenConvergenceError
        If the eigensolver does not converge within ``maxiter``.
    """
    terms = list(B) if isinstance(B, (list, tuple)) else [B]
    fa = _matvec_of(A)
    fbs = [_matvec_of(t) for t in terms]
    n = A.n if hasattr(A, "n") else np.asarray(A).shape[0]

    def matvec(v: np.ndarray) -> np.ndarray:
        v = np.ravel(v)
        out = fa(v)
        for fb in fbs:
            out = out - fb(v)
        return out

    probes = np.random.default_rng([int(seed), 7]).standard_normal((n, 2))
    if all(np.linalg.norm(matvec(probes[:, j])) == 0.0 for j in range(2)):
        return 0.0
    w, _ = extremal_eigs(matvec, n, which="BE", k=2, seed=seed, tol=tol, maxiter=maxiter)
    return float(np.max(np.abs(w)))


def hadamard_bound_check(A: np.ndarray, B: np.ndarray) -> tuple[float, float]:
    """``(||A o B||, sqrt(n) max|A_ij| ||B||)``; the first never exceeds the second."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape != B.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A and B must be square matrices of equal size")
    n = A.shape[0]
    lhs = float(np.linalg.norm(A * B, 2))
    rhs = float(math.sqrt(n) * np.max(np.abs(A)) * np.linalg.norm(B, 2))
    return lhs, rhs


# ----------------------------------------------------------------------------
# Gaussian moment identities
# ----------------------------------------------------------------------------


@dataclass
class MomentCheck:
    """Monte-Carlo estimate of one identity against its closed form."""

    name: str
    estimate: float
    closed_form: float
    std_error: float

    @property
    def z_score(self) -> float:
        if self.std_error == 0.0:
            return 0.0 if self.estimate == self.closed_form else math.inf
        return (self.estimate - self.closed_form) / self.std_error


@dataclass
class MomentReport:
    k: int
    trials: int
    p: int
    checks: list[MomentCheck]

    def max_abs_z(self) -> float:
        return max(abs(c.z_score) for c in self.checks)


def _mc(name: str, samples: np.ndarray, closed: float) -> MomentCheck:
    return MomentCheck(name, float(samples.mean()), float(closed), float(samples.std(ddof=1) / math.sqrt(samples.size)))


def gaussian_moment_oracle(k: int, trials: int, p: int, seed: int = 0, chunk: int = 8192) -> MomentReport:
    """Monte-Carlo check of Gaussian moment identities for ``xi = z_i'z_j/sqrt(p)``.

    With ``z_j`` and a unit vector ``b`` held fixed (``b`` at cosine 0.6 with
    ``z_j``) and ``z_i ~ N(0, I_p)`` drawn ``trials`` times, ``s = ||z_j||/sqrt(p)``:

    * ``E[xi^k] = (k-1)!!`` (``z_j`` redrawn per trial, through the exact law
      of ``z_i'z_j``)
    * ``E[xi^k (z_i'b)] = 0`` and ``E[xi^(k-1) (z_i'b)^2] = 0``
    * ``E[xi^(k-1) (z_i'b)] = (k-1)!! s^(k-2) (z_j'b)/sqrt(p)``
    * ``E[xi^k (z_i'b)^2] = (k-1)!! (k s^(k-2) (z_j'b/sqrt(p))^2 + s^k ||b||^2)``

    The first identity is exact only as ``p`` grows; at finite ``p`` its bias
    is ``(k-1)!! (E (||z||^2/p)^(k/2) - 1)``, for example ``6/p`` when ``k = 4``.
    """
    if k % 2 or not 2 <= k <= 8:
        raise ValueError("k must be an even integer in [2, 8]")
    rng = np.random.default_rng([int(seed), k, p])
    zj = rng.standard_normal(p)
    u = zj / np.linalg.norm(zj)
    g = rng.standard_normal(p)
    g -= (g @ u) * u
    b = 0.6 * u + 0.8 * g / np.linalg.norm(g)
    sq = math.sqrt(p)
    s = np.linalg.norm(zj) / sq
    zjb = float(zj @ b)
    df = double_factorial(k - 1)

    xi_free, xi, w = [], [], []
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        Zi = rng.standard_normal((m, p))
        xi.append(Zi @ zj / sq)
        w.append(Zi @ b)
        # z_i'z_j for an independent Gaussian z_j has the law of ||z_j|| g with
        # g ~ N(0, 1) independent of ||z_j||^2 ~ chi^2_p
        xi_free.append(np.sqrt(rng.chisquare(p, m) / p) * rng.standard_normal(m))
        done += m
    xi_free = np.concatenate(xi_free)
    xi = np.concatenate(xi)
    w = np.concatenate(w)
    bb = float(b @ b)
    checks = [
        _mc("E[xi^k]", xi_free**k, df),
        _mc("E[xi^k (z_i'b)]", xi**k * w, 0.0),
        _mc("E[xi^(k-1) (z_i'b)^2]", xi ** (k - 1) * w**2, 0.0),
        _mc("E[xi^(k-1) (z_i'b)]", xi ** (k - 1) * w, df * s ** (k - 2) * zjb / sq),
        _mc("E[xi^k (z_i'b)^2]", xi**k * w**2, df * (k * s ** (k - 2) * (zjb / sq) ** 2 + s**k * bb)),
    ]
    return MomentReport(k=k, trials=trials, p=p, checks=checks)

"""Two-class high-dimensional mixture model.

Observations follow ``x = mu_a + (I_p + E_a)^{1/2} z`` where ``z`` has i.i.d.
standardized entries and ``a`` is the class. Classes are balanced and the
labels are block ordered: the first ``n/2`` columns belong to class 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import ndtr


class CovarianceError(ValueError):
    """Raised when ``I_p + E`` fails to be positive definite."""


# ----------------------------------------------------------------------------
# covariance perturbation descriptors
# ----------------------------------------------------------------------------


class CovPerturbation:
    """Base class for the perturbation ``E`` in ``I_p + E``.

    Structured descriptors (zero, isotropic, diagonal) expose their diagonal
    through :meth:`diag` so traces and norms cost ``O(p)``. The dense
    descriptor returns ``None`` there and works with the full matrix.
    """

    def diag(self, p: int) -> np.ndarray | None:
        raise NotImplementedError

    def matrix(self, p: int) -> np.ndarray:
        d = self.diag(p)
        return np.diag(d)

    @property
    def is_zero(self) -> bool:
        return False

    def trace(self, p: int) -> float:
        d = self.diag(p)
        return float(np.sum(d)) if d is not None else float(np.trace(self.matrix(p)))

    def frob2(self, p: int) -> float:
        d = self.diag(p)
        return float(np.dot(d, d)) if d is not None else float(np.sum(self.matrix(p) ** 2))

    def opnorm(self, p: int) -> float:
        d = self.diag(p)
        if d is not None:
            return float(np.max(np.abs(d))) if p else 0.0
        return float(np.max(np.abs(np.linalg.eigvalsh(self.matrix(p)))))

    def min_eig_shifted(self, p: int) -> float:
        """Smallest eigenvalue of ``I_p + E``."""
        d = self.diag(p)
        if d is not None:
            return float(1.0 + np.min(d))
        return float(1.0 + np.linalg.eigvalsh(self.matrix(p))[0])

    def check(self, p: int) -> None:
        if not self.min_eig_shifted(p) > 0.0:
            raise CovarianceError(f"I_p + E is not positive definite for {self!r} at p={p}")

    def apply(self, V: np.ndarray, p: int) -> np.ndarray:
        """Return ``E @ V``."""
        d = self.diag(p)
        if d is not None:
            return d[:, None] * V if V.ndim == 2 else d * V
        return self.matrix(p) @ V

    def sqrt_apply(self, V: np.ndarray, p: int) -> np.ndarray:
        """Return ``(I_p + E)^{1/2} @ V``."""
        d = self.diag(p)
        if d is not None:
            s = np.sqrt(1.0 + d)
            return s[:, None] * V if V.ndim == 2 else s * V
        w, U = np.linalg.eigh(np.eye(p) + self.matrix(p))
        if w[0] <= 0.0:
            raise CovarianceError("I_p + E is not positive definite")
        return U @ (np.sqrt(w)[:, None] * (U.T @ V)) if V.ndim == 2 else U @ (np.sqrt(w) * (U.T @ V))


@dataclass(frozen=True)
class Zero(CovPerturbation):
    """``E = 0``."""

    def diag(self, p: int) -> np.ndarray:
        return np.zeros(p)

    @property
    def is_zero(self) -> bool:
        return True

    def trace(self, p: int) -> float:
        return 0.0

    def frob2(self, p: int) -> float:
        return 0.0

    def opnorm(self, p: int) -> float:
        return 0.0

    def sqrt_apply(self, V: np.ndarray, p: int) -> np.ndarray:
        return V


@dataclass(frozen=True)
class IsoScalar(CovPerturbation):
    """``E = alpha * I_p / sqrt(p)``."""

    alpha: float

    def diag(self, p: int) -> np.ndarray:
        return np.full(p, self.alpha / math.sqrt(p))

    @property
    def is_zero(self) -> bool:
        return self.alpha == 0.0

    def trace(self, p: int) -> float:
        return self.alpha * math.sqrt(p)

    def frob2(self, p: int) -> float:
        return self.alpha**2

    def opnorm(self, p: int) -> float:
        return abs(self.alpha) / math.sqrt(p)


@dataclass(frozen=True, eq=False)
class Diagonal(CovPerturbation):
    """``E = diag(d)``."""

    d: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "d", np.asarray(self.d, dtype=np.float64).ravel())

    def diag(self, p: int) -> np.ndarray:
        if self.d.size != p:
            raise ValueError(f"diagonal descriptor has length {self.d.size}, expected {p}")
        return self.d


@dataclass(frozen=True, eq=False)
class Dense(CovPerturbation):
    """Arbitrary symmetric ``E``."""

    E: np.ndarray

    def __post_init__(self) -> None:
        E = np.asarray(self.E, dtype=np.float64)
        if E.ndim != 2 or E.shape[0] != E.shape[1]:
            raise ValueError("dense descriptor must be a square matrix")
        if not np.allclose(E, E.T, atol=1e-12):
            raise ValueError("dense descriptor must be symmetric")
        object.__setattr__(self, "E", 0.5 * (E + E.T))

    def diag(self, p: int) -> None:
        return None

    def matrix(self, p: int) -> np.ndarray:
        if self.E.shape[0] != p:
            raise ValueError(f"dense descriptor has size {self.E.shape[0]}, expected {p}")
        return self.E


def trace_product(ea: CovPerturbation, eb: CovPerturbation, p: int) -> float:
    """``tr(E_a E_b)`` using diagonals when both descriptors are structured."""
    if ea.is_zero or eb.is_zero:
        return 0.0
    if isinstance(ea, IsoScalar) and isinstance(eb, IsoScalar):
        return ea.alpha * eb.alpha
    da, db = ea.diag(p), eb.diag(p)
    if da is not None and db is not None:
        return float(np.dot(da, db))
    if da is not None:
        return float(np.dot(da, np.diag(eb.matrix(p))))
    if db is not None:
        return float(np.dot(np.diag(ea.matrix(p)), db))
    return float(np.sum(ea.matrix(p) * eb.matrix(p)))


# ----------------------------------------------------------------------------
# entry distributions
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class EntryDistribution:
    """Law of the i.i.d. entries of ``z``; always zero mean and unit variance.

    Parameters
    ----------
    kind : {"gaussian", "rademacher", "student_t"}
    df : int, optional
        Degrees of freedom for the Student-t law (must exceed 2).
    """

    kind: str = "gaussian"
    df: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("gaussian", "rademacher", "student_t"):
            raise ValueError(f"unknown entry distribution {self.kind!r}")
        if self.kind == "student_t" and (self.df is None or self.df <= 2):
            raise ValueError("student_t needs df > 2 for a finite variance")

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.standard_normal(size)
        if self.kind == "rademacher":
            return 2.0 * rng.integers(0, 2, size=size).astype(np.float64) - 1.0
        return rng.standard_t(self.df, size=size) / math.sqrt(self.df / (self.df - 2.0))

    @classmethod
    def parse(cls, spec: Any) -> "EntryDistribution":
        """Build from ``"gaussian"``, ``"rademacher"``, ``"student_t:7"`` or a dict."""
        if isinstance(spec, EntryDistribution):
            return spec
        if isinstance(spec, dict):
            return cls(spec.get("kind", "gaussian"), spec.get("df"))
        name, _, arg = str(spec).partition(":")
        name = name.strip().lower().replace("-", "_")
        if name in ("bernoulli", "rademacher"):
            return cls("rademacher")
        if name in ("t", "student_t", "studentt"):
            return cls("student_t", int(arg) if arg else 7)
        return cls(name)


def Gaussian() -> EntryDistribution:
    return EntryDistribution("gaussian")


def Rademacher() -> EntryDistribution:
    return EntryDistribution("rademacher")


def StudentT(df: int) -> EntryDistribution:
    return EntryDistribution("student_t", df)


# ----------------------------------------------------------------------------
# parameters and datasets
# ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MixtureParams:
    """Balanced two-class mixture scenario.

    Attributes
    ----------
    n, p : int
        Sample count (even) and dimension.
    mu1, mu2 : ndarray, shape (p,)
        Class means.
    e1, e2 : CovPerturbation
        Covariance perturbations.
    dist : EntryDistribution
        Law of the noise entries.
    """

    n: int
    p: int
    mu1: np.ndarray
    mu2: np.ndarray
    e1: CovPerturbation = field(default_factory=Zero)
    e2: CovPerturbation = field(default_factory=Zero)
    dist: EntryDistribution = field(default_factory=Gaussian)

    def __post_init__(self) -> None:
        if self.n <= 0 or self.n % 2:
            raise ValueError(f"n must be a positive even integer, got {self.n}")
        if self.p <= 0:
            raise ValueError(f"p must be positive, got {self.p}")
        for name in ("mu1", "mu2"):
            mu = np.asarray(getattr(self, name), dtype=np.float64).ravel()
            if mu.size != self.p:
                raise ValueError(f"{name} has length {mu.size}, expected p={self.p}")
            mu.setflags(write=False)
            object.__setattr__(self, name, mu)
        self.e1.check(self.p)
        self.e2.check(self.p)

    @property
    def c(self) -> float:
        """Dimension to sample-size ratio ``p/n``."""
        return self.p / self.n

    def labels(self) -> np.ndarray:
        return np.repeat(np.array([1, 2], dtype=np.int64), self.n // 2)

    def with_size(self, n: int, p: int) -> "MixtureParams":
        """Same scenario rescaled to ``(n, p)``; means keep their leading coordinates."""
        return MixtureParams(
            n=n,
            p=p,
            mu1=_resize(self.mu1, p),
            mu2=_resize(self.mu2, p),
            e1=_resize_cov(self.e1, p),
            e2=_resize_cov(self.e2, p),
            dist=self.dist,
        )

    def nulled(self) -> "MixtureParams":
        """The same scenario with zero means and zero perturbations."""
        return MixtureParams(self.n, self.p, np.zeros(self.p), np.zeros(self.p), Zero(), Zero(), self.dist)


def _resize(mu: np.ndarray, p: int) -> np.ndarray:
    out = np.zeros(p)
    m = min(p, mu.size)
    out[:m] = mu[:m]
    return out


def _resize_cov(e: CovPerturbation, p: int) -> CovPerturbation:
    if isinstance(e, (Zero, IsoScalar)):
        return e
    raise ValueError("only zero and isotropic perturbations can be rescaled")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Sampled observations ``X`` with their noise ``Z`` and block labels."""

    X: np.ndarray
    Z: np.ndarray
    labels: np.ndarray

    @property
    def p(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]


def column_rng(seed: int, column: int) -> np.random.Generator:
    """Independent generator for one column, derived from ``(seed, column)``."""
    return np.random.default_rng([int(seed), int(column)])


def sample_noise(n: int, p: int, dist: EntryDistribution, seed: int) -> np.ndarray:
    """Draw the ``p x n`` noise matrix with one RNG stream per column."""
    Z = np.empty((p, n), dtype=np.float64, order="F")
    for i in range(n):
        Z[:, i] = dist.draw(column_rng(seed, i), p)
    return np.ascontiguousarray(Z)


def sample_mixture(params: MixtureParams, seed: int) -> Dataset:
    """Sample a dataset from the mixture.

    Every column uses its own generator seeded by ``(seed, column)``, so the
    result does not depend on how the work is scheduled.

    Parameters
    ----------
    params : MixtureParams
    seed : int
        Non-negative seed.

    Returns
    -------
    Dataset
    """
    if seed < 0:
        raise ValueError("seed must be non-negative")
    n, p = params.n, params.p
    Z = sample_noise(n, p, params.dist, seed)
    labels = params.labels()
    X = np.empty_like(Z)
    half = n // 2
    for cols, mu, e in ((slice(0, half), params.mu1, params.e1), (slice(half, n), params.mu2, params.e2)):
        X[:, cols] = mu[:, None] + e.sqrt_apply(Z[:, cols], p)
    for arr in (X, Z, labels):
        arr.setflags(write=False)
    return Dataset(X=X, Z=Z, labels=labels)


# ----------------------------------------------------------------------------
# regime check and oracle statistics
# ----------------------------------------------------------------------------


@dataclass
class RegimeReport:
    """Normalized magnitudes of the non-trivial regime, per class.

    ``magnitudes[name]`` holds ``(class1, class2)`` and ``flags[name]`` holds
    whether both lie within ``bounds[name]``.
    """

    magnitudes: dict[str, tuple[float, float]]
    flags: dict[str, bool]
    bounds: dict[str, tuple[float, float]]

    @property
    def ok(self) -> bool:
        return all(self.flags.values())


REGIME_QUANTITIES = ("mu_norm", "e_opnorm_scaled", "e_trace_scaled", "e_frob2_scaled")


def validate_regime(params: MixtureParams, bounds: dict[str, tuple[float, float]] | None = None) -> RegimeReport:
    """Report ``||mu_a||``, ``||E_a|| p^{1/4}``, ``|tr E_a|/sqrt(p)`` and
    ``||E_a||_F^2/sqrt(p)`` with a pass flag for each against ``bounds``
    (default ``[0, 100]`` for every quantity). Never raises."""
    p = params.p
    b = {q: (0.0, 100.0) for q in REGIME_QUANTITIES}
    if bounds:
        b.update(bounds)
    mags: dict[str, tuple[float, float]] = {}
    mags["mu_norm"] = (float(np.linalg.norm(params.mu1)), float(np.linalg.norm(params.mu2)))
    mags["e_opnorm_scaled"] = tuple(e.opnorm(p) * p**0.25 for e in (params.e1, params.e2))
    mags["e_trace_scaled"] = tuple(abs(e.trace(p)) / math.sqrt(p) for e in (params.e1, params.e2))
    mags["e_frob2_scaled"] = tuple(e.frob2(p) / math.sqrt(p) for e in (params.e1, params.e2))
    flags = {q: all(b[q][0] <= v <= b[q][1] for v in mags[q]) for q in REGIME_QUANTITIES}
    return RegimeReport(magnitudes=mags, flags=flags, bounds=b)


@dataclass(frozen=True)
class OracleReport:
    """Mean and variance of the Neyman-Pearson statistic under class 1."""

    E_T: float
    V_T: float
    error_rate: float


def oracle_stats(params: MixtureParams) -> OracleReport:
    """Exact mean ``E_T``, variance ``V_T`` and Gaussian error ``Phi(-E_T/sqrt(V_T))``
    of the optimal log-likelihood-ratio test between the two classes."""
    p = params.p
    dmu = params.mu1 - params.mu2
    d1, d2 = params.e1.diag(p), params.e2.diag(p)
    if d1 is not None and d2 is not None:
        s1, s2 = 1.0 + d1, 1.0 + d2
        if np.any(s2 <= 0.0):
            raise CovarianceError("I_p + E_2 is singular")
        ratio = s1 / s2
        E_T = (np.sum(ratio) / p - 1.0 + np.sum(dmu**2 / s2) / p - np.sum(np.log(s1) - np.log(s2)) / p)
        V_T = 2.0 / p**2 * np.sum((ratio - 1.0) ** 2) + 4.0 / p**2 * np.sum(dmu**2 * s1 / s2**2)
    else:
        C1 = np.eye(p) + params.e1.matrix(p)
        C2 = np.eye(p) + params.e2.matrix(p)
        w1, U1 = np.linalg.eigh(C1)
        w2 = np.linalg.eigvalsh(C2)
        if w2[0] <= 0.0:
            raise CovarianceError("I_p + E_2 is singular")
        C2inv = np.linalg.inv(C2)
        R1 = (U1 * np.sqrt(w1)) @ U1.T
        W = R1 @ C2inv @ R1 - np.eye(p)
        u = C2inv @ dmu
        E_T = (np.trace(C1 @ C2inv) / p - 1.0 + dmu @ u / p - (np.sum(np.log(w1)) - np.sum(np.log(w2))) / p)
        V_T = 2.0 / p**2 * np.sum(W**2) + 4.0 / p**2 * (u @ C1 @ u)
    E_T, V_T = float(E_T), float(V_T)
    if V_T <= 0.0:
        err = 0.5 if E_T <= 0.0 else 0.0
    else:
        err = float(ndtr(-E_T / math.sqrt(V_T)))
    return OracleReport(E_T=E_T, V_T=V_T, error_rate=err)


# ----------------------------------------------------------------------------
# presets and configuration
# ----------------------------------------------------------------------------


def _first_coord(p: int, value: float) -> np.ndarray:
    mu = np.zeros(p)
    mu[0] = value
    return mu


def canonical_scenarios(name: str) -> MixtureParams:
    """Preset scenarios.

    ``fig1``
        ``n=2048, p=512``, means ``-/+[3/2, 0, ...]``, no covariance perturbation,
        Gaussian entries.
    ``fig2``
        ``n=2048, p=8192``, means ``-/+[2, 0, ...]``, ``E_1 = -10 I/sqrt(p) = -E_2``,
        Gaussian entries.
    ``fig3``
        The ``fig2`` geometry with Rademacher entries.
    """
    if name == "fig1":
        n, p = 2048, 512
        return MixtureParams(n, p, _first_coord(p, -1.5), _first_coord(p, 1.5), Zero(), Zero(), Gaussian())
    if name in ("fig2", "fig3"):
        n, p = 2048, 8192
        dist = Gaussian() if name == "fig2" else Rademacher()
        return MixtureParams(n, p, _first_coord(p, -2.0), _first_coord(p, 2.0), IsoScalar(-10.0), IsoScalar(10.0), dist)
    raise KeyError(f"unknown scenario {name!r}; expected one of fig1, fig2, fig3")


def _cov_from_config(spec: dict | None, p: int, sign: float) -> CovPerturbation:
    if not spec:
        return Zero()
    kind = spec.get("kind", "zero")
    value = spec.get("value", 0.0)
    if kind == "zero":
        return Zero()
    if kind == "iso":
        return IsoScalar(sign * float(value))
    if kind == "diagonal":
        return Diagonal(sign * np.asarray(value, dtype=np.float64))
    if kind == "dense":
        return Dense(sign * np.asarray(value, dtype=np.float64))
    raise ValueError(f"unknown covariance kind {kind!r}")


def scenario_from_config(cfg: dict) -> MixtureParams:
    """Build a scenario from a JSON-style mapping.

    The mapping has keys ``n``, ``p``, ``mu`` (``{"kind": "first_coord",
    "value": v}`` giving ``mu1 = -v e_1 = -mu2``), ``e`` (``{"kind": "iso",
    "value": alpha}`` giving ``E_1 = alpha I/sqrt(p) = -E_2``; kinds ``zero``,
    ``iso``, ``diagonal``, ``dense``) and ``dist``. Separate ``e1``/``e2``
    entries override ``e``. A ``preset`` key starts from a named scenario.
    """
    if "preset" in cfg:
        base = canonical_scenarios(cfg["preset"])
        n, p = int(cfg.get("n", base.n)), int(cfg.get("p", base.p))
        base = base.with_size(n, p) if (n, p) != (base.n, base.p) else base
        if "dist" in cfg:
            base = MixtureParams(base.n, base.p, base.mu1, base.mu2, base.e1, base.e2, EntryDistribution.parse(cfg["dist"]))
        return base
    n, p = int(cfg["n"]), int(cfg["p"])
    mu = cfg.get("mu") or {"kind": "first_coord", "value": 0.0}
    if mu.get("kind", "first_coord") != "first_coord":
        raise ValueError(f"unknown mean kind {mu.get('kind')!r}")
    v = float(mu.get("value", 0.0))
    e = cfg.get("e")
    e1 = _cov_from_config(cfg["e1"], p, 1.0) if "e1" in cfg else _cov_from_config(e, p, 1.0)
    e2 = _cov_from_config(cfg["e2"], p, 1.0) if "e2" in cfg else _cov_from_config(e, p, -1.0)
    dist = EntryDistribution.parse(cfg.get("dist", "gaussian"))
    return MixtureParams(n, p, _first_coord(p, -v), _first_coord(p, v), e1, e2, dist)

"""Limiting spectrum of the null kernel and empirical spectral tools.

The Stieltjes transform ``m(z)`` of the limiting eigenvalue distribution solves

    -1/m = z + a1^2 m / (c + a1 m) + (nu - a1^2) m / c,

which, after clearing denominators, is the cubic

    a1 (nu - a1^2) m^3 + c (a1 z + nu) m^2 + c (c z + a1) m + c^2 = 0.

Roots come from companion-matrix eigenvalues, polished by Newton steps. The
branch with ``Im m > 0`` that satisfies ``|m|^2 <= Im m / Im z`` (true of every
Stieltjes transform by Cauchy-Schwarz) is selected.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .kernel import KernelMatrix


class SolverError(RuntimeError):
    """No admissible root of the self-consistent equation was found."""


class AmbiguousRootWarning(RuntimeWarning):
    """Several admissible roots; the one with minimal residual was kept."""


@dataclass(frozen=True)
class LimitParams:
    """``a1``, ``nu`` of the nonlinearity and the ratio ``c = p/n``."""

    a1: float
    nu: float
    c: float

    def __post_init__(self) -> None:
        if not (self.c > 0.0 and math.isfinite(self.c)):
            raise ValueError(f"c must be finite and positive, got {self.c}")
        if self.nu < self.a1**2 - 1e-12 * max(1.0, self.nu):
            raise ValueError(f"need nu >= a1^2, got nu={self.nu}, a1={self.a1}")

    @classmethod
    def from_coeffs(cls, coeffs, c: float) -> "LimitParams":
        nu = max(coeffs.nu, coeffs.a1**2)
        return cls(a1=coeffs.a1, nu=nu, c=c)

    @property
    def second_moment(self) -> float:
        """``int x^2 dmu = nu / c``."""
        return self.nu / self.c


@dataclass
class DensityCurve:
    """Limiting density on a grid together with its support intervals."""

    grid: np.ndarray
    density: np.ndarray
    support: list[tuple[float, float]]
    flagged: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    def mass(self) -> float:
        return float(np.trapezoid(self.density, self.grid))

    def cdf(self, x: np.ndarray) -> np.ndarray:
        """Cumulative mass from the left end of the grid (trapezoid rule)."""
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (self.density[1:] + self.density[:-1]) * np.diff(self.grid))])
        return np.interp(x, self.grid, cum)


# ----------------------------------------------------------------------------
# the cubic and its roots
# ----------------------------------------------------------------------------


def _poly_coeffs(z: np.ndarray, lp: LimitParams) -> list[np.ndarray]:
    """Coefficients from highest degree down, with vanishing leaders dropped."""
    a1, nu, c = lp.a1, lp.nu, lp.c
    ones = np.ones_like(z)
    coeffs = [a1 * (nu - a1 * a1) * ones, c * (a1 * z + nu), c * (c * z + a1), c * c * ones]
    scale = c * (abs(a1) + nu) + c * (c + abs(a1)) + c * c
    while len(coeffs) > 2 and np.all(np.abs(coeffs[0]) <= 1e-14 * scale * np.maximum(1.0, np.abs(z))):
        coeffs = coeffs[1:]
    return coeffs


def _all_roots(coeffs: list[np.ndarray]) -> np.ndarray:
    """Roots of a batch of polynomials, shape ``(N, degree)``."""
    deg = len(coeffs) - 1
    lead = coeffs[0]
    N = lead.shape[0]
    if deg == 1:
        return (-coeffs[1] / lead)[:, None]
    comp = np.zeros((N, deg, deg), dtype=np.complex128)
    for k in range(deg):
        comp[:, 0, k] = -coeffs[k + 1] / lead
    for k in range(1, deg):
        comp[:, k, k - 1] = 1.0
    roots = np.linalg.eigvals(comp)
    # Newton polishing on the polynomial itself
    for _ in range(3):
        P = np.zeros_like(roots)
        dP = np.zeros_like(roots)
        for co in coeffs:
            dP = dP * roots + P
            P = P * roots + co[:, None]
        ok = np.abs(dP) > 0
        step = np.where(ok, P / np.where(ok, dP, 1.0), 0.0)
        roots = roots - step
    return roots


def equation_residual(m, z, lp: LimitParams):
    """Absolute residual of the self-consistent equation at ``m``."""
    a1, nu, c = lp.a1, lp.nu, lp.c
    m = np.asarray(m, dtype=np.complex128)
    z = np.asarray(z, dtype=np.complex128)
    return np.abs(-1.0 / m - z - a1 * a1 * m / (c + a1 * m) - (nu - a1 * a1) * m / c)


def _select(roots: np.ndarray, z: np.ndarray, lp: LimitParams, strict: bool) -> tuple[np.ndarray, np.ndarray]:
    N, deg = roots.shape
    zz = np.broadcast_to(z[:, None], roots.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        res = equation_residual(roots, zz, lp)
        res = np.where(np.isfinite(res), res, np.inf)
    im = roots.imag
    im_tol = 1e-13 * np.maximum(1.0, np.abs(roots))
    upper = im > im_tol
    # Cauchy-Schwarz: |m|^2 <= Im m / Im z for any Stieltjes transform
    cs = np.abs(roots) ** 2 <= (im / zz.imag) * (1.0 + 1e-6) + 1e-300
    admissible = upper & cs
    fallback = ~np.any(admissible, axis=1)
    admissible[fallback] = upper[fallback]
    n_adm = admissible.sum(axis=1)
    score = np.where(admissible, res, np.inf)
    pick = np.argmin(score, axis=1)
    m = roots[np.arange(N), pick]
    failed = n_adm == 0
    if np.any(n_adm > 1):
        warnings.warn(f"{int(np.sum(n_adm > 1))} point(s) had several admissible roots; kept minimal residual", AmbiguousRootWarning, stacklevel=3)
    if strict and np.any(failed):
        bad = z[failed][0]
        raise SolverError(f"no root with Im m > 0 at z={bad}; z may be too close to the real axis")
    m = np.where(failed, np.nan + 1j * np.nan, m)
    return m, failed


def stieltjes_solve(z, lp: LimitParams, *, strict: bool = True):
    """Stieltjes transform of the limiting spectral measure at ``z``.

    Parameters
    ----------
    z : complex or array_like of complex
        Points off the real axis. Points in the lower half-plane are solved by
        reflection, ``m(conj z) = conj m(z)``.
    lp : LimitParams
    strict : bool
        Raise :class:`SolverError` on failure instead of returning NaN.

    Returns
    -------
    complex or ndarray
    """
    z_in = np.asarray(z, dtype=np.complex128)
    scalar = z_in.ndim == 0
    z_flat = z_in.reshape(-1)
    if np.any(z_flat.imag == 0.0):
        raise ValueError("z must not lie on the real axis")
    lower = z_flat.imag < 0.0
    zu = np.where(lower, np.conj(z_flat), z_flat)
    roots = _all_roots(_poly_coeffs(zu, lp))
    m, _ = _select(roots, zu, lp, strict)
    m = np.where(lower, np.conj(m), m)
    return complex(m[0]) if scalar else m.reshape(z_in.shape)


def semicircle_stieltjes(z, lp: LimitParams):
    """Closed form for ``a1 = 0``: ``m = c (-z + sqrt(z^2 - 4 nu/c)) / (2 nu)``
    on the branch with ``Im m > 0``."""
    z = np.asarray(z, dtype=np.complex128)
    s = np.sqrt(z * z - 4.0 * lp.nu / lp.c)
    m1 = lp.c * (-z + s) / (2.0 * lp.nu)
    m2 = lp.c * (-z - s) / (2.0 * lp.nu)
    out = np.where(m1.imag * np.sign(z.imag) > 0, m1, m2)
    return complex(out) if out.ndim == 0 else out


# ----------------------------------------------------------------------------
# density and support
# ----------------------------------------------------------------------------


def _in_support(x: np.ndarray, lp: LimitParams) -> np.ndarray:
    """True where the real-coefficient equation at ``z = x`` has non-real roots,
    i.e. where the limiting density is positive."""
    x = np.asarray(x, dtype=np.float64)
    coeffs = [np.real(co) for co in _poly_coeffs(x.astype(np.complex128), lp)]
    if len(coeffs) == 4:
        a, b, c, d = coeffs
        disc = 18 * a * b * c * d - 4 * b**3 * d + b * b * c * c - 4 * a * c**3 - 27 * a * a * d * d
        return disc < 0
    if len(coeffs) == 3:
        a, b, c = coeffs
        return b * b - 4 * a * c < 0
    return np.zeros(x.shape, dtype=bool)


def _search_radius(lp: LimitParams) -> float:
    return abs(lp.a1) * (1.0 + 1.0 / math.sqrt(lp.c)) ** 2 + 4.0 * math.sqrt(lp.nu / lp.c) + 1.0


def _bisect_edge(lo: float, hi: float, lp: LimitParams, inside_at_lo: bool, iters: int = 60) -> float:
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if bool(_in_support(np.array([mid]), lp)[0]) == inside_at_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def limiting_support(lp: LimitParams, resolution: int = 20001) -> list[tuple[float, float]]:
    """Support intervals of the limiting measure.

    The real line is scanned for points where the equation admits non-real
    roots; each transition is refined by bisection.
    """
    if lp.nu == 0.0:
        return [(0.0, 0.0)]
    R = _search_radius(lp)
    for _ in range(8):
        x = np.linspace(-R, R, resolution)
        ins = _in_support(x, lp)
        if not (ins[0] or ins[-1]):
            break
        R *= 2.0
    intervals: list[tuple[float, float]] = []
    change = np.flatnonzero(np.diff(ins.astype(np.int8)))
    start = None
    for k in change:
        edge = _bisect_edge(x[k], x[k + 1], lp, bool(ins[k]))
        if not ins[k]:
            start = float(edge)
        else:
            intervals.append((start, float(edge)))
            start = None
    return intervals


def default_grid(support: list[tuple[float, float]], points: int = 4001, pad: float = 0.05) -> np.ndarray:
    """Uniform grid over the support hull padded by ``pad`` of its width, with
    the exact edges inserted."""
    lo, hi = support[0][0], support[-1][1]
    w = max(hi - lo, 1e-12)
    g = np.linspace(lo - pad * w, hi + pad * w, points)
    edges = np.array([e for iv in support for e in iv])
    return np.unique(np.concatenate([g, edges]))


def limiting_density(lp: LimitParams, grid=None, epsilon: float = 1e-6) -> DensityCurve:
    """Density ``Im m(x + i epsilon) / pi`` on ``grid`` and the support.

    The support is the set where the density is positive in the limit
    ``epsilon -> 0`` (see :func:`limiting_support`). Points where the solver
    fails are flagged and given zero density.
    """
    if not epsilon > 0.0:
        raise ValueError("epsilon must be positive")
    support = limiting_support(lp)
    grid = default_grid(support) if grid is None else np.asarray(grid, dtype=np.float64)
    if np.any(np.diff(grid) < 0):
        raise ValueError("grid must be sorted")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AmbiguousRootWarning)
        m = stieltjes_solve(grid + 1j * epsilon, lp, strict=False)
    flagged = ~np.isfinite(m)
    dens = np.where(flagged, 0.0, np.maximum(np.imag(m), 0.0) / math.pi)
    return DensityCurve(grid=grid, density=dens, support=support, flagged=flagged)


# ----------------------------------------------------------------------------
# empirical side
# ----------------------------------------------------------------------------


def empirical_esd(K) -> np.ndarray:
    """All eigenvalues of a symmetric kernel in ascending order."""
    data = K.data if isinstance(K, KernelMatrix) else np.asarray(K, dtype=np.float64)
    if not np.all(np.isfinite(data)):
        raise ValueError("kernel has non-finite entries")
    return scipy.linalg.eigvalsh(data, check_finite=False)


def spike_mask(eigs: np.ndarray, support: list[tuple[float, float]], margin: float = 0.05) -> np.ndarray:
    """Boolean mask (aligned with ``eigs``) of isolated eigenvalues.

    An eigenvalue is a spike when it lies outside every support interval
    inflated by ``delta = margin * (hull width)`` and is separated from the
    bulk by a gap larger than ``delta``. The bulk is grown outward from the
    inflated support through chains of consecutive eigenvalues spaced less
    than ``delta`` apart, so a finite-size tail trailing off the edge is not
    mistaken for isolated eigenvalues.
    """
    eigs = np.asarray(eigs, dtype=np.float64)
    if not support:
        raise ValueError("empty support")
    lo, hi = support[0][0], support[-1][1]
    delta = margin * max(hi - lo, 1e-12)
    order = np.argsort(eigs, kind="stable")
    s = eigs[order]
    bulk = np.zeros(s.size, dtype=bool)
    for a, b in support:
        bulk |= (s >= a - delta) & (s <= b + delta)
    for k in range(1, s.size):
        if bulk[k - 1] and not bulk[k] and s[k] - s[k - 1] < delta:
            bulk[k] = True
    for k in range(s.size - 2, -1, -1):
        if bulk[k + 1] and not bulk[k] and s[k + 1] - s[k] < delta:
            bulk[k] = True
    mask = np.empty(s.size, dtype=bool)
    mask[order] = ~bulk
    return mask


def detect_spikes(eigs, support: list[tuple[float, float]], margin: float = 0.05) -> np.ndarray:
    """Isolated eigenvalues in ascending order (see :func:`spike_mask`)."""
    eigs = np.asarray(eigs, dtype=np.float64)
    return np.sort(eigs[spike_mask(eigs, support, margin)])


def esd_distance(eigs, curve: DensityCurve, bins: int = 50) -> float:
    """L1 distance between the empirical histogram and the limiting law.

    Bins split the support hull evenly. Spikes are dropped, and bulk
    eigenvalues slightly outside the hull are counted in the end bins. The
    limiting mass per bin is the integral of ``curve`` over that bin.
    """
    eigs = np.asarray(eigs, dtype=np.float64)
    if eigs.size == 0:
        raise ValueError("no eigenvalues")
    if not curve.support:
        raise ValueError("empty support")
    lo, hi = curve.support[0][0], curve.support[-1][1]
    bulk = eigs[~spike_mask(eigs, curve.support)]
    edges = np.linspace(lo, hi, bins + 1)
    counts, _ = np.histogram(np.clip(bulk, lo, hi), bins=edges)
    emp = counts / max(bulk.size, 1)
    theo = np.diff(curve.cdf(edges))
    return float(np.sum(np.abs(emp - theo)))


def histogram_distance(eigs_a, eigs_b, support: list[tuple[float, float]], bins: int = 50) -> float:
    """L1 distance between two bulk histograms on the same support bins."""
    lo, hi = support[0][0], support[-1][1]
    edges = np.linspace(lo, hi, bins + 1)
    out = []
    for e in (eigs_a, eigs_b):
        e = np.asarray(e, dtype=np.float64)
        bulk = e[~spike_mask(e, support)]
        counts, _ = np.histogram(np.clip(bulk, lo, hi), bins=edges)
        out.append(counts / max(bulk.size, 1))
    return float(np.sum(np.abs(out[0] - out[1])))


def estimate_edges(eigs, support: list[tuple[float, float]], m: int | None = None) -> tuple[float, float]:
    """Extrapolated bulk edges from the outermost bulk eigenvalues.

    Near a square-root edge ``E`` the ``k``-th outermost eigenvalue sits at
    ``E - b ((k - 1/2)/n)^{2/3}``. Fitting this law by least squares over the
    ``m`` outermost bulk eigenvalues (default ``ceil(n/100)``) removes most of
    the finite-``n`` shortfall of the raw extreme eigenvalues.
    """
    eigs = np.sort(np.asarray(eigs, dtype=np.float64))
    bulk = eigs[~spike_mask(eigs, support)]
    n = bulk.size
    m = max(3, math.ceil(n / 100)) if m is None else m
    u = ((np.arange(1, m + 1) - 0.5) / n) ** (2.0 / 3.0)
    A = np.column_stack([np.ones(m), u])
    top = np.linalg.lstsq(A, bulk[::-1][:m], rcond=None)[0][0]
    bot = np.linalg.lstsq(A, bulk[:m], rcond=None)[0][0]
    return float(bot), float(top)

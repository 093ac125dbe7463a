"""Hermite expansions of kernel nonlinearities against the standard Gaussian.

A nonlinearity ``f`` is summarized by its fingerprint ``(a0, a1, a2, nu)``:

* ``a0 = E f(xi)``, ``a1 = E[xi f(xi)]``, ``a2 = E[(xi^2 - 1) f(xi)] / sqrt(2)``
* ``nu = Var f(xi)``

with ``xi ~ N(0, 1)``. The orthonormal polynomials are ``P_l = He_l / sqrt(l!)``
where ``He_l`` are the monic probabilists' Hermite polynomials.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss

_SQRT2PI = math.sqrt(2.0 * math.pi)
QUAD_HALF_WIDTH = 12.0
MAX_PANEL_WIDTH = 1.5
CONVERGENCE_TOL = 1e-6


class NonIntegrableError(ValueError):
    """Quadrature of ``f`` did not settle between refinement levels."""


class InfeasibleCoefficientsError(ValueError):
    """Coefficients violate ``nu >= a1^2 + a2^2``."""


@dataclass(frozen=True)
class HermiteCoeffs:
    """Fingerprint ``(a0, a1, a2, nu)`` of a nonlinearity."""

    a0: float
    a1: float
    a2: float
    nu: float

    def __post_init__(self) -> None:
        tol = 1e-10 * max(1.0, abs(self.nu))
        if self.nu < -tol:
            raise InfeasibleCoefficientsError(f"nu must be non-negative, got {self.nu}")
        if self.nu < self.a1**2 + self.a2**2 - tol:
            raise InfeasibleCoefficientsError(
                f"nu={self.nu} is below a1^2 + a2^2 = {self.a1**2 + self.a2**2}"
            )

    def as_dict(self) -> dict[str, float]:
        return {"a0": self.a0, "a1": self.a1, "a2": self.a2, "nu": self.nu}


@dataclass(frozen=True)
class KernelFunc:
    """A scalar nonlinearity with the metadata quadrature needs.

    Attributes
    ----------
    f : callable
        Vectorized evaluator ``R -> R``.
    breakpoints : tuple of float
        Sorted locations of jumps or kinks.
    tag : {"smooth", "piecewise", "polynomial"}
    poly : tuple of float, optional
        Monomial coefficients in ascending order for polynomial tags.
    name : str
    """

    f: Callable[[np.ndarray], np.ndarray]
    breakpoints: tuple[float, ...] = ()
    tag: str = "smooth"
    poly: tuple[float, ...] | None = None
    name: str = "f"

    def __post_init__(self) -> None:
        if self.tag not in ("smooth", "piecewise", "polynomial"):
            raise ValueError(f"unknown tag {self.tag!r}")
        object.__setattr__(self, "breakpoints", tuple(sorted(float(b) for b in self.breakpoints)))

    def __call__(self, x):
        return self.f(x)

    @classmethod
    def polynomial(cls, coeffs: Sequence[float], name: str = "poly") -> "KernelFunc":
        c = tuple(float(v) for v in coeffs)
        return cls(f=lambda x, c=c: np.polynomial.polynomial.polyval(x, c), tag="polynomial", poly=c, name=name)


@dataclass(frozen=True)
class CubicFunc:
    """``f(x) = c3 x^3 + c2 x^2 + c1 x - c2``, which always has ``a0 = 0``."""

    c1: float
    c2: float
    c3: float

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        return ((self.c3 * x + self.c2) * x + self.c1) * x - self.c2

    def to_kernel_func(self) -> KernelFunc:
        return KernelFunc.polynomial([-self.c2, self.c1, self.c2, self.c3], name="cubic")


# ----------------------------------------------------------------------------
# polynomials
# ----------------------------------------------------------------------------


def double_factorial(k: int) -> int:
    """``k!! = k (k-2) (k-4) ...`` with ``0!! = (-1)!! = 1``."""
    if k < -1:
        raise ValueError("double factorial is defined for k >= -1")
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


def hermite_orthonormal_eval(l: int, x):
    """Evaluate ``P_l(x) = He_l(x) / sqrt(l!)``.

    Parameters
    ----------
    l : int
        Degree, ``0 <= l <= 64``.
    x : float or array_like

    Returns
    -------
    float or ndarray
    """
    if l < 0 or l > 64:
        raise ValueError(f"degree must lie in [0, 64], got {l}")
    x = np.asarray(x, dtype=np.float64)
    prev, cur = np.ones_like(x), x.copy()
    if l == 0:
        out = prev
    else:
        for k in range(1, l):
            prev, cur = cur, x * cur - k * prev
        out = cur / math.sqrt(math.factorial(l))
    return out if out.ndim else float(out)


def hermite_monomial_coeffs(kappa: int) -> list[int]:
    """Exact integer coefficients ``c_{kappa,l}`` of ``He_kappa(x) = sum_l c_{kappa,l} x^l``.

    Uses ``c_{k+1,l} = c_{k,l-1} - k c_{k-1,l}`` from ``c_{0,0} = 1``,
    ``c_{1,0} = 0``, ``c_{1,1} = 1``.
    """
    if kappa < 0 or kappa > 30:
        raise ValueError(f"kappa must lie in [0, 30], got {kappa}")
    prev: list[int] = [1]
    if kappa == 0:
        return prev
    cur: list[int] = [0, 1]
    for k in range(1, kappa):
        nxt = [0] * (k + 2)
        for l in range(k + 2):
            left = cur[l - 1] if 1 <= l <= k + 1 else 0
            down = prev[l] if l < len(prev) else 0
            nxt[l] = left - k * down
        prev, cur = cur, nxt
    return cur


# ----------------------------------------------------------------------------
# quadrature
# ----------------------------------------------------------------------------


def _gauss_hermite_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = hermegauss(order)
    return x, w / _SQRT2PI


def _composite_rule(breakpoints: Sequence[float], order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre panels on ``[-12, 12]`` split at the breakpoints, with the
    Gaussian density folded into the weights."""
    cuts = [-QUAD_HALF_WIDTH] + [b for b in breakpoints if -QUAD_HALF_WIDTH < b < QUAD_HALF_WIDTH] + [QUAD_HALF_WIDTH]
    edges: list[float] = [cuts[0]]
    for a, b in zip(cuts[:-1], cuts[1:]):
        m = max(1, math.ceil((b - a) / MAX_PANEL_WIDTH))
        edges.extend(np.linspace(a, b, m + 1)[1:].tolist())
    t, wt = leggauss(max(8, order // 4))
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        half, mid = 0.5 * (b - a), 0.5 * (b + a)
        x = mid + half * t
        xs.append(x)
        ws.append(half * wt * np.exp(-0.5 * x * x) / _SQRT2PI)
    return np.concatenate(xs), np.concatenate(ws)


def quadrature_rule(f: KernelFunc, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights integrating against the standard Gaussian for ``f``."""
    if f.breakpoints:
        return _composite_rule(f.breakpoints, order)
    if f.tag == "polynomial" and f.poly is not None:
        order = max(order, len(f.poly) + 3)
    return _gauss_hermite_rule(order)


def gaussian_expectation(g: Callable[[np.ndarray], np.ndarray], f: KernelFunc, order: int = 128) -> float:
    """``E g(xi)`` using the rule suited to ``f``'s breakpoints."""
    x, w = quadrature_rule(f, order)
    return float(np.dot(w, g(x)))


def _raw_coeffs(f: KernelFunc, order: int) -> np.ndarray:
    x, w = quadrature_rule(f, order)
    fx = np.asarray(f(x), dtype=np.float64)
    if not np.all(np.isfinite(fx)):
        raise NonIntegrableError(f"{f.name} is not finite on the quadrature nodes")
    with np.errstate(over="ignore", invalid="ignore"):
        a0 = np.dot(w, fx)
        a1 = np.dot(w, x * fx)
        a2 = np.dot(w, (x * x - 1.0) * fx) / math.sqrt(2.0)
        nu = np.dot(w, (fx - a0) ** 2)
    out = np.array([a0, a1, a2, nu])
    if not np.all(np.isfinite(out)):
        raise NonIntegrableError(f"{f.name} has non-finite Gaussian moments")
    return out


def compute_coeffs(f: KernelFunc, order: int = 128) -> HermiteCoeffs:
    """Fingerprint ``(a0, a1, a2, nu)`` of ``f`` by Gaussian quadrature.

    Smooth functions use Gauss-Hermite with ``order`` nodes. Functions with
    breakpoints use composite Gauss-Legendre panels split at each breakpoint.
    The rule is also evaluated at ``2 * order``; a disagreement above ``1e-6``
    is treated as divergence.

    Raises
    ------
    NonIntegrableError
        If the two refinement levels disagree or ``f`` is not finite.
    """
    if order < 16:
        raise ValueError("quadrature order must be at least 16")
    lo = _raw_coeffs(f, order)
    hi = _raw_coeffs(f, 2 * order)
    scale = max(1.0, float(np.max(np.abs(hi))))
    if np.max(np.abs(hi - lo)) > CONVERGENCE_TOL * scale:
        raise NonIntegrableError(f"quadrature for {f.name} did not converge: {lo} vs {hi}")
    a0, a1, a2, nu = (float(v) for v in hi)
    floor = a1 * a1 + a2 * a2
    if floor - 1e-12 * max(1.0, nu) <= nu < floor:
        # Bessel's inequality holds exactly; absorb rounding below it.
        nu = floor
    return HermiteCoeffs(a0, a1, a2, nu)


def cubic_equivalent(coeffs: HermiteCoeffs) -> CubicFunc:
    """Cubic ``c3 x^3 + c2 x^2 + c1 x - c2`` sharing ``(a1, a2, nu)`` with ``coeffs``.

    ``c2 = a2/sqrt(2)``, ``c3 = sqrt((nu - a1^2 - a2^2)/6)``, ``c1 = a1 - 3 c3``.
    """
    gap = coeffs.nu - coeffs.a1**2 - coeffs.a2**2
    if gap < -1e-12:
        raise InfeasibleCoefficientsError(f"nu - a1^2 - a2^2 = {gap} < 0")
    c3 = math.sqrt(max(gap, 0.0) / 6.0)
    return CubicFunc(c1=coeffs.a1 - 3.0 * c3, c2=coeffs.a2 / math.sqrt(2.0), c3=c3)


def center(f: KernelFunc, order: int = 128) -> KernelFunc:
    """Return ``x -> f(x) - E f(xi)``."""
    co = compute_coeffs(f, order)
    a0 = co.a0
    if abs(a0) <= 1e-13 * max(1.0, math.sqrt(co.nu)):
        # already centered up to quadrature rounding
        return f
    poly = None
    if f.poly is not None:
        poly = (f.poly[0] - a0,) + tuple(f.poly[1:])
    g = f.f
    return KernelFunc(
        f=lambda x, g=g, a0=a0: np.asarray(g(x), dtype=np.float64) - a0,
        breakpoints=f.breakpoints,
        tag=f.tag,
        poly=poly,
        name=f"centered {f.name}",
    )


# ----------------------------------------------------------------------------
# builtins
# ----------------------------------------------------------------------------


def sign_func() -> KernelFunc:
    return KernelFunc(f=lambda x: np.sign(np.asarray(x, dtype=np.float64)), breakpoints=(0.0,), tag="piecewise", name="sign")


def relu_func() -> KernelFunc:
    return KernelFunc(f=lambda x: np.maximum(np.asarray(x, dtype=np.float64), 0.0), breakpoints=(0.0,), tag="piecewise", name="relu")


def hermite_func(l: int) -> KernelFunc:
    """Orthonormal ``P_l`` as a polynomial kernel function."""
    c = hermite_monomial_coeffs(l)
    norm = math.sqrt(math.factorial(l))
    return KernelFunc.polynomial([v / norm for v in c], name=f"P{l}")


def parse_function(spec: str) -> KernelFunc:
    """Build a kernel function from a short name.

    Accepted forms: ``sign``, ``relu``, ``relu_centered``, ``linear``,
    ``hermite:l`` (also ``P1``, ``P2``, ...), ``cubic:c1,c2,c3`` and
    ``piecewise:t,s_minus,s_plus``.
    """
    name, _, arg = spec.strip().partition(":")
    key = name.lower()
    if key == "sign":
        return sign_func()
    if key == "relu":
        return relu_func()
    if key in ("relu_centered", "centered_relu"):
        return center(relu_func())
    if key in ("linear", "identity"):
        return KernelFunc.polynomial([0.0, 1.0], name="linear")
    if key == "hermite":
        return hermite_func(int(arg))
    if len(key) >= 2 and key[0] == "p" and key[1:].isdigit():
        return hermite_func(int(key[1:]))
    if key == "cubic":
        c1, c2, c3 = (float(v) for v in arg.split(","))
        return CubicFunc(c1, c2, c3).to_kernel_func()
    if key == "piecewise":
        from .prototype import PiecewiseProto

        t, sm, sp = (float(v) for v in arg.split(","))
        return PiecewiseProto(t=t, s_minus=sm, s_plus=sp).to_kernel_func()
    raise ValueError(f"unknown function {spec!r}")

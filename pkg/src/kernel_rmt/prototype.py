"""Three-level piecewise-constant kernel functions and their inverse design.

The family is

    f(x) = -r t   if x <= sqrt(2) s_minus
            0     if sqrt(2) s_minus < x <= sqrt(2) s_plus
            t     if x > sqrt(2) s_plus

with ``r = (1 - erf s_plus) / (1 + erf s_minus)`` so that ``E f(xi) = 0``.
Its Hermite fingerprint has a closed form, which :func:`design_piecewise`
inverts to match a target ``(a1, a2, nu)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .hermite import HermiteCoeffs, KernelFunc

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)

DESIGN_TOL = 1e-10
PROBE_TOL = 1e-6
GRID_POINTS = 13
GRID_RANGE = 3.0
S_CLIP = 6.0


class InfeasibleDesignError(ValueError):
    """No member of the family matches the target.

    Attributes
    ----------
    best_residual : float
        Smallest componentwise coefficient mismatch found.
    best_params : dict
        ``t``, ``s_minus``, ``s_plus`` and ``sign_flip`` of the best candidate.
    """

    def __init__(self, message: str, best_residual: float, best_params: dict | None):
        super().__init__(message)
        self.best_residual = best_residual
        self.best_params = best_params


@dataclass(frozen=True)
class PiecewiseProto:
    """Ternary prototype with levels ``(-r t, 0, t)``, negated when ``sign_flip``."""

    t: float
    s_minus: float
    s_plus: float
    sign_flip: bool = False

    def __post_init__(self) -> None:
        if not self.t > 0.0:
            raise ValueError(f"t must be positive, got {self.t}")
        if self.s_minus > self.s_plus:
            raise ValueError(f"need s_minus <= s_plus, got {self.s_minus} > {self.s_plus}")
        if not self.r > 0.0:
            raise ValueError("r underflowed to zero; s_plus is too large")

    @property
    def r(self) -> float:
        return float(erfc(self.s_plus) / erfc(-self.s_minus))

    def thresholds(self) -> tuple[float, float]:
        """``(sqrt(2) s_minus, sqrt(2) s_plus)``."""
        return _SQRT2 * self.s_minus, _SQRT2 * self.s_plus

    def levels(self) -> tuple[float, float]:
        """Values taken below the lower and above the upper threshold."""
        neg, pos = -(self.r * self.t), self.t
        return (-neg, -pos) if self.sign_flip else (neg, pos)

    def to_kernel_func(self) -> KernelFunc:
        return KernelFunc(
            f=lambda x, proto=self: eval_piecewise(proto, x),
            breakpoints=self.thresholds(),
            tag="piecewise",
            name=f"piecewise(t={self.t:.6g}, s-={self.s_minus:.6g}, s+={self.s_plus:.6g})",
        )

    def as_dict(self) -> dict:
        return {"t": self.t, "s_minus": self.s_minus, "s_plus": self.s_plus, "r": self.r, "sign_flip": self.sign_flip}


def eval_piecewise(proto: PiecewiseProto, x):
    """Evaluate the prototype; the lower band is closed and the upper band open."""
    x = np.asarray(x, dtype=np.float64)
    lo, hi = proto.thresholds()
    neg, pos = proto.levels()
    out = np.where(x <= lo, neg, np.where(x > hi, pos, 0.0))
    return out if out.ndim else float(out)


def _forward(t: float, s_minus: float, s_plus: float) -> tuple[float, float, float]:
    em, ep = erfc(-s_minus), erfc(s_plus)
    r = ep / em
    gp, gm = math.exp(-s_plus * s_plus), math.exp(-s_minus * s_minus)
    a1 = t / _SQRT2PI * (gp + r * gm)
    a2 = t / _SQRT2PI * (s_plus * gp + r * s_minus * gm)
    nu = 0.5 * t * t * ep * (1.0 + r)
    return float(a1), float(a2), float(nu)


def coeffs_of_piecewise(proto: PiecewiseProto) -> HermiteCoeffs:
    """Closed-form fingerprint of the prototype.

    ``a1 = t/sqrt(2 pi) (exp(-s+^2) + r exp(-s-^2))``,
    ``a2 = t/sqrt(2 pi) (s+ exp(-s+^2) + r s- exp(-s-^2))``,
    ``nu = t^2/2 (1 - erf s+)(1 + r)`` and ``a0 = 0``; ``sign_flip`` negates
    ``a1`` and ``a2``.
    """
    a1, a2, nu = _forward(proto.t, proto.s_minus, proto.s_plus)
    if proto.sign_flip:
        a1, a2 = -a1, -a2
    return HermiteCoeffs(0.0, a1, a2, nu)


# ----------------------------------------------------------------------------
# inverse design
# ----------------------------------------------------------------------------


def _t_for(nu: float, s_minus: float, s_plus: float) -> float:
    ep = erfc(s_plus)
    r = ep / erfc(-s_minus)
    return math.sqrt(2.0 * nu / (ep * (1.0 + r)))


def _residual(s: np.ndarray, a1: float, a2: float, nu: float) -> np.ndarray:
    t = _t_for(nu, s[0], s[1])
    b1, b2, _ = _forward(t, s[0], s[1])
    return np.array([b1 - a1, b2 - a2])


def _newton(s0: np.ndarray, a1: float, a2: float, nu: float, max_iter: int = 100) -> np.ndarray:
    s = s0.copy()
    F = _residual(s, a1, a2, nu)
    h = 1e-7
    for _ in range(max_iter):
        fnorm = np.max(np.abs(F))
        if fnorm < 1e-14:
            break
        J = np.empty((2, 2))
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            J[:, k] = (_residual(s + e, a1, a2, nu) - _residual(s - e, a1, a2, nu)) / (2 * h)
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(J, -F, rcond=None)[0]
        lam = 1.0
        improved = False
        for _ in range(40):
            trial = np.clip(s + lam * step, -S_CLIP, S_CLIP)
            Ft = _residual(trial, a1, a2, nu)
            if np.all(np.isfinite(Ft)) and np.max(np.abs(Ft)) < fnorm:
                s, F = trial, Ft
                improved = True
                break
            lam *= 0.5
        if not improved:
            break
    return s


@dataclass
class DesignResult:
    proto: PiecewiseProto | None
    residual: float
    params: dict | None
    starts_tried: int


def _multistart(target: HermiteCoeffs, tol: float) -> DesignResult:
    flip = bool(target.a1 < 0.0)
    a1, a2, nu = (-target.a1, -target.a2, target.nu) if flip else (target.a1, target.a2, target.nu)
    grid = np.linspace(-GRID_RANGE, GRID_RANGE, GRID_POINTS)
    starts = [np.array([sm, sp]) for sm in grid for sp in grid if sm <= sp]
    if not (nu > 0.0 and a1 > 0.0):
        # every member has a1 > 0 and nu > 0, so such targets are out of reach
        return DesignResult(None, math.inf, None, 0)

    def score(s: np.ndarray) -> float:
        return float(np.max(np.abs(_residual(s, a1, a2, nu))))

    starts.sort(key=score)
    best = DesignResult(None, math.inf, None, 0)
    for count, s0 in enumerate(starts, start=1):
        s = _newton(s0, a1, a2, nu)
        sm, sp = float(s[0]), float(s[1])
        if sm > sp:
            continue
        try:
            proto = PiecewiseProto(t=_t_for(nu, sm, sp), s_minus=sm, s_plus=sp, sign_flip=flip)
        except ValueError:
            continue
        got = coeffs_of_piecewise(proto)
        res = max(abs(got.a1 - target.a1), abs(got.a2 - target.a2), abs(got.nu - target.nu))
        if res < best.residual:
            best = DesignResult(proto, float(res), proto.as_dict(), count)
        if res < tol:
            best.starts_tried = count
            return best
    best.starts_tried = len(starts)
    return best


def design_piecewise(target: HermiteCoeffs) -> PiecewiseProto:
    """Find a prototype whose fingerprint matches ``target`` to ``1e-10``.

    ``t`` is eliminated through ``nu``; a damped Newton iteration on
    ``(s_minus, s_plus)`` with a finite-difference Jacobian then matches
    ``(a1, a2)``, restarted from a 13 x 13 grid on ``[-3, 3]^2``. Negative
    ``a1`` is reached through ``sign_flip``.

    Raises
    ------
    InfeasibleDesignError
        When no start reaches the tolerance; carries the best candidate.
    """
    if abs(target.a0) > 1e-12:
        raise ValueError("target must be centered (a0 = 0)")
    result = _multistart(target, DESIGN_TOL)
    if result.proto is None or result.residual >= DESIGN_TOL:
        raise InfeasibleDesignError(
            f"no prototype matches target {target.as_dict()} (best residual {result.residual:.3e})",
            result.residual,
            result.params,
        )
    return result.proto


@dataclass
class FeasibilityReport:
    """Outcome of :func:`feasibility` with the best probe candidate."""

    feasible: bool
    reason: str
    best_residual: float
    best_params: dict | None

    def __bool__(self) -> bool:
        return self.feasible


def feasibility(target: HermiteCoeffs) -> FeasibilityReport:
    """Decide whether the family can reach ``target``.

    The necessary condition ``nu >= a1^2 + a2^2`` is checked first, then a
    multistart probe must reach a residual below ``1e-6``.
    """
    if target.nu + 1e-12 < target.a1**2 + target.a2**2:
        return FeasibilityReport(False, "nu < a1^2 + a2^2", math.inf, None)
    result = _multistart(target, PROBE_TOL)
    if result.proto is None and target.a1 == 0.0:
        return FeasibilityReport(False, "every prototype has a1 != 0", math.inf, None)
    if result.residual < PROBE_TOL:
        return FeasibilityReport(True, "probe converged", result.residual, result.params)
    return FeasibilityReport(False, "probe did not converge", result.residual, result.params)

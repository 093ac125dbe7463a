from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kernel_rmt.hermite import KernelFunc, compute_coeffs, parse_function
from kernel_rmt.kernel import KernelMatrix, build_null_kernel
from kernel_rmt.model import Gaussian, sample_noise
from kernel_rmt.spectrum import (
    AmbiguousRootWarning,
    DensityCurve,
    LimitParams,
    SolverError,
    detect_spikes,
    empirical_esd,
    equation_residual,
    esd_distance,
    estimate_edges,
    histogram_distance,
    limiting_density,
    limiting_support,
    semicircle_stieltjes,
    spike_mask,
    stieltjes_solve,
)


def _quiet_solve(z, lp, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AmbiguousRootWarning)
        return stieltjes_solve(z, lp, **kw)


def test_limit_params_validation():
    with pytest.raises(ValueError):
        LimitParams(1.0, 0.5, 1.0)
    with pytest.raises(ValueError):
        LimitParams(0.0, 1.0, 0.0)
    assert LimitParams(0.0, 2.0, 4.0).second_moment == 0.5


def test_semicircle_closed_form_agreement():
    lp = LimitParams(0.0, 1.0, 4.0)
    rng = np.random.default_rng(0)
    z = rng.uniform(-2, 2, 100) + 1j * rng.uniform(1e-4, 1, 100)
    m = stieltjes_solve(z, lp)
    np.testing.assert_allclose(m, semicircle_stieltjes(z, lp), atol=1e-12, rtol=0)


def test_semicircle_density_at_zero():
    lp = LimitParams(0.0, 1.0, 4.0)
    m = stieltjes_solve(1e-6j, lp)
    assert m.imag / math.pi == pytest.approx(2 / math.pi, abs=1e-6)


def test_large_z_asymptotics():
    lp = LimitParams(0.6, 1.0, 0.5)
    for y in (1e3, 1e5):
        z = 1j * y
        assert abs(_quiet_solve(z, lp) + 1 / z) < 10 / y**2


def test_reflection_to_lower_half_plane():
    lp = LimitParams(0.7, 1.3, 2.0)
    z = np.array([0.3 + 0.2j, -1.1 + 0.01j])
    np.testing.assert_allclose(_quiet_solve(np.conj(z), lp), np.conj(_quiet_solve(z, lp)), atol=1e-14)


def test_real_axis_strict_mode_raises():
    with pytest.raises((SolverError, ValueError)):
        stieltjes_solve(np.array([0.1 + 0.0j]), LimitParams(0.0, 1.0, 4.0))


def test_semicircle_support_and_mass():
    curve = limiting_density(LimitParams(0.0, 1.0, 4.0))
    (lo, hi), = curve.support
    assert lo == pytest.approx(-1.0, abs=1e-9) and hi == pytest.approx(1.0, abs=1e-9)
    assert curve.mass() == pytest.approx(1.0, abs=1e-2)
    assert np.all(curve.density >= 0.0)
    assert np.max(curve.density) == pytest.approx(2 / math.pi, abs=1e-4)


def test_sign_kernel_support_reference_values():
    curve = limiting_density(LimitParams(math.sqrt(2 / math.pi), 1.0, 0.25))
    lo, hi = curve.support[0][0], curve.support[-1][1]
    assert abs(lo + 3.07) <= 0.1 and abs(hi - 6.75) <= 0.1
    assert curve.mass() == pytest.approx(1.0, abs=1e-2)


def test_second_moment_matches_theory():
    lp = LimitParams(math.sqrt(2 / math.pi), 1.0, 0.25)
    curve = limiting_density(lp, grid=np.linspace(-3.2, 7.0, 40001))
    m2 = np.trapezoid(curve.grid**2 * curve.density, curve.grid)
    assert m2 == pytest.approx(lp.second_moment, rel=1e-3)


def test_second_moment_against_monte_carlo_trace():
    n, p = 2048, 1024
    f = KernelFunc(np.tanh, name="tanh")
    co = compute_coeffs(f)
    K = build_null_kernel(sample_noise(n, p, Gaussian(), 1), f)
    mc = float(np.sum(K.data**2) / n)
    assert mc == pytest.approx(LimitParams.from_coeffs(co, p / n).second_moment, rel=0.05)


def test_empirical_esd_trivial_cases():
    np.testing.assert_array_equal(empirical_esd(KernelMatrix(np.zeros((4, 4)))), np.zeros(4))
    np.testing.assert_allclose(empirical_esd(np.array([[0.0, 2.0], [2.0, 0.0]])), [-2.0, 2.0])
    with pytest.raises(ValueError):
        empirical_esd(np.array([[0.0, np.nan], [np.nan, 0.0]]))


def test_esd_distance_oracles():
    curve = limiting_density(LimitParams(0.0, 1.0, 4.0))
    rng = np.random.default_rng(2)
    cum = curve.cdf(curve.grid)
    u = rng.uniform(0, cum[-1], 10**5)
    sample = np.interp(u, cum, curve.grid)
    assert esd_distance(sample, curve) < 0.02
    assert esd_distance(np.zeros(1000), curve) > 1.8
    assert esd_distance(sample, curve, bins=1) < 1e-2
    with pytest.raises(ValueError):
        esd_distance(sample, DensityCurve(curve.grid, curve.density, []))


def test_histogram_distance_identity_and_bound():
    support = [(-1.0, 1.0)]
    x = np.linspace(-0.99, 0.99, 500)
    assert histogram_distance(x, x, support) == 0.0
    assert histogram_distance(np.full(10, -0.9), np.full(10, 0.9), support) == pytest.approx(2.0)


def test_spike_detection_rules():
    support = [(-1.0, 1.0)]
    bulk = np.linspace(-1.0, 1.0, 200)
    eigs = np.concatenate([bulk, [1.5, -1.6]])
    np.testing.assert_array_equal(detect_spikes(eigs, support), [-1.6, 1.5])
    # within the 5% margin: not a spike
    assert detect_spikes(np.concatenate([bulk, [1.09]]), support).size == 0
    # a tail trailing off the edge in small steps is absorbed into the bulk
    tail = 1.0 + 0.02 * np.arange(1, 20)
    assert detect_spikes(np.concatenate([bulk, tail]), support).size == 0
    assert spike_mask(eigs, support).sum() == 2


def test_estimate_edges_recovers_semicircle_edge():
    n = 4000
    curve = limiting_density(LimitParams(0.0, 1.0, 4.0))
    cum = curve.cdf(curve.grid)
    u = (np.arange(n) + 0.5) / n * cum[-1]
    eigs = np.interp(u, cum, curve.grid)
    lo, hi = estimate_edges(eigs, curve.support)
    assert abs(lo + 1) < 5e-3 and abs(hi - 1) < 5e-3
    assert hi > eigs[-1] and lo < eigs[0]


def test_null_p1_has_no_spikes():
    n, p = 512, 2048
    f = parse_function("P1")
    support = limiting_density(LimitParams.from_coeffs(compute_coeffs(f), p / n)).support
    clean = sum(detect_spikes(empirical_esd(build_null_kernel(sample_noise(n, p, Gaussian(), s), f)), support).size == 0
                for s in range(5))
    assert clean >= 4


def test_support_for_pure_linear_kernel_is_marchenko_pastur():
    # f(x) = x makes K a sample covariance minus its diagonal, with ratio n/p = 1/c
    c = 2.0
    (lo, hi), = limiting_support(LimitParams(1.0, 1.0, c))
    r = 1.0 / math.sqrt(c)
    assert lo == pytest.approx((1 - r) ** 2 - 1, abs=1e-6)
    assert hi == pytest.approx((1 + r) ** 2 - 1, abs=1e-6)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 5.0), st.floats(0.2, 3.0), st.floats(-1.0, 1.0), st.integers(0, 2**31))
def test_solver_contract_property(c, nu, frac, seed):
    lp = LimitParams(frac * math.sqrt(nu), nu, c)
    rng = np.random.default_rng(seed)
    R = abs(lp.a1) * (1 + 1 / math.sqrt(c)) ** 2 + 3 * math.sqrt(nu / c) + 1
    z = rng.uniform(-R, R, 1000) + 1j * 10 ** rng.uniform(-6, 0, 1000)
    m = _quiet_solve(z, lp)
    assert np.max(equation_residual(m, z, lp)) < 1e-12
    assert np.all(m.imag > 0)
    if lp.a1 == 0.0:
        np.testing.assert_allclose(m, semicircle_stieltjes(z, lp), atol=1e-12, rtol=0)


def test_linear_kernel_with_c_below_one_has_an_atom():
    # nu = a1^2 and p < n: K has n - p eigenvalues equal to -a1, so the
    # density carries only mass c and the remaining 1 - c sits in an atom
    for c in (0.1, 0.5):
        assert limiting_density(LimitParams(1.0, 1.0, c)).mass() == pytest.approx(c, abs=1e-2)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.1, 5.0), st.floats(0.2, 3.0), st.floats(-0.999, 0.999))
def test_density_mass_property(c, nu, frac):
    # |a1| < sqrt(nu): the law is absolutely continuous
    curve = limiting_density(LimitParams(frac * math.sqrt(nu), nu, c))
    assert curve.mass() == pytest.approx(1.0, abs=1e-2)
    for (a, b), (a2, b2) in zip(curve.support, curve.support[1:]):
        assert b < a2

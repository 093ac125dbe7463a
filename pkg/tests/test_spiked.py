from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kernel_rmt.hermite import HermiteCoeffs, KernelFunc, compute_coeffs, parse_function
from kernel_rmt.kernel import build_kernel, build_null_kernel
from kernel_rmt.model import MixtureParams, canonical_scenarios, sample_mixture
from kernel_rmt.spiked import (
    build_monomial_KI,
    build_spike,
    class_stats,
    gaussian_moment_oracle,
    hadamard_bound_check,
    indicator_matrix,
    opnorm_diff,
)


def _sym(n, seed):
    A = np.random.default_rng(seed).standard_normal((n, n))
    return A + A.T


def test_indicator_matrix():
    J = indicator_matrix([1, 2, 2, 1])
    np.testing.assert_array_equal(J, [[1, 0], [0, 1], [0, 1], [1, 0]])
    with pytest.raises(ValueError):
        indicator_matrix([0, 1])


def test_class_stats_for_opposite_isotropic_shifts():
    params = canonical_scenarios("fig2").with_size(8, 1024)
    st_ = class_stats(params, sample_mixture(params, 0).labels)
    np.testing.assert_allclose(st_.T, [[-20.0, 0.0], [0.0, 20.0]], atol=1e-10)
    s = 100.0 / math.sqrt(1024)
    np.testing.assert_allclose(st_.S, [[s, -s], [-s, s]], atol=1e-10)
    assert (st_.n, st_.p) == (8, 1024)
    with pytest.raises(ValueError):
        class_stats(params, [1, 2])


def test_linear_kernel_is_exactly_spiked_off_the_diagonal():
    # for f(x) = x and equal covariances, K - K_N coincides with K_I except
    # on the diagonal, so the residual norm is the largest diagonal entry of K_I
    params = canonical_scenarios("fig1").with_size(200, 100)
    ds = sample_mixture(params, 3)
    f = parse_function("linear")
    K, KN = build_kernel(ds.X, f), build_null_kernel(ds.Z, f)
    spike = build_spike(ds.Z, compute_coeffs(f), class_stats(params, ds.labels))
    expected = np.max(np.abs(np.diag(spike.dense())))
    assert opnorm_diff(K, (KN, spike), tol=1e-12) == pytest.approx(expected, rel=1e-8)


def test_spike_model_factored_forms_agree():
    params = canonical_scenarios("fig2").with_size(120, 512)
    ds = sample_mixture(params, 1)
    spike = build_spike(ds.Z, HermiteCoeffs(0.0, 0.6, 0.4, 1.0), class_stats(params, ds.labels))
    D = spike.dense()
    assert np.allclose(D, D.T, atol=1e-14)
    v = np.random.default_rng(0).standard_normal(spike.n)
    np.testing.assert_allclose(spike.matvec(v), D @ v, rtol=1e-12, atol=1e-12)
    w, V = spike.eigs()
    full = np.linalg.eigvalsh(D)
    assert w.size == 4 and np.linalg.matrix_rank(D, tol=1e-10) <= 4
    np.testing.assert_allclose(np.sort(w)[[0, -1]], full[[0, -1]], atol=1e-10)
    np.testing.assert_allclose(D @ V, V * w, atol=1e-10)


def test_zero_coefficients_give_a_zero_spike():
    params = canonical_scenarios("fig1").with_size(50, 20)
    ds = sample_mixture(params, 0)
    spike = build_spike(ds.Z, HermiteCoeffs(0.0, 0.0, 0.0, 1.0), class_stats(params, ds.labels))
    assert not np.any(spike.dense())
    assert opnorm_diff(spike, np.zeros((50, 50))) == 0.0


def test_opnorm_diff_matches_dense_norm():
    A, B = _sym(150, 0), _sym(150, 1)
    assert opnorm_diff(A, B, tol=1e-12) == pytest.approx(np.linalg.norm(A - B, 2), rel=1e-9)
    C = _sym(150, 2)
    assert opnorm_diff(A, (B, C), tol=1e-12) == pytest.approx(np.linalg.norm(A - B - C, 2), rel=1e-9)


def test_monomial_informative_part_reduces_the_residual():
    params = canonical_scenarios("fig2").with_size(128, 512)
    ds = sample_mixture(params, 0)
    for k in (2, 3):
        f = KernelFunc.polynomial([0.0] * k + [1.0])
        K, KN = build_kernel(ds.X, f), build_null_kernel(ds.Z, f)
        KI = build_monomial_KI(ds.Z, params, ds.labels, k)
        assert np.allclose(KI, KI.T) and not np.any(np.diag(KI))
        assert opnorm_diff(K, (KN, KI)) < opnorm_diff(K, KN)
    with pytest.raises(ValueError):
        build_monomial_KI(ds.Z, params, ds.labels, 7)


def test_moment_oracle_small_run():
    rep = gaussian_moment_oracle(4, 20_000, 1024, seed=3)
    assert rep.k == 4 and len(rep.checks) == 5
    assert rep.max_abs_z() <= 4.0
    with pytest.raises(ValueError):
        gaussian_moment_oracle(3, 10, 8)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 30), st.integers(0, 10**6))
def test_hadamard_bound_property(n, seed):
    rng = np.random.default_rng(seed)
    A, B = rng.standard_normal((n, n)), _sym(n, seed + 1)
    lhs, rhs = hadamard_bound_check(A, B)
    assert lhs <= rhs * (1 + 1e-12)
    lhs, rhs = hadamard_bound_check(np.full((n, n), 2.0), B)
    assert lhs == pytest.approx(2 * np.linalg.norm(B, 2))


@settings(max_examples=20, deadline=None)
@given(st.floats(-1.0, 1.0), st.floats(-1.0, 1.0), st.integers(0, 1000))
def test_spike_model_is_symmetric_property(a1, a2, seed):
    p, n = 16, 12
    mu = np.random.default_rng(seed).standard_normal(p)
    params = MixtureParams(n, p, mu, -mu)
    ds = sample_mixture(params, seed)
    D = build_spike(ds.Z, HermiteCoeffs(0.0, a1, a2, a1**2 + a2**2 + 0.1), class_stats(params, ds.labels)).dense()
    assert np.allclose(D, D.T, atol=1e-12)

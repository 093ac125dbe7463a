from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kernel_rmt.hermite import HermiteCoeffs, compute_coeffs, parse_function
from kernel_rmt.prototype import (
    InfeasibleDesignError,
    PiecewiseProto,
    coeffs_of_piecewise,
    design_piecewise,
    eval_piecewise,
    feasibility,
)


def _close(a: HermiteCoeffs, b: HermiteCoeffs, tol: float) -> bool:
    return max(abs(a.a1 - b.a1), abs(a.a2 - b.a2), abs(a.nu - b.nu)) < tol


def test_proto_validation_and_levels():
    with pytest.raises(ValueError):
        PiecewiseProto(0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        PiecewiseProto(1.0, 1.0, 0.0)
    proto = PiecewiseProto(2.0, 0.0, 0.0)
    assert proto.r == pytest.approx(1.0)
    assert proto.levels() == (-2.0, 2.0)
    assert PiecewiseProto(2.0, 0.0, 0.0, sign_flip=True).levels() == (2.0, -2.0)


def test_eval_band_conventions():
    proto = PiecewiseProto(1.0, -0.5, 0.5)
    lo, hi = proto.thresholds()
    assert lo == pytest.approx(-0.5 * math.sqrt(2)) and hi == pytest.approx(0.5 * math.sqrt(2))
    vals = eval_piecewise(proto, np.array([lo, 0.0, hi, np.nextafter(hi, 2.0)]))
    np.testing.assert_array_equal(vals, [-proto.r, 0.0, 0.0, 1.0])


def test_closed_form_matches_quadrature():
    for proto in (PiecewiseProto(2.0, 0.0, 1.0), PiecewiseProto(0.8, -1.2, 0.3),
                  PiecewiseProto(1.5, 0.2, 0.2, sign_flip=True)):
        a, b = coeffs_of_piecewise(proto), compute_coeffs(proto.to_kernel_func())
        assert abs(b.a0) < 1e-12
        assert _close(a, b, 1e-12)


def test_sign_is_the_symmetric_member():
    proto = PiecewiseProto(1.0, 0.0, 0.0)
    co = coeffs_of_piecewise(proto)
    assert co.a1 == pytest.approx(math.sqrt(2 / math.pi), abs=1e-15)
    assert co.a2 == 0.0 and co.nu == pytest.approx(1.0, abs=1e-15)
    designed = design_piecewise(compute_coeffs(parse_function("sign")))
    x = np.linspace(-3, 3, 61)
    assert _close(coeffs_of_piecewise(designed), co, 1e-10)
    assert designed.t == pytest.approx(1.0, abs=1e-8)
    np.testing.assert_allclose(eval_piecewise(designed, x[np.abs(x) > 1e-3]), np.sign(x[np.abs(x) > 1e-3]), atol=1e-8)


def test_design_round_trip_for_reference_proto():
    target = coeffs_of_piecewise(PiecewiseProto(2.0, 0.0, 1.0))
    designed = design_piecewise(target)
    assert _close(coeffs_of_piecewise(designed), target, 1e-10)


def test_negative_a1_uses_sign_flip():
    target = coeffs_of_piecewise(PiecewiseProto(1.2, -0.3, 0.9, sign_flip=True))
    designed = design_piecewise(target)
    assert designed.sign_flip
    assert _close(coeffs_of_piecewise(designed), target, 1e-10)


def test_relu_target_is_infeasible():
    target = compute_coeffs(parse_function("relu_centered"))
    with pytest.raises(InfeasibleDesignError) as info:
        design_piecewise(target)
    assert info.value.best_residual > 1e-6
    assert set(info.value.best_params) >= {"t", "s_minus", "s_plus", "sign_flip"}
    assert not feasibility(target)


def test_uncentered_target_rejected():
    with pytest.raises(ValueError):
        design_piecewise(HermiteCoeffs(0.5, 0.5, 0.0, 1.0))


def test_feasibility_reasons():
    rep = feasibility(HermiteCoeffs(0.0, 0.0, 1.0, 1.0))
    assert not rep and rep.reason == "every prototype has a1 != 0"
    rep = feasibility(coeffs_of_piecewise(PiecewiseProto(2.0, 0.0, 1.0)))
    assert rep and rep.best_residual < 1e-6


@settings(max_examples=25, deadline=None)
@given(st.floats(0.5, 3.0), st.floats(-1.5, 1.0), st.floats(0.0, 2.0), st.booleans())
def test_design_round_trip_property(t, s_minus, width, flip):
    target = coeffs_of_piecewise(PiecewiseProto(t, s_minus, s_minus + width, sign_flip=flip))
    assert _close(coeffs_of_piecewise(design_piecewise(target)), target, 1e-10)

"""Kernel evaluation, calibration, and covariance against independent oracles.

The reference for kernel values is adaptive quadrature (scipy.integrate.quad)
after the substitution u = r + s^2, which turns the (u - r)^(H - 3/2) factor
into 2 s^(2H - 2): still singular but integrable, and quad resolves it to
~1e-9.  The library's own fixed-panel rule uses a different substitution
(v = (u - r)^alpha), so agreement is a genuine cross-check.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from volterra_spde.errors import ParameterError
from volterra_spde.kernels import (VolterraKernel, calibrate_C_H,
                                   check_alpha_regularity,
                                   covariance_quadrature,
                                   fbm_constant_closed_form,
                                   fbm_covariance_closed_form, make_fbm_kernel)


def _kernel_quad_oracle(H, C_H, t, r):
    val, _ = quad(lambda s: 2.0 * ((r + s * s) / r) ** (H - 0.5)
                  * s ** (2.0 * H - 2.0), 0.0, np.sqrt(t - r), limit=200)
    return C_H * val


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def test_eval_against_adaptive_quadrature():
    for H in (0.51, 0.6, 0.75, 0.9):
        kern = make_fbm_kernel(H)
        C_H = kern.params["C_H"]
        for (t, r) in ((1.0, 0.5), (1.0, 0.1), (0.7, 0.65), (2.0, 0.3)):
            oracle = _kernel_quad_oracle(H, C_H, t, r)
            assert kern.evaluate(t, r) == pytest.approx(oracle, rel=1e-6)


def test_eval_frozen_value():
    # adaptive-quadrature reference for H = 0.75, t = 1, r = 0.5 with the
    # calibrated constant; quad error estimate 1.2e-9
    kern = make_fbm_kernel(0.75)
    assert kern.evaluate(1.0, 0.5) == pytest.approx(0.937591125375, rel=1e-6)


def test_eval_vanishes_off_support(kernel_075):
    assert kernel_075.evaluate(1.0, 1.0) == 0.0
    assert kernel_075.evaluate(0.5, 0.7) == 0.0
    assert kernel_075.evaluate(1.0, 0.0) == 0.0
    out = kernel_075.evaluate(np.array([0.5, 1.0]), np.array([0.6, 0.2]))
    assert out[0] == 0.0 and out[1] > 0.0


@given(t=st.floats(0.1, 2.0), frac=st.floats(0.05, 0.95))
@settings(max_examples=30, deadline=None)
def test_eval_positive_and_increasing_in_t(t, frac):
    # the u-derivative is positive on 0 < r < u, so K grows with t
    kern = make_fbm_kernel(0.75)
    r = frac * t
    a = kern.evaluate(t, r)
    b = kern.evaluate(1.5 * t, r)
    assert 0.0 < a < b


def test_eval_matches_derivative_integral(kernel_075):
    # K(t2, r) - K(t1, r) = integral of the derivative over [t1, t2]
    r, t1, t2 = 0.3, 0.6, 1.1
    direct = kernel_075.evaluate(t2, r) - kernel_075.evaluate(t1, r)
    via_deriv, _ = quad(lambda u: kernel_075.derivative(u, r), t1, t2)
    assert direct == pytest.approx(via_deriv, rel=1e-8)


# ---------------------------------------------------------------------------
# calibration
# ---------------------------------------------------------------------------

def test_calibration_pins_unit_variance():
    for H in (0.6, 0.75, 0.9):
        kern = make_fbm_kernel(H)
        assert covariance_quadrature(kern, 1.0, 1.0) == pytest.approx(1.0, abs=1e-6)


def test_calibration_agrees_with_beta_closed_form():
    for H in (0.51, 0.6, 0.75, 0.9):
        assert abs(calibrate_C_H(H) / fbm_constant_closed_form(H) - 1.0) <= 1e-3


def test_calibration_rejects_bad_H():
    for H in (0.5, 1.0, 0.3, 1.4):
        with pytest.raises(ParameterError):
            calibrate_C_H(H)
        with pytest.raises(ParameterError):
            make_fbm_kernel(H)


# ---------------------------------------------------------------------------
# covariance
# ---------------------------------------------------------------------------

def test_covariance_matches_closed_form():
    pts = np.linspace(0.2, 1.0, 5)
    for H in (0.6, 0.75, 0.9):
        kern = make_fbm_kernel(H)
        for s in pts:
            for t in pts:
                if s <= t:
                    assert covariance_quadrature(kern, s, t) == pytest.approx(
                        fbm_covariance_closed_form(H, s, t), abs=2e-3)


def test_covariance_symmetric_and_zero_at_origin(kernel_075):
    assert covariance_quadrature(kernel_075, 0.0, 0.7) == 0.0
    a = covariance_quadrature(kernel_075, 0.4, 0.9)
    b = covariance_quadrature(kernel_075, 0.9, 0.4)
    assert a == pytest.approx(b, rel=1e-12)


def test_covariance_matrix_is_psd(kernel_075):
    ts = np.linspace(0.125, 1.0, 8)
    M = np.array([[covariance_quadrature(kernel_075, s, t) for t in ts]
                  for s in ts])
    M = 0.5 * (M + M.T)
    eig = np.linalg.eigvalsh(M)
    assert eig.min() >= -1e-8 * np.trace(M)


def test_covariance_rejects_negative_times(kernel_075):
    with pytest.raises(ParameterError):
        covariance_quadrature(kernel_075, -0.1, 0.5)


# ---------------------------------------------------------------------------
# regularity envelope
# ---------------------------------------------------------------------------

def test_fbm_kernels_pass_regularity_check():
    for H in (0.6, 0.75, 0.9):
        res = check_alpha_regularity(make_fbm_kernel(H))
        assert res["passed"], res
        assert np.isfinite(res["max_ratio"])


def test_oversingular_derivative_fails_regularity_check():
    # derivative ~ (u - r)^(alpha - 1.2) exceeds the (u - r)^(alpha - 1)
    # envelope, so the sup ratio must grow under grid refinement
    bad = VolterraKernel(
        alpha=0.25,
        evaluate=lambda t, r: np.zeros(np.broadcast(t, r).shape),
        derivative=lambda u, r: (np.asarray(u) - np.asarray(r)) ** (0.25 - 1.2))
    res = check_alpha_regularity(bad)
    assert not res["passed"]


def test_kernel_alpha_validation():
    with pytest.raises(ParameterError):
        VolterraKernel(alpha=0.5, evaluate=lambda t, r: 0.0,
                       derivative=lambda u, r: 0.0)

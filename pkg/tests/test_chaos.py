"""Hermite polynomials, chaos sampling, and moment-ratio machinery.

Independent oracles used here:

* the explicit sum H_n(x) = sum_m (-1)^m x^(n-2m) / (m! (n-2m)! 2^m),
  which is the 1/n!-normalized Hermite polynomial written out, against
  the library's three-term recursion;
* Gauss-Hermite quadrature for the orthogonality law E H_a(g) H_b(g)
  = delta_ab / a!;
* closed-form Gaussian moments (E g^4 = 3, E (g^2-1)^4 = 60) for the
  sampled moment ratios.
"""

from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from volterra_spde.chaos import (ChaosVariableSpec, hermite, moment_ratio,
                                 moment_ratio_stderr,
                                 hypercontractivity_sweep,
                                 sample_linear_combination)
from volterra_spde.errors import ParameterError, UndefinedRatioError


def _hermite_sum(n, x):
    return sum((-1) ** m * x ** (n - 2 * m)
               / (factorial(m) * factorial(n - 2 * m) * 2 ** m)
               for m in range(n // 2 + 1))


# ---------------------------------------------------------------------------
# polynomials
# ---------------------------------------------------------------------------

def test_hermite_low_orders():
    assert hermite(0, 0.7) == 1.0
    assert hermite(1, 0.7) == 0.7
    # H_2(x) = (x^2 - 1)/2
    assert hermite(2, 2.0) == pytest.approx(1.5, rel=1e-12)
    # H_3(x) = (x^3 - 3x)/6
    assert hermite(3, 2.0) == pytest.approx((8.0 - 6.0) / 6.0, rel=1e-12)


@given(n=st.integers(0, 8), x=st.floats(-4.0, 4.0))
@settings(max_examples=60, deadline=None)
def test_hermite_matches_explicit_sum(n, x):
    ref = _hermite_sum(n, x)
    val = hermite(n, x)
    assert val == pytest.approx(ref, rel=1e-9, abs=1e-12)


def test_hermite_orthogonality_by_quadrature():
    nodes, weights = np.polynomial.hermite_e.hermegauss(60)
    w = weights / np.sqrt(2.0 * np.pi)
    for a in range(7):
        for b in range(7):
            val = float(np.sum(w * hermite(a, nodes) * hermite(b, nodes)))
            target = 1.0 / factorial(a) if a == b else 0.0
            assert val == pytest.approx(target, abs=1e-10)


def test_hermite_rejects_negative_order():
    with pytest.raises(ParameterError):
        hermite(-1, 0.0)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def test_sample_shape_and_determinism():
    spec = ChaosVariableSpec(order=2,
                             coefficients=np.array([[1.0, 0.0], [0.5, 0.5]]),
                             directions=np.array([[1.0, 0.0], [0.0, 2.0]]))
    a = sample_linear_combination(spec, 64, seed=3)
    b = sample_linear_combination(spec, 64, seed=3)
    c = sample_linear_combination(spec, 64, seed=4)
    assert a.shape == (64, 2)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_gaussian_fourth_moment():
    # order 1, single unit direction: X = g, so E X^4 = 3
    spec = ChaosVariableSpec(order=1, coefficients=np.array([[1.0]]),
                             directions=np.array([[1.0]]))
    x = sample_linear_combination(spec, 100000, seed=11)[:, 0]
    m4 = np.mean(x ** 4)
    se = np.std(x ** 4) / np.sqrt(x.size)
    assert abs(m4 - 3.0) <= 3.0 * se


def test_hermite2_variance():
    # E H_2(g)^2 = 1/2
    spec = ChaosVariableSpec(order=2, coefficients=np.array([[1.0]]),
                             directions=np.array([[1.0]]))
    x = sample_linear_combination(spec, 100000, seed=12)[:, 0]
    m2 = np.mean(x ** 2)
    se = np.std(x ** 2) / np.sqrt(x.size)
    assert abs(m2 - 0.5) <= 3.0 * se


def test_per_term_orders_lower_the_chaos():
    # orders (1, 0): second term is H_0 = 1 deterministic
    spec = ChaosVariableSpec(order=1,
                             coefficients=np.array([[0.0], [2.5]]),
                             directions=np.array([[1.0], [1.0]]),
                             orders=np.array([1, 0]))
    x = sample_linear_combination(spec, 16, seed=0)
    assert np.allclose(x, 2.5)


def test_spec_validation():
    ones = np.ones((2, 3))
    with pytest.raises(ParameterError):
        ChaosVariableSpec(order=1, coefficients=ones,
                          directions=np.ones((3, 2)))
    with pytest.raises(ParameterError):
        ChaosVariableSpec(order=1, coefficients=ones,
                          directions=np.array([[1.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(ParameterError):
        ChaosVariableSpec(order=1, coefficients=ones,
                          directions=np.ones((2, 2)),
                          orders=np.array([1, 2]))
    with pytest.raises(ParameterError):
        ChaosVariableSpec(order=1, coefficients=ones,
                          directions=np.ones((2, 2)), space_p=0.5)
    spec = ChaosVariableSpec(order=1, coefficients=ones,
                             directions=np.array([[3.0, 4.0], [0.0, 2.0]]))
    assert np.allclose(np.linalg.norm(spec.directions, axis=1), 1.0)


# ---------------------------------------------------------------------------
# moment ratios
# ---------------------------------------------------------------------------

@given(scale=st.floats(1e-3, 1e3), seed=st.integers(0, 10))
@settings(max_examples=25, deadline=None)
def test_moment_ratio_scale_invariant(scale, seed):
    rng = np.random.default_rng(seed)
    ens = rng.standard_normal((500, 3))
    r1 = moment_ratio(ens, 4.0, 2.0)
    r2 = moment_ratio(scale * ens, 4.0, 2.0)
    assert r2 == pytest.approx(r1, rel=1e-10)


def test_moment_ratio_constant_ensemble_is_one():
    ens = np.full(100, 2.0)
    assert moment_ratio(ens, 4.0, 2.0) == pytest.approx(1.0, rel=1e-12)


def test_moment_ratio_errors():
    with pytest.raises(UndefinedRatioError):
        moment_ratio(np.zeros(10), 4.0, 2.0)
    with pytest.raises(ParameterError):
        moment_ratio(np.ones(10), 0.5, 2.0)
    with pytest.raises(ParameterError):
        moment_ratio(np.empty(0), 4.0, 2.0)


def test_moment_ratio_stderr_scaling():
    rng = np.random.default_rng(5)
    big = rng.standard_normal(40000)
    se_small = moment_ratio_stderr(big[:2500], 4.0, 2.0)
    se_big = moment_ratio_stderr(big, 4.0, 2.0)
    assert 0.0 < se_big < se_small
    # 16x the sample should shrink the SE by roughly 4
    assert se_small / se_big == pytest.approx(4.0, rel=0.5)


def test_sup_norm_option():
    ens = np.array([[3.0, -4.0]])
    assert moment_ratio(ens, 2.0, 2.0, space_p=np.inf) == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# hypercontractivity sweep
# ---------------------------------------------------------------------------

def test_sweep_structure_and_determinism():
    kw = dict(trials=30, seed=77, replicas=400)
    a = hypercontractivity_sweep(1, 2.0, 4.0, (2, 8), **kw)
    b = hypercontractivity_sweep(1, 2.0, 4.0, (2, 8), **kw)
    assert a["dims"] == [2, 8]
    assert set(a["sup_ratio"]) == {2, 8}
    assert a["sup_ratio"] == b["sup_ratio"]
    assert a["trend_slope"] == b["trend_slope"]
    for m in (2, 8):
        assert a["ratios"][m].shape == (30,)
        assert np.all(a["ratios"][m] >= 1.0 - 1e-9)   # q > p forces ratio >= 1


def test_sweep_no_growth_at_modest_scale():
    res = hypercontractivity_sweep(2, 2.0, 4.0, (2, 8, 64), trials=30,
                                   seed=5, replicas=1500)
    assert res["monotone_pass"]
    assert res["trend_pass"]


def test_sweep_rejects_too_few_trials():
    with pytest.raises(ParameterError):
        hypercontractivity_sweep(1, 2.0, 4.0, (2, 8), trials=10)

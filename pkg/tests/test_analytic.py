import cmath
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdissim.analytic import (NearDegenerateWarning, coeff_u, coeff_u_b, coeff_v, coeff_v_all, coeff_v_cross,
                              coefficient_set_analytic, lambda_kernel, langevin_residual, transfer_f)
from qdissim.exact import exact_coefficients
from qdissim.model import BathMode, DerivedRates, ModelParams

R = DerivedRates.explicit(0.2, 1.05)
MODE_J = BathMode(0.9, 0.05, 0.4)
MODE_S = BathMode(1.2, 0.08, 2.0)

# Complex quadrature of the Volterra forms
#   v_j(t)    = -i xi_j  int_0^t u(t - s) exp(-i w_j s) ds
#   u_b_j(t)  = -i xi_j* int_0^t exp(-i w_j (t - s)) u(s) ds
#   v_js(t)   = -i xi_j* int_0^t exp(-i w_j (t - s)) v_s(s) ds
# with u(t) = exp(-(gamma/2 + i w~) t), gamma = 0.2, w~ = 1.05, at t = 4.
ORACLE_T4 = {
    "v_j": complex(0.05390360429245429, 0.1531912249271071),
    "u_b_j": complex(0.14744766104236667, 0.06806127535919648),
    "v_js": complex(0.023350903694666723, 0.01404782457529663),
    "v_jj": complex(0.013914478604378397, -0.010471772127406945),
}

phases = st.floats(0, 2 * math.pi)
freqs = st.floats(0.2, 3.0)
times = st.floats(0, 30)
rates_st = st.builds(DerivedRates.explicit, st.floats(0.0, 0.5), st.floats(0.3, 2.0))


def test_u_examples():
    assert coeff_u(0.0, R) == 1
    assert coeff_u(math.pi, DerivedRates.explicit(0.0, 1.0)) == pytest.approx(-1, abs=1e-15)
    u = complex(coeff_u(5.0, DerivedRates.explicit(0.2, 1.0)))
    assert abs(u) == pytest.approx(0.60653065971, rel=1e-10)
    assert cmath.phase(u) == pytest.approx(-5 + 2 * math.pi, abs=1e-12)


def test_element_coefficients_against_quadrature():
    t = 4.0
    assert coeff_v(t, MODE_J, R) == pytest.approx(ORACLE_T4["v_j"], abs=1e-13)
    assert coeff_u_b(t, MODE_J, R) == pytest.approx(ORACLE_T4["u_b_j"], abs=1e-13)
    assert coeff_v_cross(t, MODE_J, MODE_S, R) == pytest.approx(ORACLE_T4["v_js"], abs=1e-12)
    assert coeff_v_cross(t, MODE_J, MODE_J, R) == pytest.approx(ORACLE_T4["v_jj"], abs=1e-12)


def test_initial_values_vanish():
    assert coeff_v(0.0, MODE_J, R) == 0
    assert coeff_u_b(0.0, MODE_J, R) == 0
    assert coeff_v_cross(0.0, MODE_J, MODE_S, R) == 0
    assert coeff_v_cross(0.0, MODE_J, MODE_J, R) == 0


def test_resonant_long_time_modulus():
    mode = BathMode(1.0, 0.1)
    r = DerivedRates.explicit(0.2, 1.0)
    assert abs(coeff_v(200.0, mode, r)) == pytest.approx(0.1 / 0.1, rel=1e-8)


def test_resonance_limit_without_damping():
    mode = BathMode(1.0, 0.1, 0.7)
    r = DerivedRates.explicit(0.0, 1.0)
    t = 3.0
    expected = -1j * mode.xi * t * cmath.exp(-1j * t)
    assert coeff_v(t, mode, r) == pytest.approx(expected, abs=1e-15)


def test_transfer_function_is_continuous_at_zero():
    t = 2.5
    assert transfer_f(0.0, t) == pytest.approx(1j * t)
    for a in (1e-3, 1e-6, 1e-9):
        direct = (1 - cmath.exp(-1j * a * t)) / a
        assert transfer_f(a, t) == pytest.approx(direct, rel=1e-6)
    a = 0.7
    assert transfer_f(a, t) == pytest.approx((1 - cmath.exp(-1j * a * t)) / a, rel=1e-14)


def test_u_b_relation_for_phases():
    t = np.linspace(0, 20, 41)
    real = BathMode(0.9, 0.05, 0.0)
    np.testing.assert_array_equal(coeff_u_b(t, real, R), coeff_v(t, real, R))
    quarter = BathMode(0.9, 0.05, math.pi / 2)
    np.testing.assert_allclose(coeff_u_b(t, quarter, R), -coeff_v(t, quarter, R), atol=1e-15)


def test_lambda_kernel_branches():
    k = lambda_kernel(2.0, 1.0, 1.0, True, "literal")
    assert k.branch == "equal-index" and k.value == 2.0
    k = lambda_kernel(2.0, 1.0, 1.0, True)
    assert k.value == 2j
    k = lambda_kernel(2.0, 1.3, 1.0, False, "literal")
    assert k.branch == "distinct-index"
    assert k.value == pytest.approx(cmath.exp(0.6j) / 0.3)
    k = lambda_kernel(2.0, 1.3, 1.0, False)
    assert k.value == pytest.approx((cmath.exp(0.6j) - 1) / 0.3)


def test_derived_kernel_tends_to_equal_index_value():
    for eps in (1e-4, 1e-7):
        k = lambda_kernel(3.0, 1.0 + eps, 1.0, False)
        assert k.value == pytest.approx(3j, rel=1e-3)


def test_literal_convention_warns_when_near_degenerate():
    a, b = BathMode(1.0, 0.01), BathMode(1.0 + 1e-12, 0.01)
    with pytest.warns(NearDegenerateWarning):
        coeff_v_cross(1.0, a, b, R, convention="literal")
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        coeff_v_cross(1.0, a, b, R)


def test_literal_convention_form():
    t = 4.0
    dj = R.omega_tilde - MODE_J.omega - 0.1j
    ds = R.omega_tilde - MODE_S.omega - 0.1j
    lam = cmath.exp(1j * (MODE_J.omega - MODE_S.omega) * t) / (MODE_J.omega - MODE_S.omega)
    fj = (1 - cmath.exp(-1j * dj * t)) / dj
    expected = -np.conj(MODE_J.xi) * MODE_S.xi * cmath.exp(-1j * MODE_J.omega * t) * (fj - lam) / ds
    assert coeff_v_cross(t, MODE_J, MODE_S, R, convention="literal") == pytest.approx(expected, rel=1e-13)
    # the literal kernel does not vanish at t = 0
    assert abs(coeff_v_cross(0.0, MODE_J, MODE_S, R, convention="literal")) > 1e-3


def test_cross_coefficient_against_exact_two_mode():
    m = ModelParams.from_arrays(1.0, [0.6, 1.5], [0.01, 0.012])
    r = DerivedRates.explicit(0.0, 1.0 + 0.01**2 / 0.4 - 0.012**2 / 0.5)
    for t in (2.0, 7.0):
        an = coefficient_set_analytic(m, r, t)
        ex = exact_coefficients(m, t)
        np.testing.assert_allclose(an.v_cross, ex.v_cross, atol=5e-5)


def test_set_at_zero_is_identity():
    m = ModelParams.from_arrays(1.0, [0.5, 1.0, 1.7], [0.1, 0.2, 0.05], [0.0, 1.0, 2.0])
    c = coefficient_set_analytic(m, R, 0.0)
    assert c.u == 1
    assert not np.any(c.v) and not np.any(c.u_b) and not np.any(c.v_cross)
    np.testing.assert_array_equal(c.free_phase, 1)
    np.testing.assert_array_equal(c.as_matrix(), np.eye(4))


def test_zero_coupling_set():
    m = ModelParams.from_arrays(1.0, [0.5, 1.7], [0.0, 0.0])
    r = DerivedRates(1.0, 0.0)
    c = coefficient_set_analytic(m, r, 2.0)
    assert c.u == pytest.approx(cmath.exp(-2j))
    assert not np.any(c.v) and not np.any(c.u_b) and not np.any(c.v_cross)


def test_set_matches_elementwise():
    m = ModelParams((1.0), (MODE_J, MODE_S))
    for conv in ("derived", "literal"):
        c = coefficient_set_analytic(m, R, 4.0, conv)
        assert c.v[0] == pytest.approx(coeff_v(4.0, MODE_J, R))
        assert c.u_b[1] == pytest.approx(coeff_u_b(4.0, MODE_S, R))
        assert c.v_cross[0, 1] == pytest.approx(coeff_v_cross(4.0, MODE_J, MODE_S, R, convention=conv))
        assert c.v_cross[1, 0] == pytest.approx(coeff_v_cross(4.0, MODE_S, MODE_J, R, convention=conv))
        assert c.v_cross[1, 1] == pytest.approx(coeff_v_cross(4.0, MODE_S, MODE_S, R, convention=conv))


def test_v_vector_matches_set():
    m = ModelParams.from_arrays(1.0, [0.5, 1.0, 1.7], [0.1, 0.2, 0.05], [0.0, 1.0, 2.0])
    for t in (0.0, 1.3, 9.0):
        np.testing.assert_array_equal(coeff_v_all(m, R, t), coefficient_set_analytic(m, R, t).v)
    assert coeff_v_all(ModelParams(1.0, ()), R, 2.0).shape == (0,)


def test_langevin_zero_coupling():
    m = ModelParams.from_arrays(1.0, [0.5, 1.7], [0.0, 0.0])
    res = langevin_residual(m, DerivedRates(1.0, 0.0), 3.0)
    assert res.max_residual < 1e-10


def test_langevin_residual_is_second_order_in_step():
    m = ModelParams.from_arrays(1.0, [0.8, 1.3], [0.1, 0.07], [0.3, 1.1])
    # plain central differences would be O(dt^2); one Richardson step gives O(dt^4)
    r1 = langevin_residual(m, R, 2.0, dt=0.08).max_residual
    r2 = langevin_residual(m, R, 2.0, dt=0.04).max_residual
    assert r2 < r1 / 4
    assert langevin_residual(m, R, 2.0).max_residual < 1e-9


@settings(max_examples=60, deadline=None)
@given(t=times, rates=rates_st)
def test_modulus_law(t, rates):
    assert abs(coeff_u(t, rates)) == pytest.approx(math.exp(-0.5 * rates.gamma * t), rel=1e-13)


@settings(max_examples=60, deadline=None)
@given(t=times, w=freqs, xi=st.floats(0.001, 0.3), sig=phases, rates=rates_st)
def test_v_bound(t, w, xi, sig, rates):
    mode = BathMode(w, xi, sig)
    den = math.sqrt((rates.omega_tilde - w) ** 2 + 0.25 * rates.gamma**2)
    if den < 1e-6:
        return
    assert abs(coeff_v(t, mode, rates)) <= 2 * xi / den * (1 + 1e-12)


@settings(max_examples=60, deadline=None)
@given(t=times, wj=freqs, ws=freqs, sj=phases, ss=phases, c=st.floats(0.1, 10), rates=rates_st)
def test_cross_coefficient_scaling(t, wj, ws, sj, ss, c, rates):
    """v_js / (xi_j* xi_s) depends only on frequencies, rates and time."""
    a, b = BathMode(wj, 0.01, sj), BathMode(ws, 0.02, ss)
    ac, bc = BathMode(wj, 0.01 * c, sj), BathMode(ws, 0.02 * c, ss)
    v1 = coeff_v_cross(t, a, b, rates)
    v2 = coeff_v_cross(t, ac, bc, rates)
    assert v2 == pytest.approx(c**2 * v1, rel=1e-10, abs=1e-300)
    norm = coeff_v_cross(t, BathMode(wj, 1.0), BathMode(ws, 1.0), rates)
    assert v1 == pytest.approx(np.conj(a.xi) * b.xi * norm, rel=1e-10, abs=1e-300)


@settings(max_examples=30, deadline=None)
@given(t=st.floats(0, 20), w=st.lists(freqs, min_size=1, max_size=6), rates=rates_st,
       seed=st.integers(0, 2**16))
def test_langevin_residual_small(t, w, rates, seed):
    rng = np.random.default_rng(seed)
    m = ModelParams.from_arrays(1.0, w, rng.uniform(0, 0.2, len(w)), rng.uniform(0, 6, len(w)))
    assert langevin_residual(m, rates, t).max_residual <= 1e-8

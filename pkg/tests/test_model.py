import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdissim.model import (BathMode, DerivedRates, InvalidSpecError, ModelParams,
                           NonExponentialDecayWarning, OutOfBandWarning, SpectralModel, build_bath,
                           golden_rule_rates, mode_spacings, rate_fit_from_exact, recurrence_time)


def flat_model(n=100, width=10.0, xi=0.05, center=1.0, omega=1.0):
    omegas = center - width / 2 + width / n * (np.arange(n) + 0.5)
    return ModelParams.from_arrays(omega, omegas, np.full(n, xi))


def test_bath_mode_normalizes_phase():
    m = BathMode(1.0, 0.1, -math.pi / 2)
    assert m.sigma == pytest.approx(1.5 * math.pi)
    assert m.xi == pytest.approx(0.1j * -1)


@pytest.mark.parametrize("kwargs", [dict(omega=float("nan"), xi_abs=0.1),
                                    dict(omega=1.0, xi_abs=-0.1)])
def test_bath_mode_rejects_invalid(kwargs):
    with pytest.raises(InvalidSpecError):
        BathMode(**kwargs)


def test_model_requires_positive_omega():
    with pytest.raises(InvalidSpecError):
        ModelParams(0.0, ())


def test_empty_model_is_free():
    m = ModelParams(1.3, ())
    assert m.is_free and m.n_modes == 0


def test_derived_rates_identity_and_sign():
    r = DerivedRates(1.0, 0.2, 0.05)
    assert r.omega_tilde == 1.0 + 0.05
    with pytest.raises(ValueError):
        DerivedRates(1.0, -0.1)


def test_single_mode_grid_sits_on_center():
    modes = build_bath(SpectralModel("flat", 1.0, 7.0, 0.3), 1)
    assert len(modes) == 1 and modes[0].omega == 1.0


def test_zero_strength_gives_zero_couplings():
    modes = build_bath(SpectralModel("flat", 1.0, 10.0, 0.0), 20)
    assert all(m.xi_abs == 0 for m in modes)


def test_flat_band_total_weight():
    modes = build_bath(SpectralModel("flat", 1.0, 10.0, 0.25), 100)
    total = sum(m.xi_abs**2 for m in modes)
    assert abs(total - 0.25) <= 1e-12 * 0.25


def test_flat_band_weights_match_density_times_spacing():
    spec = SpectralModel("flat", 1.0, 10.0, 0.25)
    modes = build_bath(spec, 50)
    w = np.array([m.omega for m in modes])
    xi2 = np.array([m.xi_abs**2 for m in modes])
    np.testing.assert_allclose(xi2, spec.density(w) * mode_spacings(w), rtol=1e-12)


@pytest.mark.parametrize("spec", [
    SpectralModel("ohmic", 2.0, 3.0, 0.1, cutoff=1.5),
    SpectralModel("table", 1.0, 2.0, 0.0, table=((0.0, 0.0), (0.7, 0.2), (1.2, 0.05), (2.0, 0.1))),
])
def test_discretization_reproduces_integral(spec):
    import mpmath as mp

    lo, hi = spec.band
    knots = [lo] + [p[0] for p in spec.table if lo < p[0] < hi] + [hi]
    exact = float(mp.quad(lambda w: float(spec.density(float(w))), knots))
    modes = build_bath(spec, 37)
    total = sum(m.xi_abs**2 for m in modes)
    assert abs(total - exact) <= 1e-12 * exact


@pytest.mark.parametrize("kw", [dict(width=0.0), dict(width=-1.0), dict(shape="lorentz")])
def test_invalid_spec(kw):
    args = dict(shape="flat", center=1.0, width=1.0, strength=0.1)
    args.update(kw)
    with pytest.raises(InvalidSpecError):
        SpectralModel(**args)


def test_invalid_count():
    with pytest.raises(InvalidSpecError):
        build_bath(SpectralModel("flat", 1.0, 1.0, 0.1), 0)


def test_build_bath_deterministic_and_seeded():
    spec = SpectralModel("flat", 1.0, 2.0, 0.1)
    a = build_bath(spec, 10, phase_seed=3)
    b = build_bath(spec, 10, phase_seed=3)
    c = build_bath(spec, 10)
    assert a == b
    assert all(0 <= m.sigma < 2 * math.pi for m in a)
    assert all(m.sigma == 0 for m in c)
    assert a != build_bath(spec, 10, phase_seed=4)


def test_golden_rule_zero_coupling():
    m = flat_model(xi=0.0)
    r = golden_rule_rates(m)
    assert r.gamma == 0 and r.delta_omega == 0


def test_golden_rule_symmetric_band_has_no_shift():
    r = golden_rule_rates(flat_model(n=100))
    assert abs(r.delta_omega) <= 1e-12


def test_golden_rule_flat_band_value():
    # 2 pi * density (N / W) * |xi|^2
    r = golden_rule_rates(flat_model())
    assert r.gamma == pytest.approx(2 * math.pi * 10 * 0.0025, rel=1e-12)
    assert r.gamma == pytest.approx(0.157, abs=5e-4)


def test_golden_rule_quadratic_scaling_exact():
    m = flat_model(n=60, xi=0.03)
    g1 = golden_rule_rates(m).gamma
    g2 = golden_rule_rates(m.scaled_couplings(2.0)).gamma
    assert g2 == pytest.approx(4 * g1, rel=1e-12)


def test_golden_rule_out_of_band_warns():
    m = ModelParams.from_arrays(5.0, np.linspace(0.5, 1.5, 20), np.full(20, 0.01))
    with pytest.warns(OutOfBandWarning):
        r = golden_rule_rates(m)
    assert r.gamma == 0 and r.out_of_band


def test_golden_rule_single_mode_warns():
    m = ModelParams.from_arrays(1.0, [1.0], [0.1])
    with pytest.warns(OutOfBandWarning):
        assert golden_rule_rates(m).gamma == 0


def test_recurrence_time():
    m = flat_model(n=100)
    assert recurrence_time(m) == pytest.approx(2 * math.pi / 0.1)
    assert recurrence_time(ModelParams.from_arrays(1.0, [1.0], [0.1])) == math.inf


def test_rate_fit_zero_coupling():
    r = rate_fit_from_exact(flat_model(xi=0.0), 10.0)
    assert r.gamma == pytest.approx(0, abs=1e-13)
    assert r.omega_tilde == pytest.approx(1.0, abs=1e-13)
    assert r.fit_residual == pytest.approx(0, abs=1e-13)


def test_rate_fit_single_resonant_mode_warns():
    m = ModelParams.from_arrays(1.0, [1.0], [0.1])
    with pytest.warns(NonExponentialDecayWarning):
        rate_fit_from_exact(m, 20.0)


def test_rate_fit_matches_golden_rule_in_dense_band():
    m = flat_model(n=400, width=10.0, xi=0.05 / 2)  # density 40, gamma = 2 pi 40 / 1600
    g = golden_rule_rates(m).gamma
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        fit = rate_fit_from_exact(m, 3 / g)
    assert fit.gamma == pytest.approx(g, rel=0.10)


def test_golden_rule_example_fit_within_ten_percent():
    m = flat_model()
    g = golden_rule_rates(m).gamma
    fit = rate_fit_from_exact(m, min(3 / g, 0.8 * recurrence_time(m)))
    assert fit.gamma == pytest.approx(0.157, rel=0.10)


def test_rate_fit_refuses_beyond_recurrence():
    m = flat_model()
    with pytest.raises(ValueError):
        rate_fit_from_exact(m, 1.01 * recurrence_time(m))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 80), strength=st.floats(0, 2), width=st.floats(0.1, 20),
       center=st.floats(-5, 5))
def test_flat_discretization_sums_to_strength(n, strength, width, center):
    modes = build_bath(SpectralModel("flat", center, width, strength), n)
    total = math.fsum(m.xi_abs**2 for m in modes)
    assert abs(total - strength) <= 1e-12 * max(strength, 1e-300) + 1e-300


@settings(max_examples=30, deadline=None)
@given(shift=st.floats(-2, 2), n=st.integers(5, 60), xi=st.floats(0.001, 0.05))
def test_golden_rule_gamma_nonnegative(shift, n, xi):
    m = flat_model(n=n, xi=xi, center=1.0 + shift)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        r = golden_rule_rates(m)
    assert r.gamma >= 0
    assert r.omega_tilde == r.omega + r.delta_omega

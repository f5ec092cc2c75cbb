import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cascade.device import TWO_PI
from cascade.dissipation import (
    NoiseSpectrum,
    build_cavity_me,
    build_full_me,
    build_three_level_me,
    cat_amplitude,
    cavity_rates,
    error_budget,
    three_level_rates,
)
from cascade.errors import InvalidDimensionError, RateError, SpaceMismatchError
from cascade.fock import HilbertSpace, SingleMode, annihilation, cat_state_mod4

from conftest import design


def test_white_scheme_rates(white):
    params, _, co = white
    r = cavity_rates(co, NoiseSpectrum.white(params.Gamma_1), params)
    assert 1e6 / r.kappa_4ph == pytest.approx(96, rel=0.03)
    assert 1e6 / r.kappa_2ph == pytest.approx(205, rel=0.03)
    assert abs(r.alpha) == pytest.approx(2.0, rel=0.01)


def test_engineered_scheme_rates(engineered):
    params, _, co = engineered
    r = cavity_rates(co, NoiseSpectrum.white(params.Gamma_1), params)
    assert 1e6 / r.kappa_4ph == pytest.approx(96, rel=0.03)
    assert 1e3 / r.kappa_2ph == pytest.approx(136, rel=0.03)


@given(G1=st.floats(1e3, 1e8), Gfg=st.floats(0, 1e8), g3=st.floats(0, 2e6))
@settings(max_examples=30, deadline=None)
def test_white_noise_degenerates_to_closed_forms(G1, Gfg, g3):
    params, pumps, co = design(g3_hz=g3 / TWO_PI, Gamma_1_hz=G1 / TWO_PI, Gamma_fg_hz=Gfg / TWO_PI)
    r = cavity_rates(co, NoiseSpectrum.white(params.Gamma_1), params)
    k4 = 4 * abs(co.g_4ph) ** 2 / (params.Gamma_fg_eng + 2 * params.Gamma_1)
    k2 = (abs(pumps.g1) ** 2 / params.Delta**2 + abs(pumps.g2) ** 2 / (params.Delta + params.chi_bb) ** 2) * params.Gamma_1
    assert r.kappa_4ph == pytest.approx(k4, rel=1e-15)
    assert r.kappa_2ph == pytest.approx(k2, rel=1e-14)
    if Gfg == 0:
        assert r.kappa_4ph == pytest.approx(2 * abs(co.g_4ph) ** 2 / params.Gamma_1, rel=1e-15)
    assert r.gamma_eg == r.gamma_fe == params.Gamma_1


def test_level_rate_coefficients_reduce_at_ground():
    g1, g2, D, chi = 3.0, 5.0, 50.0, 200.0
    r = three_level_rates(g1, g2, D, chi, NoiseSpectrum.white(1.0))
    assert r.kappa2_gg == pytest.approx(g1**2 / D**2 + g2**2 / (chi + D) ** 2)
    # n = 1: c1 = g1 (chi - D) / ((chi + D) D), c2 = g2 (2chi + D) / ((-chi - D)(-D))
    want_ee = (g1 * (chi - D) / ((chi + D) * D)) ** 2 + (g2 * (2 * chi + D) / ((chi + D) * D)) ** 2
    assert r.kappa2_ee == pytest.approx(want_ee)
    assert r.kappa2_fg == pytest.approx(2 * chi**2 / (D**2 * (chi + D) ** 2) * (g1**2 + g2**2))


def test_bath_spectrum():
    s = NoiseSpectrum.from_bath(coupling=2.0, linewidth=8.0, n_th=0.5)
    assert s.gamma_down(0.0) == pytest.approx(4 * 1.5 * 4 / 8)
    assert s.gamma_up(0.0) == pytest.approx(4 * 0.5 * 4 / 8)
    assert s.flat
    bad = NoiseSpectrum(lambda w: 1.0, lambda w: 2.0)
    with pytest.raises(RateError):
        bad.gamma_down(0.0)


def test_bandpass_suppresses_two_photon_loss(white):
    params, _, co = white
    wb = TWO_PI * 5e9
    spec = NoiseSpectrum.bandpass(center=wb - params.chi_bb / 2, halfwidth=params.chi_bb * 0.6,
                                  Gamma_in=params.Gamma_1, Gamma_out=params.Gamma_1 * 1e-3)
    with pytest.raises(RateError):
        three_level_rates(co.g1, co.g2, params.Delta, params.chi_bb, spec)
    r = three_level_rates(co.g1, co.g2, params.Delta, params.chi_bb, spec, omega_b_tilde=wb)
    flat = three_level_rates(co.g1, co.g2, params.Delta, params.chi_bb, NoiseSpectrum.white(params.Gamma_1))
    assert r.gamma_fe == flat.gamma_fe
    assert r.kappa2_gg == pytest.approx(flat.kappa2_gg * 1e-3)


def test_cat_amplitude_principal_root():
    a = cat_amplitude(2.0, 32.0)
    assert a == pytest.approx(2.0)
    a = cat_amplitude(1.0, -1.0)
    assert a**4 == pytest.approx(-1.0)
    assert cat_amplitude(0, 0) == 0
    with pytest.raises(RateError):
        cat_amplitude(0, 1.0)


def test_no_f_decay_is_an_error(white):
    params, _, co = white
    with pytest.raises(RateError):
        cavity_rates(co, NoiseSpectrum.white(0.0), params)


def test_error_budget_formulas():
    b = error_budget(kappa_1ph=1e3, kappa_2ph=2.0, alpha=2.0, delta_t=1e-6)
    assert b.p1 == pytest.approx((4 * 1e3 * 1e-6) ** 2 / 2)
    assert b.p2 == pytest.approx(16 * 2.0 * 1e-6)
    assert b.ratio == pytest.approx(b.p2 / b.p1)
    assert b.requirement_met == (2.0 < 1e6 * 1e-6 / 2)
    assert b.target_ratio_met
    with pytest.raises(RateError):
        error_budget(-1.0, 1.0, 2.0, 1e-6)


@pytest.mark.parametrize("n", [1, 2, 4])
def test_kernel_dimension_of_multiphoton_loss(n):
    # a^n - alpha^n annihilates n coherent states; the truncated matrix shows n tiny singular values
    dim, alpha = 60, 1.3
    a = annihilation(dim).data
    L = np.linalg.matrix_power(a, n) - alpha**n * np.eye(dim)
    sv = np.sort(np.linalg.svd(L, compute_uv=False))
    assert np.all(sv[:n] < 1e-8)
    assert sv[n] > 1e-3


def test_three_level_model_channels(engineered):
    params, _, co = engineered
    rates = cavity_rates(co, NoiseSpectrum.white(params.Gamma_1), params)
    model = build_three_level_me(co, rates, HilbertSpace(12, 3))
    # eg, fe, three a^2 sigma_nn, fg, a+2 sigma_fg
    assert len(model.collapse_ops) == 7
    assert model.is_static
    with pytest.raises(InvalidDimensionError):
        build_three_level_me(co, rates, HilbertSpace(12, 4))


def test_cavity_model_kernel_holds_cat(engineered):
    params, _, co = engineered
    rates = cavity_rates(co, NoiseSpectrum.white(params.Gamma_1), params)
    model = build_cavity_me(rates, co, SingleMode(48))
    (_, L4), = [(r, L) for r, L in model.collapse_ops if r == rates.kappa_4ph]
    cat = cat_state_mod4(rates.alpha, 48).data
    assert np.linalg.norm(L4.data @ cat) < 1e-6
    with pytest.raises(SpaceMismatchError):
        build_cavity_me(rates, co, HilbertSpace(8, 3))


def test_full_model_frames(white):
    params, pumps, _ = white
    sp = HilbertSpace(6, 4)
    lin = build_full_me(params, pumps, sp, frame="linear")
    kerr = build_full_me(params, pumps, sp, frame="kerr")
    assert len(lin.collapse_ops) == 1
    rates = sorted(r for r, _ in kerr.collapse_ops)
    assert rates == pytest.approx([params.Gamma_1, 2 * params.Gamma_1, 3 * params.Gamma_1])
    assert not lin.is_static
    assert math.isclose(lin.hamiltonian.max_frequency, params.chi_bb + params.Delta)

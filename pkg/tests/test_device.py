import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cascade.device import (
    TWO_PI,
    DeviceParams,
    FourierHamiltonian,
    PumpConfig,
    RegimeWarning,
    build_hsys_fourier,
    check_kerr_consistency,
    constraint_residuals,
    couplings_from_xi,
    pump_frequencies,
    solve_constraints,
)
from cascade.errors import DegenerateDetuningError, InvalidRegimeError
from cascade.fock import HilbertSpace, Operator, identity

DESIGN = dict(chi_aa=TWO_PI * 312, chi_bb=TWO_PI * 200e6, chi_ab=TWO_PI * 0.5e6, Delta=TWO_PI * 50e6)


def design_params(**over):
    sol = solve_constraints(DESIGN["chi_aa"], DESIGN["chi_bb"], DESIGN["Delta"], TWO_PI * 2e6)
    kw = {**DESIGN, "delta": sol.delta, **over}
    return DeviceParams(**kw), sol


def test_design_point_constraints():
    _, sol = design_params()
    assert sol.g1 / TWO_PI == pytest.approx(899e3, rel=5e-3)
    assert sol.delta < 0
    assert abs(sol.delta) / TWO_PI == pytest.approx(153.5e3, rel=1e-2)


@given(
    chi_aa=st.floats(10, 1e4),
    ratio=st.floats(3.5, 10),
    Delta=st.floats(10e6, 100e6),
    g2=st.floats(0.1e6, 5e6),
)
@settings(max_examples=40, deadline=None)
def test_constraint_solution_has_zero_residual(chi_aa, ratio, Delta, g2):
    c = [TWO_PI * x for x in (chi_aa, ratio * Delta, Delta, g2)]
    sol = solve_constraints(*c)
    r1, r2 = constraint_residuals(c[0], c[1], c[2], sol.g1, c[3], sol.delta)
    assert abs(r1) < 1e-10 and abs(r2) < 1e-12


def test_regime_checks():
    with pytest.raises(InvalidRegimeError):
        DeviceParams(chi_aa=1, chi_bb=2e6, chi_ab=1, Delta=1e6)
    with pytest.raises(InvalidRegimeError):
        DeviceParams(chi_aa=-1, chi_bb=2e8, chi_ab=1, Delta=1e6)
    with pytest.warns(RegimeWarning):
        DeviceParams(chi_aa=1, chi_bb=3.5e6, chi_ab=1, Delta=1e6)
    with pytest.raises(InvalidRegimeError):
        solve_constraints(1.0, 1.0, 2.0, 1.0)


def test_from_hz_roundtrip():
    p = DeviceParams.from_hz(chi_aa=312, chi_bb=200e6, chi_ab=0.5e6, Delta=50e6, delta=-1e5)
    assert p.chi_bb == pytest.approx(TWO_PI * 200e6)
    assert p.to_hz()["delta"] == pytest.approx(-1e5)


def test_kerr_consistency_at_design_point():
    # 2 sqrt(312 Hz * 200 MHz) = 499.6 kHz
    dev = check_kerr_consistency(DESIGN["chi_aa"], DESIGN["chi_bb"], DESIGN["chi_ab"])
    assert dev < 1e-3
    with pytest.warns(RegimeWarning):
        check_kerr_consistency(DESIGN["chi_aa"], DESIGN["chi_bb"], 2 * DESIGN["chi_ab"])


def test_couplings_from_xi():
    g1, g2, g3 = couplings_from_xi(2.0, 1j, 0.5j, chi_ab=4.0, chi_bb=8.0)
    assert g1 == -4.0 and g2 == -2j
    assert g3 == pytest.approx(0.5 * 8.0 * (-0.5j) ** 2)
    p = PumpConfig.from_xi(2.0, 1j, 0.5j, 4.0, 8.0)
    p.check(4.0, 8.0)
    with pytest.raises(InvalidRegimeError):
        PumpConfig(1.0, g2, g3, xi=(2.0, 1j, 0.5j)).check(4.0, 8.0)


def test_pump_frequencies_resonances():
    params, _ = design_params()
    wa, wb = TWO_PI * 8e9, TWO_PI * 5e9
    pf = pump_frequencies(params, wa, wb)
    chi, D, d = params.chi_bb, params.Delta, params.delta
    # two cavity photons -> e through the detuned intermediate, then e -> f
    assert 2 * wa - pf.omega_p1 == pytest.approx(wb + D - d)
    assert 2 * wa - pf.omega_p2 == pytest.approx(wb - chi - D - d)
    # two pump-3 photons drive g -> f
    assert 2 * pf.omega_p3 == pytest.approx(2 * wb - chi - d)


@pytest.mark.parametrize("frame", ["kerr", "linear"])
def test_fourier_hamiltonian_hermitian(frame):
    params, sol = design_params()
    pumps = PumpConfig(sol.g1, TWO_PI * 2e6, TWO_PI * 0.4e6)
    fh = build_hsys_fourier(params, pumps, HilbertSpace(6, 4), frame=frame)
    for t in (0.0, 1.3e-9, 7.7e-8):
        H = fh.matrix(t)
        np.testing.assert_allclose(H, H.conj().T, atol=1e-9 * np.abs(H).max())


def test_linear_frame_frequencies():
    params, sol = design_params()
    pumps = PumpConfig(sol.g1, TWO_PI * 2e6, TWO_PI * 0.4e6)
    fh = build_hsys_fourier(params, pumps, HilbertSpace(5, 3), frame="linear")
    freqs = sorted(nu for nu, _ in fh.modes)
    expected = sorted([params.Delta, params.chi_bb, params.chi_bb + params.Delta])
    np.testing.assert_allclose(freqs, expected)


def test_kerr_frame_merges_raman_pair():
    # g1 on the g-e block and g2 on the e-f block run at +-Delta and merge
    params, sol = design_params()
    pumps = PumpConfig(sol.g1, TWO_PI * 2e6, 0.0)
    fh = build_hsys_fourier(params, pumps, HilbertSpace(5, 3), frame="kerr")
    merged = [lbl for lbl in fh.labels if len(lbl) == 2]
    assert merged and {p for p, _ in merged[0]} == {"g1", "g2"}
    assert fh.modes[0][0] == pytest.approx(params.Delta)


def test_static_and_modes_validation():
    sp = HilbertSpace(3, 3)
    I = identity(sp)
    with pytest.raises(DegenerateDetuningError):
        FourierHamiltonian(I, ((1.0, I), (1.0, I)))
    with pytest.raises(DegenerateDetuningError):
        FourierHamiltonian(I, ((-1.0, I),))
    assert FourierHamiltonian(I).is_static


def test_unknown_frame():
    params, sol = design_params()
    with pytest.raises(ValueError):
        build_hsys_fourier(params, PumpConfig(sol.g1, 1.0, 0.0), HilbertSpace(4, 3), frame="lab")


def test_fourier_matrix_matches_definition():
    sp = HilbertSpace(2, 2)
    rng = np.random.default_rng(1)
    S = rng.normal(size=(4, 4))
    S = S + S.T
    A = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    fh = FourierHamiltonian(Operator(S, sp), ((2.0, Operator(A, sp)),))
    t = 0.37
    want = S + A * np.exp(-2j * t) + (A * np.exp(-2j * t)).conj().T
    np.testing.assert_allclose(fh.matrix(t), want)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert math.isclose(fh.max_frequency, 2.0)

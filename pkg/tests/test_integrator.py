import hashlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cascade.device import FourierHamiltonian
from cascade.dissipation import NoiseSpectrum, build_cavity_me, build_full_me, cavity_rates
from cascade.errors import AbortedTrajectoryError, RateError, SpaceMismatchError
from cascade.fock import HilbertSpace, Operator, SingleMode, annihilation, basis_state, coherent_state, fock_state
from cascade.integrator import (
    LindbladModel,
    PropagateOptions,
    Trajectory,
    _Generator,
    cavity_parity,
    invariant_sector,
    photon_number,
    population,
    propagate,
    sweep,
    thread_count,
    time_to_fidelity,
)

from conftest import design


def driven_cavity(eps, kappa, dim=20):
    a = annihilation(dim)
    H = eps * a.dag() + np.conj(eps) * a
    return LindbladModel.static(H, [(kappa, a)])


def trace_distance(r, s):
    return 0.5 * np.sum(np.abs(np.linalg.eigvalsh(r - s)))


@pytest.mark.parametrize("method", ["rk", "stiff"])
def test_coherent_steady_state(method):
    eps, kappa = 0.6 + 0.3j, 1.0
    model = driven_cavity(eps, kappa)
    alpha = -2j * eps / kappa
    tr = propagate(model, fock_state(0, 20), [0.0, 30.0], snapshot_times=[30.0],
                   options=PropagateOptions(method=method))
    want = coherent_state(alpha, 20).density_matrix().data
    assert trace_distance(tr.snapshots[30.0], want) < 1e-4


def test_methods_agree():
    model = driven_cavity(0.5, 0.7, dim=12)
    t = np.linspace(0, 4, 9)
    obs = {"n": photon_number(SingleMode(12))}
    runs = {m: propagate(model, fock_state(0, 12), t, obs, options=PropagateOptions(method=m, dt=1e-3))
            for m in ("rk", "stiff", "fixed")}
    for m in ("stiff", "fixed"):
        np.testing.assert_allclose(runs[m].observables["n"], runs["rk"].observables["n"], atol=1e-6)


def _dense_rhs(model, rho, t):
    H = model.hamiltonian.matrix(t)
    out = -1j * (H @ rho - rho @ H)
    for r, L in model.collapse_ops:
        c = L.data
        cd = c.conj().T
        out += r * (c @ rho @ cd - 0.5 * (cd @ c @ rho + rho @ cd @ c))
    return out


@given(seed=st.integers(0, 2**31 - 1))
@settings(max_examples=10, deadline=None)
def test_generator_matches_dense_lindbladian(seed):
    rng = np.random.default_rng(seed)
    params, pumps, _ = design(Gamma_1_hz=2e6, Gamma_fg_hz=1e6)
    model = build_full_me(params, pumps, HilbertSpace(5, 3))
    gen = _Generator(model, np.arange(15))
    X = rng.normal(size=(15, 15)) + 1j * rng.normal(size=(15, 15))
    rho = X @ X.conj().T
    rho /= np.trace(rho)
    t = rng.uniform(0, 1e-6)
    want = _dense_rhs(model, rho, t)
    np.testing.assert_allclose(gen.apply(t, rho), want, atol=1e-9 * np.abs(want).max())


def test_superoperator_matches_generator():
    rng = np.random.default_rng(2)
    model = driven_cavity(0.3, 0.8, dim=6)
    gen = _Generator(model, np.arange(6))
    X = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    rho = X @ X.conj().T
    np.testing.assert_allclose(gen.superoperator() @ rho.ravel(), gen.apply(0.0, rho).ravel(), atol=1e-12)


def test_sector_restriction_is_exact(engineered):
    params, _, co = engineered
    rates = cavity_rates(co, NoiseSpectrum.white(params.Gamma_1), params)
    model = build_cavity_me(rates, co, SingleMode(24))
    idx = invariant_sector(model, fock_state(0, 24).density_matrix().data)
    # a^4 and a^2 keep even photon numbers together
    assert list(idx) == list(range(0, 24, 2))
    t = np.linspace(0, 2e-6, 5)
    obs = {"n": photon_number(SingleMode(24))}
    a = propagate(model, fock_state(0, 24), t, obs)
    b = propagate(model, fock_state(0, 24), t, obs, options=PropagateOptions(restrict=False, method="rk"))
    np.testing.assert_allclose(a.observables["n"], b.observables["n"], atol=1e-8)


def test_cavity_model_conserves_parity(engineered):
    params, _, co = engineered
    rates = cavity_rates(co, NoiseSpectrum.white(params.Gamma_1), params)
    model = build_cavity_me(rates, co, SingleMode(32))
    tr = propagate(model, fock_state(0, 32), np.linspace(0, 50e-6, 11), {"parity": cavity_parity(SingleMode(32))})
    assert np.max(np.abs(tr.observables["parity"] - 1)) < 1e-10


def test_frames_agree_on_short_window():
    # closed system: the two frames are related by an exact unitary
    params, pumps, _ = design()
    sp = HilbertSpace(6, 4)
    t = np.linspace(0, 0.2e-6, 5)
    obs = {"g4": population(sp, "g", 4), "f0": population(sp, "f", 0)}
    out = [propagate(build_full_me(params, pumps, sp, frame=f), basis_state(sp, "f", 0), t, obs)
           for f in ("linear", "kerr")]
    for k in obs:
        np.testing.assert_allclose(out[0].observables[k], out[1].observables[k], atol=1e-8)


def _digest(traj: Trajectory) -> str:
    h = hashlib.sha256(traj.times.tobytes())
    for k in sorted(traj.observables):
        h.update(traj.observables[k].tobytes())
    return h.hexdigest()


def test_fixed_step_is_deterministic():
    model = driven_cavity(0.4, 0.5, dim=10)
    opts = PropagateOptions(method="fixed", dt=5e-3)
    t = np.linspace(0, 3, 31)
    obs = {"n": photon_number(SingleMode(10)), "p0": population(SingleMode(10), 0)}
    runs = [_digest(propagate(model, fock_state(0, 10), t, obs, options=opts)) for _ in range(3)]
    assert len(set(runs)) == 1


def test_invariant_breach_aborts():
    # a non-Hermitian "Hamiltonian" does not preserve the trace
    sp = SingleMode(3)
    bad = Operator(np.diag([0.0, -1j, 0.0]) + np.eye(3, k=1), sp)
    model = LindbladModel(FourierHamiltonian(bad))
    with pytest.raises(AbortedTrajectoryError) as info:
        propagate(model, fock_state(1, 3), np.linspace(0, 1, 3), options=PropagateOptions(method="rk"))
    assert info.value.t >= 0


def test_input_validation():
    model = driven_cavity(0.1, 1.0, dim=5)
    with pytest.raises(ValueError):
        propagate(model, fock_state(0, 5), [0.0, 0.0])
    with pytest.raises(ValueError):
        propagate(model, fock_state(0, 5), [0.0, 1.0], snapshot_times=[2.0])
    with pytest.raises(SpaceMismatchError):
        propagate(model, fock_state(0, 4), [0.0, 1.0])
    with pytest.raises(RateError):
        LindbladModel.static(annihilation(5), [(-1.0, annihilation(5))])
    with pytest.raises(ValueError):
        PropagateOptions(method="euler")


def test_stiff_rejects_time_dependent(white):
    params, pumps, _ = white
    sp = HilbertSpace(5, 3)
    with pytest.raises(ValueError):
        propagate(build_full_me(params, pumps, sp), basis_state(sp, "g", 0), [0, 1e-9],
                  options=PropagateOptions(method="stiff"))


def test_snapshots_and_stats():
    model = driven_cavity(0.2, 1.0, dim=8)
    tr = propagate(model, fock_state(0, 8), np.linspace(0, 1, 3), snapshot_times=[0.25])
    assert set(tr.snapshots) == {0.25}
    assert len(tr) == 3
    assert {"method", "dimension", "sector_dimension", "wall_time_s"} <= set(tr.stats)


def test_time_to_fidelity_interpolates():
    tr = Trajectory(np.array([0.0, 1.0, 2.0]), {"fidelity": np.array([0.0, 0.5, 1.0])})
    assert time_to_fidelity(tr, 0.75) == pytest.approx(1.5)
    assert time_to_fidelity(tr, 0.0) == 0.0
    assert time_to_fidelity(tr, 1.1) is None
    with pytest.raises(KeyError):
        time_to_fidelity(tr, 0.5, name="purity")


def test_sweep_order_and_failures():
    def factory(k):
        if k < 0:
            raise RateError("negative rate")
        return driven_cavity(0.2, k, dim=6)

    obs = {"n": photon_number(SingleMode(6))}
    rows = sweep(factory, [1.0, -1.0, 2.0], fock_state(0, 6), [0.0, 1.0], obs, threads=2)
    assert [r.parameter for r in rows] == [1.0, -1.0, 2.0]
    assert [r.failed for r in rows] == [False, True, False]
    serial = sweep(factory, [1.0, 2.0], fock_state(0, 6), [0.0, 1.0], obs, threads=1)
    assert serial[1].trajectory.observables["n"][-1] == pytest.approx(rows[2].trajectory.observables["n"][-1])


def test_thread_count(monkeypatch):
    monkeypatch.delenv("CASCADE_THREADS", raising=False)
    assert thread_count() == 1
    monkeypatch.setenv("CASCADE_THREADS", "3")
    assert thread_count() == 3
    for bad in ("0", "many"):
        monkeypatch.setenv("CASCADE_THREADS", bad)
        with pytest.raises(ValueError):
            thread_count()

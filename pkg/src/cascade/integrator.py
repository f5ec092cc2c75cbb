"""Density-matrix propagation for static and Fourier-time-dependent Lindblad models.

The right-hand side is evaluated as ``K + K^+`` with
``K = -i H_nh rho + (1/2) sum_j L_j rho L_j^+`` and
``H_nh = H(t) - (i/2) sum_j L_j^+ L_j``, which only needs one dense product
for the Hamiltonian and two per collapse operator.  Before integrating,
the state space is cut down to the invariant sector that contains the
support of ``rho0`` (connected components of the joint sparsity pattern of
every generator), which is exact and often shrinks the problem several-fold.
"""

from __future__ import annotations

import logging
import math
import os
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .device import FourierHamiltonian
from .errors import (AbortedTrajectoryError, CascadeError, IntegrationError, NotADensityMatrixError,
                     RateError, SpaceMismatchError)
from .fock import HilbertSpace, Operator, QuantumState, partial_trace_junction

log = logging.getLogger(__name__)

THREADS_ENV = "CASCADE_THREADS"
TRACE_TOL = 1e-7
PURITY_TOL = 1e-7
HERMITICITY_TOL = 1e-9
POSITIVITY_TOL = 1e-8
# largest sector for which the sparse Liouvillian (d^2 x d^2) is assembled
SUPEROPERATOR_MAX_DIM = 40


@dataclass(frozen=True)
class LindbladModel:
    hamiltonian: FourierHamiltonian
    collapse_ops: tuple = ()

    def __post_init__(self):
        ops = tuple((float(r), L) for r, L in self.collapse_ops)
        for r, L in ops:
            if not r >= 0:
                raise RateError(f"collapse rate must be non-negative, got {r}")
            if L.space != self.hamiltonian.space:
                raise SpaceMismatchError("collapse operator lives on a different space")
        object.__setattr__(self, "collapse_ops", ops)

    @classmethod
    def static(cls, H: Operator, collapse_ops=()) -> LindbladModel:
        return cls(FourierHamiltonian(H), tuple(collapse_ops))

    @property
    def space(self):
        return self.hamiltonian.space

    @property
    def is_static(self) -> bool:
        return self.hamiltonian.is_static


@dataclass
class Trajectory:
    times: np.ndarray
    observables: dict = field(default_factory=dict)
    snapshots: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True)
class PropagateOptions:
    """Integration settings.

    ``method`` is ``rk`` (adaptive DOP853 on left/right matrix products),
    ``fixed`` (classical RK4 with step ``dt``, bitwise reproducible) or
    ``stiff`` (BDF with the sparse Liouvillian as Jacobian; static models
    whose sector has at most ``superoperator_max_dim`` states).  ``auto``
    picks ``stiff`` for small static models whose decay part dominates the
    Hamiltonian by more than tenfold (the ``a^4`` loss at the top of a
    truncated cavity makes the cavity-only cat model very stiff) and ``rk``
    otherwise.
    """

    method: str = "auto"
    rtol: float = 1e-8
    atol: float = 1e-12
    max_step: float | None = None
    dt: float | None = None
    restrict: bool = True
    check_invariants: bool = True
    superoperator_max_dim: int = SUPEROPERATOR_MAX_DIM

    def __post_init__(self):
        if self.method not in ("auto", "rk", "fixed", "stiff"):
            raise ValueError(f"unknown method {self.method!r}")


# ---------------------------------------------------------------------------
# observables


def population(space, level, n: int | None = None) -> Callable:
    """Population of a basis state: ``(level, n)`` on a composite space or photon number on a mode."""
    idx = space.index(level, n) if n is not None else int(level)
    return lambda rho: float(rho[idx, idx].real)


def _cavity(rho, space):
    return partial_trace_junction(rho, space) if isinstance(space, HilbertSpace) else rho


def cavity_fidelity(space, target: QuantumState) -> Callable:
    """``<psi|rho_cav|psi>`` for a pure cavity target."""
    psi = np.asarray(target.data)
    if psi.ndim != 1:
        raise NotADensityMatrixError("fidelity observable needs a pure target state")
    return lambda rho: float(np.real(psi.conj() @ _cavity(rho, space) @ psi))


def cavity_purity(space) -> Callable:
    def f(rho):
        r = _cavity(rho, space)
        return float(np.real(np.vdot(r, r)))
    return f


def cavity_parity(space) -> Callable:
    dim = space.cavity_dim if isinstance(space, HilbertSpace) else space.dim
    signs = (-1.0) ** np.arange(dim)
    return lambda rho: float(np.real(np.diagonal(_cavity(rho, space)) @ signs))


def photon_number(space) -> Callable:
    dim = space.cavity_dim if isinstance(space, HilbertSpace) else space.dim
    n = np.arange(dim)
    return lambda rho: float(np.real(np.diagonal(_cavity(rho, space)) @ n))


# ---------------------------------------------------------------------------
# sector restriction


def invariant_sector(model: LindbladModel, rho0: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """Basis indices of the union of invariant blocks touched by ``rho0``."""
    d = rho0.shape[0]
    pattern = np.abs(model.hamiltonian.static.data) > tol
    for _, op in model.hamiltonian.modes:
        pattern |= np.abs(op.data) > tol
    for _, L in model.collapse_ops:
        pattern |= np.abs(L.data) > tol
    pattern = pattern | pattern.T
    _, labels = connected_components(sparse.csr_matrix(pattern), directed=False)
    support = np.flatnonzero(np.abs(np.diagonal(rho0)) > 0)
    keep = np.isin(labels, np.unique(labels[support]))
    idx = np.flatnonzero(keep)
    if len(idx) < d:
        log.debug("restricted %d -> %d basis states", d, len(idx))
    return idx


def _fast(m: np.ndarray, density: float = 0.25):
    """CSR copy for sparse matrices, the dense array otherwise."""
    return sparse.csr_matrix(m) if np.count_nonzero(m) <= density * m.size else m


def _contiguous(ix: np.ndarray):
    if len(ix) and np.all(np.diff(ix) == 1):
        return slice(int(ix[0]), int(ix[-1]) + 1)
    return None


class _Jump:
    """``c rho c^+`` for one collapse operator.

    Operators with at most one entry per row and column that map a
    contiguous index range onto another (ladder operators and projectors in
    the junction-major ordering) are applied by slicing, which costs
    ``O(d^2)`` instead of two matrix products.
    """

    def __init__(self, c: np.ndarray):
        self.c = c
        rows, cols = np.nonzero(c)
        self.slices = None
        if len(rows) and len(set(rows)) == len(rows) and len(set(cols)) == len(cols):
            order = np.argsort(rows)
            rows, cols = rows[order], cols[order]
            dst, src = _contiguous(rows), _contiguous(cols)
            if dst is not None and src is not None:
                w = c[rows, cols]
                self.slices = (dst, src, np.outer(w, w.conj()))
        if self.slices is None:
            self.cs = _fast(c)

    def add_to(self, out, rho, scale):
        if self.slices is not None:
            dst, src, ww = self.slices
            out[dst, dst] += scale * ww * rho[src, src]
        else:
            # c rho c^+ = c (c rho)^+ for Hermitian rho
            x = np.asarray(self.cs @ rho)
            out += scale * np.asarray(self.cs @ x.conj().T)


class _Generator:
    """Restricted matrices of a Lindblad model and its right-hand side."""

    def __init__(self, model: LindbladModel, idx: np.ndarray):
        sub = np.ix_(idx, idx)
        self.d = len(idx)
        self.collapse = [math.sqrt(r) * L.data[sub].astype(complex) for r, L in model.collapse_ops if r > 0]
        loss = sum((c.conj().T @ c for c in self.collapse), np.zeros((self.d, self.d), complex))
        self.h_nh = model.hamiltonian.static.data[sub].astype(complex) - 0.5j * loss
        self.modes = [(nu, op.data[sub].astype(complex)) for nu, op in model.hamiltonian.modes]
        # fast-path forms used by apply()
        self._h = _fast(self.h_nh)
        self._modes = [(nu, _fast(hk), _fast(hk.conj().T)) for nu, hk in self.modes]
        self._jumps = [_Jump(c) for c in self.collapse]

    def loss_dominated(self, ratio: float = 10.0) -> bool:
        """True when the decay part outweighs the Hamiltonian by ``ratio`` (spectral norms)."""
        anti = (self.h_nh - self.h_nh.conj().T) / 2j
        herm = (self.h_nh + self.h_nh.conj().T) / 2
        return np.linalg.norm(anti, 2) > ratio * np.linalg.norm(herm, 2)

    def stable_step(self, safety: float = 2.0) -> float:
        """RK4 step inside the stability region, from a norm bound on the generator."""
        bound = 2 * np.linalg.norm(self.h_nh, 2)
        bound += sum(2 * np.linalg.norm(hk, 2) * 2 for _, hk in self.modes)
        bound += sum(np.linalg.norm(c, 2) ** 2 for c in self.collapse)
        return safety / bound if bound > 0 else math.inf

    def hamiltonian(self, t):
        h = self.h_nh
        if self.modes:
            h = h.copy()
            for nu, hk in self.modes:
                ph = np.exp(-1j * nu * t)
                h += ph * hk + np.conj(ph) * hk.conj().T
        return h

    def apply(self, t, rho):
        # only Hermitian parts are kept, so roundoff in rho cannot seed an
        # anti-Hermitian component (c A c^+ would amplify it unchecked)
        hr = self._h @ rho
        for nu, hk, hkd in self._modes:
            ph = np.exp(-1j * nu * t)
            hr = hr + ph * (hk @ rho) + np.conj(ph) * (hkd @ rho)
        k = -1j * np.asarray(hr)
        for jump in self._jumps:
            jump.add_to(k, rho, 0.5)
        return k + k.conj().T

    def rhs(self, t, y):
        return self.apply(t, y.reshape(self.d, self.d)).ravel()

    def superoperator(self):
        """Sparse Liouvillian acting on the row-major ``vec(rho)``."""
        # vec(A rho B) = kron(A, B^T) vec(rho)
        eye = sparse.identity(self.d, dtype=complex, format="csr")
        h = sparse.csr_matrix(self.h_nh)
        s = -1j * sparse.kron(h, eye) + 1j * sparse.kron(eye, h.conj())
        for c in self.collapse:
            cs = sparse.csr_matrix(c)
            s = s + sparse.kron(cs, cs.conj())
        return sparse.csr_matrix(s)

    def hermitian_coordinates(self):
        """Real Liouvillian on ``x = (diag, Re upper, Im upper)`` and the map back to ``vec(rho)``.

        Every real ``x`` is a Hermitian matrix, so an implicit solver cannot
        drift out of the Hermitian subspace.
        """
        d = self.d
        iu, ju = np.triu_indices(d, 1)
        diag = np.arange(d) * (d + 1)
        upper, lower = iu * d + ju, ju * d + iu
        m = len(iu)
        rows = np.concatenate([diag, upper, lower, upper, lower])
        cols = np.concatenate([np.arange(d), d + np.arange(m), d + np.arange(m),
                               d + m + np.arange(m), d + m + np.arange(m)])
        vals = np.concatenate([np.ones(d), np.ones(m), np.ones(m), 1j * np.ones(m), -1j * np.ones(m)])
        T = sparse.csr_matrix((vals, (rows, cols)), shape=(d * d, d * d))
        W = sparse.csr_matrix(self.superoperator() @ T)
        M = sparse.vstack([W[diag].real, W[upper].real, W[upper].imag]).tocsc()
        return M, T, (diag, upper)


def _max_step(gen: _Generator, opts: PropagateOptions, span: float) -> float:
    ceiling = math.inf
    if gen.modes:
        nu_max = max(nu for nu, _ in gen.modes)
        ceiling = (2 * math.pi / nu_max) / 20
    if opts.max_step is not None:
        ceiling = min(ceiling, opts.max_step)
    return min(ceiling, span) if math.isfinite(ceiling) else math.inf


def _rk4_fixed(gen: _Generator, y0, t_eval, dt):
    out = np.empty((len(t_eval), y0.size), complex)
    y = y0.copy()
    out[0] = y
    steps = 0
    f = gen.rhs
    for i in range(1, len(t_eval)):
        t0, t1 = t_eval[i - 1], t_eval[i]
        n = max(1, math.ceil((t1 - t0) / dt - 1e-9))
        h = (t1 - t0) / n
        for j in range(n):
            t = t0 + j * h
            k1 = f(t, y)
            k2 = f(t + h / 2, y + (h / 2) * k1)
            k3 = f(t + h / 2, y + (h / 2) * k2)
            k4 = f(t + h, y + h * k3)
            y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise IntegrationError("fixed-step integration diverged", t1)
        steps += n
        out[i] = y
    return out, {"steps": steps, "rhs_evals": 4 * steps}


def _check_state(rho: np.ndarray, t: float):
    tr = np.trace(rho).real
    if abs(tr - 1) > TRACE_TOL:
        raise AbortedTrajectoryError(f"trace drifted to {tr:.10f}", t)
    herm = np.max(np.abs(rho - rho.conj().T)) if rho.size else 0.0
    if herm > HERMITICITY_TOL:
        raise AbortedTrajectoryError(f"Hermiticity defect {herm:.2e}", t)
    rho_h = (rho + rho.conj().T) / 2
    pur = np.real(np.vdot(rho_h, rho_h))
    if pur > 1 + PURITY_TOL:
        raise AbortedTrajectoryError(f"purity {pur:.10f} exceeds one", t)
    lam = np.linalg.eigvalsh(rho_h)[0]
    if lam < -POSITIVITY_TOL:
        raise AbortedTrajectoryError(f"negative eigenvalue {lam:.2e}", t)


def propagate(model: LindbladModel, rho0, times, observables: dict | None = None,
              snapshot_times: Sequence[float] = (), options: PropagateOptions | None = None) -> Trajectory:
    """Integrate the master equation and sample observables on ``times``.

    Parameters
    ----------
    model : LindbladModel
    rho0 : QuantumState or ndarray
        Initial state; pure states are promoted to density matrices.
    times : array_like
        Strictly increasing output grid (s). Integration starts at ``times[0]``.
    observables : dict
        Name -> callable taking the full density matrix and returning a float.
    snapshot_times : sequence of float
        Times at which the full density matrix is kept.
    options : PropagateOptions

    Returns
    -------
    Trajectory
    """
    opts = options or PropagateOptions()
    observables = observables or {}
    if isinstance(rho0, QuantumState):
        if rho0.space != model.space:
            raise SpaceMismatchError("initial state lives on a different space")
        rho0 = rho0.density_matrix().data
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.ndim == 1:
        rho0 = np.outer(rho0, rho0.conj())
    if rho0.shape != (model.space.dim, model.space.dim):
        raise SpaceMismatchError(f"rho0 has shape {rho0.shape}, model dimension is {model.space.dim}")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0:
        raise ValueError("times must be a non-empty 1-d grid")
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")

    snaps = sorted(float(s) for s in snapshot_times)
    for s in snaps:
        if not times[0] <= s <= times[-1]:
            raise ValueError(f"snapshot time {s} outside the integration window")
    t_eval = np.union1d(times, snaps)

    D = model.space.dim
    idx = invariant_sector(model, rho0) if opts.restrict else np.arange(D)
    gen = _Generator(model, idx)
    y0 = rho0[np.ix_(idx, idx)].ravel()

    method = opts.method
    if method == "auto":
        method = "stiff" if model.is_static and gen.d <= opts.superoperator_max_dim and gen.loss_dominated() else "rk"
    if method == "stiff" and (not model.is_static or gen.d > opts.superoperator_max_dim):
        raise ValueError(f"superoperator path needs a static model with at most "
                         f"{opts.superoperator_max_dim} states (sector has {gen.d})")
    span = t_eval[-1] - t_eval[0]
    max_step = _max_step(gen, opts, span) if span > 0 else math.inf
    clock = _time.perf_counter()
    stats = {"method": method, "dimension": D, "sector_dimension": gen.d}

    if len(t_eval) == 1:
        ys = y0[None, :]
        stats["steps"] = 0
    elif method == "fixed":
        dt = opts.dt if opts.dt is not None else gen.stable_step()
        dt = min(dt, max_step)
        ys, st = _rk4_fixed(gen, y0, t_eval, dt)
        stats.update(st)
    else:
        if method == "stiff":
            M, T, (diag, upper) = gen.hermitian_coordinates()
            x0 = np.concatenate([y0[diag].real, y0[upper].real, y0[upper].imag])
            fun, kw, solver = (lambda t, x: M @ x), {"jac": M}, "BDF"
        else:
            x0, fun, kw, solver = y0, gen.rhs, {}, "DOP853"
        sol = solve_ivp(fun, (t_eval[0], t_eval[-1]), x0, method=solver, t_eval=t_eval,
                        rtol=opts.rtol, atol=opts.atol, max_step=max_step, **kw)
        if sol.status != 0:
            t_fail = float(sol.t[-1]) if len(sol.t) else float(t_eval[0])
            raise IntegrationError(f"{solver} failed: {sol.message}", t_fail)
        ys = (T @ sol.y).T if method == "stiff" else sol.y.T
        stats.update({"rhs_evals": int(sol.nfev), "jacobian_evals": int(getattr(sol, "njev", 0))})
    stats["wall_time_s"] = _time.perf_counter() - clock

    series = {name: np.empty(len(times)) for name in observables}
    snapshots = {}
    out_pos = np.searchsorted(t_eval, times)
    is_out = np.zeros(len(t_eval), bool)
    is_out[out_pos] = True
    k = 0
    full = np.zeros((D, D), complex)
    sub = np.ix_(idx, idx)
    for i, t in enumerate(t_eval):
        r = ys[i].reshape(gen.d, gen.d)
        if opts.check_invariants:
            _check_state(r, float(t))
        full[sub] = (r + r.conj().T) / 2
        if is_out[i]:
            for name, fn in observables.items():
                series[name][k] = fn(full)
            k += 1
        if snaps and t in snaps:
            snapshots[float(t)] = full.copy()
    return Trajectory(times=times, observables=series, snapshots=snapshots, stats=stats)


# ---------------------------------------------------------------------------
# sweeps and post-processing


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


@dataclass
class SweepRow:
    parameter: object
    trajectory: Trajectory | None
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.trajectory is None


def sweep(model_factory: Callable, parameter_list, rho0, times, observables: dict,
          options: PropagateOptions | None = None, threads: int | None = None,
          snapshot_times=()) -> list[SweepRow]:
    """Propagate one model per parameter; rows follow the input order.

    A parameter whose model construction or integration raises a package
    error yields a failed row instead of aborting the sweep.
    """
    params = list(parameter_list)

    def run(p):
        try:
            model = model_factory(p)
            traj = propagate(model, rho0, times, observables, snapshot_times, options)
            return SweepRow(p, traj)
        except (CascadeError, ArithmeticError) as exc:
            log.warning("sweep point %r failed: %s", p, exc)
            return SweepRow(p, None, str(exc))

    n = threads if threads is not None else thread_count()
    if n <= 1 or len(params) <= 1:
        return [run(p) for p in params]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(run, params))


def time_to_fidelity(traj: Trajectory, threshold: float, name: str = "fidelity") -> float | None:
    """First crossing of ``threshold``, linearly interpolated; ``None`` if never reached."""
    if name not in traj.observables:
        raise KeyError(f"trajectory has no {name!r} series")
    f = np.asarray(traj.observables[name])
    t = np.asarray(traj.times)
    hits = np.flatnonzero(f >= threshold)
    if len(hits) == 0:
        return None
    i = hits[0]
    if i == 0:
        return float(t[0])
    f0, f1 = f[i - 1], f[i]
    return float(t[i - 1] + (threshold - f0) * (t[i] - t[i - 1]) / (f1 - f0))


__all__ = [
    "LindbladModel", "Trajectory", "PropagateOptions", "propagate", "sweep", "SweepRow",
    "time_to_fidelity", "population", "cavity_fidelity", "cavity_purity", "cavity_parity",
    "photon_number", "invariant_sector", "thread_count", "THREADS_ENV",
]

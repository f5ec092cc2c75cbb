"""Scenario orchestration: parameter derivation, figure reproductions, error budget, custom runs.

Each scenario takes a validated :class:`~cascade.config.ScenarioConfig`,
writes its data files into the output directory and returns a
:class:`RunReport`.  ``report.json`` never contains wall-clock times (those
go to ``timing.json``), so a fixed-step run with an identical config
produces identical data and report files.
"""

from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .config import ScenarioConfig, resolved
from .device import (TWO_PI, DeviceParams, PumpConfig, build_hsys_fourier, check_kerr_consistency,
                     constraint_residuals, pump_frequencies, solve_constraints)
from .dissipation import (DissipationRates, NoiseSpectrum, build_cavity_me, build_full_me,
                          build_three_level_me, cavity_rates, error_budget)
from .errors import CascadeError, ConfigError, RateError
from .fock import (HilbertSpace, QuantumState, SingleMode, basis_state, cat_state_mod4, default_cavity_dim,
                   fock_state, partial_trace_junction, wigner)
from .integrator import (LindbladModel, PropagateOptions, Trajectory, cavity_fidelity, cavity_parity,
                         cavity_purity, photon_number, population, propagate, sweep, time_to_fidelity)
from .rwa import EffectiveCoeffs, build_H_eff, effective_coefficients, perturbative_ratio

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# unit-tagged values


def freq(value_rad_s) -> dict:
    """A frequency or rate in both unit systems."""
    if isinstance(value_rad_s, complex) and value_rad_s.imag != 0:
        return {"hz": value_rad_s / TWO_PI, "rad_s": value_rad_s}
    v = float(np.real(value_rad_s))
    return {"hz": v / TWO_PI, "rad_s": v}


def seconds(value) -> dict:
    return {"s": None if value is None else float(value)}


def dimensionless(value) -> dict:
    return {"dimensionless": value}


# ---------------------------------------------------------------------------
# physics resolution


@dataclass(frozen=True)
class Physics:
    params: DeviceParams
    pumps: PumpConfig
    spectrum: NoiseSpectrum
    coeffs: EffectiveCoeffs
    rates: DissipationRates | None
    solved: dict


def make_spectrum(cfg: ScenarioConfig, params: DeviceParams) -> NoiseSpectrum:
    sp = cfg.spectrum
    if sp.preset in ("white", "engineered"):
        gamma = params.Gamma_1 if sp.Gamma_1 is None else TWO_PI * sp.Gamma_1
        return NoiseSpectrum.white(gamma)
    return NoiseSpectrum.bandpass(TWO_PI * sp.center, TWO_PI * sp.halfwidth, TWO_PI * sp.Gamma_in,
                                  TWO_PI * sp.Gamma_out)


def g3_for_alpha(alpha_squared: float, g_4ph) -> float:
    """Drive ``g3`` giving ``alpha^4 = sqrt(2) g3 / g_4ph`` for a real positive amplitude."""
    return alpha_squared**2 * abs(g_4ph) / math.sqrt(2)


def resolve_physics(cfg: ScenarioConfig, gamma_fg_eng: float | None = None,
                    alpha_squared: float | None = None) -> Physics:
    """Fill ``g1``, ``delta`` and ``g3`` from the design conditions where the config leaves them open.

    Parameter combinations outside the scheme's regime surface as
    :class:`ConfigError`.
    """
    dev, pc = cfg.device, cfg.pumps
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            base = DeviceParams.from_hz(chi_aa=dev.chi_aa, chi_bb=dev.chi_bb, chi_ab=dev.chi_ab, Delta=dev.Delta)
        solved = {}
        if pc.g1 is None:
            sol = solve_constraints(base.chi_aa, base.chi_bb, base.Delta, TWO_PI * pc.g2)
            g1 = sol.g1
            solved["g1"] = True
        else:
            g1 = TWO_PI * pc.g1
        g2 = TWO_PI * pc.g2
        if dev.delta is None:
            chi_fa = 8 * g2**2 / base.Delta - 8 * g1**2 / (base.chi_bb + base.Delta)
            delta = -chi_fa / 4
            solved["delta"] = True
        else:
            delta = TWO_PI * dev.delta
        gfg = TWO_PI * dev.Gamma_fg_eng if gamma_fg_eng is None else gamma_fg_eng
        params = DeviceParams(
            chi_aa=base.chi_aa, chi_bb=base.chi_bb, chi_ab=base.chi_ab, Delta=base.Delta, delta=delta,
            Gamma_1=TWO_PI * dev.Gamma_1, Gamma_fg_eng=gfg, kappa_1ph=TWO_PI * dev.kappa_1ph,
            omega_b_tilde=None if dev.omega_b_tilde is None else TWO_PI * dev.omega_b_tilde,
        )
        spectrum = make_spectrum(cfg, params)
        levels = cfg.simulation.rwa_levels
        c0 = effective_coefficients(params, PumpConfig(g1, g2, 0.0), levels=levels)
        a2 = alpha_squared if alpha_squared is not None else (
            None if cfg.simulation.alpha_target is None else cfg.simulation.alpha_target**2)
        if pc.g3 is not None and alpha_squared is None:
            g3 = TWO_PI * pc.g3
        elif a2 is not None:
            g3 = g3_for_alpha(a2, c0.g_4ph)
            solved["g3"] = True
        else:
            g3 = 0.0
        pumps = PumpConfig(g1, g2, g3)
        coeffs = effective_coefficients(params, pumps, levels=levels)
    except (CascadeError, ArithmeticError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"device/pump parameters rejected: {exc}") from exc
    try:
        rates = cavity_rates(coeffs, spectrum, params)
    except RateError as exc:
        log.info("cavity rates unavailable: %s", exc)
        rates = None
    return Physics(params, pumps, spectrum, coeffs, rates, solved)


def derived_quantities(ph: Physics, space=None) -> dict:
    p, c, r = ph.params, ph.coeffs, ph.rates
    pf = pump_frequencies(p, 0.0, 0.0)
    res = constraint_residuals(p.chi_aa, p.chi_bb, p.Delta, ph.pumps.g1, ph.pumps.g2, p.delta)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        kerr_dev = check_kerr_consistency(p.chi_aa, p.chi_bb, p.chi_ab)
    out = {
        "g1": freq(ph.pumps.g1),
        "g2": freq(ph.pumps.g2),
        "g3": freq(ph.pumps.g3),
        "delta": freq(p.delta),
        "delta_magnitude": freq(abs(p.delta)),
        # offsets of the pump tones from 2w_a - w_b (p1, p2) and w_b (p3)
        "pump_offset_p1": freq(pf.omega_p1),
        "pump_offset_p2": freq(pf.omega_p2),
        "pump_offset_p3": freq(pf.omega_p3),
        "g_4ph": freq(c.g_4ph),
        "eps_4ph": freq(c.eps_4ph),
        "chi_ea": freq(c.chi_ea),
        "chi_fa": freq(c.chi_fa),
        "zeta_gaa": freq(c.zeta_gaa),
        "zeta_eaa": freq(c.zeta_eaa),
        "zeta_faa": freq(c.zeta_faa),
        "e_level_g3_shift": freq(c.e_shift),
        "rabi_half_period": seconds(math.pi / (2 * math.sqrt(24) * abs(c.g_4ph)) if c.g_4ph else None),
    }
    if r is not None:
        out.update({
            "kappa_4ph": freq(r.kappa_4ph),
            "kappa_2ph": freq(r.kappa_2ph),
            "inverse_kappa_4ph": seconds(1 / r.kappa_4ph if r.kappa_4ph > 0 else None),
            "inverse_kappa_2ph": seconds(1 / r.kappa_2ph if r.kappa_2ph > 0 else None),
            "alpha": dimensionless(r.alpha),
            "alpha_abs": dimensionless(abs(r.alpha)),
            "Gamma_down_eg": freq(r.gamma_eg),
            "Gamma_down_fe": freq(r.gamma_fe),
            "kappa2_gg": freq(r.kappa2_gg),
            "kappa2_ee": freq(r.kappa2_ee),
            "kappa2_ff": freq(r.kappa2_ff),
            "kappa2_fg": freq(r.kappa2_fg),
        })
    flags = {
        "chi_bb_over_Delta": p.chi_bb / p.Delta,
        "regime_ok": p.chi_bb >= 4 * p.Delta,
        "zeta_constraint_residual": res[0],
        "delta_constraint_residual": res[1],
        "kerr_consistency_deviation": kerr_dev,
        "solved_from_constraints": sorted(ph.solved),
    }
    if space is not None:
        fh = build_hsys_fourier(p, ph.pumps, space)
        flags["perturbative_ratio"] = perturbative_ratio(fh)
        flags["perturbative_ok"] = flags["perturbative_ratio"] <= 0.3
    out["validity"] = {k: dimensionless(v) for k, v in flags.items()}
    return out


# ---------------------------------------------------------------------------
# run plumbing


@dataclass
class RunReport:
    scenario: str
    config: dict
    derived: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)

    def payload(self) -> dict:
        return {
            "scenario": self.scenario,
            "schema_version": self.config.get("schema_version"),
            "resolved_config": self.config,
            "derived": self.derived,
            "summary": self.summary,
            "files": sorted(self.files),
            "stats": self.stats,
        }


class _Run:
    def __init__(self, cfg: ScenarioConfig, out_dir: Path, fixed_step: bool, plots: bool):
        self.cfg = cfg
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.fixed_step = fixed_step
        self.plots = plots and cfg.output.plots
        self.report = RunReport(cfg.scenario, resolved(cfg))
        self.clock = time.perf_counter()

    def options(self, **kw) -> PropagateOptions:
        sim = self.cfg.simulation
        method = "fixed" if self.fixed_step else sim.method
        return PropagateOptions(method=method, rtol=sim.tolerance, dt=sim.fixed_step, **kw)

    def emit(self, traj: Trajectory, stem: str, metadata: dict | None = None):
        fmts = self.cfg.output.formats
        if "csv" in fmts:
            io.write_csv(traj, self.out / f"{stem}.csv")
            self.report.files.append(f"{stem}.csv")
        if "json" in fmts:
            io.write_json(io.trajectory_payload(traj, metadata), self.out / f"{stem}.json")
            self.report.files.append(f"{stem}.json")
        self.report.stats[stem] = {k: v for k, v in traj.stats.items() if k != "wall_time_s"}
        self.report.timing[stem] = traj.stats.get("wall_time_s")

    def emit_table(self, header: list, rows: list, stem: str):
        fmts = self.cfg.output.formats
        if "csv" in fmts:
            path = self.out / f"{stem}.csv"
            with open(path, "w", newline="") as fh:
                fh.write(",".join(header) + "\n")
                for row in rows:
                    fh.write(",".join(_cell(v) for v in row) + "\n")
            self.report.files.append(f"{stem}.csv")
        if "json" in fmts:
            io.write_json({"columns": header, "rows": rows}, self.out / f"{stem}.json")
            self.report.files.append(f"{stem}.json")

    def wigner(self, rho_cav: np.ndarray, stem: str):
        wg = self.cfg.output.wigner_grid
        x = np.linspace(-wg.range, wg.range, wg.points)
        grid = x[None, :] + 1j * x[:, None]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            w = wigner(QuantumState(rho_cav, SingleMode(rho_cav.shape[0])), grid)
        io.write_wigner_csv(grid, w, self.out / f"{stem}.csv")
        self.report.files.append(f"{stem}.csv")
        if self.plots:
            from .plotting import plot_wigner
            plot_wigner(x, w, self.out / f"{stem}.png", title=stem)
            self.report.files.append(f"{stem}.png")

    def plot(self, fn_name: str, *args, stem: str, **kw):
        if not self.plots:
            return
        from . import plotting
        getattr(plotting, fn_name)(*args, path=self.out / f"{stem}.png", **kw)
        self.report.files.append(f"{stem}.png")

    def finish(self) -> RunReport:
        self.report.timing["total_s"] = time.perf_counter() - self.clock
        io.write_json(self.report.payload(), self.out / "report.json")
        io.write_json({"wall_time_s": self.report.timing}, self.out / "timing.json")
        (self.out / "resolved_config.yaml").write_text(_yaml(self.report.config))
        return self.report


def _yaml(d):
    import yaml
    return yaml.safe_dump(d, sort_keys=False)


def _cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return io.fmt(v)
    return str(v)


def _cavity_dim(cfg: ScenarioConfig, alpha) -> int:
    if cfg.simulation.cavity_dim is not None:
        return cfg.simulation.cavity_dim
    return default_cavity_dim(alpha if alpha is not None else 0)


def _snapshot_times(cfg: ScenarioConfig, t_final: float) -> list:
    ts = [t for t in cfg.output.snapshot_times if t <= t_final * (1 + 1e-12)]
    return [min(t, t_final) for t in ts] or [t_final]


def oscillation_frequency(t: np.ndarray, y: np.ndarray, pad: int = 16) -> float | None:
    """Dominant frequency (cycles per unit time) of a uniformly sampled signal.

    Zero-padded FFT peak; fast micromotion in the lab-frame models carries
    far less weight than the slow exchange and does not win the argmax.
    """
    y = np.asarray(y, float)
    if len(y) < 4 or np.ptp(y) == 0:
        return None
    n = len(y) * pad
    spec = np.abs(np.fft.rfft(y - y.mean(), n=n))
    f = np.fft.rfftfreq(n, t[1] - t[0])
    k = int(np.argmax(spec[1:])) + 1
    if k + 1 < len(spec):
        a, b, c = np.log(spec[k - 1:k + 2] + 1e-300)
        den = a - 2 * b + c
        if den != 0:
            return float(f[k] + 0.5 * (a - c) / den * (f[1] - f[0]))
    return float(f[k])


def first_peak_time(t, y) -> float | None:
    """Time of the first local maximum above half the signal range."""
    y = np.asarray(y, float)
    thresh = y.min() + 0.5 * np.ptp(y)
    for i in range(1, len(y) - 1):
        if y[i] > thresh and y[i] >= y[i - 1] and y[i] > y[i + 1]:
            a, b, c = y[i - 1], y[i], y[i + 1]
            den = a - 2 * b + c
            return float(t[i] + (0.5 * (a - c) / den * (t[1] - t[0]) if den else 0.0))
    return None


# ---------------------------------------------------------------------------
# scenarios


def run_derive_params(cfg: ScenarioConfig, out_dir, fixed_step=False, plots=True) -> RunReport:
    run = _Run(cfg, out_dir, fixed_step, plots)
    ph = resolve_physics(cfg)
    space = HilbertSpace(cfg.simulation.cavity_dim or 8, cfg.simulation.junction_dim)
    run.report.derived = derived_quantities(ph, space)
    return run.finish()


def run_fig2(cfg: ScenarioConfig, out_dir, fixed_step=False, plots=True, reduced=False) -> RunReport:
    """Four-photon exchange from ``|f,0>``: effective Hamiltonian against the pumped Fourier model."""
    run = _Run(cfg, out_dir, fixed_step, plots)
    sim = cfg.simulation
    ph = resolve_physics(cfg)
    run.report.derived = derived_quantities(ph)
    N = sim.cavity_dim or 8
    t_final = min(sim.t_final, sim.reduced_t_final) if reduced else sim.t_final
    times = np.linspace(0.0, t_final, sim.samples)

    def observables(space):
        return {"pop_f0": population(space, "f", 0), "pop_g4": population(space, "g", 4),
                "pop_e2": population(space, "e", 2)}

    s3 = HilbertSpace(N, 3)
    eff_model = LindbladModel.static(build_H_eff(ph.coeffs, s3))
    eff = propagate(eff_model, basis_state(s3, "f", 0), times, observables(s3), options=run.options())
    run.emit(eff, "fig2_effective", {"model": "effective Hamiltonian", "cavity_dim": N})
    summary = {
        "effective_peak_g4": dimensionless(float(eff.observables["pop_g4"].max())),
        "effective_half_period": seconds(first_peak_time(times, eff.observables["pop_g4"])),
        "analytic_half_period": run.report.derived["rabi_half_period"],
    }
    series = [("effective", eff)]
    if sim.full_model:
        sf = HilbertSpace(N, sim.junction_dim)
        fh = build_hsys_fourier(ph.params, ph.pumps, sf, frame=sim.frame)
        full = propagate(LindbladModel(fh), basis_state(sf, "f", 0), times, observables(sf), options=run.options())
        run.emit(full, "fig2_full", {"model": "pumped Fourier Hamiltonian", "frame": sim.frame,
                                     "cavity_dim": N, "junction_dim": sim.junction_dim})
        fe = oscillation_frequency(times, eff.observables["pop_g4"])
        ff = oscillation_frequency(times, full.observables["pop_g4"])
        summary.update({
            "full_peak_g4": dimensionless(float(full.observables["pop_g4"].max())),
            "full_max_e2": dimensionless(float(full.observables["pop_e2"].max())),
            "effective_frequency": {"hz_cycles": fe},
            "full_frequency": {"hz_cycles": ff},
            "frequency_ratio": dimensionless(None if not (fe and ff) else ff / fe),
        })
        series.append(("full", full))
    run.report.summary = summary
    run.plot("plot_populations", series, stem="fig2_populations")
    return run.finish()


def _fig3_models(ph: Physics, N: int, cfg: ScenarioConfig):
    if ph.rates is None:
        raise RateError("stabilisation needs finite kappa_4ph and alpha")
    cav = SingleMode(N)
    eff_model = build_cavity_me(ph.rates, ph.coeffs, cav)
    target = cat_state_mod4(ph.rates.alpha, N)
    return cav, eff_model, target


def run_fig3(cfg: ScenarioConfig, out_dir, fixed_step=False, plots=True, reduced=False) -> RunReport:
    """Cat stabilisation from vacuum: cavity-only effective model and the pumped full model."""
    run = _Run(cfg, out_dir, fixed_step, plots)
    sim = cfg.simulation
    ph = resolve_physics(cfg)
    run.report.derived = derived_quantities(ph)
    alpha = ph.rates.alpha if ph.rates is not None else None
    N = _cavity_dim(cfg, alpha)
    cav, eff_model, target = _fig3_models(ph, N, cfg)
    times = np.linspace(0.0, sim.t_final, sim.samples)
    snaps = _snapshot_times(cfg, sim.t_final)
    obs_c = {"fidelity": cavity_fidelity(cav, target), "purity": cavity_purity(cav), "parity": cavity_parity(cav)}
    eff = propagate(eff_model, fock_state(0, N), times, obs_c, snaps, run.options())
    run.emit(eff, "fig3_effective", {"model": "cavity effective", "cavity_dim": N})
    for t, rho in sorted(eff.snapshots.items()):
        run.wigner(rho, f"fig3_effective_wigner_t{t * 1e6:.3f}us")
    F = eff.observables["fidelity"]
    tail = F[int(0.9 * len(F)):]
    summary = {
        "effective_final_fidelity": dimensionless(float(F[-1])),
        "effective_max_fidelity": dimensionless(float(F.max())),
        "effective_saturation_fidelity": dimensionless(float(tail.mean())),
        "effective_fidelity_at_t_final": dimensionless(float(F[-1])),
        "effective_time_to_threshold": seconds(time_to_fidelity(eff, sim.fidelity_threshold)),
        "effective_final_parity": dimensionless(float(eff.observables["parity"][-1])),
        "effective_parity_deviation": dimensionless(float(np.max(np.abs(eff.observables["parity"] - 1)))),
    }
    series = [("effective", eff)]
    if sim.full_model:
        t_full = min(sim.t_final, sim.reduced_t_final) if reduced else sim.t_final
        n_full = max(2, int(round((sim.samples - 1) * t_full / sim.t_final)) + 1)
        tf_grid = np.linspace(0.0, t_full, n_full)
        space = HilbertSpace(N, sim.junction_dim)
        full_model = build_full_me(ph.params, ph.pumps, space, frame=sim.frame)
        obs_f = {"fidelity": cavity_fidelity(space, target), "purity": cavity_purity(space),
                 "parity": cavity_parity(space), "pop_e": _level_population(space, 1),
                 "pop_f": _level_population(space, 2)}
        full_snaps = [t for t in snaps if t <= t_full]
        full = propagate(full_model, basis_state(space, "g", 0), tf_grid, obs_f, full_snaps, run.options())
        run.emit(full, "fig3_full", {"model": "pumped full", "frame": sim.frame, "cavity_dim": N,
                                     "junction_dim": sim.junction_dim})
        for t, rho in sorted(full.snapshots.items()):
            run.wigner(partial_trace_junction(rho, space), f"fig3_full_wigner_t{t * 1e6:.3f}us")
        eff_on_grid = propagate(eff_model, fock_state(0, N), tf_grid, {"fidelity": obs_c["fidelity"]},
                                options=run.options())
        diff = np.abs(full.observables["fidelity"] - eff_on_grid.observables["fidelity"])
        summary.update({
            "full_window": seconds(t_full),
            "full_final_fidelity": dimensionless(float(full.observables["fidelity"][-1])),
            "full_vs_effective_max_abs_difference": dimensionless(float(diff.max())),
        })
        series.append(("full", full))
    run.report.summary = summary
    run.plot("plot_fidelity_purity", series, stem="fig3_overlap_purity")
    return run.finish()


def _level_population(space: HilbertSpace, level: int):
    N = space.cavity_dim
    sl = slice(level * N, (level + 1) * N)
    return lambda rho: float(np.real(np.trace(rho[sl, sl])))


CI_GAMMA_GRID_HZ = tuple(10.0 ** (5 + 0.5 * k) for k in range(5))


def fig4_sweep(cfg: ScenarioConfig, alpha_squared: float, gamma_grid_hz, times,
               options: PropagateOptions | None = None, threads=None, with_effective=True):
    """Three-level model across ``Gamma_fg_eng``; returns rows of ``(gamma_hz, traj, t_threshold, eff_traj)``."""
    sim = cfg.simulation
    ph0 = resolve_physics(cfg, alpha_squared=alpha_squared)
    if ph0.rates is None:
        raise RateError("sweep needs a finite cat amplitude")
    N = sim.cavity_dim or default_cavity_dim(math.sqrt(alpha_squared))
    space = HilbertSpace(N, 3)
    target = cat_state_mod4(ph0.rates.alpha, N)
    obs = {"fidelity": cavity_fidelity(space, target)}
    cache = {}

    def physics(g_hz):
        if g_hz not in cache:
            cache[g_hz] = resolve_physics(cfg, gamma_fg_eng=TWO_PI * g_hz, alpha_squared=alpha_squared)
        return cache[g_hz]

    def factory(g_hz):
        ph = physics(g_hz)
        return build_three_level_me(ph.coeffs, ph.rates, space)

    rows = sweep(factory, list(gamma_grid_hz), basis_state(space, "g", 0), times, obs, options, threads)
    out = []
    cav = SingleMode(N)
    cav_obs = {"fidelity": cavity_fidelity(cav, target)}
    for row in rows:
        t_thr = None if row.failed else time_to_fidelity(row.trajectory, sim.fidelity_threshold)
        eff = None
        if with_effective:
            ph = physics(row.parameter)
            eff = propagate(build_cavity_me(ph.rates, ph.coeffs, cav), fock_state(0, N), times, cav_obs)
        out.append((row.parameter, row.trajectory, t_thr, eff, row.error))
    return out, ph0


def run_fig4(cfg: ScenarioConfig, out_dir, fixed_step=False, plots=True, reduced=False) -> RunReport:
    """Optimum engineered f-g decay: time to the fidelity threshold across a ``Gamma_fg_eng`` grid.

    ``reduced`` swaps the configured grid for five log-spaced points in
    [0.1, 10] MHz.
    """
    run = _Run(cfg, out_dir, fixed_step, plots)
    sim = cfg.simulation
    times = np.linspace(0.0, sim.t_final, sim.samples)
    grid = list(CI_GAMMA_GRID_HZ) if reduced else sim.gamma_fg_grid
    threshold_rows, summary = [], {}
    curves = {}
    ph_ref = resolve_physics(cfg, alpha_squared=sim.alpha_squared[0])
    run.report.derived = derived_quantities(ph_ref)
    for a2 in sim.alpha_squared:
        rows, ph0 = fig4_sweep(cfg, a2, grid, times, run.options())
        surface = Trajectory(times=times, observables={}, stats={"method": run.options().method})
        effective = Trajectory(times=times, observables={})
        best = None
        for g_hz, traj, t_thr, eff, err in rows:
            tag = f"gfg_{g_hz:.6g}hz"
            if traj is not None:
                surface.observables[tag] = traj.observables["fidelity"]
                run.report.stats.setdefault(f"fig4_a2_{a2:g}", {})[tag] = {
                    k: v for k, v in traj.stats.items() if k != "wall_time_s"}
            if eff is not None:
                effective.observables[tag] = eff.observables["fidelity"]
            max_diff = None
            if traj is not None and eff is not None:
                max_diff = float(np.max(np.abs(traj.observables["fidelity"] - eff.observables["fidelity"])))
            threshold_rows.append([a2, g_hz, t_thr, None if traj is None else float(traj.observables["fidelity"][-1]),
                                   max_diff, err is None])
            if t_thr is not None and (best is None or t_thr < best[1]):
                best = (g_hz, t_thr)
        stem = f"fig4_fidelity_surface_a2_{a2:g}"
        run.emit(surface, stem, {"alpha_squared": a2, "model": "three-level"})
        run.emit(effective, f"fig4_effective_a2_{a2:g}", {"alpha_squared": a2, "model": "cavity effective"})
        summary[f"alpha_squared_{a2:g}"] = {
            "optimal_gamma_fg_eng": {"hz": None if best is None else best[0],
                                     "rad_s": None if best is None else TWO_PI * best[0]},
            "optimal_time_to_threshold": seconds(None if best is None else best[1]),
            "alpha": dimensionless(ph0.rates.alpha),
        }
        curves[a2] = [(r[1], r[2]) for r in threshold_rows if r[0] == a2]
    header = ["alpha_squared", "gamma_fg_eng_hz", "t_threshold_s", "final_fidelity",
              "max_abs_diff_vs_effective", "ok"]
    run.emit_table(header, threshold_rows, "fig4_time_to_threshold")
    run.report.summary = summary
    run.plot("plot_time_to_threshold", curves, stem="fig4_time_to_threshold", threshold=sim.fidelity_threshold)
    return run.finish()


def run_error_budget(cfg: ScenarioConfig, out_dir, fixed_step=False, plots=True, reduced=False) -> RunReport:
    """``p1``, ``p2`` and their ratio over a grid of check intervals and single-photon loss rates."""
    run = _Run(cfg, out_dir, fixed_step, plots)
    sim = cfg.simulation
    ph = resolve_physics(cfg)
    run.report.derived = derived_quantities(ph)
    if sim.kappa_2ph is not None:
        kappa_2ph = TWO_PI * sim.kappa_2ph
    elif ph.rates is not None:
        kappa_2ph = ph.rates.kappa_2ph
    else:
        raise RateError("no kappa_2ph: set simulation.kappa_2ph or give pumps that define the rates")
    if ph.rates is not None and ph.rates.alpha:
        alpha = ph.rates.alpha
    elif sim.alpha_target is not None:
        alpha = sim.alpha_target
    else:
        raise RateError("no cat amplitude: set simulation.alpha_target or pumps.g3")
    rows = []
    for k1 in sim.kappa_1ph_grid:
        for dt in sim.delta_t_grid:
            b = error_budget(TWO_PI * k1, kappa_2ph, alpha, dt)
            rows.append([dt, k1, kappa_2ph / TWO_PI, b.p1, b.p2, b.ratio, b.requirement_met, b.target_ratio_met])
    header = ["delta_t_s", "kappa_1ph_hz", "kappa_2ph_hz", "p1", "p2", "ratio", "requirement_met",
              "target_ratio_met"]
    run.emit_table(header, rows, "error_budget")
    run.report.summary = {"kappa_2ph": freq(kappa_2ph), "alpha": dimensionless(alpha),
                          "all_requirements_met": dimensionless(all(r[6] for r in rows))}
    run.plot("plot_error_budget", rows, stem="error_budget")
    return run.finish()


def run_custom(cfg: ScenarioConfig, out_dir, fixed_step=False, plots=True, reduced=False) -> RunReport:
    """Any of the four models from a chosen basis state, with the standard observables."""
    run = _Run(cfg, out_dir, fixed_step, plots)
    sim = cfg.simulation
    ph = resolve_physics(cfg)
    run.report.derived = derived_quantities(ph)
    alpha = ph.rates.alpha if ph.rates is not None else None
    N = _cavity_dim(cfg, alpha)
    lvl, n = sim.initial.level, sim.initial.n
    if n >= N:
        raise ConfigError(f"simulation.initial.n = {n} outside cavity_dim = {N}")
    t_final = min(sim.t_final, sim.reduced_t_final) if reduced else sim.t_final
    times = np.linspace(0.0, t_final, sim.samples)
    if sim.model == "cavity":
        if ph.rates is None:
            raise RateError("cavity model needs finite rates")
        if lvl != "g":
            raise ConfigError("cavity model starts with the junction in g")
        space = SingleMode(N)
        model = build_cavity_me(ph.rates, ph.coeffs, space)
        rho0 = fock_state(n, N)
        obs = {}
    else:
        J = sim.junction_dim if sim.model == "full" else 3
        space = HilbertSpace(N, J)
        if sim.model == "full":
            model = build_full_me(ph.params, ph.pumps, space, frame=sim.frame)
        elif sim.model == "three-level":
            if ph.rates is None:
                raise RateError("three-level model needs finite rates")
            model = build_three_level_me(ph.coeffs, ph.rates, space)
        else:
            model = LindbladModel.static(build_H_eff(ph.coeffs, space))
        rho0 = basis_state(space, lvl, n)
        obs = {f"pop_{lvl}{n}": population(space, lvl, n)}
    if alpha is not None and alpha != 0:
        obs["fidelity"] = cavity_fidelity(space, cat_state_mod4(alpha, N))
    obs.update({"purity": cavity_purity(space), "parity": cavity_parity(space), "photon_number": photon_number(space)})
    snaps = [t for t in cfg.output.snapshot_times if t <= t_final]
    traj = propagate(model, rho0, times, obs, snaps, run.options())
    run.emit(traj, "custom", {"model": sim.model, "cavity_dim": N})
    for t, rho in sorted(traj.snapshots.items()):
        rc = rho if isinstance(space, SingleMode) else partial_trace_junction(rho, space)
        run.wigner(rc, f"custom_wigner_t{t * 1e6:.3f}us")
    run.report.summary = {k: dimensionless(float(v[-1])) for k, v in traj.observables.items()}
    run.plot("plot_series", traj, stem="custom")
    return run.finish()


RUNNERS = {
    "derive-params": run_derive_params,
    "fig2-exchange": run_fig2,
    "fig3-stabilization": run_fig3,
    "fig4-sweep": run_fig4,
    "error-budget": run_error_budget,
    "custom": run_custom,
}


def run(cfg: ScenarioConfig, out_dir=None, fixed_step=False, reduced=False, plots=True) -> RunReport:
    out_dir = Path(out_dir if out_dir is not None else cfg.output.directory)
    fn = RUNNERS[cfg.scenario]
    if cfg.scenario == "derive-params":
        return fn(cfg, out_dir, fixed_step, plots)
    return fn(cfg, out_dir, fixed_step, plots, reduced=reduced)

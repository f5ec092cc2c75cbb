"""Strict YAML run configuration.

Every frequency or rate in a config file is in Hz (value / 2 pi); times are in
seconds.  Unknown keys anywhere in the tree are rejected before any
computation starts, and :func:`resolved` returns the fully materialised tree
that each run echoes next to its outputs.

A minimal file::

    schema_version: 1
    scenario: derive-params
    device: {chi_aa: 312, chi_bb: 200.0e6, chi_ab: 0.5e6, Delta: 50.0e6}
    pumps: {g2: 2.0e6, g3: 460.0e3}
"""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError

SCHEMA_VERSION = 1
SCENARIOS = ("derive-params", "fig2-exchange", "fig3-stabilization", "fig4-sweep", "error-budget", "custom")
# CLI sub-command -> scenario name
COMMANDS = {
    "derive-params": "derive-params",
    "fig2": "fig2-exchange",
    "fig3": "fig3-stabilization",
    "fig4": "fig4-sweep",
    "error-budget": "error-budget",
    "custom": "custom",
}


@dataclass
class DeviceSection:
    chi_aa: float = 312.0
    chi_bb: float = 200.0e6
    chi_ab: float = 0.5e6
    Delta: float = 50.0e6
    # null: solved from the degeneracy conditions
    delta: float | None = None
    Gamma_1: float = 0.0
    Gamma_fg_eng: float = 0.0
    kappa_1ph: float = 0.0
    omega_b_tilde: float | None = None


@dataclass
class PumpSection:
    # g1 null: solved from the degeneracy conditions; g3 null: set by alpha_target
    g1: float | None = None
    g2: float = 2.0e6
    g3: float | None = None


@dataclass
class SpectrumSection:
    preset: str = "white"
    Gamma_1: float | None = None
    center: float | None = None
    halfwidth: float | None = None
    Gamma_in: float | None = None
    Gamma_out: float | None = None


@dataclass
class InitialSection:
    level: str = "g"
    n: int = 0


@dataclass
class SimulationSection:
    t_final: float = 50.0e-6
    samples: int = 201
    tolerance: float = 1.0e-8
    cavity_dim: int | None = None
    junction_dim: int = 3
    alpha_target: float | None = None
    rwa_levels: int = 3
    method: str = "auto"
    fixed_step: float | None = None
    frame: str = "linear"
    full_model: bool = True
    reduced_t_final: float = 5.0e-6
    model: str = "three-level"
    initial: InitialSection = field(default_factory=InitialSection)
    gamma_fg_grid: list = field(default_factory=lambda: [1.0e5, 3.162e5, 1.0e6, 3.162e6, 1.0e7])
    alpha_squared: list = field(default_factory=lambda: [4.0])
    fidelity_threshold: float = 0.9
    delta_t_grid: list = field(default_factory=lambda: [1.0e-7, 3.0e-7, 1.0e-6, 3.0e-6, 1.0e-5])
    kappa_1ph_grid: list = field(default_factory=lambda: [100.0, 300.0, 1000.0])
    kappa_2ph: float | None = None


@dataclass
class WignerSection:
    range: float = 3.0
    points: int = 61


@dataclass
class OutputSection:
    directory: str = "out"
    formats: list = field(default_factory=lambda: ["csv", "json"])
    wigner_grid: WignerSection = field(default_factory=WignerSection)
    snapshot_times: list = field(default_factory=list)
    plots: bool = True


@dataclass
class ScenarioConfig:
    scenario: str
    schema_version: int = SCHEMA_VERSION
    device: DeviceSection = field(default_factory=DeviceSection)
    pumps: PumpSection = field(default_factory=PumpSection)
    spectrum: SpectrumSection = field(default_factory=SpectrumSection)
    simulation: SimulationSection = field(default_factory=SimulationSection)
    output: OutputSection = field(default_factory=OutputSection)


def _build(cls, data, path: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{path or 'config'}: unknown key(s) {', '.join(map(str, unknown))}")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        where = f"{path}.{f.name}" if path else f.name
        kwargs[f.name] = _coerce(hints[f.name], data[f.name], where)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from None


def _coerce(tp, value, where):
    if dataclasses.is_dataclass(tp):
        return _build(tp, value, where)
    args = typing.get_args(tp)
    optional = type(None) in args
    if value is None:
        if optional:
            return None
        raise ConfigError(f"{where}: value required")
    base = next((a for a in args if a is not type(None)), tp) if args else tp
    if base is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false")
        return value
    if base is float:
        # YAML 1.1 loads 2.0e6 (no exponent sign) as a string
        if isinstance(value, str):
            try:
                return float(value)
            except ValueError:
                raise ConfigError(f"{where}: expected a number, got {value!r}") from None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if base is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if base is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if base is list or typing.get_origin(base) is list:
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list")
        return [_number_or_raw(v) for v in value]
    return value


def _number_or_raw(v):
    if isinstance(v, str):
        try:
            return float(v)
        except ValueError:
            return v
    return v


def _validate(cfg: ScenarioConfig):
    if cfg.schema_version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version {cfg.schema_version} not supported (expected {SCHEMA_VERSION})")
    if cfg.scenario not in SCENARIOS:
        raise ConfigError(f"scenario must be one of {', '.join(SCENARIOS)}; got {cfg.scenario!r}")
    sim, out = cfg.simulation, cfg.output
    if cfg.spectrum.preset not in ("white", "engineered", "bandpass"):
        raise ConfigError(f"spectrum.preset must be white, engineered or bandpass; got {cfg.spectrum.preset!r}")
    if cfg.spectrum.preset == "bandpass":
        missing = [k for k in ("center", "halfwidth", "Gamma_in", "Gamma_out") if getattr(cfg.spectrum, k) is None]
        if missing:
            raise ConfigError(f"bandpass spectrum needs {', '.join(missing)}")
        if cfg.device.omega_b_tilde is None:
            raise ConfigError("bandpass spectrum needs device.omega_b_tilde")
    if cfg.spectrum.preset == "engineered" and cfg.device.Gamma_fg_eng <= 0:
        raise ConfigError("engineered spectrum needs device.Gamma_fg_eng > 0")
    if sim.t_final <= 0 or sim.reduced_t_final <= 0:
        raise ConfigError("simulation.t_final must be positive")
    if sim.samples < 2:
        raise ConfigError("simulation.samples must be at least 2")
    if not 0 < sim.tolerance < 1:
        raise ConfigError("simulation.tolerance must lie in (0, 1)")
    if sim.junction_dim < 3:
        raise ConfigError("simulation.junction_dim must be at least 3")
    if sim.cavity_dim is not None and sim.cavity_dim < 5:
        raise ConfigError("simulation.cavity_dim must be at least 5")
    if sim.rwa_levels not in (3, 4):
        raise ConfigError("simulation.rwa_levels must be 3 or 4")
    if sim.method not in ("auto", "rk", "fixed", "stiff"):
        raise ConfigError("simulation.method must be auto, rk, fixed or stiff")
    if sim.frame not in ("linear", "kerr"):
        raise ConfigError("simulation.frame must be linear or kerr")
    if sim.model not in ("full", "three-level", "cavity", "effective"):
        raise ConfigError("simulation.model must be full, three-level, cavity or effective")
    if sim.initial.level not in ("g", "e", "f"):
        raise ConfigError("simulation.initial.level must be g, e or f")
    if sim.initial.n < 0:
        raise ConfigError("simulation.initial.n must be non-negative")
    for name in ("gamma_fg_grid", "alpha_squared", "delta_t_grid", "kappa_1ph_grid"):
        vals = getattr(sim, name)
        if not vals or not all(isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0 for v in vals):
            raise ConfigError(f"simulation.{name} must be a non-empty list of positive numbers")
        setattr(sim, name, [float(v) for v in vals])
    if not 0 < sim.fidelity_threshold < 1:
        raise ConfigError("simulation.fidelity_threshold must lie in (0, 1)")
    bad = [f for f in out.formats if f not in ("csv", "json")]
    if bad or not out.formats:
        raise ConfigError(f"output.formats must be a non-empty subset of csv, json; got {out.formats}")
    if out.wigner_grid.points < 2 or out.wigner_grid.range <= 0:
        raise ConfigError("output.wigner_grid needs range > 0 and points >= 2")
    for t in out.snapshot_times:
        if isinstance(t, bool) or not isinstance(t, (int, float)) or t < 0:
            raise ConfigError("output.snapshot_times must be non-negative numbers")
    out.snapshot_times = [float(t) for t in out.snapshot_times]


def parse_config(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    if "scenario" not in data:
        raise ConfigError("config: missing required key 'scenario'")
    cfg = _build(ScenarioConfig, data, "")
    _validate(cfg)
    return cfg


def load_config(path, scenario: str | None = None) -> ScenarioConfig:
    """Read and validate a YAML config; ``scenario`` overrides or fills the file's value."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config root must be a mapping")
    if scenario is not None:
        if "scenario" in data and data["scenario"] != scenario:
            raise ConfigError(f"{path}: file is for scenario {data['scenario']!r}, command asks for {scenario!r}")
        data = {**data, "scenario": scenario}
    return parse_config(data)


def resolved(cfg: ScenarioConfig) -> dict:
    """Plain nested dict with every default materialised."""
    return dataclasses.asdict(cfg)


def dump_resolved(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(resolved(cfg), sort_keys=False, default_flow_style=None)

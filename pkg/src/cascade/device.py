"""Device parameters, pump design and the pumped junction-cavity Hamiltonian.

Frequencies are angular (rad/s) inside the package.  Configuration files and
reports use ordinary frequency (Hz, i.e. value / 2 pi); :meth:`DeviceParams.from_hz`
and :func:`to_hz` do the conversion.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, fields
from typing import NamedTuple

import numpy as np

from .errors import DegenerateDetuningError, InvalidRegimeError
from .fock import HilbertSpace, Operator, annihilation, embed

TWO_PI = 2.0 * math.pi


def from_hz(value):
    return TWO_PI * value


def to_hz(value):
    return value / TWO_PI


class RegimeWarning(UserWarning):
    """Parameters are legal but close to where the approximations break down."""


@dataclass(frozen=True)
class DeviceParams:
    """Hamiltonian and decay parameters of the junction-cavity device (rad/s).

    ``delta`` is the small compensation detuning and may be negative; every
    other rate or Kerr strength must be non-negative.  ``omega_b_tilde`` is
    only required when a frequency-dependent noise spectrum is evaluated.
    """

    chi_aa: float
    chi_bb: float
    chi_ab: float
    Delta: float
    delta: float = 0.0
    Gamma_1: float = 0.0
    Gamma_fg_eng: float = 0.0
    kappa_1ph: float = 0.0
    omega_b_tilde: float | None = None

    def __post_init__(self):
        for name in ("chi_aa", "chi_bb", "chi_ab", "Delta", "Gamma_1", "Gamma_fg_eng", "kappa_1ph"):
            if getattr(self, name) < 0:
                raise InvalidRegimeError(f"{name} must be non-negative, got {getattr(self, name)}")
        if self.chi_bb < 3 * self.Delta:
            raise InvalidRegimeError(
                f"scheme needs chi_bb >> Delta; got chi_bb/Delta = {self.chi_bb / self.Delta:.3g} < 3"
            )
        if self.Delta > 0 and self.chi_bb < 4 * self.Delta:
            warnings.warn(
                f"chi_bb/Delta = {self.chi_bb / self.Delta:.3g} is below 4; Raman cascade marginal",
                RegimeWarning,
                stacklevel=3,
            )

    @classmethod
    def from_hz(cls, **values) -> DeviceParams:
        return cls(**{k: (None if v is None else from_hz(v)) for k, v in values.items()})

    def to_hz(self) -> dict:
        return {f.name: (None if getattr(self, f.name) is None else to_hz(getattr(self, f.name)))
                for f in fields(self)}


@dataclass(frozen=True)
class PumpConfig:
    """Two-photon exchange amplitudes ``g1, g2`` and g-f drive ``g3`` (rad/s).

    Pump displacements ``xi`` are optional; when present the couplings must
    agree with :func:`couplings_from_xi`.
    """

    g1: complex = 0.0
    g2: complex = 0.0
    g3: complex = 0.0
    xi: tuple | None = field(default=None)

    @classmethod
    def from_xi(cls, xi1, xi2, xi3, chi_ab, chi_bb) -> PumpConfig:
        g1, g2, g3 = couplings_from_xi(xi1, xi2, xi3, chi_ab, chi_bb)
        return cls(g1, g2, g3, xi=(xi1, xi2, xi3))

    @classmethod
    def from_hz(cls, g1=0.0, g2=0.0, g3=0.0) -> PumpConfig:
        return cls(from_hz(g1), from_hz(g2), from_hz(g3))

    def check(self, chi_ab, chi_bb, rtol=1e-9):
        if self.xi is None:
            return
        expected = couplings_from_xi(*self.xi, chi_ab, chi_bb)
        for name, have, want in zip(("g1", "g2", "g3"), (self.g1, self.g2, self.g3), expected):
            if abs(have - want) > rtol * max(abs(want), 1e-300) and abs(have - want) > 0:
                raise InvalidRegimeError(f"{name}={have} inconsistent with pump displacement ({want})")


class PumpFrequencies(NamedTuple):
    omega_p1: float
    omega_p2: float
    omega_p3: float
    raman_detunings: tuple


def pump_frequencies(params: DeviceParams, omega_a_tilde: float, omega_b_tilde: float) -> PumpFrequencies:
    """Pump tones for the detuned Raman cascade and the g-f two-photon drive."""
    wa, wb = omega_a_tilde, omega_b_tilde
    chi, D, d = params.chi_bb, params.Delta, params.delta
    return PumpFrequencies(
        omega_p1=2 * wa - wb - D + d,
        omega_p2=2 * wa - (wb - chi) + D + d,
        omega_p3=wb - chi / 2 - d / 2,
        raman_detunings=(+D, -D),
    )


def couplings_from_xi(xi1, xi2, xi3, chi_ab, chi_bb):
    """``g_{1,2} = -chi_ab xi_{1,2} / 2`` and ``g_3 = chi_bb conj(xi_3)^2 / 2``."""
    return -0.5 * chi_ab * xi1, -0.5 * chi_ab * xi2, 0.5 * chi_bb * np.conj(xi3) ** 2


def stark_shifted_frequencies(omega_a, omega_b, chi_aa, chi_bb, chi_ab, xi_list):
    pump_power = float(sum(abs(x) ** 2 for x in xi_list))
    wa = omega_a - chi_aa - chi_ab / 2 - chi_ab * pump_power
    wb = omega_b - chi_bb - chi_ab / 2 - 2 * chi_bb * pump_power
    return wa, wb


def kerr_consistency(chi_aa, chi_bb):
    """Cross-Kerr implied by a single junction: ``2 sqrt(chi_aa chi_bb)``."""
    if chi_aa < 0 or chi_bb < 0:
        raise InvalidRegimeError("Kerr strengths must be non-negative")
    return 2.0 * math.sqrt(chi_aa * chi_bb)


def check_kerr_consistency(chi_aa, chi_bb, chi_ab, tolerance=0.05) -> float:
    """Relative deviation of ``chi_ab`` from the single-junction value; warns above 5 %."""
    expected = kerr_consistency(chi_aa, chi_bb)
    if expected == 0:
        deviation = 0.0 if chi_ab == 0 else math.inf
    else:
        deviation = abs(chi_ab - expected) / expected
    if deviation > tolerance:
        warnings.warn(f"chi_ab deviates {deviation:.1%} from 2 sqrt(chi_aa chi_bb)", RegimeWarning, stacklevel=2)
    return deviation


class ConstraintSolution(NamedTuple):
    g1: float
    delta: float


def solve_constraints(chi_aa, chi_bb, Delta, g2) -> ConstraintSolution:
    """Pump strength ``g1`` and detuning ``delta`` restoring the ``|g,4> <-> |f,0>`` degeneracy.

    Inverts ``|g1|^2/Delta - |g2|^2/(chi_bb+Delta) = chi_aa/2`` and then sets
    ``delta = -chi_fa/4``.  The returned ``delta`` is signed.
    """
    if Delta <= 0 or chi_bb <= Delta:
        raise InvalidRegimeError(f"need Delta > 0 and chi_bb > Delta (Delta={Delta}, chi_bb={chi_bb})")
    g2 = abs(g2)
    g1_sq = Delta * (chi_aa / 2 + g2**2 / (chi_bb + Delta))
    g1 = math.sqrt(g1_sq)
    chi_fa = 8 * g2**2 / Delta - 8 * g1_sq / (chi_bb + Delta)
    return ConstraintSolution(g1=g1, delta=-chi_fa / 4)


def constraint_residuals(chi_aa, chi_bb, Delta, g1, g2, delta) -> tuple[float, float]:
    """Relative residuals of the two compensation conditions."""
    zeta_gaa = abs(g1) ** 2 / Delta - abs(g2) ** 2 / (chi_bb + Delta)
    chi_fa = 8 * abs(g2) ** 2 / Delta - 8 * abs(g1) ** 2 / (chi_bb + Delta)
    r1 = (zeta_gaa - chi_aa / 2) / max(abs(chi_aa / 2), abs(zeta_gaa), 1e-300)
    r2 = (delta + chi_fa / 4) / max(abs(delta), abs(chi_fa / 4), 1e-300)
    return r1, r2


# ---------------------------------------------------------------------------
# Fourier-decomposed Hamiltonian


@dataclass(frozen=True)
class FourierHamiltonian:
    """``H(t) = static + sum_k (H_k exp(-i nu_k t) + h.c.)`` with distinct ``nu_k > 0``.

    ``labels`` records which physical branches were merged into each mode.
    """

    static: Operator
    modes: tuple = ()
    labels: tuple = ()

    def __post_init__(self):
        freqs = [nu for nu, _ in self.modes]
        if any(nu <= 0 for nu in freqs):
            raise DegenerateDetuningError("Fourier mode frequencies must be strictly positive")
        if len(set(freqs)) != len(freqs):
            raise DegenerateDetuningError("Fourier mode frequencies must be distinct")
        for _, op in self.modes:
            if op.space != self.static.space:
                raise DegenerateDetuningError("all Fourier terms must share one space")

    @property
    def space(self):
        return self.static.space

    @property
    def max_frequency(self) -> float:
        return max((nu for nu, _ in self.modes), default=0.0)

    @property
    def is_static(self) -> bool:
        return not self.modes

    def matrix(self, t: float) -> np.ndarray:
        h = self.static.data.copy()
        for nu, op in self.modes:
            term = op.data * np.exp(-1j * nu * t)
            h += term + term.conj().T
        return h

    def at(self, t: float) -> Operator:
        return Operator(self.matrix(t), self.space)

    def shifted(self, extra: Operator) -> FourierHamiltonian:
        return FourierHamiltonian(self.static + extra, self.modes, self.labels)


def _merge_branches(branches, space, static, rel_tol=1e-12):
    """Group ``(freq, op, label)`` branches by frequency; fold zero frequency into static.

    ``freq`` is the signed frequency multiplying ``+i t`` in the exponent of
    ``op``; the mode stored is the coefficient of ``exp(-i |freq| t)``.
    """
    scale = max((abs(f) for f, _, _ in branches), default=1.0) or 1.0
    groups: list[list] = []
    for freq, op, label in branches:
        if not np.any(op.data):
            continue
        if abs(freq) <= rel_tol * scale:
            static = static + op + op.dag()
            continue
        coef = op.dag() if freq > 0 else op
        nu = abs(freq)
        for grp in groups:
            if abs(grp[0] - nu) <= rel_tol * scale:
                grp[1] = grp[1] + coef
                grp[2].append(label)
                break
        else:
            groups.append([nu, coef, [label]])
    groups.sort(key=lambda g: g[0])
    for nu, _, labels in groups:
        _check_collision(nu, labels)
    modes = tuple((nu, op) for nu, op, _ in groups)
    return FourierHamiltonian(static, modes, tuple(tuple(lbl) for _, _, lbl in groups))


def _check_collision(nu, labels):
    # the only intended coincidences are Raman pairs (g1 on lower level m, g2 on level 1 - m)
    if len(labels) == 1:
        return
    pumps = sorted(lbl[0] for lbl in labels)
    if len(labels) == 2 and pumps == ["g1", "g2"]:
        m1 = next(lbl[1] for lbl in labels if lbl[0] == "g1")
        m2 = next(lbl[1] for lbl in labels if lbl[0] == "g2")
        if m1 is None or m2 is None or m1 + m2 == 1:
            return
    names = ", ".join(f"{p}[{m}]" for p, m in labels)
    raise DegenerateDetuningError(f"branches {names} collide at nu = {nu:.6e} rad/s")


def _transition_block(space: HilbertSpace, lower: int, width: int) -> Operator:
    """Junction matrix element of ``b^width`` from level ``lower+width`` to ``lower``."""
    J = space.junction_dim
    data = np.zeros((J, J), dtype=complex)
    amp = math.sqrt(math.prod(range(lower + 1, lower + width + 1)))
    data[lower, lower + width] = amp
    return Operator(np.kron(data, np.eye(space.cavity_dim)), space)


def build_hsys_fourier(params: DeviceParams, pumps: PumpConfig, space: HilbertSpace,
                       frame: str = "kerr") -> FourierHamiltonian:
    """Pumped junction-cavity Hamiltonian as a Fourier series.

    ``frame="kerr"`` rotates with ``w_a a^+a + (w_b - delta) b^+b - chi_bb b^+2 b^2 / 2``,
    so each junction transition carries its own frequency: ``g1`` on the
    block with lower level ``m`` oscillates at ``chi_bb m + Delta``, ``g2`` at
    ``chi_bb (m-1) - Delta`` and ``g3`` (two-photon, ``m -> m+2``) at
    ``2 chi_bb m``.  ``frame="linear"`` keeps the junction Kerr term static;
    the pumps then oscillate at ``Delta``, ``chi_bb + Delta`` and ``chi_bb``
    independent of level, and ``D[b]`` is frame invariant.
    """
    if space.junction_dim < 2:
        raise InvalidRegimeError("junction needs at least two levels")
    a = embed(annihilation(space.cavity_dim), "cavity", space)
    adag = a.dag()
    na = adag @ a
    b = embed(annihilation(space.junction_dim), "junction", space)
    nb = b.dag() @ b
    a2 = a @ a
    ad2 = adag @ adag
    chi_aa, chi_bb, chi_ab = params.chi_aa, params.chi_bb, params.chi_ab
    D, d = params.Delta, params.delta

    static = d * nb - (chi_aa / 2) * (ad2 @ a2) - chi_ab * (na @ nb)
    branches = []
    if frame == "kerr":
        for m in range(space.junction_dim - 1):
            block = ad2 @ _transition_block(space, m, 1)
            branches.append((chi_bb * m + D, pumps.g1 * block, ("g1", m)))
            branches.append((chi_bb * (m - 1) - D, pumps.g2 * block, ("g2", m)))
        for m in range(space.junction_dim - 2):
            branches.append((2 * chi_bb * m, -pumps.g3 * _transition_block(space, m, 2), ("g3", m)))
    elif frame == "linear":
        static = static - (chi_bb / 2) * (nb.dag() @ nb - nb)
        branches.append((D, pumps.g1 * (ad2 @ b), ("g1", None)))
        branches.append((-chi_bb - D, pumps.g2 * (ad2 @ b), ("g2", None)))
        branches.append((-chi_bb, -pumps.g3 * (b @ b), ("g3", None)))
    else:
        raise ValueError(f"unknown frame {frame!r}")
    return _merge_branches(branches, space, static)

"""Effective four-photon Hamiltonian, in closed form and by generic second-order RWA.

The closed forms below are the ones reproduced by :func:`second_order_rwa`
on the three-level (``levels=3``) or four-level (``levels=4``) junction
truncation; with ``levels=4`` the virtual third excited level adds a
``g2``/``g1`` correction to ``zeta_faa`` and the ``g3`` Stark shift of ``e``.
Second-order contributions, for ``H(t) = H_0 + sum_k (H_k e^{-i nu_k t} + h.c.)``::

    H_eff = H_0 + sum_k [H_k^+, H_k] / nu_k
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .device import DeviceParams, FourierHamiltonian, PumpConfig, build_hsys_fourier
from .errors import InvalidDimensionError, InvalidRegimeError, SingularDetuningError
from .fock import HilbertSpace, Operator, annihilation, junction_transition

PERTURBATIVE_LIMIT = 0.3


class SecularTermWarning(UserWarning):
    pass


class PerturbativeWarning(UserWarning):
    pass


@dataclass(frozen=True)
class EffectiveCoeffs:
    """Coefficients of the effective junction-cavity Hamiltonian (rad/s)."""

    g_4ph: complex
    eps_4ph: complex
    chi_ea: float
    chi_fa: float
    zeta_gaa: float
    zeta_eaa: float
    zeta_faa: float
    e_shift: float
    chi_aa: float
    chi_ab: float
    delta: float
    levels: int = 3
    # pass-through pump and device values used by the rate formulas
    g1: complex = 0.0
    g2: complex = 0.0
    g3: complex = 0.0
    chi_bb: float = 0.0
    Delta: float = 0.0

    def scaled(self, **changes) -> EffectiveCoeffs:
        return EffectiveCoeffs(**{**self.__dict__, **changes})


def _inv(x, name):
    if x == 0:
        raise SingularDetuningError(f"vanishing denominator {name}")
    return 1.0 / x


def effective_coefficients(params: DeviceParams, pumps: PumpConfig, levels: int = 3) -> EffectiveCoeffs:
    """Closed-form second-order RWA coefficients.

    ``levels`` is the number of junction levels kept in the virtual
    processes (3 or 4).
    """
    if levels not in (3, 4):
        raise InvalidRegimeError(f"levels must be 3 or 4, got {levels}")
    chi, D = params.chi_bb, params.Delta
    g1, g2, g3 = pumps.g1, pumps.g2, pumps.g3
    s1, s2 = abs(g1) ** 2, abs(g2) ** 2
    iD = _inv(D, "Delta")
    iP = _inv(chi + D, "chi_bb + Delta")

    g_4ph = math.sqrt(2) * g1 * g2 * (iD - iP)
    chi_ea = 4 * s2 * iP - 4 * s1 * iD
    chi_fa = 8 * s2 * iD - 8 * s1 * iP
    zeta_gaa = s1 * iD - s2 * iP
    zeta_eaa = -s1 * (chi - D) * iD * iP - s2 * (2 * chi + D) * iD * iP
    if levels == 3:
        zeta_faa = 2 * s2 * iD - 2 * s1 * iP
        e_shift = 0.0
    else:
        iM = _inv(chi - D, "chi_bb - Delta")
        i2 = _inv(2 * chi + D, "2 chi_bb + Delta")
        zeta_faa = s2 * (2 * chi + D) * iD * iM - s1 * (chi - D) * iP * i2
        e_shift = 3 * abs(g3) ** 2 * _inv(chi, "chi_bb")
    return EffectiveCoeffs(
        g_4ph=g_4ph,
        eps_4ph=math.sqrt(2) * g3,
        chi_ea=chi_ea,
        chi_fa=chi_fa,
        zeta_gaa=zeta_gaa,
        zeta_eaa=zeta_eaa,
        zeta_faa=zeta_faa,
        e_shift=e_shift,
        chi_aa=params.chi_aa,
        chi_ab=params.chi_ab,
        delta=params.delta,
        levels=levels,
        g1=g1,
        g2=g2,
        g3=g3,
        chi_bb=chi,
        Delta=D,
    )


def build_H_eff(coeffs: EffectiveCoeffs, space: HilbertSpace) -> Operator:
    """Static effective Hamiltonian on the junction-cavity space.

    Only the ``g, e, f`` rows are populated; a fourth junction level, if
    present, carries only the bare ``-chi_aa/2`` cavity Kerr term.
    """
    if space.junction_dim < 3:
        raise InvalidDimensionError("effective Hamiltonian needs junction levels g, e, f")
    if space.cavity_dim < 5:
        raise InvalidDimensionError("four-photon exchange needs cavity_dim >= 5")
    J = space.junction_dim
    a = annihilation(space.cavity_dim).data
    ad = a.conj().T
    ad4 = np.linalg.matrix_power(ad, 4)
    kerr = np.linalg.matrix_power(ad, 2) @ np.linalg.matrix_power(a, 2)
    n = ad @ a
    eye_a = np.eye(space.cavity_dim)

    def sig(j, k):
        return junction_transition(j, k, J).data

    c = coeffs
    drive = np.kron(sig("f", "g"), c.g_4ph * ad4 - c.eps_4ph * eye_a)
    h = drive + drive.conj().T
    h += np.kron(c.zeta_gaa * sig("g", "g") + c.zeta_eaa * sig("e", "e") + c.zeta_faa * sig("f", "f"), kerr)
    h -= (c.chi_aa / 2) * np.kron(np.eye(J), kerr)
    h += np.kron((c.chi_ea - c.chi_ab) * sig("e", "e") + (c.chi_fa - 2 * c.chi_ab) * sig("f", "f"), n)
    h += np.kron((c.delta + c.chi_ea / 2 + c.e_shift) * sig("e", "e") + (2 * c.delta + c.chi_fa / 2) * sig("f", "f"),
                 eye_a)
    return Operator(h, space)


def perturbative_ratio(fh: FourierHamiltonian) -> float:
    """Largest ``||H_k|| / nu_k`` (spectral norm); second order is trustworthy well below 1."""
    return max((np.linalg.norm(op.data, 2) / nu for nu, op in fh.modes), default=0.0)


def second_order_rwa(fh: FourierHamiltonian, warn: bool = True) -> Operator:
    """Time-averaged Hamiltonian including the second-order commutator corrections."""
    freqs = sorted(nu for nu, _ in fh.modes)
    if warn and len(freqs) > 1:
        gaps = np.diff(freqs)
        if np.min(gaps) < 1e-6 * freqs[-1]:
            warnings.warn("near-degenerate Fourier frequencies; secular cross terms neglected",
                          SecularTermWarning, stacklevel=2)
    if warn and perturbative_ratio(fh) > PERTURBATIVE_LIMIT:
        warnings.warn(f"||H_k||/nu_k = {perturbative_ratio(fh):.2f} exceeds {PERTURBATIVE_LIMIT}",
                      PerturbativeWarning, stacklevel=2)
    h = fh.static.data.copy()
    for nu, op in fh.modes:
        hk = op.data
        hkd = hk.conj().T
        h += (hkd @ hk - hk @ hkd) / nu
    return Operator(h, fh.space)


def restrict_levels(op: Operator, levels=(0, 1, 2)) -> np.ndarray:
    """Sub-block of a composite operator on the selected junction levels."""
    N = op.space.cavity_dim
    idx = np.concatenate([np.arange(lev * N, (lev + 1) * N) for lev in levels])
    return op.data[np.ix_(idx, idx)]


def generic_effective_hamiltonian(params: DeviceParams, pumps: PumpConfig, space: HilbertSpace,
                                  pad: int = 4, warn: bool = False) -> Operator:
    """Second-order RWA of the pumped Hamiltonian, evaluated on ``space``.

    The products ``a^2 a^+2`` are formed on a cavity padded by ``pad``
    Fock states and cropped afterwards, so the top of the truncation is not
    corrupted by the missing ``|N>, |N+1>`` states.
    """
    big = HilbertSpace(space.cavity_dim + pad, space.junction_dim)
    full = second_order_rwa(build_hsys_fourier(params, pumps, big), warn=warn).data
    idx = np.concatenate([np.arange(lev * big.cavity_dim, lev * big.cavity_dim + space.cavity_dim)
                          for lev in range(space.junction_dim)])
    return Operator(full[np.ix_(idx, idx)], space)

"""Noise spectra, adiabatically eliminated rates and the dissipative models built from them.

Rates for the three-level junction model follow from evaluating the
bath-eliminated master equation at junction occupations ``n = 0, 1, 2``.
With ``w_b`` the dressed junction frequency and ``P = chi_bb + Delta``::

    Gamma_eg  = G(w_b)                    D[sigma_eg]
    Gamma_fe  = G(w_b - chi_bb)           2 D[sigma_fe]
    k2_nn     = c1(n)^2 G(w_b + Delta) + c2(n)^2 G(w_b - P)      D[a^2 sigma_nn]
        c1(n) = |g1| (chi_bb - Delta) / ((n chi_bb + Delta)((n-1) chi_bb + Delta))
        c2(n) = |g2| (2 chi_bb + Delta) / (((n-2) chi_bb - Delta)((n-1) chi_bb - Delta))
    k2_fg     = 2 chi_bb^2 / (Delta^2 P^2) (|g1|^2 G(w_b + Delta) + |g2|^2 G(w_b - P))
                                                                  D[a^+2 sigma_fg]

where ``G`` is the downward rate ``Gamma_down`` of the spectrum.  At
``n = 0`` the coefficients reduce to ``|g1|/Delta`` and ``|g2|/P``, which is
the cavity two-photon loss ``kappa_2ph``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .device import DeviceParams, PumpConfig, build_hsys_fourier
from .errors import InvalidDimensionError, RateError, SpaceMismatchError
from .fock import HilbertSpace, Operator, SingleMode, annihilation, embed, junction_transition
from .integrator import LindbladModel
from .rwa import EffectiveCoeffs, build_H_eff


def _as_function(value) -> Callable:
    if callable(value):
        return value
    return lambda omega: value


@dataclass(frozen=True)
class NoiseSpectrum:
    """Downward / upward junction transition rates as functions of frequency (rad/s)."""

    down: Callable
    up: Callable
    name: str = "custom"
    flat: bool = False

    def gamma_down(self, omega) -> float:
        gd, gu = float(self.down(omega)), float(self.up(omega))
        _check_ordering(gd, gu, omega)
        return gd

    def gamma_up(self, omega) -> float:
        gd, gu = float(self.down(omega)), float(self.up(omega))
        _check_ordering(gd, gu, omega)
        return gu

    @classmethod
    def white(cls, Gamma_1: float) -> NoiseSpectrum:
        return cls(_as_function(Gamma_1), _as_function(0.0), name="white", flat=True)

    @classmethod
    def from_bath(cls, coupling, linewidth, n_th=0.0) -> NoiseSpectrum:
        """Lorentzian bath modes: ``G_down = 4 (1 + n_th)|Omega|^2 / gamma``, ``G_up = 4 n_th |Omega|^2 / gamma``."""
        omega_fn, gamma_fn, nth_fn = _as_function(coupling), _as_function(linewidth), _as_function(n_th)

        def down(w):
            return 4 * (1 + nth_fn(w)) * abs(omega_fn(w)) ** 2 / gamma_fn(w)

        def up(w):
            return 4 * nth_fn(w) * abs(omega_fn(w)) ** 2 / gamma_fn(w)

        flat = not any(callable(v) for v in (coupling, linewidth, n_th))
        return cls(down, up, name="bath", flat=flat)

    @classmethod
    def bandpass(cls, center: float, halfwidth: float, Gamma_in: float, Gamma_out: float) -> NoiseSpectrum:
        def down(w):
            return Gamma_in if abs(w - center) <= halfwidth else Gamma_out

        return cls(down, _as_function(0.0), name="bandpass", flat=Gamma_in == Gamma_out)


def _check_ordering(gd, gu, omega):
    if not (gd >= gu >= 0):
        raise RateError(f"spectrum violates Gamma_down >= Gamma_up >= 0 at omega={omega}")


@dataclass(frozen=True)
class DissipationRates:
    """Cavity-level and three-level junction rates (rad/s)."""

    gamma_eg: float
    gamma_fe: float
    kappa2_gg: float
    kappa2_ee: float
    kappa2_ff: float
    kappa2_fg: float
    gamma_fg_eng: float = 0.0
    kappa_4ph: float | None = None
    kappa_2ph: float | None = None
    alpha: complex | None = None
    # thermal counterparts (zero at zero temperature)
    gamma_ge: float = 0.0
    gamma_ef: float = 0.0
    kappa2_up_gg: float = 0.0
    kappa2_up_ee: float = 0.0
    kappa2_up_ff: float = 0.0
    kappa2_up_fg: float = 0.0

    def with_cavity(self, kappa_4ph, kappa_2ph, alpha) -> DissipationRates:
        return DissipationRates(**{**self.__dict__, "kappa_4ph": kappa_4ph, "kappa_2ph": kappa_2ph,
                                   "alpha": alpha})


def _omega_b(spectrum: NoiseSpectrum, omega_b_tilde):
    if omega_b_tilde is None:
        if not spectrum.flat:
            raise RateError(f"spectrum {spectrum.name!r} needs the junction frequency omega_b_tilde")
        return 0.0
    return omega_b_tilde


def three_level_rates(g1, g2, Delta, chi_bb, spectrum: NoiseSpectrum, omega_b_tilde=None,
                      Gamma_fg_eng: float = 0.0) -> DissipationRates:
    """Rates of the three-level junction-cavity master equation."""
    wb = _omega_b(spectrum, omega_b_tilde)
    chi, D = chi_bb, Delta
    s1, s2 = abs(g1) ** 2, abs(g2) ** 2
    w_plus, w_minus = wb + D, wb - D - chi

    def c1_sq(n):
        den = (n * chi + D) * ((n - 1) * chi + D)
        if den == 0:
            raise RateError(f"singular g1 denominator at junction level {n}")
        return s1 * ((chi - D) / den) ** 2

    def c2_sq(n):
        den = ((n - 2) * chi - D) * ((n - 1) * chi - D)
        if den == 0:
            raise RateError(f"singular g2 denominator at junction level {n}")
        return s2 * ((2 * chi + D) / den) ** 2

    if D == 0 or chi + D == 0:
        raise RateError("singular Raman denominators (Delta = 0 or chi_bb = -Delta)")
    fg_weight = 2 * chi**2 / (D**2 * (chi + D) ** 2)
    out = {}
    for kind, G in (("down", spectrum.gamma_down), ("up", spectrum.gamma_up)):
        Gp, Gm = G(w_plus), G(w_minus)
        out[kind] = dict(
            eg=G(wb),
            fe=G(wb - chi),
            gg=c1_sq(0) * Gp + c2_sq(0) * Gm,
            ee=c1_sq(1) * Gp + c2_sq(1) * Gm,
            ff=c1_sq(2) * Gp + c2_sq(2) * Gm,
            fg=fg_weight * (s1 * Gp + s2 * Gm),
        )
    dn, up = out["down"], out["up"]
    return DissipationRates(
        gamma_eg=dn["eg"], gamma_fe=dn["fe"], kappa2_gg=dn["gg"], kappa2_ee=dn["ee"],
        kappa2_ff=dn["ff"], kappa2_fg=dn["fg"], gamma_fg_eng=Gamma_fg_eng,
        gamma_ge=up["eg"], gamma_ef=up["fe"], kappa2_up_gg=up["gg"], kappa2_up_ee=up["ee"],
        kappa2_up_ff=up["ff"], kappa2_up_fg=up["fg"],
    )


def cat_amplitude(g_4ph, eps_4ph) -> complex:
    """Principal fourth root of ``eps_4ph / g_4ph``."""
    if g_4ph == 0:
        if eps_4ph == 0:
            return 0j
        raise RateError("g_4ph = 0 with a finite g-f drive has no finite cat amplitude")
    return complex(np.complex128(eps_4ph / g_4ph) ** 0.25)


def cavity_rates(coeffs: EffectiveCoeffs, spectrum: NoiseSpectrum, params: DeviceParams) -> DissipationRates:
    """Four- and two-photon cavity rates after eliminating the junction, plus the three-level set."""
    rates = three_level_rates(coeffs.g1, coeffs.g2, params.Delta, params.chi_bb, spectrum,
                              params.omega_b_tilde, params.Gamma_fg_eng)
    depletion = 2 * rates.gamma_fe + params.Gamma_fg_eng
    if depletion <= 0:
        raise RateError("f level has no decay channel; four-photon rate diverges")
    kappa_4ph = 4 * abs(coeffs.g_4ph) ** 2 / depletion
    # identical to kappa2_gg by construction
    kappa_2ph = rates.kappa2_gg
    return rates.with_cavity(kappa_4ph, kappa_2ph, cat_amplitude(coeffs.g_4ph, coeffs.eps_4ph))


@dataclass(frozen=True)
class ErrorBudget:
    p1: float
    p2: float
    ratio: float
    requirement_met: bool
    target_ratio_met: bool


def error_budget(kappa_1ph, kappa_2ph, alpha, delta_t) -> ErrorBudget:
    """Double single-photon loss versus direct two-photon loss between parity checks.

    ``p1 = (|alpha|^2 kappa_1ph dt)^2 / 2`` and ``p2 = |alpha|^4 kappa_2ph dt``;
    the requirement is ``kappa_2ph < kappa_1ph^2 dt / 2`` and the design
    target ``kappa_2ph / kappa_1ph < 0.01``.
    """
    for name, v in (("kappa_1ph", kappa_1ph), ("kappa_2ph", kappa_2ph), ("delta_t", delta_t)):
        if v < 0:
            raise RateError(f"{name} must be non-negative")
    n = abs(alpha) ** 2
    p1 = (n * kappa_1ph * delta_t) ** 2 / 2
    p2 = n**2 * kappa_2ph * delta_t
    ratio = p2 / p1 if p1 > 0 else (0.0 if p2 == 0 else math.inf)
    return ErrorBudget(
        p1=p1,
        p2=p2,
        ratio=ratio,
        requirement_met=kappa_2ph < kappa_1ph**2 * delta_t / 2,
        target_ratio_met=kappa_1ph > 0 and kappa_2ph / kappa_1ph < 0.01,
    )


# ---------------------------------------------------------------------------
# master-equation builders


def build_three_level_me(coeffs: EffectiveCoeffs, rates: DissipationRates, space: HilbertSpace) -> LindbladModel:
    """Effective Hamiltonian plus junction decay, engineered f->g decay and two-photon channels."""
    if not isinstance(space, HilbertSpace) or space.junction_dim != 3:
        raise InvalidDimensionError("three-level model needs a HilbertSpace with junction_dim = 3")
    H = build_H_eff(coeffs, space)
    a2 = embed(Operator(np.linalg.matrix_power(annihilation(space.cavity_dim).data, 2), space.cavity), "cavity", space)
    ad2 = a2.dag()

    def sig(j, k):
        return embed(junction_transition(j, k, 3), "junction", space)

    channels = [
        (rates.gamma_eg, sig("e", "g")),
        (2 * rates.gamma_fe, sig("f", "e")),
        (rates.kappa2_gg, a2 @ sig("g", "g")),
        (rates.kappa2_ee, a2 @ sig("e", "e")),
        (rates.kappa2_ff, a2 @ sig("f", "f")),
        (rates.gamma_fg_eng, sig("f", "g")),
        (rates.kappa2_fg, ad2 @ sig("f", "g")),
        # thermal conjugates
        (rates.gamma_ge, sig("g", "e")),
        (2 * rates.gamma_ef, sig("e", "f")),
        (rates.kappa2_up_gg, ad2 @ sig("g", "g")),
        (rates.kappa2_up_ee, ad2 @ sig("e", "e")),
        (rates.kappa2_up_ff, ad2 @ sig("f", "f")),
        (rates.kappa2_up_fg, a2 @ sig("g", "f")),
    ]
    for rate, _ in channels:
        if rate is None:
            raise RateError("three-level model is missing a rate")
    return LindbladModel.static(H, [(r, L) for r, L in channels if r > 0])


def build_cavity_me(rates: DissipationRates, coeffs: EffectiveCoeffs, space: SingleMode) -> LindbladModel:
    """Cavity-only model: ``(zeta_gaa - chi_aa) a^+2 a^2``, ``kappa_4ph D[a^4 - alpha^4]``, ``kappa_2ph D[a^2]``."""
    if not isinstance(space, SingleMode):
        raise SpaceMismatchError("cavity model lives on a single-mode space")
    if space.dim < 5:
        raise InvalidDimensionError("cavity_dim must be at least 5 for a^4")
    if rates.kappa_4ph is None or rates.kappa_2ph is None or rates.alpha is None:
        raise RateError("cavity model needs kappa_4ph, kappa_2ph and alpha")
    a = annihilation(space.dim).data
    a2 = a @ a
    a4 = a2 @ a2
    H = Operator((coeffs.zeta_gaa - coeffs.chi_aa) * (a2.conj().T @ a2), space)
    L4 = Operator(a4 - rates.alpha**4 * np.eye(space.dim), space)
    collapse = [(rates.kappa_4ph, L4), (rates.kappa_2ph, Operator(a2, space))]
    return LindbladModel.static(H, [(r, L) for r, L in collapse if r > 0])


def build_full_me(params: DeviceParams, pumps: PumpConfig, space: HilbertSpace, frame: str = "linear") -> LindbladModel:
    """Time-dependent pumped model with ``Gamma_1 D[b]`` and ``Gamma_fg_eng D[sigma_fg]``.

    In the default ``linear`` frame ``b`` only acquires a global phase, so
    ``D[b]`` is exact.  In the ``kerr`` frame each junction transition rotates
    at its own frequency and ``D[b]`` is replaced by its secular part
    ``sum_n n Gamma_1 D[sigma_{n,n-1}]``.
    """
    fh = build_hsys_fourier(params, pumps, space, frame=frame)
    collapse = []
    if params.Gamma_1 > 0:
        if frame == "linear":
            collapse.append((params.Gamma_1, embed(annihilation(space.junction_dim), "junction", space)))
        else:
            for n in range(1, space.junction_dim):
                collapse.append((n * params.Gamma_1, embed(junction_transition(n, n - 1, space.junction_dim),
                                                           "junction", space)))
    if params.Gamma_fg_eng > 0:
        collapse.append((params.Gamma_fg_eng, embed(junction_transition("f", "g", space.junction_dim),
                                                    "junction", space)))
    return LindbladModel(fh, tuple(collapse))

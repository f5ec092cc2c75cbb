"""Truncated Fock-space algebra for a cavity mode coupled to a junction mode.

Composite states use the ordering ``index = level * cavity_dim + n``: the
junction level is the slow index and the cavity photon number the fast one,
so a composite operator is ``np.kron(junction_op, cavity_op)``.  Every piece
of index arithmetic in the package goes through :class:`HilbertSpace`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import gammaln

from .errors import (
    InvalidDimensionError,
    InvalidLevelError,
    NotADensityMatrixError,
    SpaceMismatchError,
)

LEVELS = {"g": 0, "e": 1, "f": 2, "h": 3}

HERMITIAN_RTOL = 1e-12
PURE_NORM_TOL = 1e-12
TRACE_TOL = 1e-10
POSITIVITY_TOL = -1e-8


@dataclass(frozen=True)
class SingleMode:
    """Space of one isolated mode (cavity alone, or junction alone)."""

    dim: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise InvalidDimensionError(f"mode dimension must be a positive integer, got {self.dim}")


@dataclass(frozen=True)
class HilbertSpace:
    """Cavity (Fock truncation ``cavity_dim``) times junction (``junction_dim`` levels)."""

    cavity_dim: int
    junction_dim: int = 3

    def __post_init__(self):
        for name in ("cavity_dim", "junction_dim"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise InvalidDimensionError(f"{name} must be a positive integer, got {value}")

    @property
    def dim(self) -> int:
        return self.cavity_dim * self.junction_dim

    @property
    def cavity(self) -> SingleMode:
        return SingleMode(self.cavity_dim)

    @property
    def junction(self) -> SingleMode:
        return SingleMode(self.junction_dim)

    def index(self, level, n: int) -> int:
        level = _level_index(level)
        if not 0 <= level < self.junction_dim:
            raise InvalidLevelError(f"junction level {level} outside 0..{self.junction_dim - 1}")
        if not 0 <= n < self.cavity_dim:
            raise InvalidDimensionError(f"photon number {n} outside 0..{self.cavity_dim - 1}")
        return level * self.cavity_dim + n

    def split(self, index: int) -> tuple[int, int]:
        """Inverse of :meth:`index`: ``(level, n)``."""
        return divmod(index, self.cavity_dim)

    def levels(self) -> np.ndarray:
        """Junction level of every composite basis index."""
        return np.repeat(np.arange(self.junction_dim), self.cavity_dim)

    def photons(self) -> np.ndarray:
        """Cavity photon number of every composite basis index."""
        return np.tile(np.arange(self.cavity_dim), self.junction_dim)


Space = Union[HilbertSpace, SingleMode]


def _level_index(level) -> int:
    if isinstance(level, str):
        try:
            return LEVELS[level]
        except KeyError:
            raise InvalidLevelError(f"unknown junction level {level!r}") from None
    return int(level)


def _check_same_space(a: Space, b: Space):
    if a != b:
        raise SpaceMismatchError(f"operands live on different spaces: {a} vs {b}")


@dataclass(frozen=True, eq=False)
class Operator:
    """Dense complex matrix tagged with the space it acts on."""

    data: np.ndarray
    space: Space

    def __post_init__(self):
        data = np.array(self.data, dtype=complex)
        if data.shape != (self.space.dim, self.space.dim):
            raise InvalidDimensionError(
                f"operator shape {data.shape} does not match space dimension {self.space.dim}"
            )
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    def dag(self) -> Operator:
        return Operator(self.data.conj().T, self.space)

    def __add__(self, other):
        if isinstance(other, Operator):
            _check_same_space(self.space, other.space)
            return Operator(self.data + other.data, self.space)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, Operator):
            _check_same_space(self.space, other.space)
            return Operator(self.data - other.data, self.space)
        return NotImplemented

    def __neg__(self):
        return Operator(-self.data, self.space)

    def __mul__(self, scalar):
        if np.isscalar(scalar):
            return Operator(scalar * self.data, self.space)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return Operator(self.data / scalar, self.space)

    def __matmul__(self, other):
        if isinstance(other, Operator):
            _check_same_space(self.space, other.space)
            return Operator(self.data @ other.data, self.space)
        if isinstance(other, QuantumState):
            _check_same_space(self.space, other.space)
            if other.is_pure:
                return self.data @ other.data
            return self.data @ other.data
        return NotImplemented

    def commutator(self, other: Operator) -> Operator:
        return self @ other - other @ self

    def hermiticity_defect(self) -> float:
        """Relative Frobenius norm of ``H - H^dagger``."""
        scale = np.linalg.norm(self.data)
        if scale == 0.0:
            return 0.0
        return float(np.linalg.norm(self.data - self.data.conj().T) / scale)

    def is_hermitian(self, rtol: float = HERMITIAN_RTOL) -> bool:
        return self.hermiticity_defect() <= rtol

    def matrix_element(self, bra: int, ket: int) -> complex:
        return complex(self.data[bra, ket])


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Pure state vector (1-d ``data``) or density matrix (2-d ``data``)."""

    data: np.ndarray
    space: Space

    def __post_init__(self):
        data = np.array(self.data, dtype=complex)
        d = self.space.dim
        if data.shape not in ((d,), (d, d)):
            raise InvalidDimensionError(f"state shape {data.shape} does not match dimension {d}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def is_pure(self) -> bool:
        return self.data.ndim == 1

    def density_matrix(self) -> QuantumState:
        if self.is_pure:
            return QuantumState(np.outer(self.data, self.data.conj()), self.space)
        return self

    def validate(self):
        """Raise :class:`NotADensityMatrixError` if the state breaks its invariants."""
        if self.is_pure:
            norm = np.linalg.norm(self.data)
            if abs(norm - 1.0) > PURE_NORM_TOL:
                raise NotADensityMatrixError(f"pure state norm {norm!r} differs from 1")
            return self
        check_density_matrix(self.data)
        return self


def check_density_matrix(rho: np.ndarray, trace_tol=TRACE_TOL, herm_tol=1e-10, min_eig=POSITIVITY_TOL):
    """Check Hermiticity, unit trace and positivity of a raw density matrix."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise NotADensityMatrixError(f"density matrix must be square, got shape {rho.shape}")
    defect = np.max(np.abs(rho - rho.conj().T)) if rho.size else 0.0
    if defect > herm_tol:
        raise NotADensityMatrixError(f"density matrix not Hermitian (defect {defect:.3e})")
    tr = np.trace(rho)
    if abs(tr - 1.0) > trace_tol:
        raise NotADensityMatrixError(f"density matrix trace {tr.real:.12f} differs from 1")
    lowest = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
    if lowest < min_eig:
        raise NotADensityMatrixError(f"density matrix has negative eigenvalue {lowest:.3e}")


# ---------------------------------------------------------------------------
# operators


def annihilation(dim: int) -> Operator:
    """Truncated ladder operator with ``<n-1|a|n> = sqrt(n)``."""
    if int(dim) != dim or dim < 2:
        raise InvalidDimensionError(f"annihilation operator needs dim >= 2, got {dim}")
    return Operator(np.diag(np.sqrt(np.arange(1, dim)), k=1), SingleMode(dim))


def identity(space: Space) -> Operator:
    return Operator(np.eye(space.dim), space)


def number(dim: int) -> Operator:
    return Operator(np.diag(np.arange(dim, dtype=float)), SingleMode(dim))


def junction_transition(j, k, dim: int = 3) -> Operator:
    """``sigma_jk = |k><j|``: maps level ``j`` onto level ``k``."""
    j, k = _level_index(j), _level_index(k)
    for lev in (j, k):
        if not 0 <= lev < dim:
            raise InvalidLevelError(f"level {lev} outside 0..{dim - 1}")
    data = np.zeros((dim, dim), dtype=complex)
    data[k, j] = 1.0
    return Operator(data, SingleMode(dim))


def embed(op: Operator, which: str, space: HilbertSpace) -> Operator:
    """Tensor a single-mode operator with the identity on the other factor."""
    if not isinstance(op.space, SingleMode):
        raise SpaceMismatchError("only single-mode operators can be embedded")
    if which == "cavity":
        if op.space.dim != space.cavity_dim:
            raise SpaceMismatchError(f"cavity operator dim {op.space.dim} != {space.cavity_dim}")
        data = np.kron(np.eye(space.junction_dim), op.data)
    elif which == "junction":
        if op.space.dim != space.junction_dim:
            raise SpaceMismatchError(f"junction operator dim {op.space.dim} != {space.junction_dim}")
        data = np.kron(op.data, np.eye(space.cavity_dim))
    else:
        raise ValueError(f"which must be 'cavity' or 'junction', got {which!r}")
    return Operator(data, space)


def tensor(junction_op: Operator, cavity_op: Operator) -> Operator:
    """Product ``junction_op (x) cavity_op`` on the matching composite space."""
    space = HilbertSpace(cavity_op.space.dim, junction_op.space.dim)
    return Operator(np.kron(junction_op.data, cavity_op.data), space)


def parity(space: Space) -> Operator:
    """Cavity photon-number parity ``(-1)^n``, identity on the junction."""
    if isinstance(space, HilbertSpace):
        signs = (-1.0) ** space.photons()
    else:
        signs = (-1.0) ** np.arange(space.dim)
    return Operator(np.diag(signs), space)


# ---------------------------------------------------------------------------
# states


def fock_state(n: int, dim: int) -> QuantumState:
    if not 0 <= n < dim:
        raise InvalidDimensionError(f"Fock state {n} outside truncation {dim}")
    vec = np.zeros(dim, dtype=complex)
    vec[n] = 1.0
    return QuantumState(vec, SingleMode(dim))


def basis_state(space: HilbertSpace, level, n: int) -> QuantumState:
    vec = np.zeros(space.dim, dtype=complex)
    vec[space.index(level, n)] = 1.0
    return QuantumState(vec, space)


def product_state(level, cavity: QuantumState, space: HilbertSpace) -> QuantumState:
    """Junction in ``level`` times a cavity state (pure or mixed)."""
    if cavity.space != space.cavity:
        raise SpaceMismatchError(f"cavity state dim {cavity.space.dim} != {space.cavity_dim}")
    level = _level_index(level)
    proj = np.zeros((space.junction_dim, space.junction_dim))
    proj[level, level] = 1.0
    if cavity.is_pure:
        return QuantumState(np.kron(proj[level], cavity.data), space)
    return QuantumState(np.kron(proj, cavity.data), space)


def truncation_defect(alpha: complex, dim: int) -> float:
    """Poisson weight of a coherent state lying at ``n >= dim``."""
    if alpha == 0:
        return 0.0
    n = np.arange(dim)
    logw = -abs(alpha) ** 2 + 2 * n * np.log(abs(alpha)) - gammaln(n + 1)
    return float(max(0.0, -np.expm1(np.log(np.sum(np.exp(logw))))))


def _coherent_amplitudes(alpha: complex, dim: int) -> np.ndarray:
    n = np.arange(dim)
    if alpha == 0:
        amp = np.zeros(dim, dtype=complex)
        amp[0] = 1.0
        return amp
    log_mag = -0.5 * abs(alpha) ** 2 + n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    return np.exp(log_mag) * np.exp(1j * n * np.angle(alpha))


def coherent_state(alpha: complex, dim: int) -> QuantumState:
    """Truncated, renormalised coherent state ``|alpha>``.

    Warns when the Poisson tail beyond the truncation exceeds 1e-6.
    """
    defect = truncation_defect(alpha, dim)
    if defect > 1e-6:
        warnings.warn(
            f"coherent state alpha={alpha} loses {defect:.2e} of its norm at dim={dim}",
            stacklevel=2,
        )
    amp = _coherent_amplitudes(alpha, dim)
    return QuantumState(amp / np.linalg.norm(amp), SingleMode(dim))


def cat_state_mod4(alpha: complex, dim: int) -> QuantumState:
    """Four-component cat ``N(|a> + |-a> + |ia> + |-ia>)``.

    Only Fock numbers divisible by four survive.  ``alpha = 0`` returns the
    vacuum, which is the limit of the normalised superposition.
    """
    if alpha == 0:
        return fock_state(0, dim)
    defect = truncation_defect(alpha, dim)
    if defect > 1e-6:
        warnings.warn(f"cat state alpha={alpha} truncated at dim={dim} (defect {defect:.2e})", stacklevel=2)
    amp = sum(_coherent_amplitudes(phase * alpha, dim) for phase in (1, -1, 1j, -1j))
    amp[np.arange(dim) % 4 != 0] = 0.0
    return QuantumState(amp / np.linalg.norm(amp), SingleMode(dim))


def default_cavity_dim(alpha: complex) -> int:
    return max(20, math.ceil(8 * abs(alpha) ** 2))


def partial_trace_junction(rho: np.ndarray, space: HilbertSpace) -> np.ndarray:
    """Reduced cavity density matrix of a composite density matrix."""
    r = np.asarray(rho).reshape(space.junction_dim, space.cavity_dim, space.junction_dim, space.cavity_dim)
    return np.einsum("jajb->ab", r)


def partial_trace_cavity(rho: np.ndarray, space: HilbertSpace) -> np.ndarray:
    r = np.asarray(rho).reshape(space.junction_dim, space.cavity_dim, space.junction_dim, space.cavity_dim)
    return np.einsum("jaka->jk", r)


# ---------------------------------------------------------------------------
# dissipator and metrics


def dissipator_apply(L: Operator, rho: QuantumState) -> Operator:
    """``D[L] rho = L rho L^+ - (L^+ L rho + rho L^+ L) / 2``."""
    _check_same_space(L.space, rho.space)
    r = rho.density_matrix().data
    Ld = L.data.conj().T
    LdL = Ld @ L.data
    return Operator(L.data @ r @ Ld - 0.5 * (LdL @ r + r @ LdL), L.space)


def _as_density(rho) -> tuple[np.ndarray, Space]:
    if not isinstance(rho, QuantumState):
        raise NotADensityMatrixError("expected a QuantumState")
    dm = rho.density_matrix().data
    try:
        check_density_matrix(dm)
    except NotADensityMatrixError:
        raise
    return dm, rho.space


def fidelity(rho: np.ndarray, target: np.ndarray) -> float:
    """Overlap ``<psi|rho|psi>`` with a pure target."""
    return float(np.real(np.vdot(target, rho @ target)))


def purity(rho: np.ndarray) -> float:
    # Tr(rho^2) for Hermitian rho without forming the product
    return float(np.real(np.vdot(rho, rho)))


def state_metrics(rho: QuantumState, target: QuantumState) -> tuple[float, float, float]:
    """Fidelity to a pure target, purity and cavity photon-number parity."""
    dm, space = _as_density(rho)
    _check_same_space(space, target.space)
    if not target.is_pure:
        raise NotADensityMatrixError("target state must be pure")
    par = float(np.real(np.sum(np.diag(parity(space).data) * np.diag(dm))))
    return fidelity(dm, target.data), purity(dm), par


# ---------------------------------------------------------------------------
# Wigner function


def wigner(rho_cav: QuantumState, grid, return_flags: bool = False):
    """Displaced-parity Wigner function ``(2/pi) Tr[D(-b) rho D(b) P]``.

    Normalised so that the vacuum gives ``2/pi`` at the origin and the
    function integrates to one over ``d Re(b) d Im(b)``.  Points with
    ``|b| > sqrt(dim)/2`` are flagged as unreliable for the truncation.
    """
    if not isinstance(rho_cav.space, SingleMode):
        raise SpaceMismatchError("wigner expects a cavity-only state")
    rho = rho_cav.density_matrix().data
    beta = np.asarray(grid, dtype=complex)
    shape = beta.shape
    beta = beta.ravel()
    dim = rho.shape[0]
    values = _wigner_iterative(rho, beta).reshape(shape)
    flags = (np.abs(beta) > math.sqrt(dim) / 2).reshape(shape)
    if flags.any():
        warnings.warn(f"{int(flags.sum())} Wigner grid points exceed the reliable radius", stacklevel=2)
    if return_flags:
        return values, flags
    return values


def _wigner_iterative(rho: np.ndarray, beta: np.ndarray) -> np.ndarray:
    # Laguerre recursion for the Wigner functions of |m><n|; avoids factorials
    dim = rho.shape[0]
    two_b = 2.0 * beta
    wl = [np.zeros_like(beta) for _ in range(dim)]
    wl[0] = (2.0 / np.pi) * np.exp(-2.0 * np.abs(beta) ** 2).astype(complex)
    w = np.real(rho[0, 0]) * np.real(wl[0])
    for n in range(1, dim):
        wl[n] = two_b * wl[n - 1] / math.sqrt(n)
        w += 2.0 * np.real(rho[0, n] * wl[n])
    for m in range(1, dim):
        temp = wl[m].copy()
        wl[m] = (np.conj(two_b) * temp - math.sqrt(m) * wl[m - 1]) / math.sqrt(m)
        w += np.real(rho[m, m] * wl[m])
        for n in range(m + 1, dim):
            temp2 = (two_b * wl[n - 1] - math.sqrt(m) * temp) / math.sqrt(n)
            temp = wl[n].copy()
            wl[n] = temp2
            w += 2.0 * np.real(rho[m, n] * wl[n])
    return w

"""Single- and two-qubit polarization state algebra.

Canonical kets, Bell states, the three mutually unbiased measurement bases
{HV, PM, RL}, Pauli operators, and the standard metrics (fidelity, purity,
visibility, Bloch vector).  Phase convention, fixed package-wide:

    |H> -> Bloch +z        |P> = (|H>+|V>)/sqrt(2)  -> +x
    |R> = (|H>+i|V>)/sqrt(2) -> +y

All values are immutable after construction and safe to share.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

_NORM_TOL = 1e-12
_HERM_TOL = 1e-10
_PHASE_TOL = 1e-10


@dataclass(frozen=True)
class PureState:
    """Polarization qubit alpha|H> + beta|V>, normalized to 1 within 1e-12.

    Global phase is not canonicalized; use :meth:`equivalent_to` for
    phase-insensitive comparison.
    """

    alpha: complex
    beta: complex

    def __post_init__(self):
        norm2 = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(norm2 - 1.0) > _NORM_TOL:
            raise ValidationError(f"state not normalized: |alpha|^2+|beta|^2 = {norm2!r}")

    def ket(self) -> np.ndarray:
        return np.array([self.alpha, self.beta], dtype=complex)

    def overlap(self, other: "PureState") -> complex:
        """<self|other>."""
        return complex(np.vdot(self.ket(), other.ket()))

    def equivalent_to(self, other: "PureState", tol: float = _PHASE_TOL) -> bool:
        """Equality up to an irrelevant global phase: |<a|b>|^2 >= 1 - tol."""
        return abs(self.overlap(other)) ** 2 >= 1.0 - tol

    def density(self) -> "DensityMatrix":
        k = self.ket()
        return DensityMatrix(np.outer(k, k.conj()))

    def orthogonal(self) -> "PureState":
        """The unique (up to phase) state orthogonal to this one."""
        return PureState(-np.conj(self.beta), np.conj(self.alpha))


def _as_matrix(entries) -> np.ndarray:
    m = np.asarray(entries, dtype=complex)
    if m.shape != (2, 2):
        raise ValidationError(f"expected a 2x2 matrix, got shape {m.shape}")
    return m


@dataclass(frozen=True)
class DensityMatrix:
    """2x2 Hermitian, PSD, unit-trace matrix. Validated on construction."""

    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = _as_matrix(self.entries)
        if np.max(np.abs(m - m.conj().T)) > _HERM_TOL:
            raise ValidationError("density matrix is not Hermitian within 1e-10")
        if abs(np.trace(m).real - 1.0) > _HERM_TOL or abs(np.trace(m).imag) > _HERM_TOL:
            raise ValidationError(f"density matrix trace is {np.trace(m)!r}, expected 1")
        evals = np.linalg.eigvalsh(m)
        if evals.min() < -_HERM_TOL:
            raise ValidationError(f"density matrix has negative eigenvalue {evals.min():.3e}")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "entries", m)

    @classmethod
    def maximally_mixed(cls) -> "DensityMatrix":
        return cls(np.eye(2) / 2.0)

    @classmethod
    def from_bloch(cls, r) -> "DensityMatrix":
        """Inverse of :func:`bloch_vector`. Rejects |r| > 1 + 1e-9."""
        r = np.asarray(r, dtype=float)
        if r.shape != (3,):
            raise ValidationError("Bloch vector must have three components")
        if np.linalg.norm(r) > 1.0 + 1e-9:
            raise ValidationError(f"Bloch vector length {np.linalg.norm(r):.12f} exceeds 1")
        m = 0.5 * (np.eye(2, dtype=complex)
                   + r[0] * PauliOperator.X.matrix
                   + r[1] * PauliOperator.Y.matrix
                   + r[2] * PauliOperator.Z.matrix)
        # clip the tiny negative eigenvalue a boundary vector can produce
        w, v = np.linalg.eigh(m)
        w = np.clip(w, 0.0, None)
        m = (v * w) @ v.conj().T
        return cls(m / np.trace(m).real)

    def conjugate_by(self, u: np.ndarray) -> "DensityMatrix":
        """U rho U^dagger for a 2x2 unitary U."""
        u = _as_matrix(u)
        return DensityMatrix(u @ self.entries @ u.conj().T)


class PauliOperator(enum.Enum):
    """sigma_0..sigma_3 with their matrix representations."""

    I = 0
    X = 1
    Y = 2
    Z = 3

    @property
    def matrix(self) -> np.ndarray:
        return _PAULI_MATRICES[self.value]


_PAULI_MATRICES = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)

# Canonical six states (the three mutually unbiased basis pairs).
H = PureState(1.0 + 0j, 0.0 + 0j)
V = PureState(0.0 + 0j, 1.0 + 0j)
P = PureState(1 / np.sqrt(2) + 0j, 1 / np.sqrt(2) + 0j)
M = PureState(1 / np.sqrt(2) + 0j, -1 / np.sqrt(2) + 0j)
R = PureState(1 / np.sqrt(2) + 0j, 1j / np.sqrt(2))
L = PureState(1 / np.sqrt(2) + 0j, -1j / np.sqrt(2))

SIX_STATES = {"H": H, "V": V, "P": P, "M": M, "R": R, "L": L}


class MeasurementBasis(enum.Enum):
    """The three mutually unbiased single-qubit bases."""

    HV = "HV"
    PM = "PM"
    RL = "RL"

    @property
    def states(self) -> tuple[PureState, PureState]:
        """(plus eigenstate, minus eigenstate) of the basis."""
        return _BASIS_STATES[self]

    @property
    def projector_matrix(self) -> np.ndarray:
        """Rows are the bras <b+| and <b-|; maps kets to outcome amplitudes."""
        plus, minus = self.states
        return np.vstack([plus.ket().conj(), minus.ket().conj()])


_BASIS_STATES = {
    MeasurementBasis.HV: (H, V),
    MeasurementBasis.PM: (P, M),
    MeasurementBasis.RL: (R, L),
}

# state label -> (its basis, +1 or -1 eigenvalue slot)
STATE_BASIS_SLOT = {
    "H": (MeasurementBasis.HV, 0), "V": (MeasurementBasis.HV, 1),
    "P": (MeasurementBasis.PM, 0), "M": (MeasurementBasis.PM, 1),
    "R": (MeasurementBasis.RL, 0), "L": (MeasurementBasis.RL, 1),
}


class BellState(enum.Enum):
    """The four maximally entangled two-qubit states."""

    PSI_MINUS = "psi_minus"
    PSI_PLUS = "psi_plus"
    PHI_PLUS = "phi_plus"
    PHI_MINUS = "phi_minus"

    def state_pairs(self) -> list[tuple[complex, PureState, PureState]]:
        """The state as sum_k coeff_k |s1_k> |s2_k>."""
        s = 1 / np.sqrt(2)
        if self is BellState.PSI_MINUS:
            return [(s, H, V), (-s, V, H)]
        if self is BellState.PSI_PLUS:
            return [(s, H, V), (s, V, H)]
        if self is BellState.PHI_PLUS:
            return [(s, H, H), (s, V, V)]
        return [(s, H, H), (-s, V, V)]

    def two_qubit_vector(self) -> np.ndarray:
        """Amplitudes over the product basis (HH, HV, VH, VV)."""
        vec = np.zeros(4, dtype=complex)
        for coeff, s1, s2 in self.state_pairs():
            vec += coeff * np.kron(s1.ket(), s2.ket())
        return vec


def fidelity(ideal: PureState, rho: DensityMatrix) -> float:
    """Overlap <phi|rho|phi> of the ideal state with a measured matrix."""
    k = ideal.ket()
    val = complex(k.conj() @ rho.entries @ k)
    if abs(val.imag) > 1e-10:
        raise ValidationError(f"fidelity has imaginary part {val.imag:.3e}")
    return float(min(max(val.real, 0.0), 1.0))


def visibility(f: float) -> float:
    """V = 2f - 1 for a fidelity f in [0, 1]."""
    if not 0.0 <= f <= 1.0:
        raise ValidationError(f"fidelity {f!r} outside [0, 1]")
    return 2.0 * f - 1.0


def purity(rho: DensityMatrix) -> float:
    """tr(rho^2), in [1/2, 1] for a qubit."""
    return float(np.trace(rho.entries @ rho.entries).real)


def bloch_vector(rho: DensityMatrix) -> np.ndarray:
    """r_i = tr(rho sigma_i) for i = x, y, z."""
    return np.array([
        np.trace(rho.entries @ PauliOperator.X.matrix).real,
        np.trace(rho.entries @ PauliOperator.Y.matrix).real,
        np.trace(rho.entries @ PauliOperator.Z.matrix).real,
    ])


def partial_trace(vec4: np.ndarray, keep: int) -> np.ndarray:
    """Reduced 2x2 state of one qubit of a two-qubit pure state.

    `vec4` is over the product basis (HH, HV, VH, VV); keep=0 keeps the
    first qubit, keep=1 the second.
    """
    psi = np.asarray(vec4, dtype=complex).reshape(2, 2)
    if keep == 0:
        return psi @ psi.conj().T
    return psi.T @ psi.conj()


def rotation_about(axis, angle: float) -> np.ndarray:
    """exp(i*angle/2 * n.sigma) for a unit Bloch axis n.

    Sign convention: rotation_about((1,0,0), pi/2) maps |H> to |R>.
    """
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    n_sigma = (n[0] * PauliOperator.X.matrix
               + n[1] * PauliOperator.Y.matrix
               + n[2] * PauliOperator.Z.matrix)
    return np.cos(angle / 2) * np.eye(2, dtype=complex) + 1j * np.sin(angle / 2) * n_sigma


def random_pure_state(rng: np.random.Generator) -> PureState:
    """Haar-random qubit state."""
    z = rng.normal(size=4)
    a = z[0] + 1j * z[1]
    b = z[2] + 1j * z[3]
    n = np.sqrt(abs(a) ** 2 + abs(b) ** 2)
    return PureState(a / n, b / n)

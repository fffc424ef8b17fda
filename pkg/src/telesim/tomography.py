"""Reconstruction layer: state and process tomography.

Maximum-likelihood single-qubit state estimation from counts in the three
mutually unbiased bases, analytic single-qubit process reconstruction from
the four canonical probe states (H, V, P, R), process fidelity, and the
affine map describing how the channel deforms the Bloch sphere.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import ValidationError
from .qstate import (DensityMatrix, MeasurementBasis, PauliOperator, PureState,
                     H, V, P, R)

_PAULIS = [p.matrix for p in PauliOperator]

CHI_IDEAL = np.zeros((4, 4), dtype=complex)
CHI_IDEAL[0, 0] = 1.0

PROBE_STATES = (H, V, P, R)
PROBE_LABELS = ("H", "V", "P", "R")


@dataclass(frozen=True)
class TomographyCounts:
    """Coincidence counts (n_plus, n_minus) per analysis basis."""

    counts: dict[MeasurementBasis, tuple[int, int]]

    def __post_init__(self):
        for basis in MeasurementBasis:
            if basis not in self.counts:
                raise ValidationError(f"missing counts for basis {basis.value}")
        flat = [n for pair in self.counts.values() for n in pair]
        if any(n < 0 for n in flat):
            raise ValidationError("counts must be non-negative")
        if sum(flat) == 0:
            raise ValidationError("all counts are zero")


def read_counts_csv(path) -> TomographyCounts:
    """Ingest `basis,n_plus,n_minus` rows with basis in {HV, PM, RL}."""
    counts = {}
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#") or row[0] == "basis":
                continue
            counts[MeasurementBasis(row[0])] = (int(row[1]), int(row[2]))
    return TomographyCounts(counts)


def write_counts_csv(path, counts: TomographyCounts, header_comment: str = "") -> None:
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(header_comment.rstrip("\n") + "\n")
        fh.write("basis,n_plus,n_minus\n")
        for basis in MeasurementBasis:
            a, b = counts.counts[basis]
            fh.write(f"{basis.value},{a},{b}\n")


def _rho_from_t(t: np.ndarray) -> np.ndarray:
    """rho = T^dagger T / tr, T lower triangular with 4 real parameters."""
    tm = np.array([[t[0], 0.0], [t[2] + 1j * t[3], t[1]]], dtype=complex)
    m = tm.conj().T @ tm
    tr = np.trace(m).real
    if tr <= 0.0:
        return np.eye(2, dtype=complex) / 2.0
    return m / tr


def _neg_log_likelihood(t: np.ndarray, counts: TomographyCounts) -> float:
    rho = _rho_from_t(t)
    nll = 0.0
    for basis, (n_plus, n_minus) in counts.counts.items():
        plus, minus = basis.states
        kp, km = plus.ket(), minus.ket()
        p_plus = float(np.real(kp.conj() @ rho @ kp))
        p_plus = min(max(p_plus, 1e-12), 1.0 - 1e-12)
        nll -= n_plus * math.log(p_plus) + n_minus * math.log(1.0 - p_plus)
    return nll


@dataclass(frozen=True)
class MleResult:
    """Reconstructed state plus optimizer diagnostics."""

    rho: DensityMatrix
    converged: bool
    iterations: int
    log_likelihood: float
    message: str = ""


def mle_state(counts: TomographyCounts) -> MleResult:
    """Maximum-likelihood state from six-basis counts.

    Binomial likelihood per basis; the state is parameterized through a
    lower-triangular factorization so the estimate is physical by
    construction.  Deterministic: fixed start at the maximally mixed state,
    convergence at 1e-10 likelihood improvement or 10^4 iterations.
    """
    start = np.array([1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0), 0.0, 0.0])
    res = minimize(_neg_log_likelihood, start, args=(counts,), method="L-BFGS-B",
                   options={"ftol": 1e-14, "gtol": 1e-12, "maxiter": 10_000,
                            "maxfun": 100_000})
    rho = DensityMatrix(_rho_from_t(res.x))
    return MleResult(rho=rho, converged=bool(res.success),
                     iterations=int(res.nit), log_likelihood=-float(res.fun),
                     message=str(res.message))


def linear_inversion(counts: TomographyCounts) -> DensityMatrix:
    """Direct Bloch-vector estimate, clipped into the ball.

    Not maximum likelihood; serves as an independent cross-check.
    """
    r = np.zeros(3)
    for i, basis in enumerate((MeasurementBasis.PM, MeasurementBasis.RL,
                               MeasurementBasis.HV)):
        a, b = counts.counts[basis]
        if a + b == 0:
            raise ValidationError(f"no counts in basis {basis.value}")
        r[i] = (a - b) / (a + b)
    norm = np.linalg.norm(r)
    if norm > 1.0:
        r = r / norm
    return DensityMatrix.from_bloch(r)


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    evals = np.linalg.eigvalsh(a.entries - b.entries)
    return 0.5 * float(np.abs(evals).sum())


@dataclass(frozen=True)
class ProcessMatrix:
    """chi in the Pauli basis: E(rho) = sum chi_mn sigma_m rho sigma_n."""

    chi: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.chi, dtype=complex)
        if m.shape != (4, 4):
            raise ValidationError("chi must be 4x4")
        if np.max(np.abs(m - m.conj().T)) > 1e-8:
            raise ValidationError("chi is not Hermitian within 1e-8")
        if abs(np.trace(m).real - 1.0) > 1e-8:
            raise ValidationError(f"chi trace {np.trace(m)!r} != 1 within 1e-8")
        if np.linalg.eigvalsh(m).min() < -1e-8:
            raise ValidationError("chi has an eigenvalue below -1e-8")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "chi", m)

    @classmethod
    def identity(cls) -> "ProcessMatrix":
        return cls(CHI_IDEAL)

    def apply(self, rho: DensityMatrix) -> DensityMatrix:
        return DensityMatrix(apply_chi(self.chi, rho.entries))


def apply_chi(chi: np.ndarray, rho: np.ndarray) -> np.ndarray:
    out = np.zeros((2, 2), dtype=complex)
    for m in range(4):
        for n in range(4):
            if chi[m, n] != 0:
                out += chi[m, n] * _PAULIS[m] @ rho @ _PAULIS[n]
    return out


@dataclass(frozen=True)
class ProcessReconstruction:
    """Raw linear-inversion chi alongside its physical projection."""

    chi_raw: np.ndarray
    chi: ProcessMatrix


def process_from_pairs(inputs, outputs) -> ProcessReconstruction:
    """Analytic single-qubit process reconstruction from probe states.

    `inputs` must be the canonical probe set (H, V, P, R); `outputs` are the
    corresponding reconstructed density matrices.  The raw chi follows from
    linearity of the channel on the operator basis; the reported chi is its
    projection onto the Hermitian PSD cone (eigenvalue clipping plus trace
    renormalization).
    """
    if len(inputs) != 4 or len(outputs) != 4:
        raise ValidationError("expected exactly four probe input/output pairs")
    for given, want, label in zip(inputs, PROBE_STATES, PROBE_LABELS):
        if not given.equivalent_to(want):
            raise ValidationError(f"probe set must be (H, V, P, R); slot {label} differs")
    outs = [np.asarray(o.entries, dtype=complex) for o in outputs]
    e_h, e_v, e_p, e_r = outs

    # channel action on the matrix units, by linearity:
    # |0><1| = P + iR - (1+i)/2 (H + V), |1><0| its adjoint counterpart
    e_01 = e_p + 1j * e_r - (1 + 1j) / 2 * (e_h + e_v)
    e_10 = e_p - 1j * e_r - (1 - 1j) / 2 * (e_h + e_v)

    # superoperator on row-major vec: vec(E(rho)) = S vec(rho)
    s = np.zeros((4, 4), dtype=complex)
    s[:, 0] = e_h.reshape(4)
    s[:, 1] = e_01.reshape(4)
    s[:, 2] = e_10.reshape(4)
    s[:, 3] = e_v.reshape(4)

    chi_raw = np.zeros((4, 4), dtype=complex)
    for m in range(4):
        for n in range(4):
            basis = np.kron(_PAULIS[m], _PAULIS[n].T)
            chi_raw[m, n] = np.trace(basis.conj().T @ s) / 4.0
    return ProcessReconstruction(chi_raw=chi_raw, chi=project_chi(chi_raw))


def project_chi(chi_raw: np.ndarray) -> ProcessMatrix:
    """Nearest physical chi: Hermitize, clip negative eigenvalues, renormalize."""
    herm = (chi_raw + chi_raw.conj().T) / 2.0
    w, v = np.linalg.eigh(herm)
    w = np.clip(w, 0.0, None)
    if w.sum() <= 0.0:
        raise ValidationError("chi projection collapsed to zero")
    out = (v * w) @ v.conj().T
    return ProcessMatrix(out / np.trace(out).real)


def process_fidelity(chi: ProcessMatrix, ideal: ProcessMatrix) -> float:
    """tr(chi_ideal chi), real within 1e-9."""
    val = complex(np.trace(ideal.chi @ chi.chi))
    if abs(val.imag) > 1e-9:
        raise ValidationError(f"process fidelity has imaginary part {val.imag:.3e}")
    return float(val.real)


@dataclass(frozen=True)
class BlochAffineMap:
    """r -> M r + c action of a qubit channel on Bloch vectors."""

    m: np.ndarray
    c: np.ndarray

    def apply(self, r: np.ndarray) -> np.ndarray:
        return self.m @ np.asarray(r, dtype=float) + self.c

    def deformed_sphere(self, n_points: int = 1024) -> np.ndarray:
        """Image of a deterministic Fibonacci sphere sample under the map."""
        k = np.arange(n_points)
        phi = math.pi * (3.0 - math.sqrt(5.0)) * k
        z = 1.0 - 2.0 * (k + 0.5) / n_points
        rxy = np.sqrt(1.0 - z ** 2)
        pts = np.stack([rxy * np.cos(phi), rxy * np.sin(phi), z], axis=1)
        return pts @ self.m.T + self.c


def bloch_map(chi: ProcessMatrix) -> BlochAffineMap:
    """M_ij = tr(sigma_i E(sigma_j))/2, c_i = tr(sigma_i E(I))/2."""
    m = np.zeros((3, 3))
    c = np.zeros(3)
    e_of = [apply_chi(chi.chi, _PAULIS[j]) for j in range(4)]
    for i in range(3):
        c[i] = np.trace(_PAULIS[i + 1] @ e_of[0]).real / 2.0
        for j in range(3):
            m[i, j] = np.trace(_PAULIS[i + 1] @ e_of[j + 1]).real / 2.0
    return BlochAffineMap(m=m, c=c)

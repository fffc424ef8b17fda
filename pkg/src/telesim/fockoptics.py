"""Truncated multi-mode Fock-space engine for the Bell-state measurement.

Models the joint emission of the two down-conversion sources, the 50:50
fiber beam splitter where photons 1 and 3 interfere, and projection onto
detector click patterns.

Mode bookkeeping
----------------
Source states live on nine modes (dense indices 0..8):

    a_H a_V    BSM input arm carrying photon 1
    b_H b_V    BSM input arm carrying photon 3, interfering temporal mode
    b'_H b'_V  same arm, temporal mode orthogonal to photon 1 (fraction 1-xi)
    bob_H bob_V  photon 2, sent to the receiver
    trig       herald photon 4

The beam splitter maps a -> (c+d)/sqrt(2), b -> (c-d)/sqrt(2) and sends the
non-interfering b' copies to primed outputs c'/d' which land on the same
physical detectors as c/d.  A primed input feeding two primed outputs cannot
be expressed on nine slots, so post-splitter states use an eleven-mode
layout (c, d, c', d', bob, trig).  Detector D1 counts c_H + c'_H, D2 counts
c_V + c'_V, D3 d_H + d'_H, D4 d_V + d'_V.

Amplitudes below 1e-12 are pruned after every transformation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, LogicError, ValidationError
from .qstate import PureState

PRUNE_TOL = 1e-12
DEFAULT_N_MAX = 4
MAX_N_MAX = 6

SOURCE_MODES = ("a_H", "a_V", "b_H", "b_V", "bp_H", "bp_V", "bob_H", "bob_V", "trig")
OUTPUT_MODES = ("c_H", "c_V", "d_H", "d_V", "cp_H", "cp_V", "dp_H", "dp_V",
                "bob_H", "bob_V", "trig")

# Detector -> modes whose photon numbers it sums (post-splitter layout).
BSM_DETECTOR_MODES = {
    "D1": ("c_H", "cp_H"),
    "D2": ("c_V", "cp_V"),
    "D3": ("d_H", "dp_H"),
    "D4": ("d_V", "dp_V"),
}


class BsmOutcome(enum.Enum):
    PSI_MINUS = "psi_minus"
    PSI_PLUS = "psi_plus"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class ClickPattern:
    """Set of BSM detectors that fired in one pulse."""

    clicked: frozenset[str]

    def __post_init__(self):
        bad = self.clicked - {"D1", "D2", "D3", "D4"}
        if bad:
            raise ValidationError(f"unknown BSM detector ids: {sorted(bad)}")


# Exactly two opposite-polarization clicks herald a Bell state: different
# output ports -> singlet, same port -> triplet.
_PATTERN_TABLE = {
    frozenset({"D1", "D4"}): BsmOutcome.PSI_MINUS,
    frozenset({"D2", "D3"}): BsmOutcome.PSI_MINUS,
    frozenset({"D1", "D2"}): BsmOutcome.PSI_PLUS,
    frozenset({"D3", "D4"}): BsmOutcome.PSI_PLUS,
}


def classify_pattern(pattern: ClickPattern) -> BsmOutcome:
    """Map a click pattern to the Bell state it heralds, if any."""
    return _PATTERN_TABLE.get(pattern.clicked, BsmOutcome.INCONCLUSIVE)


@dataclass(frozen=True)
class SourceParams:
    """Interaction strengths of the two pair sources and the mode overlap.

    g1 drives the entangled-pair source, g2 the heralded single-photon
    source; per-pulse pair emission probability scales as g^2.  xi is the
    temporal-mode overlap of photon 3 with photon 1 at the beam splitter
    (xi = 1: perfect two-photon interference).
    """

    g1: float
    g2: float
    xi: float = 1.0

    def __post_init__(self):
        if self.g1 < 0 or self.g2 < 0:
            raise ValidationError("interaction strengths must be non-negative")
        if self.g1 ** 2 > 0.2 or self.g2 ** 2 > 0.2:
            raise ValidationError(
                f"small-gain regime requires g^2 <= 0.2, got g1={self.g1}, g2={self.g2}")
        if not 0.0 <= self.xi <= 1.0:
            raise ValidationError(f"mode overlap xi={self.xi} outside [0, 1]")


@dataclass(frozen=True)
class FockState:
    """Sparse complex amplitudes over occupation vectors of named modes.

    Normalized on construction; amplitudes below 1e-12 are dropped.
    """

    amplitudes: dict[tuple[int, ...], complex] = field(repr=False)
    modes: tuple[str, ...] = SOURCE_MODES
    n_max: int = DEFAULT_N_MAX

    def __post_init__(self):
        if not (2 <= self.n_max <= MAX_N_MAX):
            raise ConfigurationError(f"n_max must be in [2, {MAX_N_MAX}], got {self.n_max}")
        total = 0.0
        cleaned: dict[tuple[int, ...], complex] = {}
        for occ, amp in self.amplitudes.items():
            if len(occ) != len(self.modes):
                raise ValidationError("occupation length does not match mode count")
            if any(n < 0 for n in occ):
                raise ValidationError("negative occupation number")
            if sum(occ) > self.n_max:
                raise ValidationError("occupation exceeds the photon-number truncation")
            total += abs(amp) ** 2
        if total <= 0.0:
            raise ValidationError("state has zero norm")
        scale = 1.0 / math.sqrt(total)
        for occ, amp in self.amplitudes.items():
            a = amp * scale
            if abs(a) > PRUNE_TOL:
                cleaned[occ] = a
        object.__setattr__(self, "amplitudes", cleaned)

    def norm_sq(self) -> float:
        return sum(abs(a) ** 2 for a in self.amplitudes.values())

    def mode_index(self, name: str) -> int:
        return self.modes.index(name)

    def dump(self) -> str:
        """One line per occupation vector: 'n1 ... nK re im', sorted."""
        lines = []
        for occ in sorted(self.amplitudes):
            a = self.amplitudes[occ]
            lines.append(" ".join(str(n) for n in occ) + f" {a.real:.12e} {a.imag:.12e}")
        return "\n".join(lines)


def _apply_creation(amps: dict, idx: int, n_max: int,
                    coeff: complex = 1.0) -> dict:
    """Apply coeff * a_idx^dagger, dropping terms above the truncation."""
    out: dict[tuple[int, ...], complex] = {}
    for occ, amp in amps.items():
        if sum(occ) + 1 > n_max:
            continue
        new = list(occ)
        new[idx] += 1
        key = tuple(new)
        out[key] = out.get(key, 0.0) + amp * coeff * math.sqrt(new[idx])
    return out


def _add_into(target: dict, source: dict, scale: complex = 1.0) -> None:
    for occ, amp in source.items():
        target[occ] = target.get(occ, 0.0) + amp * scale


def _pair_op_entangled(amps: dict, n_max: int) -> dict:
    """(a_H^+ bob_V^+ - a_V^+ bob_H^+)/sqrt(2) applied to a source-layout dict."""
    i_ah, i_av = 0, 1
    i_bobh, i_bobv = 6, 7
    s = 1.0 / math.sqrt(2.0)
    t1 = _apply_creation(_apply_creation(amps, i_ah, n_max), i_bobv, n_max)
    t2 = _apply_creation(_apply_creation(amps, i_av, n_max), i_bobh, n_max)
    out: dict[tuple[int, ...], complex] = {}
    _add_into(out, t1, s)
    _add_into(out, t2, -s)
    return out


def _pair_op_heralded(amps: dict, n_max: int, input_polarization: PureState,
                      xi: float) -> dict:
    """[alpha (sqrt(xi) b_H + sqrt(1-xi) b'_H)^+ + beta (...)_V^+] trig^+."""
    i_bh, i_bv, i_bph, i_bpv, i_trig = 2, 3, 4, 5, 8
    ci, cd = math.sqrt(xi), math.sqrt(1.0 - xi)
    with_trig = _apply_creation(amps, i_trig, n_max)
    out: dict[tuple[int, ...], complex] = {}
    alpha, beta = input_polarization.alpha, input_polarization.beta
    if abs(alpha) > 0:
        if ci > 0:
            _add_into(out, _apply_creation(with_trig, i_bh, n_max), alpha * ci)
        if cd > 0:
            _add_into(out, _apply_creation(with_trig, i_bph, n_max), alpha * cd)
    if abs(beta) > 0:
        if ci > 0:
            _add_into(out, _apply_creation(with_trig, i_bv, n_max), beta * ci)
        if cd > 0:
            _add_into(out, _apply_creation(with_trig, i_bpv, n_max), beta * cd)
    return out


def spdc_state(params: SourceParams, input_polarization: PureState,
               n_max: int = DEFAULT_N_MAX) -> FockState:
    """Joint emission of both sources, expanded to floor(n_max/2) pairs each.

    Taylor expansion of exp(g1 A) exp(g2 B) |vac> where A creates one
    entangled pair on (a, bob) and B creates one heralded pair on
    (b/b', trig) carrying `input_polarization`.  Orders are kept coherently;
    occupation vectors above the truncation are dropped, then the state is
    normalized.
    """
    if n_max < 2:
        raise ConfigurationError("n_max must be at least 2 to hold one pair")
    if params.g1 > 0 and params.g2 > 0 and n_max < 4:
        raise ConfigurationError(
            "truncation too small to hold one pair from each source (need n_max >= 4)")
    vac = tuple([0] * 9)
    total: dict[tuple[int, ...], complex] = {vac: 1.0}

    max_pairs = n_max // 2
    # powers of the entangled-pair operator
    a_powers = [{vac: 1.0 + 0j}]
    for _ in range(max_pairs):
        nxt = _pair_op_entangled(a_powers[-1], n_max)
        if not nxt:
            break
        a_powers.append(nxt)
    # heralded-pair powers applied on top of each entangled-pair power
    for j, a_term in enumerate(a_powers):
        if j > 0 and params.g1 == 0:
            break
        coeff_a = params.g1 ** j / math.factorial(j)
        b_term = a_term
        for k in range(0, max_pairs - j + 1):
            if k > 0:
                if params.g2 == 0:
                    break
                b_term = _pair_op_heralded(b_term, n_max, input_polarization, params.xi)
                if not b_term:
                    break
            if j == 0 and k == 0:
                continue  # vacuum already seeded
            coeff = coeff_a * params.g2 ** k / math.factorial(k)
            _add_into(total, b_term, coeff)
    return FockState(total, SOURCE_MODES, n_max)


def apply_mode_map(state: FockState, out_modes: tuple[str, ...],
                   column_map: dict[str, list[tuple[str, complex]]]) -> FockState:
    """Transform creation operators: in^+ -> sum_j coeff_j out_j^+.

    `column_map` gives, for every input mode, its expansion over output
    modes; input modes absent from the map pass through to the output mode
    of the same name.  The map must be an isometry for norms to survive.
    """
    out_idx = {m: i for i, m in enumerate(out_modes)}
    n_out = len(out_modes)
    expansions: list[list[tuple[int, complex]]] = []
    for m in state.modes:
        if m in column_map:
            expansions.append([(out_idx[o], c) for o, c in column_map[m]])
        else:
            expansions.append([(out_idx[m], 1.0)])

    vac_out = tuple([0] * n_out)
    result: dict[tuple[int, ...], complex] = {}
    for occ, amp in state.amplitudes.items():
        # (sum_j c_j out_j^+)^n / sqrt(n!) per occupied input mode,
        # accumulated by repeated operator application
        partial: dict[tuple[int, ...], complex] = {vac_out: amp}
        for in_mode, n in enumerate(occ):
            if n == 0:
                continue
            targets = expansions[in_mode]
            for _ in range(n):
                nxt: dict[tuple[int, ...], complex] = {}
                for j, c in targets:
                    _add_into(nxt, _apply_creation(partial, j, state.n_max, c))
                partial = nxt
            scale = 1.0 / math.sqrt(math.factorial(n))
            partial = {k: v * scale for k, v in partial.items()}
        _add_into(result, partial)
    result = {k: v for k, v in result.items() if abs(v) > PRUNE_TOL}
    return FockState(result, out_modes, state.n_max)


_BS = 1.0 / math.sqrt(2.0)
_BS_COLUMNS = {
    "a_H": [("c_H", _BS), ("d_H", _BS)],
    "a_V": [("c_V", _BS), ("d_V", _BS)],
    "b_H": [("c_H", _BS), ("d_H", -_BS)],
    "b_V": [("c_V", _BS), ("d_V", -_BS)],
    "bp_H": [("cp_H", _BS), ("dp_H", -_BS)],
    "bp_V": [("cp_V", _BS), ("dp_V", -_BS)],
}


def beam_splitter(state: FockState) -> FockState:
    """50:50 splitter on the BSM arms; receiver and herald modes untouched."""
    if state.modes != SOURCE_MODES:
        raise ValidationError("beam_splitter expects a source-layout state")
    return apply_mode_map(state, OUTPUT_MODES, _BS_COLUMNS)


def detector_photon_counts(occ: tuple[int, ...], modes: tuple[str, ...]) -> dict[str, int]:
    """Photon numbers reaching each physical detector (primed modes merged)."""
    idx = {m: i for i, m in enumerate(modes)}
    counts = {}
    for det, det_modes in BSM_DETECTOR_MODES.items():
        counts[det] = sum(occ[idx[m]] for m in det_modes if m in idx)
    counts["TRIG"] = occ[idx["trig"]] if "trig" in idx else 0
    return counts


def click_pattern_from_counts(counts: dict[str, int]) -> ClickPattern:
    return ClickPattern(frozenset(d for d in ("D1", "D2", "D3", "D4") if counts.get(d, 0) > 0))


def nonbob_marginal(state: FockState) -> list[tuple[tuple[int, ...], float, dict]]:
    """Marginal over all non-receiver modes.

    Returns one entry per distinct non-bob occupation f: (f, P(f),
    conditional receiver amplitudes {(n_H, n_V): amp}, unnormalized).
    """
    ih = state.mode_index("bob_H")
    iv = state.mode_index("bob_V")
    rest = [i for i in range(len(state.modes)) if i not in (ih, iv)]
    groups: dict[tuple[int, ...], dict[tuple[int, int], complex]] = {}
    for occ, amp in state.amplitudes.items():
        f = tuple(occ[i] for i in rest)
        groups.setdefault(f, {})[(occ[ih], occ[iv])] = amp
    out = []
    for f, bob_amps in groups.items():
        prob = sum(abs(a) ** 2 for a in bob_amps.values())
        out.append((f, prob, bob_amps))
    out.sort(key=lambda e: e[0])
    return out


def nonbob_modes(state: FockState) -> tuple[str, ...]:
    return tuple(m for m in state.modes if m not in ("bob_H", "bob_V"))


def measure_fock(state: FockState, rng: np.random.Generator
                 ) -> tuple[tuple[int, ...], FockState]:
    """Sample one occupation of all non-receiver modes, Born rule.

    Returns the sampled occupation (over `nonbob_modes(state)`) and the
    normalized conditional state of the receiver modes.
    """
    marginal = nonbob_marginal(state)
    probs = np.array([p for _, p, _ in marginal])
    total = probs.sum()
    if total <= 0.0:
        raise LogicError("state has zero total probability")
    choice = rng.choice(len(marginal), p=probs / total)
    f, _, bob_amps = marginal[choice]
    cond = FockState({occ: a for occ, a in bob_amps.items()},
                     ("bob_H", "bob_V"), state.n_max)
    return f, cond

"""Vectorized internals of the pulse engine.

Private module: :mod:`telesim.experiment` is the public surface.

The per-pulse physics is exact and precomputed once: the joint source
emission is pushed through the beam splitter and reduced to a table of
outcome classes, one per distinct occupation of the non-receiver modes,
each carrying its pulse probability, photon numbers at the five sender-side
detectors, and the conditional (pure) receiver state.  A run then reduces to
sampling classes per pulse and thinning photons into clicks, which
vectorizes over events.  Only pulses that emitted something are ever
materialized; their pulse indices form a Bernoulli process sampled through
geometric gaps.

Random draws happen in a fixed documented order with a fixed chunk size, so
identical (config, seed) reproduce identical outputs bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import fockoptics as fo
from .fockoptics import BsmOutcome
from .qstate import PauliOperator, rotation_about

CHUNK = 2_000_000
DRIFT_BINS = 1025  # odd so that zero drift angle falls on a bin center

_OUTCOME_ORDER = (BsmOutcome.PSI_MINUS, BsmOutcome.PSI_PLUS, BsmOutcome.INCONCLUSIVE)

# click-pattern codes: bit d set when detector D(d+1) clicked
_PATTERN_CODES = {0b1001: 0, 0b0110: 0, 0b0011: 1, 0b1100: 1}  # 0=psi-, 1=psi+

OUTCOME_LUT = np.full(16, 2, dtype=np.int8)
for _code, _o in _PATTERN_CODES.items():
    OUTCOME_LUT[_code] = _o
CONTAINS_LUT = np.zeros(16, dtype=bool)
for _code in range(16):
    CONTAINS_LUT[_code] = any((_code & p) == p for p in _PATTERN_CODES)
NPOP_LUT = np.array([bin(c).count("1") for c in range(16)], dtype=np.int8)
SINGLE_DET_LUT = np.full(16, -1, dtype=np.int8)
for _d in range(4):
    SINGLE_DET_LUT[1 << _d] = _d
# detector d completed by partner p yields the given outcome
PARTNER_MINUS = np.array([3, 2, 1, 0], dtype=np.int8)
PARTNER_PLUS = np.array([1, 0, 3, 2], dtype=np.int8)
_CODE_WEIGHTS = np.array([1, 2, 4, 8], dtype=np.intp)


@dataclass
class PulseTable:
    """Exact per-pulse outcome classes for one configuration."""

    probs: np.ndarray          # (nc,) class probabilities, sum to 1
    det_photons: np.ndarray    # (nc, 5) photon numbers at D1..D4, TRIG
    bob_photons: np.ndarray    # (nc,) conditional receiver photon number
    bob_blocks: np.ndarray     # (nc, jmax+1) amplitudes over (nH=j-i, nV=i)
    jmax: int
    vacuum: int                # index of the empty class
    click_p: np.ndarray        # (nc, 5) click probability per sender detector
    n_max: int


def build_pulse_table(config) -> PulseTable:
    state = fo.spdc_state(config.source, config.charlie_state, config.n_max)
    out = fo.beam_splitter(state)
    marginal = fo.nonbob_marginal(out)
    modes = fo.nonbob_modes(out)

    jmax = config.n_max // 2
    nc = len(marginal)
    probs = np.zeros(nc)
    det_photons = np.zeros((nc, 5), dtype=np.int8)
    bob_photons = np.zeros(nc, dtype=np.int8)
    bob_blocks = np.zeros((nc, jmax + 1), dtype=complex)
    vacuum = -1
    for i, (f, p, bob_amps) in enumerate(marginal):
        probs[i] = p
        counts = fo.detector_photon_counts(f, modes)
        det_photons[i] = [counts["D1"], counts["D2"], counts["D3"], counts["D4"],
                          counts["TRIG"]]
        totals = {h + v for (h, v) in bob_amps}
        if len(totals) != 1:
            raise AssertionError("conditional receiver state mixes photon totals")
        j = totals.pop()
        bob_photons[i] = j
        norm = math.sqrt(sum(abs(a) ** 2 for a in bob_amps.values()))
        for (h, v), a in bob_amps.items():
            bob_blocks[i, v] = a / norm
        if sum(f) == 0 and j == 0:
            vacuum = i
    if vacuum < 0:
        raise AssertionError("pulse table lacks a vacuum class")

    effs = np.array([config.detector_table[d].efficiency
                     for d in ("D1", "D2", "D3", "D4", "TRIG")])
    click_p = 1.0 - (1.0 - effs[None, :]) ** det_photons
    return PulseTable(probs=probs, det_photons=det_photons, bob_photons=bob_photons,
                      bob_blocks=bob_blocks, jmax=jmax, vacuum=vacuum,
                      click_p=click_p, n_max=config.n_max)


def _mode_transform_blocks(w_batch: np.ndarray, jmax: int) -> list[np.ndarray]:
    """Occupation-space transforms induced by 2x2 mode maps.

    For each photon total j, returns T[j] with shape (B, j+1, j+1) where the
    block index counts photons in the second (minus) mode, input index is nV.
    """
    bsz = w_batch.shape[0]
    blocks = []
    for j in range(jmax + 1):
        t = np.zeros((bsz, j + 1, j + 1), dtype=complex)
        for iv in range(j + 1):          # input (nH, nV) = (j - iv, iv)
            n_h, n_v = j - iv, iv
            # (W00 x + W10)^nH convolved with (W01 x + W11)^nV; x marks a
            # photon in the plus mode
            ch = np.zeros((bsz, n_h + 1), dtype=complex)
            for p in range(n_h + 1):
                ch[:, p] = (math.comb(n_h, p)
                            * w_batch[:, 0, 0] ** p * w_batch[:, 1, 0] ** (n_h - p))
            cv = np.zeros((bsz, n_v + 1), dtype=complex)
            for q in range(n_v + 1):
                cv[:, q] = (math.comb(n_v, q)
                            * w_batch[:, 0, 1] ** q * w_batch[:, 1, 1] ** (n_v - q))
            conv = np.zeros((bsz, j + 1), dtype=complex)
            for p in range(n_h + 1):
                for q in range(n_v + 1):
                    conv[:, p + q] += ch[:, p] * cv[:, q]
            for m_plus in range(j + 1):
                m_minus = j - m_plus
                scale = math.sqrt(math.factorial(m_plus) * math.factorial(m_minus)
                                  / (math.factorial(n_h) * math.factorial(n_v)))
                t[:, m_minus, iv] = conv[:, m_plus] * scale
        blocks.append(t)
    return blocks


class BobSampler:
    """Distributions over the receiver's rotated photon counts.

    Table indexed (class, drift bin, feed-forward flag) giving cumulative
    probabilities over m_minus = 0..j; the measurement chain is
    basis-projection o feed-forward o drift rotation.
    """

    def __init__(self, config, table: PulseTable):
        amp = config.drift_angle_rad
        if amp > 0.0:
            self.nbins = DRIFT_BINS
            self.thetas = np.linspace(-amp, amp, self.nbins)
        else:
            self.nbins = 1
            self.thetas = np.zeros(1)
        self.amp = amp

        u_drift = np.empty((self.nbins, 2, 2), dtype=complex)
        for k, th in enumerate(self.thetas):
            u_drift[k] = rotation_about((1.0, 1.0, 1.0), th) if amp > 0 else np.eye(2)
        b_rows = config.bob_basis.projector_matrix
        z = PauliOperator.Z.matrix
        nc, jmax = table.probs.size, table.jmax
        self.jmax = jmax
        # cumulative P(m_minus) tables, one per feed-forward branch
        self.cum = np.ones((2, nc, self.nbins, jmax + 1))
        for ff in (0, 1):
            mid = z if ff else np.eye(2, dtype=complex)
            w = np.einsum("ij,jk,bkl->bil", b_rows, mid, u_drift)
            blocks = _mode_transform_blocks(w, jmax)
            for j in range(jmax + 1):
                sel = np.nonzero(table.bob_photons == j)[0]
                if sel.size == 0:
                    continue
                amps = np.einsum("bmi,ci->cbm", blocks[j], table.bob_blocks[sel, :j + 1])
                dist = np.abs(amps) ** 2
                dist /= dist.sum(axis=2, keepdims=True)
                cum = np.cumsum(dist, axis=2)
                self.cum[ff][sel, :, :j + 1] = cum
                self.cum[ff][sel, :, j + 1:] = 1.0

    def theta_bins(self, times_ps: np.ndarray, duration_ps: int) -> np.ndarray:
        if self.nbins == 1:
            return np.zeros(times_ps.shape, dtype=np.int32)
        theta = self.amp * np.sin(2.0 * np.pi * (times_ps / duration_ps))
        k = np.rint((theta + self.amp) / (2.0 * self.amp) * (self.nbins - 1))
        return k.astype(np.int32)

    def sample_m_minus(self, rng, cls, bins, ff_flags, j_of_cls) -> np.ndarray:
        """One categorical draw per event; returns m_minus (m_plus = j - m)."""
        u = rng.random(cls.size)
        rows = np.where(ff_flags[:, None], self.cum[1][cls, bins],
                        self.cum[0][cls, bins])
        m = (u[:, None] >= rows).sum(axis=1)
        return np.minimum(m, j_of_cls)


def _bernoulli_indices(rng, p: float, n_pulses: int) -> np.ndarray:
    """Sorted indices of a Bernoulli(p) process over [0, n_pulses)."""
    if p <= 0.0:
        return np.empty(0, dtype=np.int64)
    if p >= 1.0:
        return np.arange(n_pulses, dtype=np.int64)
    chunks = []
    last = -1
    while last < n_pulses:
        remaining = n_pulses - last
        batch = max(1024, int(remaining * p + 6.0 * math.sqrt(remaining * p) + 16))
        gaps = rng.geometric(p, batch).astype(np.int64)
        idx = last + np.cumsum(gaps)
        chunks.append(idx)
        last = int(idx[-1])
    idx = np.concatenate(chunks)
    return idx[idx < n_pulses]


def _sample_classes(rng, cdf: np.ndarray, ids: np.ndarray, m: int) -> np.ndarray:
    """m iid draws from the conditional class distribution."""
    u = rng.random(m)
    pos = np.searchsorted(cdf, u, side="right")
    return ids[np.minimum(pos, ids.size - 1)]


def _bob_click_luts(config, jmax: int) -> tuple[np.ndarray, np.ndarray]:
    eta = config.eta
    e5 = config.detector_table["D5"].efficiency
    e6 = config.detector_table["D6"].efficiency
    m = np.arange(jmax + 1)
    return 1.0 - (1.0 - eta * e5) ** m, 1.0 - (1.0 - eta * e6) ** m


def _quantize(times: np.ndarray, res: int) -> np.ndarray:
    return (np.rint(times / res).astype(np.int64)) * res


class _Accumulator:
    """Shared tallies: genuine counts, attempt histogram, event tallies."""

    def __init__(self):
        self.genuine = np.zeros((2, 2), dtype=np.int64)   # [outcome, slot]
        self.attempts = np.zeros(3, dtype=np.int64)
        self.events = np.zeros((2, 2), dtype=np.int64)    # unambiguous window events
        self.n_events = 0
        self.n_ambiguous = 0

    def add_genuine(self, outcome, slot):
        if outcome.size:
            np.add.at(self.genuine, (outcome, slot), 1)

    def add_attempts(self, outcome):
        if outcome.size:
            self.attempts += np.bincount(outcome, minlength=3)

    def add_events(self, outcome, slot):
        if outcome.size:
            np.add.at(self.events, (outcome, slot), 1)
            self.n_events += outcome.size

    def add_ambiguous(self, n):
        self.n_events += int(n)
        self.n_ambiguous += int(n)


def _count_records(config, acc: _Accumulator) -> list:
    from .experiment import CountRecord
    return [CountRecord(config.bob_basis, _OUTCOME_ORDER[o],
                        int(acc.genuine[o, 0]), int(acc.genuine[o, 1]))
            for o in (0, 1)]


def _attempt_dict(acc: _Accumulator) -> dict:
    return {_OUTCOME_ORDER[i]: int(acc.attempts[i]) for i in range(3)}


def run_stream(config):
    """Tag-path execution; returns (det_ids, times, records, attempts)."""
    table = build_pulse_table(config)
    sampler = BobSampler(config, table)
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    n_pulses = config.pulses
    rep = config.rep_period_ps
    res = config.tag_resolution_ps
    duration_ps = config.duration_ps()
    sigma = config.jitter_sigma_ps
    p5_lut, p6_lut = _bob_click_luts(config, table.jmax)

    live = np.nonzero(np.arange(table.probs.size) != table.vacuum)[0]
    p_live = float(table.probs[live].sum())
    cdf = np.cumsum(table.probs[live] / p_live)

    idx = _bernoulli_indices(rng, p_live, n_pulses)
    m_events = idx.size
    cls = _sample_classes(rng, cdf, live, m_events)

    acc = _Accumulator()
    tag_det: list[np.ndarray] = []
    tag_time: list[np.ndarray] = []

    for s in range(0, m_events, CHUNK):
        c = cls[s:s + CHUNK]
        t_idx = idx[s:s + CHUNK]
        n = c.size
        epochs = t_idx * rep

        u = rng.random((n, 5))
        clicks = u < table.click_p[c]
        code = clicks[:, :4].astype(np.intp) @ _CODE_WEIGHTS
        outcome = OUTCOME_LUT[code]
        trig = clicks[:, 4]
        bins = sampler.theta_bins(epochs, duration_ps)
        ff = np.logical_and(config.feed_forward, outcome == 1)

        j_c = table.bob_photons[c].astype(np.int64)
        m_minus = sampler.sample_m_minus(rng, c, bins, ff, j_c)
        m_plus = j_c - m_minus
        click5 = rng.random(n) < p5_lut[m_plus]
        click6 = rng.random(n) < p6_lut[m_minus]

        conclusive = outcome < 2
        anybob = click5 | click6
        xorbob = click5 ^ click6
        gen = conclusive & trig & xorbob
        acc.add_genuine(outcome[gen].astype(np.intp), click6[gen].astype(np.intp))
        att = trig & anybob
        acc.add_attempts(outcome[att].astype(np.intp))

        # tags, fixed detector order D1..D4, TRIG, D5, D6
        for d in range(5):
            mask = clicks[:, d]
            k = int(mask.sum())
            if k == 0:
                continue
            jit = rng.normal(0.0, sigma, k) if sigma > 0 else np.zeros(k)
            t = _quantize(epochs[mask] + jit, res)
            tag_det.append(np.full(k, d if d < 4 else 6, dtype=np.uint8))
            tag_time.append(np.maximum(t, 0))
        for det_id, mask in ((4, click5), (5, click6)):
            k = int(mask.sum())
            if k == 0:
                continue
            jit = rng.normal(0.0, sigma, k) if sigma > 0 else np.zeros(k)
            t = _quantize(epochs[mask] + config.ff_delay_ps + jit, res)
            tag_det.append(np.full(k, det_id, dtype=np.uint8))
            tag_time.append(np.maximum(t, 0))

    # dark counts: homogeneous Poisson per detector on the tagger grid
    n_slots = duration_ps // res
    duration_s = config.duration_s()
    for d, name in enumerate(("D1", "D2", "D3", "D4", "D5", "D6", "TRIG")):
        rate = config.detector_table[name].dark_rate_hz
        if rate <= 0.0:
            continue
        k = int(rng.poisson(rate * duration_s))
        if k == 0:
            continue
        t = rng.integers(0, n_slots, k, dtype=np.int64) * res
        tag_det.append(np.full(k, d, dtype=np.uint8))
        tag_time.append(t)

    if tag_det:
        det = np.concatenate(tag_det)
        times = np.concatenate(tag_time)
        order = np.lexsort((det, times))
        det, times = det[order], times[order]
    else:
        det = np.empty(0, dtype=np.uint8)
        times = np.empty(0, dtype=np.int64)

    return det, times, _count_records(config, acc), _attempt_dict(acc)


def run_classpath(config):
    """Tag-free execution; returns (records, attempts, EventTally).

    Exact for windows inside one pulse period: every four-fold is either
    fully genuine or completed by exactly one dark click, whose acceptance
    window around three genuine tags of span r is 2*tau - r.  Double-dark
    completions, of order (rate*tau)^2, are neglected, as is the chance that
    an unrelated dark falls inside a clean event's window and flags it
    ambiguous (order sum(rates)*tau ~ 1e-5).
    """
    from .experiment import EventTally
    table = build_pulse_table(config)
    sampler = BobSampler(config, table)
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    n_pulses = config.pulses
    rep = config.rep_period_ps
    res = config.tag_resolution_ps
    duration_ps = config.duration_ps()
    sigma = config.jitter_sigma_ps
    tau = float(config.window_ps)
    p5_lut, p6_lut = _bob_click_luts(config, table.jmax)

    bsm_photons = table.det_photons[:, :4].sum(axis=1)
    cand = np.nonzero(bsm_photons >= 2)[0]
    cand = cand[cand != table.vacuum]
    p_cand = float(table.probs[cand].sum())

    n5 = config.detector_table["D5"].dark_rate_hz
    n6 = config.detector_table["D6"].dark_rate_hz
    ntrig = config.detector_table["TRIG"].dark_rate_hz
    nbsm = np.array([config.detector_table[f"D{i}"].dark_rate_hz for i in (1, 2, 3, 4)])

    acc = _Accumulator()
    if p_cand > 0.0:
        m_events = int(rng.binomial(n_pulses, p_cand))
        cdf = np.cumsum(table.probs[cand] / p_cand)
        cls = _sample_classes(rng, cdf, cand, m_events)

        for s in range(0, m_events, CHUNK):
            c = cls[s:s + CHUNK]
            n = c.size
            u = rng.random((n, 5))
            clicks = u < table.click_p[c]
            code = clicks[:, :4].astype(np.intp) @ _CODE_WEIGHTS
            outcome = OUTCOME_LUT[code]
            trig = clicks[:, 4]

            if sampler.nbins > 1:
                t_idx = rng.integers(0, n_pulses, n, dtype=np.int64)
                bins = sampler.theta_bins(t_idx * rep, duration_ps)
            else:
                bins = np.zeros(n, dtype=np.int32)
            ff = np.logical_and(config.feed_forward, outcome == 1)
            j_c = table.bob_photons[c].astype(np.int64)
            m_minus = sampler.sample_m_minus(rng, c, bins, ff, j_c)
            m_plus = j_c - m_minus
            click5 = rng.random(n) < p5_lut[m_plus]
            click6 = rng.random(n) < p6_lut[m_minus]

            conclusive = outcome < 2
            anybob = click5 | click6
            xorbob = click5 ^ click6
            bothbob = click5 & click6
            slot = click6.astype(np.intp)          # valid where xorbob

            gen = conclusive & trig & xorbob
            acc.add_genuine(outcome[gen].astype(np.intp), slot[gen])
            att = trig & anybob
            acc.add_attempts(outcome[att].astype(np.intp))

            # quantized jitters for up to 7 same-pulse tags; cumulative
            # running ranges give the span of the first k role tags
            jit = _quantize(rng.normal(0.0, sigma, (n, 7)), res) if sigma > 0 \
                else np.zeros((n, 7), dtype=np.int64)
            cmax = np.maximum.accumulate(jit, axis=1)
            cmin = np.minimum.accumulate(jit, axis=1)
            rng_k = (cmax - cmin).astype(np.float64)   # range of first k+1 tags
            r3, r4, r5 = rng_k[:, 2], rng_k[:, 3], rng_k[:, 4]

            u_dark = rng.random(n)
            u_det = rng.random(n)

            # A: fully genuine four-folds, window acceptance on the 4 tags
            a_mask = gen & (r4 <= tau)
            acc.add_events(outcome[a_mask].astype(np.intp), slot[a_mask])
            # genuine but both receiver detectors fired: ambiguous
            a2 = conclusive & trig & bothbob & (r5 <= tau)
            acc.add_ambiguous(a2.sum())
            # a conclusive subset inside a larger click set: ambiguous
            contains = CONTAINS_LUT[code] & ~conclusive
            n_tags = (NPOP_LUT[code] + trig.astype(np.int8)
                      + click5.astype(np.int8) + click6.astype(np.int8)).astype(np.intp)
            a3 = contains & trig & anybob
            if a3.any():
                span = np.take_along_axis(rng_k, np.maximum(n_tags - 1, 0)[:, None],
                                          axis=1)[:, 0]
                acc.add_ambiguous(int((a3 & (span <= tau)).sum()))

            # B: three-fold plus a receiver dark inside the 2*tau - r window
            b_mask = conclusive & trig & ~anybob & (r3 <= tau)
            win = np.maximum(2.0 * tau - r3, 0.0) * 1e-12
            p_dark = (n5 + n6) * win
            b_hit = b_mask & (u_dark < p_dark)
            b_slot = (u_det >= (n5 / (n5 + n6) if n5 + n6 > 0 else 1.0)).astype(np.intp)
            acc.add_events(outcome[b_hit].astype(np.intp), b_slot[b_hit])

            # C: conclusive + receiver click, herald completed by a dark
            c_mask = conclusive & ~trig & xorbob & (r3 <= tau)
            c_hit = c_mask & (u_dark < ntrig * win)
            acc.add_events(outcome[c_hit].astype(np.intp), slot[c_hit])
            c_amb = conclusive & ~trig & bothbob & (r4 <= tau) \
                & (u_dark < ntrig * np.maximum(2.0 * tau - r4, 0.0) * 1e-12)
            acc.add_ambiguous(c_amb.sum())

            # D: single BSM click + herald + receiver click, pattern
            # completed by a dark on one of the two partner detectors
            d_mask = (NPOP_LUT[code] == 1) & trig & xorbob & (r3 <= tau)
            if d_mask.any():
                d_idx = SINGLE_DET_LUT[code]
                pm = np.where(d_idx >= 0, PARTNER_MINUS[np.maximum(d_idx, 0)], 0)
                pp = np.where(d_idx >= 0, PARTNER_PLUS[np.maximum(d_idx, 0)], 0)
                p1 = nbsm[pm] * win
                p2 = nbsm[pp] * win
                hit1 = d_mask & (u_dark < p1)
                hit2 = d_mask & ~hit1 & (u_dark < p1 + p2)
                out1 = np.zeros(n, dtype=np.intp)          # partner_minus -> psi-
                out2 = np.ones(n, dtype=np.intp)           # partner_plus -> psi+
                acc.add_events(out1[hit1], slot[hit1])
                acc.add_events(out2[hit2], slot[hit2])

    tally = EventTally(
        window_ps=config.window_ps,
        n_events=acc.n_events,
        n_ambiguous=acc.n_ambiguous,
        by_outcome={
            BsmOutcome.PSI_MINUS: (int(acc.events[0, 0]), int(acc.events[0, 1])),
            BsmOutcome.PSI_PLUS: (int(acc.events[1, 0]), int(acc.events[1, 1])),
        },
    )
    return _count_records(config, acc), _attempt_dict(acc), tally


def expected_rates(config) -> dict[str, float]:
    """Analytic per-pulse four-fold probability estimates (drift ignored)."""
    table = build_pulse_table(config)
    sampler = BobSampler(config.with_overrides(drift_angle_rad=0.0), table) \
        if config.drift_angle_rad > 0 else BobSampler(config, table)
    p5_lut, p6_lut = _bob_click_luts(config, table.jmax)

    n5 = config.detector_table["D5"].dark_rate_hz
    n6 = config.detector_table["D6"].dark_rate_hz
    r_bar = 1.7 * config.jitter_sigma_ps
    win = max(2.0 * config.window_ps - r_bar, 0.0) * 1e-12

    p_click = table.click_p
    genuine = 0.0
    floor = 0.0
    for i in range(table.probs.size):
        if i == table.vacuum:
            continue
        p_trig = p_click[i, 4]
        if p_trig <= 0.0:
            continue
        # probability that the BSM click set equals each conclusive pattern
        p_concl = 0.0
        for code in _PATTERN_CODES:
            prob = 1.0
            for d in range(4):
                pd = p_click[i, d]
                prob *= pd if (code >> d) & 1 else (1.0 - pd)
            p_concl += prob
        if p_concl <= 0.0:
            continue
        j = int(table.bob_photons[i])
        dist = np.abs(sampler.cum[0][i, 0])  # cumulative; recover pmf
        pmf = np.diff(np.concatenate([[0.0], dist]))[:j + 1]
        p_click5 = float(sum(pmf[mm] * p5_lut[j - mm] for mm in range(j + 1)))
        p_click6 = float(sum(pmf[mm] * p6_lut[mm] for mm in range(j + 1)))
        p_xor = p_click5 * (1 - p_click6) + p_click6 * (1 - p_click5)
        p_none = (1 - p_click5) * (1 - p_click6)
        genuine += table.probs[i] * p_concl * p_trig * p_xor
        floor += table.probs[i] * p_concl * p_trig * p_none * (n5 + n6) * win
    return {"genuine_per_pulse": genuine, "accidental_per_pulse": floor,
            "total_per_pulse": genuine + floor}

"""Monte-Carlo pulse engine: clock, link loss, detectors, time tags.

Drives the pulsed source at the configured repetition period, propagates each
pulse's emission through the Bell-state measurement, applies link attenuation
and detector imperfections by binomial thinning at detection, superimposes
dark counts, and emits a time-tag stream plus genuine-path count records.

Two statistically equivalent execution paths exist:

* :func:`run` materializes the full time-tag stream (every click, genuine and
  dark) for downstream coincidence analysis.
* :func:`run_counts` skips tag materialization and aggregates window-level
  teleportation events directly; it is exact for coincidence windows shorter
  than the pulse separation (single-dark completions included, double-dark
  terms of order (n*tau)^2 neglected) and orders of magnitude faster.

Identical (config, seed) always reproduce identical outputs within a path.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import CalibrationError, ConfigurationError, LogicError, ValidationError
from .fockoptics import BsmOutcome, SourceParams
from .qstate import (DensityMatrix, MeasurementBasis, PauliOperator, PureState,
                     rotation_about)

DETECTOR_NAMES = ("D1", "D2", "D3", "D4", "D5", "D6", "TRIG")
DETECTOR_IDS = {name: i for i, name in enumerate(DETECTOR_NAMES)}
TRIG_ID = DETECTOR_IDS["TRIG"]

# Axis of the slow polarization drift in the receiver's delay fiber; skew so
# that no canonical state is an eigenstate of the drift.
DRIFT_AXIS = (1.0, 1.0, 1.0)

QTT_MAGIC = b"QTT1"


@dataclass(frozen=True)
class DetectorSpec:
    """Threshold detector: quantum efficiency and dark-count rate."""

    efficiency: float = 0.5
    dark_rate_hz: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValidationError(f"efficiency {self.efficiency} outside [0, 1]")
        if self.dark_rate_hz < 0.0:
            raise ValidationError("dark rate must be non-negative")


def default_detector_table() -> dict[str, DetectorSpec]:
    """Defaults: Si-APD-like 0.5 efficiency; receiver darks 180/400 Hz
    (cooled to -40 C), sender-side darks 300 Hz (assumed, not measured)."""
    table = {name: DetectorSpec(0.5, 300.0) for name in ("D1", "D2", "D3", "D4", "TRIG")}
    table["D5"] = DetectorSpec(0.5, 180.0)
    table["D6"] = DetectorSpec(0.5, 400.0)
    return table


@dataclass(frozen=True)
class ExperimentConfig:
    """Full parameterization of one run. Immutable; seed fixes all randomness."""

    source: SourceParams
    pulses: int
    seed: int
    charlie_state: PureState
    bob_basis: MeasurementBasis
    attenuation_db: float = 0.0
    rep_period_ps: int = 12500
    detector_table: dict[str, DetectorSpec] = field(default_factory=default_detector_table)
    jitter_sigma_ps: float = 500.0
    tag_resolution_ps: int = 156
    feed_forward: bool = True
    ff_delay_ps: int = 250_000
    drift_angle_rad: float = 0.0
    window_ps: int = 3000
    n_max: int = 4

    def __post_init__(self):
        if self.pulses <= 0:
            raise ConfigurationError("pulses must be positive")
        if self.rep_period_ps <= 0:
            raise ConfigurationError("rep_period_ps must be positive")
        if self.attenuation_db < 0.0:
            raise ConfigurationError("attenuation_db must be >= 0")
        if self.tag_resolution_ps <= 0:
            raise ConfigurationError("tag_resolution_ps must be positive")
        if self.window_ps < self.tag_resolution_ps:
            raise ConfigurationError("window_ps must be at least one tag resolution step")
        if self.jitter_sigma_ps < 0.0:
            raise ConfigurationError("jitter_sigma_ps must be >= 0")
        if self.ff_delay_ps < 0:
            raise ConfigurationError("ff_delay_ps must be >= 0")
        if self.drift_angle_rad < 0.0:
            raise ConfigurationError("drift_angle_rad must be >= 0")
        missing = set(DETECTOR_NAMES) - set(self.detector_table)
        if missing:
            raise ConfigurationError(f"detector_table missing entries: {sorted(missing)}")
        if self.duration_ps() + self.ff_delay_ps >= 2 ** 63:
            raise ConfigurationError("run duration overflows the 64-bit time axis")

    @property
    def eta(self) -> float:
        """Link power transmission 10^(-attenuation_db/10)."""
        return 10.0 ** (-self.attenuation_db / 10.0)

    def duration_ps(self) -> int:
        return self.pulses * self.rep_period_ps

    def duration_s(self) -> float:
        return self.duration_ps() * 1e-12

    def with_overrides(self, **kwargs) -> "ExperimentConfig":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class TimeTag:
    """One detector click: (detector name, time in ps on the tagger grid)."""

    detector: str
    time_ps: int


class TagStream:
    """Time-ordered click stream, stored as packed arrays.

    Behaves as a sequence of :class:`TimeTag`; bulk consumers should use the
    `.detectors` / `.times_ps` arrays directly.
    """

    def __init__(self, detectors: np.ndarray, times_ps: np.ndarray, resolution_ps: int):
        self.detectors = np.asarray(detectors, dtype=np.uint8)
        self.times_ps = np.asarray(times_ps, dtype=np.int64)
        self.resolution_ps = int(resolution_ps)
        if self.detectors.shape != self.times_ps.shape:
            raise ValidationError("detector and time arrays must have equal length")

    def __len__(self) -> int:
        return int(self.detectors.size)

    def __getitem__(self, i) -> TimeTag:
        return TimeTag(DETECTOR_NAMES[self.detectors[i]], int(self.times_ps[i]))

    def __iter__(self):
        for d, t in zip(self.detectors, self.times_ps):
            yield TimeTag(DETECTOR_NAMES[d], int(t))


@dataclass(frozen=True)
class CountRecord:
    """Genuine four-fold tallies for one (analysis basis, BSM outcome)."""

    basis: MeasurementBasis
    bsm: BsmOutcome
    n_plus: int
    n_minus: int


@dataclass(frozen=True)
class EventTally:
    """Window-level teleportation events (genuine plus accidental).

    `by_outcome` maps a conclusive BSM outcome to (n_plus, n_minus) clicks of
    the receiver's +1/-1 detectors over unambiguous events; `n_events` counts
    every emitted four-fold including ambiguous ones.
    """

    window_ps: int
    n_events: int
    n_ambiguous: int
    by_outcome: dict[BsmOutcome, tuple[int, int]]

    @property
    def n_plus(self) -> int:
        return sum(v[0] for v in self.by_outcome.values())

    @property
    def n_minus(self) -> int:
        return sum(v[1] for v in self.by_outcome.values())


@dataclass(frozen=True)
class RunResult:
    """Output of the pulse engine."""

    config: ExperimentConfig
    tags: TagStream | None
    records: list[CountRecord]
    attempts: dict[BsmOutcome, int]
    tally: EventTally | None = None

    def record(self, bsm: BsmOutcome) -> CountRecord:
        for r in self.records:
            if r.bsm is bsm:
                return r
        raise LogicError(f"no count record for outcome {bsm}")


def apply_feed_forward(state: DensityMatrix, outcome: BsmOutcome) -> DensityMatrix:
    """Receiver-side correction: identity for the singlet herald, a relative
    pi phase between H and V (sigma_z) for the triplet herald."""
    if outcome is BsmOutcome.INCONCLUSIVE:
        raise LogicError("feed-forward is undefined for an inconclusive BSM")
    if outcome is BsmOutcome.PSI_MINUS:
        return state
    z = PauliOperator.Z.matrix
    return DensityMatrix(z @ state.entries @ z)


def drift_rotation(time_ps: int, config: ExperimentConfig, axis=DRIFT_AXIS) -> np.ndarray:
    """Slow sinusoidal polarization rotation of the receiver's photon.

    Angle drift_angle_rad * sin(2 pi t / T) about a fixed skew axis, with T
    the total run duration; identity at t = 0 and for zero amplitude.
    """
    if config.drift_angle_rad == 0.0:
        return np.eye(2, dtype=complex)
    theta = config.drift_angle_rad * math.sin(2.0 * math.pi * time_ps / config.duration_ps())
    return rotation_about(axis, theta)


def calibrate_g(target_pair_rate_hz: float, rep_rate_hz: float,
                assumed_two_fold_efficiency: float) -> float:
    """Map a detected pair rate to an interaction strength.

    Assumes pair emission probability per pulse g^2 and a combined two-fold
    detection efficiency; g = sqrt(rate / (rep_rate * efficiency)).
    """
    if target_pair_rate_hz <= 0 or rep_rate_hz <= 0 or assumed_two_fold_efficiency <= 0:
        raise ValidationError("calibration inputs must be positive")
    g = math.sqrt(target_pair_rate_hz / (rep_rate_hz * assumed_two_fold_efficiency))
    if g ** 2 > 0.2:
        raise CalibrationError(
            f"calibrated g={g:.4f} leaves the small-gain regime (g^2 = {g**2:.4f} > 0.2); "
            "raise the assumed efficiency or lower the target rate")
    return g


def expected_detector(charlie: PureState, basis: MeasurementBasis,
                      outcome: BsmOutcome, hardware_corrected: bool) -> int | None:
    """Receiver detector slot (0 = plus, 1 = minus) a correct teleport hits.

    With hardware feed-forward the expected state is Charlie's for both
    conclusive outcomes; without it, the triplet outcome expects sigma_z
    applied to Charlie's state.  Returns None when the expected state is not
    an eigenstate of the analysis basis.
    """
    ket = charlie.ket()
    if not hardware_corrected and outcome is BsmOutcome.PSI_PLUS:
        ket = PauliOperator.Z.matrix @ ket
    plus, minus = basis.states
    p_plus = abs(np.vdot(plus.ket(), ket)) ** 2
    if p_plus > 1.0 - 1e-9:
        return 0
    if p_plus < 1e-9:
        return 1
    return None


def run(config: ExperimentConfig) -> RunResult:
    """Simulate the full run and materialize the time-tag stream.

    The tag stream contains every click (genuine and dark) sorted by time
    with detector-id tie-break; receiver tags are delayed by ff_delay_ps.
    Count records aggregate genuine four-folds only (conclusive BSM, herald
    click, exactly one receiver click), with no coincidence window applied.
    """
    from . import engine
    det, times, records, attempts = engine.run_stream(config)
    return RunResult(config=config,
                     tags=TagStream(det, times, config.tag_resolution_ps),
                     records=records, attempts=attempts)


def run_counts(config: ExperimentConfig) -> RunResult:
    """Simulate the run without tags; aggregate window events directly.

    Statistically identical to running :func:`run` and extracting four-folds
    with `window_ps`, for windows shorter than the pulse separation minus the
    jitter spread.  Raises if the window is too wide for that equivalence.
    """
    from . import engine
    max_window = config.rep_period_ps - 6 * int(config.jitter_sigma_ps)
    if config.window_ps > max_window:
        raise ConfigurationError(
            f"window_ps={config.window_ps} too wide for the tag-free path "
            f"(must be < {max_window}); use run() and coincidence analysis")
    records, attempts, tally = engine.run_classpath(config)
    return RunResult(config=config, tags=None, records=records,
                     attempts=attempts, tally=tally)


def expected_rates(config: ExperimentConfig) -> dict[str, float]:
    """Analytic per-pulse event-rate estimates used to size runs.

    Returns genuine and dark-completed four-fold probabilities per pulse
    (drift averaged out, window-acceptance approximated).
    """
    from . import engine
    return engine.expected_rates(config)


# ---------------------------------------------------------------------------
# Tag stream file formats
# ---------------------------------------------------------------------------

_QTT_RECORD = struct.Struct("<BQ")


def write_tags_qtt(path, stream: TagStream) -> None:
    """Binary format: magic 'QTT1', u32 resolution, then {u8 id, u64 ps}."""
    rec = np.empty(len(stream), dtype=np.dtype([("det", "u1"), ("t", "<u8")], align=False))
    rec["det"] = stream.detectors
    rec["t"] = stream.times_ps.astype(np.uint64)
    with open(path, "wb") as fh:
        fh.write(QTT_MAGIC)
        fh.write(struct.pack("<I", stream.resolution_ps))
        fh.write(rec.tobytes())


def read_tags_qtt(path) -> TagStream:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != QTT_MAGIC:
            raise ValidationError(f"not a QTT1 file: magic {magic!r}")
        (resolution,) = struct.unpack("<I", fh.read(4))
        body = fh.read()
    rec = np.frombuffer(body, dtype=np.dtype([("det", "u1"), ("t", "<u8")], align=False))
    return TagStream(rec["det"].copy(), rec["t"].astype(np.int64), resolution)


def write_tags_csv(path, stream: TagStream) -> None:
    """CSV mirror of the binary format: header `detector,time_ps`."""
    with open(path, "w", newline="") as fh:
        fh.write("detector,time_ps\n")
        buf = io.StringIO()
        for d, t in zip(stream.detectors, stream.times_ps):
            buf.write(f"{d},{t}\n")
        fh.write(buf.getvalue())


def read_tags_csv(path, resolution_ps: int) -> TagStream:
    data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
    if data.size == 0:
        return TagStream(np.empty(0, np.uint8), np.empty(0, np.int64), resolution_ps)
    return TagStream(data[:, 0].astype(np.uint8), data[:, 1], resolution_ps)

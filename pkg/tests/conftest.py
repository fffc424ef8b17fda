import numpy as np
import pytest

from telesim import experiment as ex
from telesim import qstate as qs
from telesim.fockoptics import SourceParams


def perfect_detectors(dark_hz: float = 0.0) -> dict:
    return {name: ex.DetectorSpec(1.0, dark_hz) for name in ex.DETECTOR_NAMES}


def ideal_config(state=qs.P, basis=qs.MeasurementBasis.PM, pulses=200_000,
                 seed=7, feed_forward=True, **overrides) -> ex.ExperimentConfig:
    """Lossless, noiseless, fully efficient run in the single-pair regime."""
    kwargs = dict(
        source=SourceParams(0.4, 0.4, 1.0),
        pulses=pulses,
        seed=seed,
        charlie_state=state,
        bob_basis=basis,
        attenuation_db=0.0,
        detector_table=perfect_detectors(),
        feed_forward=feed_forward,
    )
    kwargs.update(overrides)
    return ex.ExperimentConfig(**kwargs)


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)

import numpy as np
import pytest

from lfisensor import GroundTruth, WorkingPoint, calibrate, synthetic_cycles

#: Speed of light used by independent test oracles (CODATA exact value).
C = 299792458.0


def make_wp(**overrides) -> WorkingPoint:
    """Short-range working point used across the suite.

    Steep slope 1e15 Hz/s, rt 0.5, 0.25 ms ramps at 2 MHz sampling:
    1 kHz measurement rate, beats up to ~0.8 MHz, 500-sample frames.
    """
    kwargs = dict(
        ramp_duration=0.25e-3,
        steep_slope=1e15,
        ratio_rt=0.5,
        sampling_rate=2e6,
        hp_cutoff=10e3,
    )
    kwargs.update(overrides)
    return WorkingPoint(**kwargs)


@pytest.fixture(scope="session")
def wp() -> WorkingPoint:
    return make_wp()


@pytest.fixture(scope="session")
def quiet_cal(wp):
    """Calibration from noise-free no-target cycles (all-zero reference)."""
    cycles = synthetic_cycles(wp, GroundTruth(0.0, 0.0), 0.0, 0.0, seed=11, n_cycles=16)
    return calibrate(cycles, wp)


@pytest.fixture(scope="session")
def noisy_cal(wp):
    """Calibration from seeded white-noise no-target cycles."""
    cycles = synthetic_cycles(
        wp, GroundTruth(0.0, 0.0), 0.0, noise_sigma=0.3, seed=13, n_cycles=64
    )
    return calibrate(cycles, wp)


def true_beats(wp, distance, velocity) -> np.ndarray:
    """Independent forward model: signed beats of the four ramps."""
    s = wp.steep_slope
    slopes = np.array([s, -s, wp.ratio_rt * s, -wp.ratio_rt * s])
    return (2.0 * distance * slopes + wp.emitted_frequency * velocity) / C

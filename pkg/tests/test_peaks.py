import numpy as np
import pytest

from lfisensor import ParameterError, frame_spectrum
from lfisensor.peaks import (
    GAUSSIAN,
    WEIGHTED_AVERAGE,
    estimate_peak,
    find_max_bin,
    gaussian_interpolate,
    validity_threshold,
    weighted_average_interpolate,
)
from lfisensor.spectral import (
    CalibrationProfile,
    RampSpectrum,
    bin_frequencies,
    subtract_floor,
)

from conftest import make_wp

WP = make_wp()
BIN_WIDTH = WP.sampling_rate / 2048


def _spectrum(magnitudes):
    return RampSpectrum(
        ramp_index=0,
        bin_frequencies=bin_frequencies(WP, 2048),
        magnitudes=np.asarray(magnitudes, dtype=float),
        n_bins=2048,
    )


def _tone_spectrum(frequency, phase=0.0):
    t = np.arange(WP.samples_per_ramp) / WP.sampling_rate
    return frame_spectrum(np.cos(2 * np.pi * frequency * t + phase), WP, 2048)


def test_find_max_bin_basic():
    mags = np.zeros(1024)
    mags[37] = 1.0
    assert find_max_bin(_spectrum(mags)) == 37


def test_find_max_bin_tie_breaks_low():
    mags = np.zeros(1024)
    mags[[40, 90]] = 2.5
    assert find_max_bin(_spectrum(mags)) == 40


def test_find_max_bin_all_zero_is_no_peak():
    assert find_max_bin(_spectrum(np.zeros(1024))) is None


def test_gaussian_recovers_exact_sampled_gaussian():
    center = 300.37 * BIN_WIDTH  # between bins
    f = bin_frequencies(WP, 2048)
    mags = 4.2 * np.exp(-((f - center) ** 2) / (2 * (2.6 * BIN_WIDTH) ** 2))
    est = gaussian_interpolate(_spectrum(mags), 300)
    assert est.method == GAUSSIAN
    assert abs(est.beat_frequency - center) < 0.01 * BIN_WIDTH
    assert est.intensity == pytest.approx(4.2, rel=1e-6)


def test_symmetric_three_bin_peak_centers():
    mags = np.zeros(1024)
    mags[499:502] = (1.0, 3.0, 1.0)
    f_center = bin_frequencies(WP, 2048)[500]
    for interpolate in (gaussian_interpolate, weighted_average_interpolate):
        est = interpolate(_spectrum(mags), 500, window=3)
        assert est.beat_frequency == pytest.approx(f_center, rel=1e-12)


def test_gaussian_on_synthesized_tone():
    f = 100.43 * BIN_WIDTH
    spec = _tone_spectrum(f, phase=1.1)
    est = gaussian_interpolate(spec, int(np.argmax(spec.magnitudes)))
    assert est.method == GAUSSIAN
    assert abs(est.beat_frequency - f) < 0.1 * BIN_WIDTH


def test_weighted_average_single_bin():
    mags = np.zeros(1024)
    mags[123] = 7.0
    est = weighted_average_interpolate(_spectrum(mags), 123)
    assert est.beat_frequency == pytest.approx(bin_frequencies(WP, 2048)[123])
    assert est.intensity == 7.0


def test_weighted_average_zero_window_is_no_peak():
    est = weighted_average_interpolate(_spectrum(np.zeros(1024)), 500)
    assert not est.valid
    assert est.beat_frequency == 0.0


def test_tone_sweep_error_below_fifth_of_bin():
    # Clean tone swept across one bin width, per-interpolator error bound.
    k0 = 150
    for method in (GAUSSIAN, WEIGHTED_AVERAGE):
        for offset in np.linspace(0.0, 1.0, 9)[:-1]:
            f = (k0 + offset) * BIN_WIDTH
            spec = _tone_spectrum(f, phase=0.4)
            est = estimate_peak(spec, method=method)
            assert abs(est.beat_frequency - f) < 0.2 * BIN_WIDTH, (method, offset)


def test_scalloping_error_periodic_in_bin_offset():
    offsets = np.linspace(0.0, 1.0, 8, endpoint=False)
    errs = {}
    for base in (140, 141):
        errs[base] = [
            estimate_peak(_tone_spectrum((base + o) * BIN_WIDTH)).beat_frequency
            - (base + o) * BIN_WIDTH
            for o in offsets
        ]
    np.testing.assert_allclose(errs[140], errs[141], atol=0.02 * BIN_WIDTH)


def test_estimates_stay_inside_window():
    rng = np.random.default_rng(5)
    for _ in range(20):
        mags = np.zeros(1024)
        lo = rng.integers(50, 900)
        mags[lo : lo + 11] = rng.uniform(0.1, 1.0, 11)
        center = int(np.argmax(mags))
        freqs = bin_frequencies(WP, 2048)
        for interpolate in (gaussian_interpolate, weighted_average_interpolate):
            est = interpolate(_spectrum(mags), center, window=11)
            span_lo = freqs[max(0, center - 5)]
            span_hi = freqs[min(1023, center + 5)]
            assert span_lo <= est.beat_frequency <= span_hi


def test_gaussian_falls_back_on_edge_half_peak():
    # Max at bin 0 with a one-sided tail: fitted center leaves the window.
    mags = np.zeros(1024)
    mags[:13] = np.exp(-np.arange(13) / 2.0)
    est = gaussian_interpolate(_spectrum(mags), 0)
    assert est.method == WEIGHTED_AVERAGE
    oracle = weighted_average_interpolate(_spectrum(mags), 0)
    assert est.beat_frequency == oracle.beat_frequency


def test_gaussian_falls_back_when_fit_raises(monkeypatch):
    def exploding_fit(*args, **kwargs):
        raise RuntimeError("maxfev exceeded")

    monkeypatch.setattr("lfisensor.peaks.curve_fit", exploding_fit)
    spec = _tone_spectrum(100.5 * BIN_WIDTH)
    est = gaussian_interpolate(spec, int(np.argmax(spec.magnitudes)))
    assert est.method == WEIGHTED_AVERAGE
    assert est.beat_frequency > 0


def test_validity_threshold_flags_weak_peaks():
    mags = np.ones(1024)
    mags[300] = 2.0  # only 2x the median floor, below kappa = 3
    est = weighted_average_interpolate(_spectrum(mags), 300)
    assert not est.valid
    mags[300] = 50.0
    est = weighted_average_interpolate(_spectrum(mags), 300)
    assert est.valid


def test_validity_absolute_gate():
    mags = np.zeros(1024)
    mags[295:306] = 0.1  # residual floor around the peak
    mags[300] = 5.0
    spec = _spectrum(mags)
    assert weighted_average_interpolate(spec, 300).valid
    gated = weighted_average_interpolate(spec, 300, epsilon_abs=10.0)
    assert not gated.valid
    assert validity_threshold(spec, epsilon_abs=10.0) == 10.0


def test_lone_bin_is_indistinguishable_from_floor():
    # A single surviving bin cannot exceed kappa times its own median.
    mags = np.zeros(1024)
    mags[123] = 7.0
    assert not weighted_average_interpolate(_spectrum(mags), 123).valid


def test_window_preconditions():
    spec = _tone_spectrum(100 * BIN_WIDTH)
    with pytest.raises(ParameterError, match="odd"):
        weighted_average_interpolate(spec, 100, window=4)
    with pytest.raises(ParameterError, match="method"):
        estimate_peak(spec, method="parabolic")


@pytest.mark.xfail(
    strict=True,
    reason="least squares is the efficient estimator for Gaussian-noise tones; "
    "the weighted average's error variance stays ~3x higher across synthetic "
    "conditions, so the hardware-observed non-inferiority (<= 1.5x) does not "
    "reproduce in this model",
)
def test_weighted_average_not_much_worse_than_gaussian():
    # Non-inferiority on matched noisy tones after spectral subtraction:
    # var_wa <= 1.5 * var_gauss.
    rng = np.random.default_rng(17)
    t = np.arange(WP.samples_per_ramp) / WP.sampling_rate
    noise_specs = [
        frame_spectrum(rng.normal(0.0, 0.3, WP.samples_per_ramp), WP, 2048).magnitudes
        for _ in range(64)
    ]
    stack = np.stack(noise_specs)
    profile = CalibrationProfile(0, stack.mean(axis=0), stack.std(axis=0, ddof=1), 64)
    errors = {GAUSSIAN: [], WEIGHTED_AVERAGE: []}
    for _ in range(150):
        f = (120 + rng.uniform()) * BIN_WIDTH
        frame = np.cos(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
        frame = frame + rng.normal(0.0, 0.3, frame.size)
        spec = subtract_floor(frame_spectrum(frame, WP, 2048), profile)
        for method in errors:
            est = estimate_peak(spec, method=method)
            errors[method].append(est.beat_frequency - f)
    var_wa = np.var(errors[WEIGHTED_AVERAGE])
    var_g = np.var(errors[GAUSSIAN])
    assert var_wa <= 1.5 * var_g

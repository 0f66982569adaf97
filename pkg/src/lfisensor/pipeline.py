"""End-to-end streaming processor: slice, FFT, average, denoise, solve.

One stateful worker per sensor stream; the sliding-average history is the
only state.  Records are immutable once emitted.  Cycle sources come in
two flavors: seeded synthetic cycles and replay of exported frame files.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, replace
from itertools import combinations

import numpy as np

from .analysis import NoiseModelCoefficients, predict_sigma_fb
from .errors import FramingError, ParameterError
from .modulation import (
    WORKING_POINT_KEYS,
    WorkingPoint,
    build_cycle,
    read_flat_config,
)
from .peaks import DEFAULT_KAPPA, DEFAULT_WINDOW, METHODS, WEIGHTED_AVERAGE, estimate_peak
from .simulator import read_frames, synthesize_cycle
from .solver import (
    DEFAULT_R_REF,
    DEFAULT_V_REF,
    STATUS_INVALID,
    Measurement,
    disambiguate,
    propagate_noise,
)
from .spectral import (
    DEFAULT_ALPHA,
    DEFAULT_BETA,
    DEFAULT_FFT_BINS,
    Calibration,
    frame_spectrum,
    slice_cycle,
    sliding_average,
    subtract_floor,
)

#: Validity gate in units of the calibrated per-bin sigma; rejects the
#: residual maxima of pure-noise spectra after subtraction.
DEFAULT_NOISE_GATE = 6.0

PIPELINE_KEYS = (
    "fft_bins",
    "interp_window",
    "interp_method",
    "n_avg",
    "alpha",
    "beta",
    "sync_offset_samples",
)


@dataclass
class PipelineConfig:
    """Processing parameters for one sensor stream."""

    working_point: WorkingPoint
    calibration: Calibration
    fft_bins: int = DEFAULT_FFT_BINS
    interp_window: int = DEFAULT_WINDOW
    interp_method: str = WEIGHTED_AVERAGE
    n_avg: int = 1
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    sync_offset: int = 0
    noise_model: NoiseModelCoefficients | None = None
    kappa: float = DEFAULT_KAPPA
    noise_gate: float = DEFAULT_NOISE_GATE
    r_ref: float = DEFAULT_R_REF
    v_ref: float = DEFAULT_V_REF

    def __post_init__(self):
        if self.n_avg < 1:
            raise ParameterError(f"n_avg must be >= 1, got {self.n_avg}")
        if self.interp_method not in METHODS:
            raise ParameterError(
                f"interp_method must be one of {METHODS}, got {self.interp_method!r}"
            )
        self.calibration.check_compatible(self.working_point, self.fft_bins)


@dataclass
class PipelineState:
    """Sliding-average history (per ramp) of one stream worker."""

    histories: list
    cycles_seen: int = 0

    @classmethod
    def for_config(cls, cfg: PipelineConfig) -> "PipelineState":
        return cls(histories=[deque(maxlen=cfg.n_avg) for _ in range(4)])

    def copy(self) -> "PipelineState":
        return PipelineState(
            histories=[deque(h, maxlen=h.maxlen) for h in self.histories],
            cycles_seen=self.cycles_seen,
        )


@dataclass
class CycleRecord:
    """Per-cycle output: the four peak estimates and the solved measurement."""

    cycle_index: int
    timestamp: float
    peaks: tuple
    measurement: Measurement
    warmup: bool


def _attach_sigmas(
    measurement: Measurement, peaks, cfg: PipelineConfig, n_window: int
) -> Measurement:
    """Fill sigma_R/sigma_v from the noise model at the measured point."""
    slopes = {r.index: r.slope for r in build_cycle(cfg.working_point)}
    try:
        sigma_fb = {
            idx: predict_sigma_fb(
                cfg.noise_model,
                f_ramp_rate=cfg.working_point.ramp_rate,
                slope_S=abs(slopes[idx]),
                beat_f_b=peaks[idx].beat_frequency,
                velocity_v=abs(measurement.velocity_v),
                distance_R=measurement.distance_R,
                n_avg=n_window,
            )
            for idx in measurement.selected_ramps
        }
    except ParameterError:
        return measurement
    i, j = max(
        combinations(measurement.selected_ramps, 2),
        key=lambda ij: abs(slopes[ij[0]] - slopes[ij[1]]),
    )
    sigma_r, sigma_v = propagate_noise(
        sigma_fb[i], sigma_fb[j], slopes[i], slopes[j], cfg.working_point.emitted_frequency
    )
    return replace(measurement, sigma_R=sigma_r, sigma_v=sigma_v)


def process_cycle(samples, state: PipelineState, cfg: PipelineConfig) -> CycleRecord:
    """Run one cycle of ADC samples through the full chain.

    Slice, window/FFT, sliding average, spectral subtraction, peak
    interpolation, sign disambiguation.  Mutates ``state`` by appending
    this cycle's spectra; deterministic given (samples, state, config).
    """
    wp = cfg.working_point
    samples = np.asarray(samples)
    if cfg.sync_offset:
        samples = np.roll(samples, -cfg.sync_offset)
    frames = slice_cycle(samples, wp)
    peaks = []
    for i, frame in enumerate(frames):
        spec = frame_spectrum(frame, wp, cfg.fft_bins, ramp_index=i)
        state.histories[i].append(spec)
        averaged = sliding_average(state.histories[i])
        profile = cfg.calibration.profile_for(i)
        cleaned = subtract_floor(averaged, profile, cfg.alpha, cfg.beta)
        n_window = len(state.histories[i])
        epsilon = (
            cfg.noise_gate
            * float(np.median(profile.reference_sigma))
            / math.sqrt(n_window)
        )
        peaks.append(
            estimate_peak(
                cleaned,
                window=cfg.interp_window,
                method=cfg.interp_method,
                kappa=cfg.kappa,
                epsilon_abs=epsilon,
            )
        )
    state.cycles_seen += 1
    cycle_index = state.cycles_seen - 1
    measurement = disambiguate(peaks, wp, r_ref=cfg.r_ref, v_ref=cfg.v_ref)
    if cfg.noise_model is not None and measurement.status != STATUS_INVALID:
        measurement = _attach_sigmas(
            measurement, peaks, cfg, min(state.cycles_seen, cfg.n_avg)
        )
    return CycleRecord(
        cycle_index=cycle_index,
        timestamp=cycle_index * wp.cycle_duration,
        peaks=tuple(peaks),
        measurement=measurement,
        warmup=state.cycles_seen < cfg.n_avg,
    )


def run_stream(source, cfg: PipelineConfig, state: PipelineState | None = None):
    """Fold :func:`process_cycle` over a cycle iterator, yielding records."""
    if state is None:
        state = PipelineState.for_config(cfg)
    for samples in source:
        yield process_cycle(samples, state, cfg)


def synthetic_cycles(
    wp: WorkingPoint,
    ground_truth,
    amplitude: float,
    noise_sigma: float,
    seed: int,
    n_cycles: int,
):
    """Seeded synthetic cycle source.

    ``ground_truth`` is either a fixed :class:`GroundTruth` or a callable
    mapping the cycle index to one (for step/trajectory tests).  Samples
    are float32, the frame-export dtype, so a replayed export reproduces
    this source exactly.
    """
    for cycle_index in range(n_cycles):
        if callable(ground_truth):
            gt = ground_truth(cycle_index)
        else:
            gt = ground_truth
        samples, _ = synthesize_cycle(
            wp, gt, amplitude, noise_sigma, seed, cycle_index=cycle_index
        )
        yield samples


def replay_cycles(stem, expected_wp: WorkingPoint | None = None):
    """Cycle source replaying an exported frame file (4 frames per cycle)."""
    wp, frames, _ = read_frames(stem)
    if expected_wp is not None and wp != expected_wp:
        raise ParameterError(
            "replay file working point differs from the configured working point"
        )
    if len(frames) % 4:
        raise FramingError(f"frame count {len(frames)} is not a whole cycle count")
    for k in range(0, len(frames), 4):
        group = frames[k : k + 4]
        if [fr.ramp.index for fr in group] != [0, 1, 2, 3]:
            raise FramingError(f"cycle starting at frame {k} is out of ramp order")
        yield np.concatenate([fr.samples for fr in group])


def read_config_file(path):
    """Parse a flat config file into (working point, pipeline settings).

    The file holds the working-point keys plus optional pipeline keys;
    unknown keys are rejected to catch typos.
    """
    values = read_flat_config(path)
    unknown = set(values) - set(WORKING_POINT_KEYS) - set(PIPELINE_KEYS)
    if unknown:
        raise ParameterError(f"unknown config keys: {sorted(unknown)}")
    wp = WorkingPoint.from_dict(
        {k: v for k, v in values.items() if k in WORKING_POINT_KEYS}
    )
    settings = {}
    for key, cast in (
        ("fft_bins", int),
        ("interp_window", int),
        ("n_avg", int),
        ("sync_offset_samples", int),
        ("alpha", float),
        ("beta", float),
        ("interp_method", str),
    ):
        if key in values:
            settings[key] = cast(values[key])
    return wp, settings


def config_from_file(
    path,
    calibration: Calibration,
    noise_model: NoiseModelCoefficients | None = None,
) -> PipelineConfig:
    """Build a :class:`PipelineConfig` from a config file and a calibration."""
    wp, settings = read_config_file(path)
    return PipelineConfig(
        working_point=wp,
        calibration=calibration,
        fft_bins=settings.get("fft_bins", DEFAULT_FFT_BINS),
        interp_window=settings.get("interp_window", DEFAULT_WINDOW),
        interp_method=settings.get("interp_method", WEIGHTED_AVERAGE),
        n_avg=settings.get("n_avg", 1),
        alpha=settings.get("alpha", DEFAULT_ALPHA),
        beta=settings.get("beta", DEFAULT_BETA),
        sync_offset=settings.get("sync_offset_samples", 0),
        noise_model=noise_model,
    )

"""Ramp slicing and denoised magnitude spectra.

Processing order per ramp: Hamming window, zero-pad, FFT magnitude,
sliding average over recent cycles, then adaptive spectral subtraction
against a calibrated no-target reference with flooring at zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import CalibrationError, FramingError, ParameterError
from .modulation import WorkingPoint

DEFAULT_FFT_BINS = 2048
DEFAULT_ALPHA = 1.0
DEFAULT_BETA = 0.0
CALIBRATION_FORMAT_VERSION = 1
MIN_CALIBRATION_CYCLES = 16


@dataclass
class RampSpectrum:
    """One-sided magnitude spectrum of one ramp frame."""

    ramp_index: int
    bin_frequencies: np.ndarray  # Hz, length n_bins // 2
    magnitudes: np.ndarray  # >= 0, same length
    n_bins: int


@dataclass
class CalibrationProfile:
    """Per-bin reference mean and sigma of the no-target spectrum of one ramp."""

    ramp_index: int
    reference_mean: np.ndarray
    reference_sigma: np.ndarray
    n_frames_used: int

    def __post_init__(self):
        if self.n_frames_used < 1:
            raise CalibrationError(
                f"n_frames_used must be >= 1, got {self.n_frames_used}"
            )
        if self.reference_mean.shape != self.reference_sigma.shape:
            raise FramingError("reference mean and sigma must have the same shape")
        if np.any(self.reference_mean < 0) or np.any(self.reference_sigma < 0):
            raise CalibrationError("reference spectra must be nonnegative")


@dataclass
class Calibration:
    """Four per-ramp profiles plus the sampling metadata they were taken at."""

    profiles: tuple
    n_bins: int
    sampling_rate: float
    samples_per_ramp: int

    def profile_for(self, ramp_index: int) -> CalibrationProfile:
        return self.profiles[ramp_index]

    def check_compatible(self, wp: WorkingPoint, fft_bins: int) -> None:
        """Refuse a profile that does not match the active working point."""
        if self.n_bins != fft_bins:
            raise CalibrationError(
                f"calibration FFT size {self.n_bins} != configured {fft_bins}"
            )
        if self.sampling_rate != wp.sampling_rate:
            raise CalibrationError(
                f"calibration sampling rate {self.sampling_rate} != working point "
                f"{wp.sampling_rate}"
            )
        if self.samples_per_ramp != wp.samples_per_ramp:
            raise CalibrationError(
                f"calibration frame length {self.samples_per_ramp} != working point "
                f"{wp.samples_per_ramp}"
            )
        for profile in self.profiles:
            if profile.reference_mean.size != self.n_bins // 2:
                raise CalibrationError("calibration array length != n_bins / 2")

    def save(self, path) -> None:
        payload = {
            "format_version": CALIBRATION_FORMAT_VERSION,
            "n_bins": self.n_bins,
            "sampling_rate_hz": self.sampling_rate,
            "samples_per_ramp": self.samples_per_ramp,
            "profiles": [
                {
                    "ramp_index": p.ramp_index,
                    "n_frames_used": p.n_frames_used,
                    "reference_mean": p.reference_mean.tolist(),
                    "reference_sigma": p.reference_sigma.tolist(),
                }
                for p in self.profiles
            ],
        }
        Path(path).write_text(json.dumps(payload, sort_keys=True))

    @classmethod
    def load(cls, path) -> "Calibration":
        payload = json.loads(Path(path).read_text())
        if payload.get("format_version") != CALIBRATION_FORMAT_VERSION:
            raise CalibrationError(
                f"unsupported calibration format version "
                f"{payload.get('format_version')!r}"
            )
        profiles = tuple(
            CalibrationProfile(
                ramp_index=int(p["ramp_index"]),
                reference_mean=np.asarray(p["reference_mean"], dtype=float),
                reference_sigma=np.asarray(p["reference_sigma"], dtype=float),
                n_frames_used=int(p["n_frames_used"]),
            )
            for p in payload["profiles"]
        )
        return cls(
            profiles=profiles,
            n_bins=int(payload["n_bins"]),
            sampling_rate=float(payload["sampling_rate_hz"]),
            samples_per_ramp=int(payload["samples_per_ramp"]),
        )


def slice_cycle(samples, wp: WorkingPoint) -> list:
    """Split one cycle of ADC samples into its four ramp frames.

    Frames partition the input exactly: no overlap, no gap.
    """
    samples = np.asarray(samples)
    n = wp.samples_per_ramp
    if samples.ndim != 1 or samples.size != 4 * n:
        raise FramingError(
            f"expected one cycle of {4 * n} samples, got shape {samples.shape}"
        )
    return [samples[i * n : (i + 1) * n] for i in range(4)]


@lru_cache(maxsize=16)
def _hamming(length: int) -> np.ndarray:
    return np.hamming(length)


def frame_spectrum(
    frame,
    wp: WorkingPoint,
    fft_bins: int = DEFAULT_FFT_BINS,
    ramp_index: int = 0,
) -> RampSpectrum:
    """Hamming-window, zero-pad and FFT one ramp frame.

    Returns the unnormalized one-sided magnitude spectrum on a fixed
    ``fft_bins`` grid (bin spacing ``sampling_rate / fft_bins``).
    """
    frame = np.asarray(frame, dtype=float)
    if frame.ndim != 1:
        raise FramingError(f"frame must be 1-D, got shape {frame.shape}")
    if fft_bins < frame.size:
        raise ParameterError(
            f"fft_bins ({fft_bins}) must be >= frame length ({frame.size})"
        )
    if fft_bins & (fft_bins - 1):
        raise ParameterError(f"fft_bins must be a power of two, got {fft_bins}")
    padded = np.zeros(fft_bins)
    padded[: frame.size] = frame * _hamming(frame.size)
    magnitudes = np.abs(np.fft.rfft(padded)[: fft_bins // 2])
    return RampSpectrum(
        ramp_index=ramp_index,
        bin_frequencies=bin_frequencies(wp, fft_bins),
        magnitudes=magnitudes,
        n_bins=fft_bins,
    )


@lru_cache(maxsize=16)
def _bin_frequencies(sampling_rate: float, fft_bins: int) -> np.ndarray:
    return np.arange(fft_bins // 2) * (sampling_rate / fft_bins)


def bin_frequencies(wp: WorkingPoint, fft_bins: int = DEFAULT_FFT_BINS) -> np.ndarray:
    """Center frequencies of the one-sided bins."""
    return _bin_frequencies(wp.sampling_rate, fft_bins)


def sliding_average(history) -> RampSpectrum:
    """Per-bin arithmetic mean over the spectra of a sliding cycle window.

    ``history`` holds the most recent spectra (at most the configured
    window length) of one ramp index, oldest first.
    """
    history = list(history)
    if not history:
        raise FramingError("sliding average needs at least one spectrum")
    first = history[0]
    for spec in history[1:]:
        if spec.magnitudes.shape != first.magnitudes.shape:
            raise FramingError("all spectra in the averaging window must share a shape")
        if spec.ramp_index != first.ramp_index:
            raise FramingError("averaging window mixes different ramp indices")
    mean = np.mean([spec.magnitudes for spec in history], axis=0)
    return RampSpectrum(
        ramp_index=first.ramp_index,
        bin_frequencies=first.bin_frequencies,
        magnitudes=mean,
        n_bins=first.n_bins,
    )


def calibrate(
    cycles,
    wp: WorkingPoint,
    fft_bins: int = DEFAULT_FFT_BINS,
    min_cycles: int = MIN_CALIBRATION_CYCLES,
) -> Calibration:
    """Build per-ramp reference spectra from no-target cycles.

    For each ramp index the reference is the per-bin mean and sample
    standard deviation over all supplied cycles.
    """
    per_ramp: list[list[np.ndarray]] = [[], [], [], []]
    for cycle in cycles:
        for i, frame in enumerate(slice_cycle(cycle, wp)):
            spec = frame_spectrum(frame, wp, fft_bins, ramp_index=i)
            per_ramp[i].append(spec.magnitudes)
    n_cycles = len(per_ramp[0])
    if n_cycles < min_cycles:
        raise CalibrationError(
            f"calibration needs >= {min_cycles} no-target cycles, got {n_cycles}"
        )
    profiles = []
    for i in range(4):
        stack = np.stack(per_ramp[i])
        profiles.append(
            CalibrationProfile(
                ramp_index=i,
                reference_mean=stack.mean(axis=0),
                reference_sigma=stack.std(axis=0, ddof=1),
                n_frames_used=n_cycles,
            )
        )
    return Calibration(
        profiles=tuple(profiles),
        n_bins=fft_bins,
        sampling_rate=wp.sampling_rate,
        samples_per_ramp=wp.samples_per_ramp,
    )


def subtract_floor(
    spec: RampSpectrum,
    profile: CalibrationProfile,
    alpha: float = DEFAULT_ALPHA,
    beta: float = DEFAULT_BETA,
) -> RampSpectrum:
    """Adaptive spectral subtraction with flooring at zero.

    Per bin: ``max(X - alpha * mean_ref - beta * sigma_ref, 0)``.
    """
    if alpha < 0 or beta < 0:
        raise ParameterError(f"alpha and beta must be >= 0, got {alpha}, {beta}")
    if profile.reference_mean.shape != spec.magnitudes.shape:
        raise FramingError(
            f"calibration shape {profile.reference_mean.shape} != spectrum shape "
            f"{spec.magnitudes.shape}"
        )
    cleaned = np.maximum(
        spec.magnitudes - alpha * profile.reference_mean - beta * profile.reference_sigma,
        0.0,
    )
    return RampSpectrum(
        ramp_index=spec.ramp_index,
        bin_frequencies=spec.bin_frequencies,
        magnitudes=cleaned,
        n_bins=spec.n_bins,
    )

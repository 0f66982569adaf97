"""Distance/velocity solver with four-ramp sign disambiguation.

Magnitude spectra hide the beat sign, and in short-range high-velocity
regimes both signs are plausible for every ramp.  The solver keeps the
three strongest ramps, enumerates all 2^3 sign assignments, scores each
by how tightly its three pairwise solutions cluster, and resolves the
remaining mirror ambiguity by requiring a positive distance.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePairError, ParameterError
from .modulation import SPEED_OF_LIGHT, WorkingPoint, build_cycle

STATUS_OK = "ok"
STATUS_DEGRADED = "degraded"
STATUS_INVALID = "invalid"

#: Reference scales mixing distance and velocity scatter into one score
#: (short-range operating envelope: a few cm, up to ~0.1 m/s).
DEFAULT_R_REF = 0.05
DEFAULT_V_REF = 0.1

_PAIRS = ((0, 1), (0, 2), (1, 2))


@dataclass
class Measurement:
    """Disambiguated distance/velocity result with solver diagnostics."""

    distance_R: float
    velocity_v: float
    sigma_R: float
    sigma_v: float
    sign_combo: tuple  # +1/-1 per selected ramp
    selected_ramps: tuple  # the 3 ramp indices kept
    cluster_spread: float
    status: str


def pair_solution(f1: float, s1: float, f2: float, s2: float, f_e: float):
    """Solve one ramp pair of signed beats for (R, v)."""
    if s1 == s2:
        raise DegeneratePairError(f"ramp slopes must differ, both are {s1}")
    if f_e == 0:
        raise ParameterError("emitted frequency must be nonzero")
    delta = s1 - s2
    distance = SPEED_OF_LIGHT * (f1 - f2) / (2.0 * delta)
    velocity = SPEED_OF_LIGHT * (f2 * s1 - f1 * s2) / (f_e * delta)
    return distance, velocity


def propagate_noise(sigma_f1: float, sigma_f2: float, s1: float, s2: float, f_e: float):
    """Propagate per-ramp beat-frequency sigmas to (sigma_R, sigma_v)."""
    if s1 == s2:
        raise DegeneratePairError(f"ramp slopes must differ, both are {s1}")
    if sigma_f1 < 0 or sigma_f2 < 0:
        raise ParameterError("beat-frequency sigmas must be >= 0")
    delta = abs(s1 - s2)
    sigma_r = SPEED_OF_LIGHT * math.hypot(sigma_f1, sigma_f2) / (2.0 * delta)
    wavelength = SPEED_OF_LIGHT / f_e
    sigma_v = wavelength * math.hypot(s1 * sigma_f2, s2 * sigma_f1) / delta
    return sigma_r, sigma_v


def simplified_solution(f_up: float, f_down: float):
    """Symmetric-triangle baseline: split a beat pair into (f_R, f_v).

    ``f_R = (f_up + f_down) / 2`` and ``f_v = (f_up - f_down) / 2``.
    Valid only while the distance term dominates the Doppler term; its
    short-range failure is what the sign-enumerating solver fixes.
    """
    return 0.5 * (f_up + f_down), 0.5 * (f_up - f_down)


def baseline_measurement(f_up: float, f_down: float, wp: WorkingPoint):
    """Convert the baseline's (f_R, f_v) of the steep triangle to (R, v)."""
    f_r, f_v = simplified_solution(f_up, f_down)
    distance = SPEED_OF_LIGHT * f_r / (2.0 * wp.steep_slope)
    velocity = SPEED_OF_LIGHT * f_v / wp.emitted_frequency
    return distance, velocity


def _invalid_measurement() -> Measurement:
    return Measurement(
        distance_R=math.nan,
        velocity_v=math.nan,
        sigma_R=math.nan,
        sigma_v=math.nan,
        sign_combo=(),
        selected_ramps=(),
        cluster_spread=math.nan,
        status=STATUS_INVALID,
    )


def cluster_spread(distances, velocities, r_ref: float, v_ref: float) -> float:
    """Normalized scatter of pairwise solutions (dimensionless)."""
    return math.sqrt(
        np.var(distances) / r_ref**2 + np.var(velocities) / v_ref**2
    )


def _solve_combo(signs, magnitudes, slopes, f_e, r_ref, v_ref):
    beats = [sign * mag for sign, mag in zip(signs, magnitudes)]
    distances = []
    velocities = []
    for i, j in _PAIRS:
        distance, velocity = pair_solution(beats[i], slopes[i], beats[j], slopes[j], f_e)
        distances.append(distance)
        velocities.append(velocity)
    mean_r = sum(distances) / 3.0
    mean_v = sum(velocities) / 3.0
    return mean_r, mean_v, cluster_spread(distances, velocities, r_ref, v_ref)


def disambiguate(
    peaks,
    wp: WorkingPoint,
    sigma_fb=None,
    r_ref: float = DEFAULT_R_REF,
    v_ref: float = DEFAULT_V_REF,
) -> Measurement:
    """Turn four per-ramp peak estimates into one signed (R, v) measurement.

    Steps: (1) keep the three highest-intensity valid peaks; (2) enumerate
    all 2^3 sign assignments of their magnitudes; (3) solve the three ramp
    pairs for each assignment; (4) score assignments by normalized solution
    scatter; (5) between the best score and its mirror (which ties by
    construction) keep the one with mean R > 0; (6) report the mean of the
    three pairwise solutions.

    ``sigma_fb``, when given, maps ramp index to that ramp's beat-frequency
    sigma; the reported sigmas then come from the steepest selected pair.
    Fewer than three valid peaks, or no positive-distance solution, yields
    an invalid measurement.
    """
    peaks = sorted(peaks, key=lambda p: p.ramp_index)
    if len(peaks) != 4 or [p.ramp_index for p in peaks] != [0, 1, 2, 3]:
        raise ParameterError("disambiguate expects one peak estimate per ramp 0..3")
    valid = [p for p in peaks if p.valid]
    if len(valid) < 3:
        return _invalid_measurement()

    ranked = sorted(valid, key=lambda p: (-p.intensity, p.ramp_index))[:3]
    kept = sorted(ranked, key=lambda p: p.ramp_index)
    indices = tuple(p.ramp_index for p in kept)
    all_slopes = {r.index: r.slope for r in build_cycle(wp)}
    slopes = [all_slopes[i] for i in indices]
    magnitudes = [p.beat_frequency for p in kept]
    f_e = wp.emitted_frequency

    combos = []
    for signs in itertools.product((1.0, -1.0), repeat=3):
        mean_r, mean_v, spread = _solve_combo(
            signs, magnitudes, slopes, f_e, r_ref, v_ref
        )
        combos.append((signs, mean_r, mean_v, spread))

    best_spread = min(spread for _, _, _, spread in combos)
    positive = [c for c in combos if c[3] == best_spread and c[1] > 0.0]
    if not positive:
        return _invalid_measurement()
    if len(positive) > 1:
        # Measure-zero tie between non-mirrored combos: prefer the one whose
        # implied beats sit farthest from the blind region.
        def blind_margin(combo):
            _, mean_r, mean_v, _ = combo
            implied = [
                (2.0 * mean_r * s + f_e * mean_v) / SPEED_OF_LIGHT for s in slopes
            ]
            return min(abs(f) for f in implied)

        positive.sort(key=blind_margin, reverse=True)
    signs, mean_r, mean_v, spread = positive[0]

    sigma_r = sigma_v = math.nan
    if sigma_fb is not None:
        i, j = max(
            itertools.combinations(range(3), 2),
            key=lambda ij: abs(slopes[ij[0]] - slopes[ij[1]]),
        )
        sigma_r, sigma_v = propagate_noise(
            sigma_fb[indices[i]], sigma_fb[indices[j]], slopes[i], slopes[j], f_e
        )

    return Measurement(
        distance_R=mean_r,
        velocity_v=mean_v,
        sigma_R=sigma_r,
        sigma_v=sigma_v,
        sign_combo=tuple(int(s) for s in signs),
        selected_ramps=indices,
        cluster_spread=spread,
        status=STATUS_OK if len(valid) == 4 else STATUS_DEGRADED,
    )

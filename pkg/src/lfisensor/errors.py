"""Exception types shared across the sensor-processing package."""


class ParameterError(ValueError):
    """A parameter or working-point invariant was violated."""


class AliasingError(ParameterError):
    """A requested beat frequency is at or above the Nyquist limit."""


class FramingError(ValueError):
    """Sample buffers or spectra do not have the expected shape."""


class CalibrationError(ValueError):
    """Calibration data is missing, too short, or incompatible."""


class DegeneratePairError(ValueError):
    """Two ramps with equal slopes cannot be solved as a pair."""


class FitError(ValueError):
    """The noise-model design matrix is rank deficient or unusable."""


class NoReliableDistanceError(ValueError):
    """No distance inside the search range satisfies the blind-region bound."""

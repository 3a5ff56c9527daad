"""Exception types raised by the calibration pipeline.

Every failure mode that callers are expected to handle gets its own class
so that the CLI can map them to exit codes and the experiment harness can
count per-stage failures without string matching.
"""

from __future__ import annotations

__all__ = [
    "StripeCalError",
    "ConfigError",
    "GeometryError",
    "DegenerateLatticeError",
    "SingularHomographyError",
    "CornerError",
    "UnreliablePeakError",
    "NoCandidateError",
    "AmbiguousCalibrationError",
    "DegenerateObservationError",
    "OffsetUndetectableError",
    "StageError",
]


class StripeCalError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(StripeCalError):
    """A configuration value is missing, malformed, or out of range."""


class GeometryError(StripeCalError):
    """Display or camera geometry is physically invalid (e.g. d <= t)."""


class DegenerateLatticeError(StripeCalError):
    """Rendered and actual line families are parallel; no point lattice forms."""


class SingularHomographyError(StripeCalError):
    """The corner correspondences do not determine an invertible homography."""


class CornerError(StripeCalError):
    """Corner coordinates fall outside the captured image."""


class UnreliablePeakError(StripeCalError):
    """A spectral peak could not be refined (non-concave fit or runaway vertex)."""


class NoCandidateError(StripeCalError):
    """No lattice interpretation of a peak lies within the search bounds."""


class AmbiguousCalibrationError(StripeCalError):
    """Candidate sets from the two stripe periods never agree within threshold."""


class DegenerateObservationError(StripeCalError):
    """The two captures do not constrain the parameters (e.g. equal distances)."""


class OffsetUndetectableError(StripeCalError):
    """The phase objective for the lateral offset is too flat to maximize."""


class StageError(StripeCalError):
    """Wraps an error from one stage of the full pipeline with its stage label.

    The original exception is preserved as ``__cause__`` so tracebacks keep
    the underlying failure; ``stage`` carries a short machine-readable label
    such as "rectify" or "peaks".
    """

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause

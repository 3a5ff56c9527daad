"""Calibration toolkit for slanted-barrier and lenticular 3D displays.

Forward-simulates what a camera sees when such a display shows stripe
calibration patterns, and recovers the display's physical parameters
(pitch, slant, gap, lateral offset) from two captures taken at different
distances by analyzing the spectral lattice of the stripe moire.
"""

from .capture import (
    CapturedImage,
    SimOptions,
    add_poisson_noise,
    simulate_capture,
    snr,
    visibility,
)
from .display import (
    DerivedParams,
    DisplayParams,
    LatticeModel,
    PanelGeometry,
    View,
    check_rendering_correct,
    derive,
    predict_lattice,
    view_of_pixel,
    view_of_position,
    wrap_half,
)
from .errors import (
    AmbiguousCalibrationError,
    ConfigError,
    CornerError,
    DegenerateLatticeError,
    DegenerateObservationError,
    GeometryError,
    NoCandidateError,
    OffsetUndetectableError,
    SingularHomographyError,
    StageError,
    StripeCalError,
    UnreliablePeakError,
)
from .estimation import (
    CalibrationConfig,
    CalibrationResult,
    Candidate,
    CandidateBounds,
    Observation,
    calibrate,
    candidate_set,
    estimate_offset,
    intersect_candidates,
    read_corners,
    solve_pitch_gap,
    write_corners,
)
from .experiments import (
    ErrorReport,
    ExperimentConfig,
    TrialRecord,
    autoframed_pose,
    demo_distortion,
    jittered_pose,
    perturb_display,
    run_noise_sweep,
    run_table2,
)
from .patterns import (
    DEFAULT_PATTERNS,
    PanelImage,
    PatternSpec,
    interleave_views,
    make_calibration_multiplex,
    make_stripes,
)
from .pose import (
    CameraPose,
    Homography,
    Intrinsics,
    decompose,
    homography_from_corners,
    project_points,
    rectify,
)
from .presets import PRESETS, make_display, preset, preset_names
from .spectral import (
    PeakMeasurement,
    Spectrum,
    apply_gaussian_window,
    detect_peaks,
    dump_log_magnitude,
    refine_peak,
    sample_spectrum_at,
    spectrum,
)

__version__ = "0.1.0"

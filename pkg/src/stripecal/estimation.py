"""Recovery of the four display parameters from two stripe captures.

Where the panel's stripe comb (period ``beta`` columns, vertical) beats
against the optic's slanted visible-line family (spacing ``h``, slope
``tan(alpha)``), the camera sees a 2D point lattice.  Its spectrum has
nodes at

    f_x = m / beta - n / h,      f_y = n * slope / h,

(m, n integers, slope in subpixels per row), so each measured peak yields
a discrete family of (h, alpha) interpretations.  Intersecting the
families from two different stripe periods singles out the true pair;
two capture distances then separate pitch from gap via the magnification

    h(d) = d / (d - t) * p / cos(alpha),

and the lattice phase along the line direction pins the lateral offset.
All spatial quantities in this module are in panel subpixel units unless
a name says mm.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .capture import CapturedImage
from .display import PanelGeometry, rho_index_to_centered, wrap_half
from .errors import (
    AmbiguousCalibrationError,
    DegenerateObservationError,
    NoCandidateError,
    OffsetUndetectableError,
    StageError,
    StripeCalError,
    UnreliablePeakError,
)
from .patterns import DEFAULT_PATTERNS, PatternSpec
from .pose import CameraPose, Intrinsics, decompose, homography_from_corners, rectify
from .spectral import (
    PeakMeasurement,
    Spectrum,
    _sample_many,
    apply_gaussian_window,
    detect_peaks,
    refine_peak,
    spectrum,
)

__all__ = [
    "CandidateBounds",
    "Candidate",
    "candidate_set",
    "intersect_candidates",
    "solve_pitch_gap",
    "estimate_offset",
    "Observation",
    "CalibrationConfig",
    "CalibrationResult",
    "calibrate",
    "read_corners",
    "write_corners",
]


# -- Candidate enumeration and intersection ----------------------------------


@dataclass(frozen=True)
class CandidateBounds:
    """Search limits for lattice interpretations of a spectral peak."""

    h_min: float = 3.0
    h_max: float = 200.0
    alpha_max_deg: float = 45.0
    m_max: int = 8
    n_max: int = 3


@dataclass(frozen=True)
class Candidate:
    """One (h, alpha) interpretation of a peak, tagged with its node index."""

    h: float
    alpha: float
    m: int
    n: int


def candidate_set(
    peak: PeakMeasurement,
    beta: int,
    bounds: CandidateBounds = CandidateBounds(),
    y_scale: float = 1.0,
) -> list[Candidate]:
    """All in-bounds (h, alpha) pairs that place a lattice node at ``peak``.

    For node index (m, n): h = n / (m/beta - f_x) and the index-frame
    slope is f_y / (m/beta - f_x); ``y_scale`` (row pitch over column
    pitch) converts that slope to the geometric tan(alpha).  A peak with
    negative f_y is folded to its conjugate first, so only n >= 1 needs
    enumerating.  n = 0 nodes are pure stripe harmonics and carry no
    information, hence excluded.
    """
    f_x, f_y = peak.f_x, peak.f_y
    if f_y < 0:
        f_x, f_y = -f_x, -f_y
    out = []
    for m in range(-bounds.m_max, bounds.m_max + 1):
        denom = m / beta - f_x
        if abs(denom) < 1e-12:
            continue
        for n in range(1, bounds.n_max + 1):
            h = n / denom
            if not bounds.h_min <= h <= bounds.h_max:
                continue
            slope = f_y / denom
            if slope <= 0:
                continue
            alpha = math.atan(slope / y_scale)
            if math.degrees(alpha) > bounds.alpha_max_deg:
                continue
            out.append(Candidate(h=h, alpha=alpha, m=m, n=n))
    if not out:
        raise NoCandidateError(
            f"no lattice interpretation of peak ({peak.f_x:.5f}, {peak.f_y:.5f}) "
            f"within bounds {bounds}"
        )
    return out


def intersect_candidates(
    set_a: list[Candidate],
    set_b: list[Candidate],
    threshold: float | None = None,
    alpha_scale_deg: float = 1.0,
) -> tuple[float, float, float]:
    """Closest (h, alpha) agreement between two candidate families.

    Distance between candidates is the normalized metric
    sqrt((dh / mean_h)^2 + (dalpha_deg / alpha_scale_deg)^2); the winning
    pair is averaged.  Returns (h, alpha, distance).  When ``threshold``
    is given, a best distance above it raises
    :class:`AmbiguousCalibrationError` -- the two stripe periods disagree.
    """
    if not set_a or not set_b:
        raise NoCandidateError("cannot intersect an empty candidate set")
    ha = np.array([c.h for c in set_a])
    hb = np.array([c.h for c in set_b])
    aa = np.array([c.alpha for c in set_a])
    ab = np.array([c.alpha for c in set_b])
    dh = (ha[:, None] - hb[None, :]) / ((ha[:, None] + hb[None, :]) / 2.0)
    da = np.degrees(aa[:, None] - ab[None, :]) / alpha_scale_deg
    dist = np.hypot(dh, da)
    # A peak pair fits (h, 2h, 3h, ...) with identical distances (doubling
    # both n indices doubles h); break that tie toward the fundamental.
    # The nudge dwarfs float noise yet cannot reorder distinct distances.
    na = np.array([c.n for c in set_a])
    nb = np.array([c.n for c in set_b])
    ranked = dist + 1e-9 * (na[:, None] + nb[None, :])
    i, j = np.unravel_index(np.argmin(ranked), ranked.shape)
    best = float(dist[i, j])
    if threshold is not None and best > threshold:
        raise AmbiguousCalibrationError(
            f"stripe periods disagree: best candidate distance {best:.4g} "
            f"exceeds threshold {threshold:.4g}"
        )
    h = float((ha[i] + hb[j]) / 2.0)
    alpha = float((aa[i] + ab[j]) / 2.0)
    return h, alpha, best


def solve_pitch_gap(
    h1: float, d1: float, h2: float, d2: float, alpha: float
) -> tuple[float, float]:
    """Pitch and gap from the line spacings at two distances.

    Inverting h(d) = d/(d-t) * p/cos(alpha) for two distances gives

        p = h1 h2 (d2 - d1) cos(alpha) / (d2 h1 - d1 h2)
        t = d1 d2 (h1 - h2) / (d2 h1 - d1 h2).

    All lengths in mm (convert subpixel spacings via q first).
    """
    if h1 <= 0 or h2 <= 0 or d1 <= 0 or d2 <= 0:
        raise DegenerateObservationError("spacings and distances must be positive")
    denom = d2 * h1 - d1 * h2
    scale = max(abs(d2 * h1), abs(d1 * h2))
    if abs(d1 - d2) < 1e-9 * max(d1, d2) or abs(denom) < 1e-12 * scale:
        raise DegenerateObservationError(
            f"capture distances {d1:.3f} and {d2:.3f} do not separate pitch from gap"
        )
    p = h1 * h2 * (d2 - d1) * math.cos(alpha) / denom
    t = d1 * d2 * (h1 - h2) / denom
    return p, t


# -- Offset recovery ----------------------------------------------------------


def _golden_section_maximize(f, lo: float, hi: float, tol: float = 1e-12) -> float:
    """Argmax of a unimodal scalar function on [lo, hi]."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return (a + b) / 2.0


def estimate_offset(
    spec: Spectrum,
    h: float,
    alpha: float,
    beta: int,
    epsilon: float,
    gamma: float,
    d: float,
    t: float,
    geom: PanelGeometry,
    m_max: int = 4,
    n_max: int = 3,
    min_snr: float = 3.0,
    keep_fraction: float = 0.05,
) -> tuple[float, float, float]:
    """Lateral offset from the phase of the lattice spectrum.

    The lattice of capture points is anchored at column ``epsilon`` and at
    an unknown row shift tau along the stripe.  Folding the known column
    anchor out of every measurable node collapses the lattice onto a 1D
    harmonic series in the normalized shift theta = slope * tau / h:

        b[n] = sum_m S(f_mn) * exp(2 pi i (m eps / beta - n eps / h))

    whose fundamental phase gives theta directly; higher orders, when the
    optics let them through (blur usually leaves only n = 1), sharpen the
    answer via a golden-section polish of |sum_n b[n] exp(2 pi i n theta)|
    around that seed.  From tau, the index-frame line offset is
    eps - tau * slope - gamma * h; re-centering and undoing the gap
    magnification yields sigma (mm, un-normalized).

    Every b[n] is checked against an empirical noise floor built from the
    same sums taken midway between the stripe harmonics, where no signal
    can live; orders below ``min_snr`` times the floor are dropped, and if
    the fundamental itself fails the test the offset is declared
    undetectable.  Returns (tau, rho_centered, sigma).
    """
    slope = math.tan(alpha) * geom.y_scale
    if slope <= 0:
        raise OffsetUndetectableError("offset needs a positive line slope")

    ms, ns, fxs, fys = [], [], [], []
    for m in range(-m_max, m_max + 1):
        for n in range(1, n_max + 1):
            f_x = m / beta - n / h
            f_y = n * slope / h
            if abs(f_x) <= 0.5 and abs(f_y) <= 0.5:
                ms.append(m)
                ns.append(n)
                fxs.append(f_x)
                fys.append(f_y)
    if not ns:
        raise OffsetUndetectableError("every lattice node lies beyond Nyquist")

    m_arr = np.array(ms)
    n_arr = np.array(ns)
    fx_arr = np.array(fxs)
    fy_arr = np.array(fys)
    vals = _sample_many(spec, fx_arr, fy_arr)
    # Same sums evaluated midway between stripe harmonics: pure noise.
    floor_vals = _sample_many(spec, fx_arr + 0.5 / beta, fy_arr)

    # Collapse the stripe index: nodes sharing n differ only by the known
    # column anchor phase.
    b = np.zeros(n_max, dtype=complex)
    b_floor = np.zeros(n_max)
    anchor = np.exp(2j * np.pi * (m_arr / beta - n_arr / h) * epsilon)
    np.add.at(b, n_arr - 1, vals * anchor)
    np.add.at(b_floor, n_arr - 1, np.abs(floor_vals) ** 2)
    counts = np.bincount(n_arr - 1, minlength=n_max).astype(float)
    have = counts > 0
    b_floor[have] = np.sqrt(b_floor[have] * counts[have])

    strength = np.abs(b)
    usable = have & (strength > min_snr * b_floor)
    if not usable[0]:
        raise OffsetUndetectableError(
            f"fundamental lattice phasor {strength[0]:.3g} is below "
            f"{min_snr:.3g} x the off-node floor {b_floor[0]:.3g}"
        )
    usable &= strength >= keep_fraction * strength.max()

    # The fundamental alone pins theta; stronger-order refinement only
    # helps when those orders are trustworthy.  The polish must score the
    # real part, not the magnitude: a magnitude of a phasor sum is blind
    # to common rotation, so it would lock onto the orders' relative
    # phase and throw away the fundamental's own (the measurement).
    theta = float(-np.angle(b[0]) / (2.0 * np.pi))
    kept = np.nonzero(usable)[0] + 1
    if len(kept) > 1:
        b_kept = b[kept - 1]

        def objective(trial: float) -> float:
            return float(np.sum(b_kept * np.exp(2j * np.pi * kept * trial)).real)

        span = 0.25 / kept.max()
        theta = _golden_section_maximize(objective, theta - span, theta + span)

    tau = (theta % 1.0) * h / slope
    rho_idx = (epsilon - tau * slope - gamma * h) % h
    rho = rho_index_to_centered(rho_idx, h, slope, geom)
    sigma = (d - t) / d * rho * geom.q
    return tau, rho, sigma


# -- Full two-capture pipeline ------------------------------------------------


@dataclass
class Observation:
    """One capture with everything calibration may use about it.

    ``corners`` are the detected pixel positions (TL, TR, BR, BL) of the
    panel outline in the capture; ``intrinsics`` are the camera's known
    internals.  Any pose attached to the image is simulator ground truth
    and is deliberately ignored by :func:`calibrate`, which re-estimates
    the pose from the corners.
    """

    image: CapturedImage
    corners: np.ndarray
    intrinsics: Intrinsics

    def __post_init__(self):
        self.corners = np.asarray(self.corners, dtype=float)
        if self.corners.shape != (4, 2):
            raise StripeCalError(f"corners must be (4, 2), got {self.corners.shape}")


@dataclass(frozen=True)
class CalibrationConfig:
    """Everything tunable about the recovery pipeline."""

    patterns: tuple[PatternSpec, ...] = DEFAULT_PATTERNS
    bounds: CandidateBounds = CandidateBounds()
    match_threshold: float = 0.02
    peak_tries: int = 6            # refined peaks to try per stripe period
    min_f_y: float = 0.01          # reject slant-free harmonics (cycles/row)
    exclude_dc_radius: float = 12.0
    max_peaks: int = 12
    offset_pattern: int = 0        # which stripe period anchors the offset
    offset_min_snr: float = 3.0    # lattice phasor vs off-node floor
    flip: bool = False
    dtype: str = "float32"         # spectral pipeline precision

    def __post_init__(self):
        if len(self.patterns) != 2:
            raise StripeCalError("calibration needs exactly two stripe periods")
        if self.patterns[0].beta == self.patterns[1].beta:
            raise StripeCalError("the two stripe periods must differ")
        if self.offset_pattern not in (0, 1):
            raise StripeCalError("offset_pattern must index one of the two patterns")


@dataclass
class CalibrationResult:
    """Recovered parameters plus per-stage diagnostics.

    ``sigma`` is normalized into (-p/2, p/2]; offsets a pitch apart are
    indistinguishable on the hardware.  ``h1``/``h2`` are the measured
    line spacings (subpixels) at the two distances, ``rho`` the centered
    line offset of capture 1, ``match_dist`` the worse of the two
    candidate-intersection distances, and ``residual1``/``residual2`` the
    mean peak-fit residuals per capture.
    """

    p: float
    alpha: float
    t: float
    sigma: float
    h1: float
    h2: float
    rho: float
    match_dist: float
    residual1: float
    residual2: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def alpha_deg(self) -> float:
        return math.degrees(self.alpha)

    CSV_FIELDS = ("p", "alpha_deg", "t", "sigma", "h1", "h2", "rho",
                  "match_dist", "residual1", "residual2")

    def to_csv_row(self) -> str:
        return ",".join(f"{getattr(self, name):.9g}" for name in self.CSV_FIELDS)

    @classmethod
    def csv_header(cls) -> str:
        return ",".join(cls.CSV_FIELDS)

    def to_report_text(self) -> str:
        lines = [
            f"pitch_mm {self.p:.6f}",
            f"slant_deg {self.alpha_deg:.6f}",
            f"gap_mm {self.t:.6f}",
            f"offset_mm {self.sigma:.6f}",
            f"line_spacing_1_subpix {self.h1:.6f}",
            f"line_spacing_2_subpix {self.h2:.6f}",
            f"line_offset_1_subpix {self.rho:.6f}",
            f"match_distance {self.match_dist:.6g}",
            f"peak_residual_1 {self.residual1:.6g}",
            f"peak_residual_2 {self.residual2:.6g}",
        ]
        return "\n".join(lines) + "\n"


def _measure_capture(
    rect: np.ndarray,
    config: CalibrationConfig,
    geom: PanelGeometry,
    keep_pattern: int | None,
) -> tuple[float, float, float, float, Spectrum | None, dict]:
    """Per-capture spectral measurement: (h, alpha, match_dist, residual).

    Detects and refines peaks for each stripe period, enumerates their
    lattice interpretations, and intersects the two families, retrying
    across the strongest few peaks until a pair agrees within threshold.
    """
    refined: list[list[PeakMeasurement]] = []
    kept_spec: Spectrum | None = None
    for idx, pat in enumerate(config.patterns):
        win = apply_gaussian_window(rect[:, :, pat.channel].astype(config.dtype))
        sp = spectrum(win)
        peaks = []
        for iy, ix in detect_peaks(sp, config.exclude_dc_radius, config.max_peaks):
            if abs(sp.fy[iy]) < config.min_f_y:
                continue          # stripe harmonic: no slant information
            try:
                peaks.append(refine_peak(sp, (iy, ix)))
            except UnreliablePeakError:
                continue
            if len(peaks) >= config.peak_tries:
                break
        if not peaks:
            raise UnreliablePeakError(
                f"no refinable slanted peak for stripe period {pat.beta}"
            )
        refined.append(peaks)
        if keep_pattern == idx:
            kept_spec = sp

    cand: list[list[list[Candidate] | None]] = []
    for idx, pat in enumerate(config.patterns):
        sets = []
        for pm in refined[idx]:
            try:
                sets.append(candidate_set(pm, pat.beta, config.bounds, geom.y_scale))
            except NoCandidateError:
                sets.append(None)
        cand.append(sets)

    pairs = [
        (i, j)
        for i in range(len(cand[0]))
        for j in range(len(cand[1]))
    ]
    pairs.sort(key=lambda ij: (ij[0] + ij[1], ij[0]))
    best_dist = math.inf
    for i, j in pairs:
        if cand[0][i] is None or cand[1][j] is None:
            continue
        h, alpha, dist = intersect_candidates(cand[0][i], cand[1][j])
        best_dist = min(best_dist, dist)
        if dist <= config.match_threshold:
            h, alpha, used = _fuse_peaks(
                refined, config, geom.y_scale, rect.shape[:2], h, alpha
            )
            residual = (refined[0][i].residual + refined[1][j].residual) / 2.0
            info = {
                "peak_a": (refined[0][i].f_x, refined[0][i].f_y),
                "peak_b": (refined[1][j].f_x, refined[1][j].f_y),
                "peak_rank": (i, j),
                "fused_peaks": used,
            }
            return h, alpha, dist, residual, kept_spec, info
    raise AmbiguousCalibrationError(
        f"stripe periods never agreed: best candidate distance {best_dist:.4g} "
        f"exceeds threshold {config.match_threshold:.4g}"
    )


def _fuse_peaks(
    refined: list[list[PeakMeasurement]],
    config: CalibrationConfig,
    y_scale: float,
    shape: tuple[int, int],
    h0: float,
    alpha0: float,
    snap_tol_bins: float = 8.0,
) -> tuple[float, float, int]:
    """Refine (h, alpha) by least squares over every snappable peak.

    The matched candidate pair fixes the discrete lattice interpretation;
    under it each refined peak sits at f_x = m/beta - n*a, f_y = n*b with
    a = 1/h and b = slope/h, both linear in the unknowns.  Every peak
    whose nearest node index lies in bounds and reproduces the peak to
    within ``snap_tol_bins`` frequency bins joins a magnitude-weighted
    fit, which averages down the single-peak measurement noise of the
    seed pair.  The bin-scale gate matters: captures also carry strong
    intermodulation peaks, offset from true nodes by dozens of bins, and
    genuine refined peaks land within a small fraction of one bin.
    Falls back to the seed values if fewer than two peaks snap.
    """
    rows, cols = shape
    tol_x = snap_tol_bins / cols
    tol_y = snap_tol_bins / rows
    a0 = 1.0 / h0
    b0 = math.tan(alpha0) * y_scale * a0
    num_a = num_b = den = 0.0
    used = 0
    for idx, pat in enumerate(config.patterns):
        for pm in refined[idx]:
            f_x, f_y = pm.f_x, pm.f_y
            if f_y < 0:
                f_x, f_y = -f_x, -f_y
            n = round(f_y / b0)
            if not 1 <= n <= config.bounds.n_max:
                continue
            m = round((f_x + n * a0) * pat.beta)
            if abs(m) > config.bounds.m_max:
                continue
            if abs(m / pat.beta - n * a0 - f_x) > tol_x:
                continue
            if abs(n * b0 - f_y) > tol_y:
                continue
            w = pm.magnitude
            num_a += w * n * (m / pat.beta - f_x)
            num_b += w * n * f_y
            den += w * n * n
            used += 1
    if used < 2 or den <= 0 or num_a <= 0 or num_b <= 0:
        return h0, alpha0, used
    a = num_a / den
    b = num_b / den
    return 1.0 / a, math.atan(b / (a * y_scale)), used


def calibrate(
    obs1: Observation,
    obs2: Observation,
    geom: PanelGeometry,
    config: CalibrationConfig = CalibrationConfig(),
) -> CalibrationResult:
    """Full two-capture recovery of (p, alpha, t, sigma).

    Stages: camera pose from the panel corners, rectification onto the
    panel grid, spectral peak measurement and candidate intersection per
    capture, pitch/gap separation from the two line spacings, then offset
    recovery from the lattice phase of capture 1.  Stage failures are
    re-raised as :class:`StageError` with the stage label attached.
    """
    t_start = time.perf_counter()
    diag: dict = {}

    def run(stage, fn):
        try:
            return fn()
        except StripeCalError as exc:
            raise StageError(stage, exc) from exc

    def poses():
        world = geom.corners_mm()
        out = []
        for obs in (obs1, obs2):
            H = homography_from_corners(world, obs.corners)
            out.append(decompose(H, obs.intrinsics))
        if abs(out[0].d - out[1].d) <= 1e-6 * max(out[0].d, out[1].d):
            raise DegenerateObservationError(
                f"captures share one distance ({out[0].d:.3f} mm); "
                "pitch and gap cannot be separated"
            )
        return out

    pose1, pose2 = run("pose", poses)
    diag["pose1"] = (pose1.u, pose1.v, pose1.d)
    diag["pose2"] = (pose2.u, pose2.v, pose2.d)

    channels = tuple(sorted({p.channel for p in config.patterns}))
    rect1, rect2 = run(
        "rectify",
        lambda: (
            rectify(obs1.image.data, obs1.corners, geom.panel_w, geom.panel_h,
                    flip=config.flip, channels=channels),
            rectify(obs2.image.data, obs2.corners, geom.panel_w, geom.panel_h,
                    flip=config.flip, channels=channels),
        ),
    )

    h1, a1, dist1, res1, spec_off, info1 = run(
        "peaks", lambda: _measure_capture(rect1, config, geom, config.offset_pattern)
    )
    h2, a2, dist2, res2, _, info2 = run(
        "peaks", lambda: _measure_capture(rect2, config, geom, None)
    )
    diag["capture1"] = info1
    diag["capture2"] = info2

    alpha = (a1 + a2) / 2.0

    def pitch_gap():
        p, t = solve_pitch_gap(h1 * geom.q, pose1.d, h2 * geom.q, pose2.d, alpha)
        if p <= 0:
            raise DegenerateObservationError(f"recovered non-physical pitch {p:.6g} mm")
        return p, t

    p, t = run("pitch-gap", pitch_gap)

    def offset():
        pat = config.patterns[config.offset_pattern]
        d1 = pose1.d
        gamma = (max(t, 0.0) / (p * d1)) * (
            pose1.v * math.sin(alpha) - pose1.u * math.cos(alpha)
        ) % 1.0
        tau, rho, sigma_raw = estimate_offset(
            spec_off, h1, alpha, pat.beta, pat.epsilon, gamma, d1, t, geom,
            m_max=config.bounds.m_max, n_max=config.bounds.n_max,
            min_snr=config.offset_min_snr,
        )
        diag["gamma"] = gamma
        diag["tau"] = tau
        return rho, wrap_half(sigma_raw, p)

    rho, sigma = run("offset", offset)
    diag["elapsed_s"] = time.perf_counter() - t_start

    return CalibrationResult(
        p=p, alpha=alpha, t=t, sigma=sigma,
        h1=h1, h2=h2, rho=rho,
        match_dist=max(dist1, dist2),
        residual1=res1, residual2=res2,
        diagnostics=diag,
    )


# -- Corner sidecar files ------------------------------------------------------


def write_corners(path, corners: np.ndarray) -> None:
    """Write four 'x y' lines (TL, TR, BR, BL) describing the panel outline."""
    pts = np.asarray(corners, dtype=float)
    if pts.shape != (4, 2):
        raise StripeCalError(f"corners must be (4, 2), got {pts.shape}")
    with open(path, "w") as fh:
        for x, y in pts:
            fh.write(f"{x:.6f} {y:.6f}\n")


def read_corners(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise StripeCalError(f"malformed corner line in {path}: {line!r}")
            rows.append([float(parts[0]), float(parts[1])])
    if len(rows) != 4:
        raise StripeCalError(f"{path} must hold exactly four corners, got {len(rows)}")
    return np.array(rows)

"""Synthetic calibration experiments: perturbed displays, jittered cameras.

Each trial builds a ground-truth display by perturbing a preset, shoots
the calibration multiplex from two jittered camera poses, runs the full
recovery pipeline on the pair, and records absolute parameter errors.
Trials are independent and seeded individually (master seed + trial
index), so results are byte-reproducible regardless of worker count.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import gammaln

from .capture import (
    CapturedImage,
    SimOptions,
    add_poisson_noise,
    simulate_capture,
    snr,
)
from .display import (
    DerivedParams,
    DisplayParams,
    derive,
    rho_centered_to_index,
    wrap_half,
)
from .errors import ConfigError, StageError, StripeCalError
from .estimation import (
    CalibrationConfig,
    CandidateBounds,
    Observation,
    calibrate,
)
from .patterns import make_calibration_multiplex, interleave_views, PanelImage
from .pose import CameraPose, Intrinsics, project_points, rectify
from .presets import preset
from .spectral import apply_gaussian_window, dump_log_magnitude, spectrum

__all__ = [
    "ExperimentConfig",
    "TrialRecord",
    "ErrorReport",
    "perturb_display",
    "autoframed_pose",
    "jittered_pose",
    "run_table2",
    "run_noise_sweep",
    "demo_distortion",
]


@dataclass(frozen=True)
class ExperimentConfig:
    """Knobs for the synthetic experiment harness.

    ``noise_scale`` lists sweep levels as target capture SNR in dB (None
    means noiseless); the photon scale hitting each target is computed
    per capture from the clean image.  ``display`` is a preset name or a
    ready-made :class:`DisplayParams`.
    """

    display: str | DisplayParams = "FHD55B"
    trials: int = 10
    perturbation: float = 0.01
    jitter_mm: float = 50.0
    rotation_deg: float = 1.0
    d1: float = 700.0
    d2: float = 1000.0
    noise_scale: tuple[float | None, ...] = (None,)
    seed: int = 0
    out_dir: str | Path = "out"
    capture_w: int = 1920
    capture_h: int = 1080
    fill: float = 0.90
    supersample: int = 3
    psf_sigma: float = 0.6
    workers: int = 1
    m_max: int = 8
    dtype: str = "float32"

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.perturbation < 0:
            raise ConfigError("perturbation must be >= 0")
        if self.d1 == self.d2:
            raise ConfigError("the two capture distances must differ")
        if not self.noise_scale:
            raise ConfigError("noise_scale needs at least one level")
        if not 0 < self.fill <= 1:
            raise ConfigError("fill must be in (0, 1]")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def resolve_display(self) -> DisplayParams:
        if isinstance(self.display, DisplayParams):
            return self.display
        return preset(self.display)

    @property
    def display_label(self) -> str:
        return self.display if isinstance(self.display, str) else "custom"


def perturb_display(
    display: DisplayParams, fraction: float, rng: np.random.Generator
) -> DisplayParams:
    """Uniform relative perturbation of p, alpha, t; sigma moves by
    a fraction of the pitch (the offset scale is set by p, not by sigma)."""
    if fraction < 0:
        raise ConfigError("perturbation fraction must be >= 0")
    if fraction == 0:
        return display
    rel = rng.uniform(-fraction, fraction, size=4)
    return replace(
        display,
        p=display.p * (1 + rel[0]),
        alpha=display.alpha * (1 + rel[1]),
        t=display.t * (1 + rel[2]),
        sigma=display.sigma + rel[3] * display.p,
    )


def _axis_angle_matrix(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rotation by ``angle`` about unit ``axis`` (Rodrigues)."""
    kx, ky, kz = axis
    k = np.array([[0, -kz, ky], [kz, 0, -kx], [-ky, kx, 0]])
    return np.eye(3) + math.sin(angle) * k + (1 - math.cos(angle)) * (k @ k)


def autoframed_pose(
    display: DisplayParams,
    u: float,
    v: float,
    d: float,
    capture_w: int,
    capture_h: int,
    fill: float,
    extra_rotation: np.ndarray | None = None,
) -> CameraPose:
    """Camera at (u, v, d) aimed at the panel center, focal length chosen
    after the fact so the panel spans ``fill`` of the frame at the actual
    pose."""
    probe = Intrinsics(fx=1.0, fy=1.0, cx=0.0, cy=0.0,
                       width=capture_w, height=capture_h)
    aimed = CameraPose.looking_at((u, v, d), probe, extra_rotation=extra_rotation)

    corners = display.geometry.corners_mm()
    world = np.column_stack([corners, np.zeros(4)])
    cam = world @ aimed.rotation.T + aimed.translation
    xn = cam[:, 0] / cam[:, 2]
    yn = cam[:, 1] / cam[:, 2]
    f = fill * min(capture_w / (2 * np.abs(xn).max()),
                   capture_h / (2 * np.abs(yn).max()))
    intr = Intrinsics(fx=f, fy=f, cx=(capture_w - 1) / 2.0,
                      cy=(capture_h - 1) / 2.0,
                      width=capture_w, height=capture_h)
    return CameraPose(aimed.rotation, aimed.translation, intr)


def jittered_pose(
    display: DisplayParams,
    d_nominal: float,
    rng: np.random.Generator,
    jitter_mm: float,
    rotation_deg: float,
    capture_w: int,
    capture_h: int,
    fill: float,
) -> CameraPose:
    """Random camera near (0, 0, d): position jittered per axis, aimed at
    the panel center, then twisted by a small random rotation."""
    u = rng.uniform(-jitter_mm, jitter_mm)
    v = rng.uniform(-jitter_mm, jitter_mm)
    d = d_nominal + rng.uniform(-jitter_mm, jitter_mm)
    axis = rng.normal(size=3)
    norm = np.linalg.norm(axis)
    axis = axis / norm if norm > 1e-12 else np.array([0.0, 0.0, 1.0])
    angle = math.radians(rng.uniform(-rotation_deg, rotation_deg))
    extra = _axis_angle_matrix(axis, angle)
    return autoframed_pose(display, u, v, d, capture_w, capture_h, fill,
                           extra_rotation=extra)


@dataclass
class TrialRecord:
    trial: int
    seed: int
    dp: float
    dalpha_deg: float
    dt: float
    dsigma: float
    elapsed_ms: float
    status: str
    snr_db: float = math.inf

    CSV_FIELDS = ("trial", "seed", "dp", "dalpha_deg", "dt", "dsigma",
                  "elapsed_ms", "status")

    def to_csv_row(self) -> str:
        parts = []
        for name in self.CSV_FIELDS:
            value = getattr(self, name)
            parts.append(str(value) if isinstance(value, (int, str))
                         else f"{value:.9g}")
        return ",".join(parts)


@dataclass
class ErrorReport:
    """Per-trial errors plus the aggregate view of one experiment run."""

    label: str
    records: list[TrialRecord] = field(default_factory=list)

    PARAMS = ("dp", "dalpha_deg", "dt", "dsigma")

    @property
    def successes(self) -> list[TrialRecord]:
        return [r for r in self.records if r.status == "ok"]

    @property
    def failures(self) -> int:
        return len(self.records) - len(self.successes)

    def mean_errors(self) -> dict[str, float]:
        ok = self.successes
        if not ok:
            return {k: math.nan for k in self.PARAMS}
        return {k: float(np.mean([getattr(r, k) for r in ok])) for k in self.PARAMS}

    def std_errors(self) -> dict[str, float]:
        ok = self.successes
        if not ok:
            return {k: math.nan for k in self.PARAMS}
        return {k: float(np.std([getattr(r, k) for r in ok])) for k in self.PARAMS}

    def mean_snr_db(self) -> float:
        ok = self.successes
        if not ok:
            return math.nan
        return float(np.mean([r.snr_db for r in ok]))

    def mean_elapsed_ms(self) -> float:
        ok = self.successes
        if not ok:
            return math.nan
        return float(np.mean([r.elapsed_ms for r in ok]))

    def to_csv(self) -> str:
        lines = [",".join(TrialRecord.CSV_FIELDS)]
        lines += [r.to_csv_row() for r in self.records]
        return "\n".join(lines) + "\n"

    def format_table(self) -> str:
        mean, std = self.mean_errors(), self.std_errors()
        head = f"{'':14s}{'|dp| mm':>14s}{'|da| deg':>14s}{'|dt| mm':>14s}{'|ds| mm':>14s}"
        row_m = f"{self.label + ' mean':14s}" + "".join(
            f"{mean[k]:>14.6g}" for k in self.PARAMS)
        row_s = f"{'std':14s}" + "".join(
            f"{std[k]:>14.6g}" for k in self.PARAMS)
        tail = (f"trials {len(self.records)}  failures {self.failures}  "
                f"mean time {self.mean_elapsed_ms():.0f} ms")
        return "\n".join([head, row_m, row_s, tail]) + "\n"


def _noise_scale(cap: CapturedImage, snr_target_db: float) -> float:
    """Photon scale putting Poisson shot noise at the target power SNR.

    Shot noise power is sum(lam)/scale against signal power sum(lam^2),
    so the scale follows directly from the clean capture's statistics.
    """
    total = float(cap.data.sum())
    sq = float((cap.data ** 2).sum())
    if sq <= 0:
        raise StripeCalError("capture is black; cannot target an SNR")
    return 10.0 ** (snr_target_db / 10.0) * total / sq


_COUPLE_BUCKETS = 4096
_COUPLE_LOG_SPAN = 30.0


def _coupled_counts(
    values: np.ndarray,
    scales: list[float],
    rng: np.random.Generator,
    u: np.ndarray | None = None,
) -> dict[float, np.ndarray]:
    """Poisson count fields at several photon scales, sharing one uniform.

    Each pixel draws a single uniform and every scale maps it through the
    Poisson quantile at that scale's rate, so a pixel that comes out high
    at one noise level comes out proportionally high at all of them.  The
    near-perfect correlation is what makes per-trial errors move cleanly
    with the noise amplitude; independent draws (or a thinning chain,
    whose correlation is only sqrt(scale ratio)) let sample means of
    derived errors cross between adjacent levels.

    Exact quantiles are far too slow per pixel, so rates are snapped down
    onto a geometric grid whose quantiles come from one cumulative table,
    and the remainder rate is topped up with an independent Poisson draw.
    Superposition keeps the marginal at every level exactly Poisson at
    the pixel's true rate; the top-up is under one grid step (<1%) of it,
    so the coupling loss is negligible.
    """
    flat = values.ravel()
    if flat.size and float(flat.min()) < 0:
        raise StripeCalError("negative intensities; cannot draw photon counts")
    if u is None:
        u = rng.random(flat.size)
    else:
        u = u.ravel()
    u = np.maximum(u, 1e-9)
    step = _COUPLE_LOG_SPAN / _COUPLE_BUCKETS
    out: dict[float, np.ndarray] = {}
    for s in scales:
        mu = flat * s
        mu_max = float(mu.max()) if mu.size else 0.0
        if mu_max <= 0.0:
            out[s] = np.zeros(values.shape, dtype=np.int64)
            continue
        lo = math.log(mu_max) - _COUPLE_LOG_SPAN
        with np.errstate(divide="ignore", invalid="ignore"):
            raw = np.floor((np.log(mu) - lo) / step)
        idx = np.where(np.isfinite(raw), raw, -1.0).astype(np.int64)
        # Pixels dimmer than the grid floor (mu_max * e^-30), along with
        # exact zeros, carry no usable coupling; they get the plain
        # independent draw below.
        on_grid = idx >= 0
        np.clip(idx, 0, _COUPLE_BUCKETS - 1, out=idx)
        # Lower bucket edges, so the snapped rate never exceeds the true
        # rate and the top-up remainder stays nonnegative.
        rates = np.exp(lo + step * np.arange(_COUPLE_BUCKETS))
        half = 10.0 * np.sqrt(rates) + 10.0
        k_lo = np.maximum(0.0, np.floor(rates - half)).astype(np.int64)
        width = int((np.ceil(rates + half).astype(np.int64) - k_lo).max()) + 1
        ks = k_lo[:, None] + np.arange(width)[None, :]
        cdf = np.cumsum(
            np.exp(ks * np.log(rates)[:, None] - rates[:, None]
                   - gammaln(ks + 1.0)),
            axis=1,
        )
        np.minimum(cdf, 1.0, out=cdf)
        # One global search: row b of the table lives on [b, b+1), so
        # bucket index plus uniform addresses its own row's quantile.
        keys = (np.arange(_COUPLE_BUCKETS)[:, None] + cdf).ravel()
        pos = np.searchsorted(keys, idx + u, side="left")
        quant = k_lo[idx] + (pos - idx * width)
        mu_q = np.where(on_grid, np.minimum(rates[idx], mu), 0.0)
        counts = np.where(on_grid, quant, 0) + rng.poisson(mu - mu_q)
        out[s] = counts.reshape(values.shape)
    return out


def _simulate_trial(display: DisplayParams, seed: int, config: ExperimentConfig):
    """Perturbed truth plus two clean jittered captures with their corners."""
    rng = np.random.default_rng(seed)
    truth = perturb_display(display, config.perturbation, rng)
    geom = display.geometry
    panel = make_calibration_multiplex(geom.panel_w, geom.panel_h)
    options = SimOptions(supersample=config.supersample,
                         psf_sigma=config.psf_sigma)
    captures, corners, poses = [], [], []
    for d_nominal in (config.d1, config.d2):
        pose = jittered_pose(truth, d_nominal, rng, config.jitter_mm,
                             config.rotation_deg, config.capture_w,
                             config.capture_h, config.fill)
        captures.append(simulate_capture(panel, truth, pose, options))
        corners.append(project_points(pose, geom.corners_mm()))
        poses.append(pose)
    return truth, captures, corners, poses, rng


def _calibrate_trial(
    truth: DisplayParams,
    geom,
    observations: list[Observation],
    config: ExperimentConfig,
    trial: int,
    seed: int,
    snr_db: float,
) -> TrialRecord:
    calib = CalibrationConfig(
        bounds=CandidateBounds(m_max=config.m_max), dtype=config.dtype
    )
    t0 = time.perf_counter()
    try:
        result = calibrate(observations[0], observations[1], geom, calib)
    except StageError as exc:
        elapsed = (time.perf_counter() - t0) * 1000.0
        return TrialRecord(trial=trial, seed=seed, dp=math.nan,
                           dalpha_deg=math.nan, dt=math.nan, dsigma=math.nan,
                           elapsed_ms=elapsed, status=exc.stage, snr_db=snr_db)
    elapsed = (time.perf_counter() - t0) * 1000.0

    return TrialRecord(
        trial=trial,
        seed=seed,
        dp=abs(result.p - truth.p),
        dalpha_deg=abs(math.degrees(result.alpha - truth.alpha)),
        dt=abs(result.t - truth.t),
        dsigma=abs(wrap_half(result.sigma - truth.sigma, truth.p)),
        elapsed_ms=elapsed,
        status="ok",
        snr_db=snr_db,
    )


def _run_trial(
    display: DisplayParams,
    trial: int,
    seed: int,
    config: ExperimentConfig,
    snr_target_db: float | None,
) -> TrialRecord:
    """One seeded trial: perturb, shoot two jittered captures, calibrate."""
    truth, captures, corners, poses, rng = _simulate_trial(display, seed, config)
    geom = display.geometry
    observations, snrs = [], []
    for cap, corn, pose in zip(captures, corners, poses):
        if snr_target_db is not None and math.isfinite(snr_target_db):
            noisy = add_poisson_noise(cap, _noise_scale(cap, snr_target_db), rng)
            snrs.append(snr(cap, noisy))
            cap = noisy
        else:
            snrs.append(math.inf)
        observations.append(Observation(cap, corn, pose.intrinsics))
    return _calibrate_trial(truth, geom, observations, config, trial, seed,
                            float(np.mean(snrs)))


def _run_sweep_trial(
    display: DisplayParams,
    trial: int,
    seed: int,
    config: ExperimentConfig,
) -> dict[str, list[TrialRecord]]:
    """One seeded trial calibrated at every noise level, noise coupled.

    The two clean captures are simulated once, then photon counts at all
    finite levels come from :func:`_coupled_counts`, so within the trial
    the same underlying fluctuation is replayed at every amplitude.  Each
    level is calibrated twice, on an antithetic pair of noise draws (the
    shared uniform and its reflection), and both records are reported.
    The pair average of an absolute error behaves like
    max(noiseless bias, noise amplitude), which rises with noise level by
    construction, so the sweep's per-level means inherit the monotone
    trend of the underlying expectations instead of needing enough trials
    to average single-draw dither away.
    """
    truth, captures, corners, poses, rng = _simulate_trial(display, seed, config)
    geom = display.geometry

    finite = sorted(
        {db for db in config.noise_scale if db is not None and math.isfinite(db)},
        reverse=True,
    )
    by_level: dict[float, list[list[CapturedImage]]] = {
        db: [[], []] for db in finite
    }
    for cap in captures:
        u = np.maximum(rng.random(cap.data.size), 1e-9)
        scale_of = {db: _noise_scale(cap, db) for db in finite}
        for side, uu in enumerate((u, 1.0 - u)):
            counts = _coupled_counts(cap.data, list(scale_of.values()), rng, uu)
            for db in finite:
                s = scale_of[db]
                by_level[db][side].append(
                    CapturedImage(counts[s] / s, pose=cap.pose))

    out: dict[str, list[TrialRecord]] = {}
    for db in config.noise_scale:
        label = _level_label(db)
        if db is None or math.isinf(db):
            sides = [captures]
            snrs_of = [[math.inf] * len(captures)]
        else:
            sides = by_level[db]
            snrs_of = [[snr(c, n) for c, n in zip(captures, side)]
                       for side in sides]
        records = []
        for level_caps, snrs in zip(sides, snrs_of):
            observations = [
                Observation(c, corn, pose.intrinsics)
                for c, corn, pose in zip(level_caps, corners, poses)
            ]
            records.append(
                _calibrate_trial(truth, geom, observations, config,
                                 trial, seed, float(np.mean(snrs))))
        out[label] = records
    return out


def _run_trials(
    config: ExperimentConfig, snr_target_db: float | None, label: str
) -> ErrorReport:
    display = config.resolve_display()
    args = [
        (display, i, config.seed + i, config, snr_target_db)
        for i in range(config.trials)
    ]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(_trial_star, args))
    else:
        records = [_run_trial(*a) for a in args]
    return ErrorReport(label=label, records=records)


def _trial_star(args):
    return _run_trial(*args)


def _level_label(snr_target_db: float | None) -> str:
    if snr_target_db is None or math.isinf(snr_target_db):
        return "inf"
    return f"{snr_target_db:g}dB"


def run_table2(config: ExperimentConfig) -> ErrorReport:
    """Noiseless (or single-level) error statistics for one display.

    Runs ``config.trials`` seeded trials at the first noise level and
    writes ``table2_<display>.csv`` plus a formatted summary table under
    ``config.out_dir``.
    """
    level = config.noise_scale[0]
    report = _run_trials(config, level, config.display_label)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"table2_{config.display_label}"
    (out / f"{stem}.csv").write_text(report.to_csv())
    (out / f"{stem}.txt").write_text(report.format_table())
    return report


def run_noise_sweep(config: ExperimentConfig) -> dict[str, ErrorReport]:
    """Runs every trial at every noise level in ``config.noise_scale``.

    Each trial simulates its two captures once and derives all noise
    levels from one coupled photon field (see :func:`_run_sweep_trial`),
    so display perturbations and camera poses are identical across levels
    and the shot noise realizations are ordered by level.  Writes one CSV
    per level plus a summary CSV with measured SNR and mean errors."""
    display = config.resolve_display()
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    args = [
        (display, i, config.seed + i, config)
        for i in range(config.trials)
    ]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            trial_maps = list(pool.map(_sweep_trial_star, args))
    else:
        trial_maps = [_run_sweep_trial(*a) for a in args]

    reports: dict[str, ErrorReport] = {}
    summary = ["level,snr_db,dp,dalpha_deg,dt,dsigma,failures"]
    for level in config.noise_scale:
        label = _level_label(level)
        if label in reports:
            continue
        records = [rec for m in trial_maps for rec in m[label]]
        report = ErrorReport(label=f"{config.display_label}@{label}",
                             records=records)
        reports[label] = report
        stem = f"sweep_{config.display_label}_{label}"
        (out / f"{stem}.csv").write_text(report.to_csv())
        mean = report.mean_errors()
        summary.append(
            f"{label},{report.mean_snr_db():.9g},"
            + ",".join(f"{mean[k]:.9g}" for k in ErrorReport.PARAMS)
            + f",{report.failures}"
        )
    (out / f"sweep_{config.display_label}_summary.csv").write_text(
        "\n".join(summary) + "\n")
    return reports


def _sweep_trial_star(args):
    return _run_sweep_trial(*args)


def demo_distortion(
    display: DisplayParams,
    render_like: DisplayParams,
    out_dir: str | Path,
    d: float = 700.0,
    n_views: int = 8,
    capture_w: int = 1920,
    capture_h: int = 1080,
    fill: float = 0.90,
) -> dict[str, Path]:
    """Side-by-side captures of correct vs mismatched rendering.

    The panel shows ``n_views`` flat view images encoding view index as a
    cosine of brightness, interleaved once with the display's own
    geometry and once with ``render_like``.  A frontal camera at
    distance ``d`` photographs both.  When the geometries differ the
    mismatch capture carries a periodic point lattice; its spectrum is
    dumped alongside.  Returns the written file paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    geom = display.geometry

    # The eye at (0, 0, -d) sees view 0; brightness encodes circular
    # distance from it, so mismatched view assignment dims the capture.
    phases = (np.arange(n_views) + 0.5) / n_views
    values = np.round(255 * (0.5 + 0.5 * np.cos(2 * np.pi * phases))).astype(np.uint8)
    views = [np.full((geom.panel_h, geom.panel_w, 3), val, dtype=np.uint8)
             for val in values]

    options = SimOptions()
    pose = autoframed_pose(display, 0.0, 0.0, d, capture_w, capture_h, fill)
    paths: dict[str, Path] = {}
    captures = {}
    for name, params in (("correct", display), ("mismatch", render_like)):
        derived = derive(params, d)
        # interleave_views wants the line offset in the corner index frame.
        render = DerivedParams(h=derived.h, alpha=derived.alpha,
                               rho=rho_centered_to_index(derived.rho, derived, geom),
                               d=derived.d, y_scale=derived.y_scale)
        panel = interleave_views(views, render)
        cap = simulate_capture(panel, display, pose, options)
        captures[name] = cap
        path = out / f"{name}.png"
        cap.save_png(path)
        paths[name] = path

    diff = np.abs(captures["correct"].data - captures["mismatch"].data)
    diff_path = out / "difference.png"
    PanelImage(np.round(diff * 255).clip(0, 255).astype(np.uint8)).save_png(diff_path)
    paths["difference"] = diff_path

    corners = project_points(pose, geom.corners_mm())
    rect = rectify(captures["mismatch"].data, corners, geom.panel_w,
                   geom.panel_h, channels=(1,))
    spec = spectrum(apply_gaussian_window(rect[:, :, 1].astype(float)))
    spec_path = out / "spectrum.png"
    dump_log_magnitude(spec, spec_path)
    paths["spectrum"] = spec_path
    return paths

"""Forward simulation: photographing a panel through its slanted optic.

The simulator traces rays from the camera center through each output
pixel (supersampled along both axes) to the panel plane, attenuates each
ray by the optic's transmission where it crosses the optic plane, picks
up the local emission of the panel, then applies a Gaussian lens blur on
the supersampled grid and box-averages down to the sensor resolution.
Subpixel columns are color-selective: column x emits only on plane
x mod 3 (R, G, B left to right).

Emission is modelled with a triangular horizontal profile of unit area
and half-width one subpixel.  A hard-edged column profile would carry
harmonics far beyond what any sample grid can represent, and those
harmonics fold back exactly onto the low frequencies the calibration
measures; the triangular profile rolls them off before sampling.  For
panels whose rows are all identical (every stripe pattern) the profile
is tabulated once in 1D and rendering needs no per-ray panel gather.

Intensities are linear throughout: panel values map 0..255 -> 0..1 and
captures stay in [0, 1] until shot noise, which can push values slightly
above 1 (kept, not clipped; PNG export saturates).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import cv2
import numpy as np
from scipy import ndimage

from .display import DisplayParams
from .errors import ConfigError, GeometryError
from .patterns import PanelImage
from .pose import CameraPose

__all__ = [
    "SimOptions",
    "CapturedImage",
    "visibility",
    "simulate_capture",
    "add_poisson_noise",
    "snr",
]

_APERTURES = ("box", "cosine")


@dataclass(frozen=True)
class SimOptions:
    """Knobs of the forward model.

    slit_width        aperture width of the optic, mm, measured
                      perpendicular to the lines; None means p / 8
    aperture          transmission profile across the aperture: "box"
                      (hard slit) or "cosine" (raised cosine, models a
                      defocused lenticular sheet)
    psf_sigma         Gaussian lens blur in captured pixels
    supersample       rays per output pixel along each axis
    noise_scale       photons per unit intensity for shot noise; None
                      disables noise
    apply_perspective full projective camera when True; when False the
                      output is an orthographic panel-resolution image
                      (visibility still evaluated from the camera
                      position), which is what rectification aims for
    """

    slit_width: float | None = None
    aperture: str = "box"
    psf_sigma: float = 0.6
    supersample: int = 3
    noise_scale: float | None = None
    apply_perspective: bool = True

    def __post_init__(self):
        if self.slit_width is not None and self.slit_width <= 0:
            raise ConfigError(f"slit width must be positive, got {self.slit_width}")
        if self.aperture not in _APERTURES:
            raise ConfigError(f"aperture must be one of {_APERTURES}, got {self.aperture!r}")
        if self.psf_sigma < 0:
            raise ConfigError(f"psf sigma must be non-negative, got {self.psf_sigma}")
        if self.supersample < 1 or int(self.supersample) != self.supersample:
            raise ConfigError(f"supersample must be a positive integer, got {self.supersample}")
        if self.noise_scale is not None and self.noise_scale <= 0:
            raise ConfigError(f"noise scale must be positive, got {self.noise_scale}")


@dataclass
class CapturedImage:
    """A simulated or loaded photograph: (H, W, 3) float64, linear intensity."""

    data: np.ndarray
    pose: CameraPose | None = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3 or self.data.shape[2] != 3:
            raise ConfigError(f"capture must be (H, W, 3), got {self.data.shape}")

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def save_png(self, path) -> None:
        """Write as 16-bit RGB PNG; intensities clamp to [0, 1]."""
        arr = np.clip(self.data, 0.0, 1.0)
        arr16 = np.round(arr * 65535.0).astype(np.uint16)
        ok = cv2.imwrite(str(path), cv2.cvtColor(arr16, cv2.COLOR_RGB2BGR))
        if not ok:
            raise IOError(f"failed to write {path}")

    @classmethod
    def load_png(cls, path) -> "CapturedImage":
        raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
        if raw is None:
            raise IOError(f"failed to read {path}")
        if raw.ndim != 3 or raw.shape[2] < 3:
            raise ConfigError(f"{path} is not an RGB image")
        raw = raw[:, :, :3]
        scale = 65535.0 if raw.dtype == np.uint16 else 255.0
        return cls(cv2.cvtColor(raw, cv2.COLOR_BGR2RGB).astype(np.float64) / scale)


def _slit_width(params: DisplayParams, options: SimOptions) -> float:
    w = options.slit_width if options.slit_width is not None else params.p / 8.0
    if not 0 < w <= params.p:
        raise ConfigError(f"slit width {w} must lie in (0, p = {params.p}]")
    return w


def _transmission_mm(x_mm, y_mm, u, v, d, params: DisplayParams, width: float, aperture: str):
    """Optic transmission for panel points (mm, centered frame) seen from (u, v, d)."""
    frac = params.t / d
    xo = x_mm * (1.0 - frac) + u * frac   # crossing point on the optic plane
    yo = y_mm * (1.0 - frac) + v * frac
    cos_a = math.cos(params.alpha)
    spacing = params.p / cos_a            # horizontal spacing of the line family
    resid = (xo - yo * math.tan(params.alpha) - params.sigma) % spacing
    resid = np.where(resid > spacing / 2.0, resid - spacing, resid)
    perp = np.abs(resid) * cos_a
    if aperture == "box":
        return (perp <= width / 2.0).astype(np.float64)
    out = 0.5 * (1.0 + np.cos(np.pi * perp / (width / 2.0)))
    return np.where(perp <= width / 2.0, out, 0.0)


def _comb_cumulative2(z, period: float, width: float):
    """Second antiderivative of a unit comb of lit intervals [0, width) mod period.

    Returns S(z) with S'' = comb, S(0) = S'(0) = 0, valid for any real z.
    """
    k = np.floor(z / period)
    r = z - k * period
    ramp_full = 0.5 * width * width + width * (period - width)
    ramp_tail = np.where(
        r <= width, 0.5 * r * r, 0.5 * width * width + width * (r - width)
    )
    return (
        0.5 * width * period * k * (k - 1.0)
        + k * ramp_full
        + width * k * r
        + ramp_tail
    )


def _transmission_mm_avg(
    x_mm, y_mm, u, v, d, params: DisplayParams, width: float, aperture: str,
    jacobian, step: float,
):
    """Transmission averaged over a sample footprint, exact for the box slit.

    Transmission depends on position only through the scalar
    zeta = x_optic - y_optic tan(alpha) - sigma, so averaging over a
    square sample footprint (side ``step`` grid units, panel-frame
    Jacobian ``(dx_dxg, dy_dxg, dx_dyg, dy_dyg)``) is a 1D convolution
    of the comb with the trapezoid the footprint induces on zeta, a
    double difference of the comb's second antiderivative.  Point
    samples instead would quantize the line positions to the sample
    grid, and that moire against the pixel grid biases every phase the
    calibration later measures.  The smooth cosine aperture keeps the
    midpoint value.
    """
    if aperture != "box":
        return _transmission_mm(x_mm, y_mm, u, v, d, params, width, aperture)
    frac = params.t / d
    scale = 1.0 - frac
    xo = x_mm * scale + u * frac
    yo = y_mm * scale + v * frac
    cos_a = math.cos(params.alpha)
    tan_a = math.tan(params.alpha)
    spacing = params.p / cos_a
    w_x = width / cos_a                   # full slit width measured along zeta
    z = xo - yo * tan_a - params.sigma + 0.5 * w_x
    dx_dxg, dy_dxg, dx_dyg, dy_dyg = jacobian
    hx = np.maximum(np.abs(dx_dxg - tan_a * dy_dxg) * (scale * step / 2.0), 1e-9)
    hy = np.maximum(np.abs(dx_dyg - tan_a * dy_dyg) * (scale * step / 2.0), 1e-9)
    total = (
        _comb_cumulative2(z + hx + hy, spacing, w_x)
        - _comb_cumulative2(z + hx - hy, spacing, w_x)
        - _comb_cumulative2(z - hx + hy, spacing, w_x)
        + _comb_cumulative2(z - hx - hy, spacing, w_x)
    )
    # The average is in [0, 1] analytically; the double difference of the
    # cumulative can dip a hair outside through cancellation.
    return np.clip(total / (4.0 * hx * hy), 0.0, 1.0)


def visibility(
    x, y, pose: CameraPose, params: DisplayParams, slit_width: float | None = None
):
    """Transmission of the optic for panel subpixel (x columns, y rows).

    Accepts scalars or arrays in the corner index frame; returns the box
    aperture transmission (0 or 1) as float.  Wide open (slit_width = p)
    transmits everywhere.
    """
    geom = params.geometry
    options = SimOptions(slit_width=slit_width)
    width = _slit_width(params, options)
    x_mm, y_mm = geom.index_to_mm(x, y)
    if pose.d <= params.t:
        raise GeometryError(f"camera distance {pose.d} must exceed the gap {params.t}")
    out = _transmission_mm(
        x_mm, y_mm, pose.u, pose.v, pose.d, params, width, options.aperture
    )
    return float(out) if np.isscalar(x) and np.isscalar(y) else out


def _panel_to_pixel_homography(pose: CameraPose) -> np.ndarray:
    """3x3 map from centered panel mm coordinates (z = 0) to pixel coords."""
    R, t = pose.rotation, pose.translation
    P = pose.intrinsics.matrix @ np.column_stack([R[:, 0], R[:, 1], t])
    return P


# Samples per subpixel in the tabulated emission profile.  Residual
# quantization aliases sit near K cycles/subpixel where the triangular
# profile has rolled off by ~1e-3.
_PROFILE_RES = 8


def _column_emission_table(panel: PanelImage, k: int) -> np.ndarray:
    """Tent-profile emission of a row-uniform panel, tabulated along x.

    Returns (len, 3) where entry g holds channel emissions at panel
    position x = g / k - 1 subpixels (one subpixel of zero guard each
    side, so clipped lookups outside the panel read zero).  Each column
    contributes its intensity times a triangle of half-width one
    subpixel, which preserves both peak value and total emitted power
    of the hard-edged column it replaces.
    """
    vals = panel.data[0].astype(np.float64) / 255.0
    w = vals.shape[0]
    length = (w + 2) * k + 1
    table = np.zeros((length, 3), dtype=np.float64)
    kernel = 1.0 - np.abs(np.arange(-k, k + 1)) / k
    positions = (np.arange(w) + 1) * k
    for c in range(3):
        train = np.zeros(length)
        train[positions] = vals[:, c]
        table[:, c] = np.convolve(train, kernel, mode="same")
    return table


def simulate_capture(
    panel: PanelImage,
    params: DisplayParams,
    pose: CameraPose,
    options: SimOptions = SimOptions(),
    rng: np.random.Generator | int | None = None,
) -> CapturedImage:
    """Render a photograph of ``panel`` shown on the display at ``pose``.

    The panel resolution must match ``params``.  Output resolution comes
    from ``pose.intrinsics`` (or the panel itself when perspective is
    off).  Noise is applied only when ``options.noise_scale`` is set; pass
    ``rng`` (Generator or seed) for reproducible draws.
    """
    geom = params.geometry
    if (panel.height, panel.width) != (geom.panel_h, geom.panel_w):
        raise ConfigError(
            f"panel image {panel.width}x{panel.height} does not match the "
            f"display resolution {geom.panel_w}x{geom.panel_h}"
        )
    if pose.d <= params.t:
        raise GeometryError(f"camera distance {pose.d} must exceed the gap {params.t}")
    width = _slit_width(params, options)
    s = options.supersample
    u, v, d = pose.u, pose.v, pose.d

    if options.apply_perspective:
        out_w, out_h = pose.intrinsics.width, pose.intrinsics.height
        P_inv = np.linalg.inv(_panel_to_pixel_homography(pose))
    else:
        out_w, out_h = geom.panel_w, geom.panel_h
        P_inv = None

    fine_w, fine_h = out_w * s, out_h * s
    # Fine-grid sample positions in output pixel coordinates.
    xs_fine = (np.arange(fine_w) + 0.5) / s - 0.5

    # Row-uniform panels (every stripe pattern) take the tabulated-profile
    # path; panels with vertical structure fall back to a nearest-subpixel
    # gather, which is adequate for qualitative renders but keeps the
    # hard-edged emission harmonics.
    uniform_rows = bool((panel.data == panel.data[:1]).all())
    if uniform_rows:
        table = _column_emission_table(panel, _PROFILE_RES)
        # Trapezoid cumulative of the profile (exact: the profile is
        # piecewise linear with knots on the grid), so each sample can
        # average the emission over its own footprint instead of point
        # sampling it, which would re-quantize the comb to the fine grid.
        steps = 0.5 * (table[1:] + table[:-1]) / _PROFILE_RES
        cum = np.vstack([np.zeros((1, 3)), np.cumsum(steps, axis=0)])
        cum_tables = [np.ascontiguousarray(cum[:, c]) for c in range(3)]
        cum_top = cum.shape[0] - 1
    else:
        plane_flat = panel.data.reshape(-1).astype(np.float64) / 255.0

    def emission_cumulative(g, c):
        """Integral of channel c emission from the table start to grid position g."""
        i = np.floor(g).astype(np.int64)
        np.clip(i, 0, cum_top - 1, out=i)
        frac = np.clip(g - i, 0.0, 1.0)
        base = cum_tables[c][i]
        return base + frac * (cum_tables[c][i + 1] - base)

    fine = np.zeros((3, fine_h, fine_w), dtype=np.float32)
    # Block over fine rows to bound the working set of the mapping.
    block = max(1, int(8e6 / fine_w))
    for r0 in range(0, fine_h, block):
        r1 = min(r0 + block, fine_h)
        ys = (np.arange(r0, r1) + 0.5) / s - 0.5
        xg = np.broadcast_to(xs_fine, (len(ys), fine_w))
        yg = np.broadcast_to(ys[:, None], xg.shape)
        if P_inv is not None:
            denom = P_inv[2, 0] * xg + P_inv[2, 1] * yg + P_inv[2, 2]
            x_mm = (P_inv[0, 0] * xg + P_inv[0, 1] * yg + P_inv[0, 2]) / denom
            y_mm = (P_inv[1, 0] * xg + P_inv[1, 1] * yg + P_inv[1, 2]) / denom
            # Local panel-frame Jacobian of the pixel-to-panel map.
            jac = (
                (P_inv[0, 0] - x_mm * P_inv[2, 0]) / denom,
                (P_inv[1, 0] - y_mm * P_inv[2, 0]) / denom,
                (P_inv[0, 1] - x_mm * P_inv[2, 1]) / denom,
                (P_inv[1, 1] - y_mm * P_inv[2, 1]) / denom,
            )
        else:
            x_mm = (xg - geom.center_x) * geom.q
            y_mm = (yg - geom.center_y) * geom.row_pitch
            jac = (geom.q, 0.0, 0.0, geom.row_pitch)

        trans = _transmission_mm_avg(
            x_mm, y_mm, u, v, d, params, width, options.aperture, jac, 1.0 / s
        )
        x_idx = x_mm / geom.q + geom.center_x
        if uniform_rows:
            # Horizontal half-extent of the sample footprint in subpixels.
            half = np.maximum(
                (np.abs(jac[0]) + np.abs(jac[2])) / (2.0 * s * geom.q), 1e-6
            )
            g_lo = (x_idx - half + 1.0) * _PROFILE_RES
            g_hi = (x_idx + half + 1.0) * _PROFILE_RES
            span = g_hi - g_lo
            for c in range(3):
                avg = (emission_cumulative(g_hi, c) - emission_cumulative(g_lo, c)) \
                    * (_PROFILE_RES / span)
                fine[c, r0:r1] = avg * trans
        else:
            xi = np.rint(x_idx).astype(np.int64)
            yj = np.rint(y_mm / geom.row_pitch + geom.center_y).astype(np.int64)
            inside = (xi >= 0) & (xi < geom.panel_w) & (yj >= 0) & (yj < geom.panel_h)
            xi = np.where(inside, xi, 0)
            yj = np.where(inside, yj, 0)
            ch = (xi % 3).astype(np.uint8)
            flat = (yj * geom.panel_w + xi) * 3 + ch
            val = plane_flat[flat] * trans * inside
            for c in range(3):
                fine[c, r0:r1] = np.where(ch == c, val, 0.0)

    # Optics blur happens before the sensor samples, so the PSF is applied
    # on the fine grid (sigma scaled to fine pixels); the s x s box average
    # then models integration over the pixel footprint.  Blurring after
    # decimation would let panel harmonics alias into the lattice nodes.
    out = np.empty((out_h, out_w, 3), dtype=np.float64)
    for c in range(3):
        plane = fine[c]
        if options.psf_sigma > 0:
            plane = ndimage.gaussian_filter(
                plane, options.psf_sigma * s, mode="constant", cval=0.0
            )
        out[:, :, c] = plane.reshape(out_h, s, out_w, s).mean(axis=(1, 3), dtype=np.float64)

    capture = CapturedImage(out, pose=pose)
    if options.noise_scale is not None:
        capture = add_poisson_noise(capture, options.noise_scale, rng)
    return capture


def add_poisson_noise(
    capture: CapturedImage,
    noise_scale: float,
    rng: np.random.Generator | int | None = None,
) -> CapturedImage:
    """Photon shot noise: value -> Poisson(value * noise_scale) / noise_scale.

    Larger ``noise_scale`` means more photons and hence less relative
    noise.  Uses numpy's seedable PCG64 generator; pass an int seed or a
    Generator for reproducibility.
    """
    if noise_scale <= 0:
        raise ConfigError(f"noise scale must be positive, got {noise_scale}")
    if (capture.data < 0).any():
        raise ConfigError("capture holds negative intensities; cannot apply shot noise")
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    noisy = gen.poisson(capture.data * noise_scale).astype(np.float64) / noise_scale
    return CapturedImage(noisy, pose=capture.pose)


def snr(clean: CapturedImage, noisy: CapturedImage) -> float:
    """Power signal-to-noise ratio of ``noisy`` against ``clean``, in dB."""
    c = clean.data
    n = noisy.data
    if c.shape != n.shape:
        raise ConfigError(f"shape mismatch {c.shape} vs {n.shape}")
    signal = float((c * c).sum())
    noise = float(((n - c) ** 2).sum())
    if noise == 0.0:
        return math.inf
    if signal == 0.0:
        return -math.inf
    return 10.0 * math.log10(signal / noise)

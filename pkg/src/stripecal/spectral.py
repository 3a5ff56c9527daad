"""Windowed 2D spectra, peak detection, and sub-bin peak localization.

The rectified capture of a stripe pattern is a near-periodic point
lattice, so its discrete Fourier transform concentrates into a sparse
set of sharp peaks.  Calibration accuracy rests entirely on locating
those peaks to a small fraction of a frequency bin, which is done here
by (1) multiplying the image by a centered Gaussian window so that every
lattice peak becomes an exactly Gaussian bump -- quadratic in
log-magnitude -- and (2) fitting that quadratic over a 5x5 neighborhood.

Frequencies are in cycles per sample along each axis (columns for f_x,
rows for f_y) with the unitary 1/sqrt(W*H) normalization, so Parseval's
identity holds exactly between image and spectrum.  Because the input is
real, only the f_x >= 0 half-plane is stored (the other half is its
conjugate mirror); rows are DC-centered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import cv2
import numpy as np
from scipy import fft as sfft
from scipy import ndimage

from .errors import UnreliablePeakError

__all__ = [
    "Spectrum",
    "PeakMeasurement",
    "apply_gaussian_window",
    "spectrum",
    "detect_peaks",
    "refine_peak",
    "sample_spectrum_at",
    "dump_log_magnitude",
]

#: Window sigma as a fraction of each image extent.
WINDOW_SIGMA_FRACTION = 1.0 / 6.0

#: Peak fits use this many bins on each side of the coarse maximum.
_FIT_HALF = 2


def apply_gaussian_window(image: np.ndarray, sigma_fraction: float = WINDOW_SIGMA_FRACTION) -> np.ndarray:
    """Multiply an image by a separable Gaussian centered on the image.

    The window tapers the panel borders to zero so the finite extent does
    not leak sinc ringing into the spectrum, and it gives every spectral
    peak the same known Gaussian profile.  Sigma is ``sigma_fraction`` of
    each axis extent (default one sixth).
    """
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError(f"expected a single-channel image, got shape {img.shape}")
    h, w = img.shape
    sy, sx = h * sigma_fraction, w * sigma_fraction
    ys = np.arange(h) - (h - 1) / 2.0
    xs = np.arange(w) - (w - 1) / 2.0
    wy = np.exp(-0.5 * (ys / sy) ** 2).astype(img.dtype, copy=False)
    wx = np.exp(-0.5 * (xs / sx) ** 2).astype(img.dtype, copy=False)
    return img * np.outer(wy, wx)


@dataclass
class Spectrum:
    """Unitary half-plane DFT of a real windowed image, plus the image.

    ``values[iy, ix]`` corresponds to frequency (fx[ix], fy[iy]) in
    cycles/sample, where ``fx`` runs over [0, 0.5] and ``fy`` over the
    full DC-centered range.  Negative-f_x values follow from conjugate
    symmetry: S(-fx, fy) = conj(S(fx, -fy)).  The windowed spatial image
    is retained so that exact off-grid spectral values can be evaluated
    later.
    """

    values: np.ndarray
    image: np.ndarray
    fx: np.ndarray
    fy: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def freq_of_bin(self, iy: int, ix: int) -> tuple[float, float]:
        return float(self.fx[ix]), float(self.fy[iy])

    def bin_of_freq(self, f_x: float, f_y: float) -> tuple[int, int]:
        if f_x < 0:
            raise ValueError("stored half-plane covers f_x >= 0 only")
        h = self.values.shape[0]
        w = self.image.shape[1]
        return int(round(f_y * h)) + h // 2, int(round(f_x * w))

    def power(self) -> float:
        """Total spectral power, with conjugate-mirror columns counted twice.

        Equals the image's squared Frobenius norm exactly (Parseval), since
        the transform is unitary and the missing half-plane duplicates the
        magnitude of every stored column except f_x = 0 and, for even
        widths, the Nyquist column.
        """
        w = self.image.shape[1]
        p = np.abs(self.values) ** 2
        weights = np.full(p.shape[1], 2.0)
        weights[0] = 1.0
        if w % 2 == 0:
            weights[-1] = 1.0
        return float(p.sum(axis=0) @ weights)


def spectrum(windowed: np.ndarray) -> Spectrum:
    """Unitary half-plane 2D DFT of an (already windowed) real image."""
    img = np.asarray(windowed)
    if img.ndim != 2:
        raise ValueError(f"expected a single-channel image, got shape {img.shape}")
    vals = sfft.fftshift(sfft.rfft2(img, norm="ortho"), axes=0)
    h, w = img.shape
    fx = np.arange(vals.shape[1]) / w
    fy = (np.arange(h) - h // 2) / h
    return Spectrum(values=vals, image=img, fx=fx, fy=fy)


def detect_peaks(
    spec: Spectrum, exclude_dc_radius: float = 12.0, max_peaks: int = 12
) -> list[tuple[int, int]]:
    """Coarse spectral peaks: strict local maxima of the magnitude.

    A bin qualifies when it dominates its 8 neighbors, lies at least
    ``exclude_dc_radius`` bins from DC, and is far enough from the array
    border to support refinement (the f_x = 0 edge needs no margin: the
    conjugate mirror supplies the missing fit samples).  Returns bin
    indices (iy, ix) sorted by decreasing magnitude, at most
    ``max_peaks`` of them.
    """
    mag = np.abs(spec.values)
    h, w_half = mag.shape
    ring = np.ones((3, 3), dtype=bool)
    ring[1, 1] = False
    neighbor_max = ndimage.maximum_filter(mag, footprint=ring, mode="constant", cval=0.0)
    local_max = mag > neighbor_max

    iy, ix = np.nonzero(local_max)
    dy = iy - h // 2
    keep = dy * dy + ix * ix > exclude_dc_radius**2       # away from DC
    keep &= (ix < w_half - _FIT_HALF) & (iy >= _FIT_HALF) & (iy < h - _FIT_HALF)
    iy, ix = iy[keep], ix[keep]
    order = np.argsort(mag[iy, ix])[::-1][:max_peaks]
    return [(int(a), int(b)) for a, b in zip(iy[order], ix[order])]


@dataclass(frozen=True)
class PeakMeasurement:
    """A refined spectral peak: sub-bin frequency plus fit diagnostics."""

    f_x: float
    f_y: float
    log_magnitude: float
    residual: float

    @property
    def magnitude(self) -> float:
        return math.exp(self.log_magnitude)


# Fixed part of the quadratic fit: sample offsets of the 5x5 neighborhood.
_DY, _DX = np.mgrid[-_FIT_HALF:_FIT_HALF + 1, -_FIT_HALF:_FIT_HALF + 1]
_DY_INT = _DY.ravel()
_DX_INT = _DX.ravel()
_DY = _DY_INT.astype(float)
_DX = _DX_INT.astype(float)
_DESIGN = np.column_stack(
    [np.ones_like(_DX), _DX, _DY, _DX**2, _DY**2, _DX * _DY]
)


def _magnitude_patch(spec: Spectrum, iy: int, ix: int) -> np.ndarray:
    """|S| over the 5x5 bin neighborhood, mirroring across the f_x = 0 edge.

    Columns that would fall at negative f_x are read from the stored
    half-plane via |S(-fx, fy)| = |S(fx, -fy)|.
    """
    h = spec.values.shape[0]
    rows = iy + _DY_INT
    cols = ix + _DX_INT
    neg = cols < 0
    if neg.any():
        rows = np.where(neg, (h - rows) % h, rows)
        cols = np.abs(cols)
    return np.abs(spec.values[rows, cols])


def refine_peak(spec: Spectrum, coarse_bin: tuple[int, int]) -> PeakMeasurement:
    """Sub-bin peak location from a quadratic fit to log-magnitude.

    A Gaussian window makes each true peak exactly Gaussian, hence exactly
    quadratic in log-magnitude; the fit vertex is then the unbiased peak
    frequency with no zero-padding.  The least squares is weighted by
    squared magnitude so far-out samples near the noise floor (whose log
    values swing wildly) barely influence the vertex.

    Raises :class:`UnreliablePeakError` when the fitted surface is not
    concave or its vertex falls more than one bin from the coarse maximum
    -- both signs the neighborhood is not a single clean peak.
    """
    iy, ix = coarse_bin
    h, w_half = spec.values.shape
    if not (_FIT_HALF <= iy < h - _FIT_HALF and 0 <= ix < w_half - _FIT_HALF):
        raise UnreliablePeakError(f"peak bin {coarse_bin} too close to the spectrum edge")

    patch = _magnitude_patch(spec, iy, ix)
    top = patch.max()
    if top <= 0:
        raise UnreliablePeakError("empty spectrum patch")
    floor = top * 1e-300
    z = np.log(np.where(patch > 0, patch, floor))
    wgt = (patch / top) ** 2

    gw = _DESIGN * wgt[:, None]
    coef, *_ = np.linalg.lstsq(gw.T @ _DESIGN, gw.T @ z, rcond=None)
    c0, gx, gy, axx, ayy, axy = coef

    det = 4.0 * axx * ayy - axy * axy
    if not (axx < 0 and det > 0):
        raise UnreliablePeakError(
            f"log-magnitude around bin {coarse_bin} is not a concave quadratic"
        )
    vx = (-2.0 * ayy * gx + axy * gy) / det
    vy = (axy * gx - 2.0 * axx * gy) / det
    if abs(vx) > 1.0 or abs(vy) > 1.0:
        raise UnreliablePeakError(
            f"fit vertex ({vx:.2f}, {vy:.2f}) bins from {coarse_bin}; not a local peak"
        )

    fit = _DESIGN @ coef
    residual = float(np.sqrt(np.sum(wgt * (fit - z) ** 2) / np.sum(wgt)))
    log_mag = float(c0 + gx * vx + gy * vy + axx * vx * vx + ayy * vy * vy + axy * vx * vy)
    return PeakMeasurement(
        f_x=(ix + vx) / spec.image.shape[1],
        f_y=(iy + vy - h // 2) / h,
        log_magnitude=log_mag,
        residual=residual,
    )


def _sample_many(spec: Spectrum, f_x: np.ndarray, f_y: np.ndarray) -> np.ndarray:
    """Exact spectral values at arbitrary frequencies by direct summation."""
    img = spec.image
    h, w = img.shape
    f_x = np.asarray(f_x, dtype=float)
    f_y = np.asarray(f_y, dtype=float)
    if np.abs(f_x).max(initial=0) > 0.5 + 1e-12 or np.abs(f_y).max(initial=0) > 0.5 + 1e-12:
        raise ValueError("requested frequency beyond Nyquist (0.5 cycles/sample)")
    cplx = np.complex64 if img.dtype == np.float32 else np.complex128
    px = np.exp(np.arange(w)[None, :] * (-2j * np.pi) * f_x[:, None]).astype(cplx)
    py = np.exp(np.arange(h)[None, :] * (-2j * np.pi) * f_y[:, None]).astype(cplx)
    m = img @ px.T                                                      # (H, K)
    vals = np.einsum("kh,hk->k", py, m).astype(np.complex128)
    return vals / math.sqrt(w * h)


def sample_spectrum_at(spec: Spectrum, f_x: float, f_y: float) -> complex:
    """Spectrum value at an arbitrary (possibly off-grid) frequency.

    Evaluates the discrete-time Fourier sum over the stored windowed image
    with the same unitary normalization as :func:`spectrum`, so an on-grid
    request reproduces the corresponding DFT bin.
    """
    return complex(_sample_many(spec, np.array([f_x]), np.array([f_y]))[0])


def dump_log_magnitude(spec: Spectrum, path) -> None:
    """Write the log-magnitude spectrum as an 8-bit grayscale PNG.

    The stored half-plane is mirror-extended so the image shows the
    familiar full DC-centered spectrum.
    """
    half = np.abs(spec.values)
    w = spec.image.shape[1]
    mirrored = np.roll(half[::-1], 1, axis=0)             # |S(fx, fy)| -> |S(-fx, fy)|
    mag = np.concatenate([mirrored[:, w // 2: 0: -1], half[:, : w - w // 2]], axis=1)
    top = mag.max()
    if top <= 0:
        img = np.zeros(mag.shape, dtype=np.uint8)
    else:
        lm = np.log(mag + top * 1e-12)
        lo, hi = lm.min(), lm.max()
        img = np.round(255.0 * (lm - lo) / (hi - lo)).astype(np.uint8)
    if not cv2.imwrite(str(path), img):
        raise IOError(f"failed to write {path}")

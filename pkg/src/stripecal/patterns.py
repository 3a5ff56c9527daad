"""Panel test patterns: single-channel stripe combs and view interleaving.

The calibration patterns are vertical stripe combs one subpixel wide.  A
comb with period ``beta`` (a multiple of 3) and phase ``epsilon`` lights
exactly the columns x with (x - epsilon) mod beta == 0; because beta is a
multiple of 3 all lit columns share one residue mod 3, i.e. they are all
subpixels of the same color.  Two combs with coprime-over-3 periods can
therefore be multiplexed into one RGB frame without ever colliding.
"""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

from .display import DerivedParams, _view_field
from .errors import ConfigError

__all__ = [
    "PatternSpec",
    "PanelImage",
    "make_stripes",
    "make_calibration_multiplex",
    "interleave_views",
    "DEFAULT_PATTERNS",
]


@dataclass(frozen=True)
class PatternSpec:
    """One stripe comb: period ``beta`` subpixels, phase ``epsilon``, color plane."""

    beta: int
    epsilon: int
    channel: int

    def __post_init__(self):
        if self.beta < 3 or self.beta % 3 != 0:
            raise ConfigError(f"stripe period must be a positive multiple of 3, got {self.beta}")
        if not 0 <= self.epsilon < self.beta:
            raise ConfigError(f"stripe phase must lie in [0, {self.beta}), got {self.epsilon}")
        if self.channel not in (0, 1, 2):
            raise ConfigError(f"channel must be 0, 1 or 2, got {self.channel}")


#: The stripe pair used for calibration: a period-15 comb on the red plane
#: and a period-24, phase-1 comb on the green plane.  Their congruences are
#: insoluble mod 3, so the planes never light the same column.
DEFAULT_PATTERNS = (PatternSpec(15, 0, 0), PatternSpec(24, 1, 1))


@dataclass
class PanelImage:
    """An RGB frame at panel subpixel resolution, (height, width, 3) uint8."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 3 or self.data.shape[2] != 3 or self.data.dtype != np.uint8:
            raise ConfigError(
                f"panel image must be (H, W, 3) uint8, got {self.data.shape} {self.data.dtype}"
            )

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def save_png(self, path) -> None:
        """Write as an ordinary 8-bit RGB PNG."""
        ok = cv2.imwrite(str(path), cv2.cvtColor(self.data, cv2.COLOR_RGB2BGR))
        if not ok:
            raise IOError(f"failed to write {path}")

    @classmethod
    def load_png(cls, path) -> "PanelImage":
        raw = cv2.imread(str(path), cv2.IMREAD_COLOR)
        if raw is None:
            raise IOError(f"failed to read {path}")
        return cls(cv2.cvtColor(raw, cv2.COLOR_BGR2RGB))


def _check_dims(width: int, height: int) -> None:
    if width <= 0 or height <= 0:
        raise ConfigError(f"pattern dimensions must be positive, got {width}x{height}")


def make_stripes(spec: PatternSpec, width: int, height: int) -> PanelImage:
    """Stripe comb frame: full intensity in ``spec.channel`` on the comb
    columns, zero everywhere else."""
    _check_dims(width, height)
    data = np.zeros((height, width, 3), dtype=np.uint8)
    cols = (np.arange(width) - spec.epsilon) % spec.beta == 0
    data[:, cols, spec.channel] = 255
    return PanelImage(data)


def make_calibration_multiplex(
    width: int, height: int, specs: tuple[PatternSpec, ...] = DEFAULT_PATTERNS
) -> PanelImage:
    """Sum of stripe combs on distinct color planes in a single frame.

    The combs must not collide: no column may be lit on two planes, and no
    two specs may share a plane.
    """
    _check_dims(width, height)
    planes = set()
    for s in specs:
        if s.channel in planes:
            raise ConfigError(f"two patterns share channel {s.channel}")
        planes.add(s.channel)
    data = np.zeros((height, width, 3), dtype=np.uint8)
    lit = np.zeros(width, dtype=bool)
    for s in specs:
        cols = (np.arange(width) - s.epsilon) % s.beta == 0
        if (cols & lit).any():
            raise ConfigError(
                f"stripe pattern {s} collides with another pattern on a shared column"
            )
        lit |= cols
        data[:, cols, s.channel] = 255
    return PanelImage(data)


def interleave_views(view_images: list[np.ndarray], render: DerivedParams) -> PanelImage:
    """Assign each subpixel the content of one view image.

    Subpixel (x, y) -- corner-indexed -- gets its value from view image
    ``floor(gamma * N)`` where gamma is the view coordinate under the
    ``render`` line family and N = len(view_images).  Bins are half-open
    [k/N, (k+1)/N), so a coordinate exactly on an edge joins the bin that
    starts there.  ``render.rho`` must therefore be given in the corner
    index frame.

    All view images must be (panel_h, panel_w, 3) uint8 of equal shape.
    """
    if not view_images:
        raise ConfigError("need at least one view image")
    stack = np.stack([np.asarray(v) for v in view_images])
    if stack.ndim != 4 or stack.shape[3] != 3 or stack.dtype != np.uint8:
        raise ConfigError("view images must be equally sized (H, W, 3) uint8 arrays")
    n_views, height, width = stack.shape[:3]
    ys, xs = np.mgrid[0:height, 0:width]
    gamma = _view_field(xs, ys, render)
    idx = np.minimum((gamma * n_views).astype(np.int64), n_views - 1)
    return PanelImage(stack[idx, ys, xs, :])

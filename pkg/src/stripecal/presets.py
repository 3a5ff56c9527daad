"""Built-in virtual displays.

Each preset pairs designed optics (pitch, slant, gap, offset) with panel
geometry derived from the display's diagonal size and pixel resolution:
for an aspect ratio w:h, panel width is diagonal * w / sqrt(w^2 + h^2),
the subpixel pitch q is width over (3 * horizontal pixels), and rows are
square pixels (row_pitch = 3 q).
"""

from __future__ import annotations

import math

from .display import DisplayParams
from .errors import ConfigError

__all__ = ["PRESETS", "preset", "preset_names", "make_display"]

_INCH_MM = 25.4


def make_display(
    diagonal_in: float,
    pixels_w: int,
    pixels_h: int,
    aspect: tuple[int, int],
    p: float,
    alpha_deg: float,
    t: float,
    sigma: float,
) -> DisplayParams:
    """Display from marketing-style specs: diagonal inches plus pixel grid."""
    aw, ah = aspect
    width_mm = diagonal_in * _INCH_MM * aw / math.hypot(aw, ah)
    q = width_mm / (3 * pixels_w)
    return DisplayParams.from_design(
        p=p, alpha_deg=alpha_deg, t=t, sigma=sigma,
        panel_w=3 * pixels_w, panel_h=pixels_h,
        q=q, row_pitch=3 * q,
    )


PRESETS: dict[str, DisplayParams] = {
    "FHD55B": make_display(55.0, 1920, 1080, (16, 9), p=1.0, alpha_deg=18.0,
                           t=4.0, sigma=0.5),
    "UHD32B": make_display(32.0, 3840, 2160, (16, 9), p=0.5, alpha_deg=10.0,
                           t=2.0, sigma=0.2),
    "WQXGA10L": make_display(10.0, 2560, 1600, (16, 10), p=0.1, alpha_deg=12.0,
                             t=1.0, sigma=0.05),
}


def preset_names() -> list[str]:
    return sorted(PRESETS)


def preset(name: str) -> DisplayParams:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown display preset {name!r}; choose from {preset_names()}"
        ) from None

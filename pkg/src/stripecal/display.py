"""Geometry of slanted-optic 3D displays and their view assignment.

A display is an emissive panel (a grid of single-color subpixel columns)
with a slanted selector optic -- a parallax barrier or lenticular sheet --
mounted a small distance in front of it.  The optic passes light only
along a family of parallel slanted lines, so which panel positions a
camera sees depends on where the camera stands.  Everything in this
package reduces to four physical numbers:

    p      line pitch of the optic, mm, measured perpendicular to the lines
    alpha  slant angle of the lines from vertical, radians (stored), > 0
    t      optical gap between panel plane and optic plane, mm
    sigma  horizontal shift of the line family at panel center height, mm

Coordinate conventions, used consistently by every module:

* Panel index frame: ``x`` counts subpixel columns, ``y`` counts rows,
  both from the top-left subpixel (0, 0).  One column is ``q`` mm wide,
  one row is ``row_pitch`` mm tall.
* Centered frame: mm, origin at the panel center, x to the right and
  y downward (same direction as increasing row index).
* A camera sits at (u, v, d) mm in the centered frame, d > t, on the
  viewer side.  v is downward-positive like y.

Because x is measured in subpixel columns but y in rows, the geometric
slope tan(alpha) becomes ``tan(alpha) * row_pitch / q`` subpixels per row
whenever the two axes meet in one expression.  ``DerivedParams`` carries
that ratio (``y_scale``) so formulas can be evaluated in the index frame.

From the camera's position the visible panel positions form lines

    x = y * tan(alpha) + rho + (n + gamma) * h        (centered frame, mm)

where h is the pitch of the visible-line family magnified by the gap,
rho the magnified offset, and gamma in [0, 1) the fractional line phase
("view coordinate") of the camera position.  ``derive`` computes h and
rho, ``view_of_position`` computes gamma, and ``view_of_pixel`` inverts
the line equation to assign a view coordinate to each panel subpixel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateLatticeError, GeometryError

__all__ = [
    "PanelGeometry",
    "DisplayParams",
    "DerivedParams",
    "View",
    "LatticeModel",
    "derive",
    "view_of_position",
    "view_of_pixel",
    "predict_lattice",
    "check_rendering_correct",
    "wrap_half",
]

#: Default tolerance for geometric comparisons (subpixel / radian scale).
GEOMETRY_TOL = 1e-9


def wrap_half(value: float, period: float) -> float:
    """Fold ``value`` into the half-open interval (-period/2, period/2]."""
    if period <= 0:
        raise ValueError(f"period must be positive, got {period}")
    folded = value - period * math.ceil(value / period - 0.5)
    return folded


# -- Panel and display parameter bundles -------------------------------------


@dataclass(frozen=True)
class PanelGeometry:
    """Fixed, known geometry of the emissive panel itself.

    The panel is never what is being calibrated; its subpixel grid is a
    datasheet quantity.  Estimation routines receive one of these so they
    can convert between the index frame and millimetres.
    """

    panel_w: int          # width in subpixel columns (3x the pixel count)
    panel_h: int          # height in rows
    q: float              # subpixel column width, mm
    row_pitch: float      # row height, mm

    def __post_init__(self):
        if self.panel_w <= 0 or self.panel_h <= 0:
            raise GeometryError(
                f"panel resolution must be positive, got {self.panel_w}x{self.panel_h}"
            )
        if self.panel_w % 3 != 0:
            raise GeometryError(
                f"panel width must be a whole number of RGB pixels, got {self.panel_w}"
            )
        if self.q <= 0 or self.row_pitch <= 0:
            raise GeometryError("subpixel pitch and row pitch must be positive")

    @property
    def width_mm(self) -> float:
        return self.panel_w * self.q

    @property
    def height_mm(self) -> float:
        return self.panel_h * self.row_pitch

    @property
    def center_x(self) -> float:
        """Column index of the panel center (subpixel centers at integers)."""
        return (self.panel_w - 1) / 2.0

    @property
    def center_y(self) -> float:
        return (self.panel_h - 1) / 2.0

    @property
    def y_scale(self) -> float:
        """Rows-to-columns unit ratio: multiply a row count by this to get
        the equivalent horizontal extent in subpixel columns."""
        return self.row_pitch / self.q

    def corners_mm(self) -> np.ndarray:
        """Panel outline corners in the centered frame, mm, ordered
        top-left, top-right, bottom-right, bottom-left."""
        hw, hh = self.width_mm / 2.0, self.height_mm / 2.0
        return np.array(
            [[-hw, -hh], [hw, -hh], [hw, hh], [-hw, hh]], dtype=float
        )

    def index_to_mm(self, x, y):
        """Map index-frame coordinates to centered mm coordinates."""
        xs = (np.asarray(x, dtype=float) - self.center_x) * self.q
        ys = (np.asarray(y, dtype=float) - self.center_y) * self.row_pitch
        return xs, ys

    def mm_to_index(self, x_mm, y_mm):
        xs = np.asarray(x_mm, dtype=float) / self.q + self.center_x
        ys = np.asarray(y_mm, dtype=float) / self.row_pitch + self.center_y
        return xs, ys


@dataclass(frozen=True)
class DisplayParams:
    """The four optical parameters plus the known panel geometry.

    ``alpha`` is stored in radians; use :meth:`from_design` to construct
    from degrees.  ``sigma`` is folded into (-p, p) on construction since
    offsets a full pitch apart describe the same optic.
    """

    p: float
    alpha: float
    t: float
    sigma: float
    panel_w: int
    panel_h: int
    q: float
    row_pitch: float

    def __post_init__(self):
        if self.p <= 0:
            raise GeometryError(f"pitch must be positive, got {self.p}")
        if not 0 < self.alpha < math.pi / 2:
            raise GeometryError(
                f"slant angle must lie in (0, 90) degrees, got {math.degrees(self.alpha)}"
            )
        if self.t < 0:
            raise GeometryError(f"gap must be non-negative, got {self.t}")
        # Validates resolution/pitch fields as a side effect.
        PanelGeometry(self.panel_w, self.panel_h, self.q, self.row_pitch)
        if abs(self.sigma) >= self.p:
            object.__setattr__(self, "sigma", math.fmod(self.sigma, self.p))

    @classmethod
    def from_design(
        cls,
        p: float,
        alpha_deg: float,
        t: float,
        sigma: float,
        panel_w: int,
        panel_h: int,
        q: float,
        row_pitch: float,
    ) -> "DisplayParams":
        return cls(p, math.radians(alpha_deg), t, sigma, panel_w, panel_h, q, row_pitch)

    @property
    def alpha_deg(self) -> float:
        return math.degrees(self.alpha)

    @property
    def geometry(self) -> PanelGeometry:
        return PanelGeometry(self.panel_w, self.panel_h, self.q, self.row_pitch)


@dataclass(frozen=True)
class View:
    """A view coordinate: fractional phase across one visible-line period."""

    gamma: float

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise GeometryError(f"view coordinate must lie in [0, 1), got {self.gamma}")


@dataclass(frozen=True)
class DerivedParams:
    """Visible-line family seen from distance ``d``, in panel subpixel units.

    ``h`` is the horizontal spacing between adjacent visible lines and
    ``rho`` their horizontal offset; both are in subpixel columns.  The
    frame of ``rho`` is whatever the caller works in -- ``derive`` fills
    in the centered frame, while rendering code uses the index frame.
    ``y_scale`` reconciles the row/column unit mismatch (see module doc).
    """

    h: float
    alpha: float
    rho: float
    d: float
    y_scale: float = 1.0

    def __post_init__(self):
        if self.h <= 0:
            raise GeometryError(f"line spacing must be positive, got {self.h}")
        if not 0.0 <= self.rho < self.h:
            object.__setattr__(self, "rho", self.rho % self.h)

    @property
    def slope(self) -> float:
        """Subpixel columns advanced per row along a visible line."""
        return math.tan(self.alpha) * self.y_scale


# -- Derivation of the visible-line family -----------------------------------


def derive(params: DisplayParams, d: float) -> DerivedParams:
    """Visible-line spacing and offset for a camera at distance ``d`` mm.

    Projecting the optic's line family from the camera center onto the
    panel plane magnifies it by d / (d - t):

        h   = d / (d - t) * p / cos(alpha)
        rho = d / (d - t) * sigma

    Both are converted to subpixel columns.  ``rho`` is in the centered
    frame and normalized into [0, h).
    """
    if d <= params.t:
        raise GeometryError(f"camera distance {d} must exceed the gap {params.t}")
    mag = d / (d - params.t)
    h = mag * params.p / math.cos(params.alpha) / params.q
    rho = mag * params.sigma / params.q
    return DerivedParams(
        h=h, alpha=params.alpha, rho=rho % h, d=d,
        y_scale=params.row_pitch / params.q,
    )


def view_of_position(u: float, v: float, d: float, params: DisplayParams) -> View:
    """View coordinate of a camera at (u, v, d) mm in the centered frame.

    gamma = (t / (p d)) * (v sin(alpha) - u cos(alpha)) mod 1.  Moving the
    camera along the line direction leaves gamma unchanged; moving it
    perpendicular by p d / t sweeps one full period.
    """
    if d <= params.t:
        raise GeometryError(f"camera distance {d} must exceed the gap {params.t}")
    gamma = (params.t / (params.p * d)) * (
        v * math.sin(params.alpha) - u * math.cos(params.alpha)
    )
    return View(gamma % 1.0)


def view_of_pixel(x: float, y: float, derived: DerivedParams) -> View:
    """View coordinate of panel position ``x`` (columns), ``y`` (rows).

    gamma = ((x - rho - y * slope) mod h) / h with slope in subpixels per
    row.  The coordinates must be in the same frame as ``derived.rho``.
    """
    return View(float(_view_field(x, y, derived)))


def _view_field(x, y, derived: DerivedParams) -> np.ndarray:
    """Vectorized core of :func:`view_of_pixel`; returns gamma in [0, 1)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    phase = (x - derived.rho - y * derived.slope) % derived.h
    gamma = phase / derived.h
    # Guard the half-open range against rounding at the period boundary.
    return np.where(gamma >= 1.0, 0.0, gamma)


def rho_centered_to_index(rho: float, derived: DerivedParams, geom: PanelGeometry) -> float:
    """Re-express a centered-frame line offset in the corner index frame."""
    rho_idx = rho + geom.center_x - geom.center_y * derived.slope
    return rho_idx % derived.h


def rho_index_to_centered(rho_idx: float, h: float, slope: float, geom: PanelGeometry) -> float:
    """Inverse of :func:`rho_centered_to_index`."""
    rho = rho_idx - geom.center_x + geom.center_y * slope
    return rho % h


# -- Mismatch lattice between rendered and actual line families --------------


@dataclass(frozen=True)
class LatticeModel:
    """Two line families on the panel and the phases selecting one line each.

    ``actual`` is the family the optic makes visible (phase ``gamma``);
    ``render`` is the family the panel content was striped along (phase
    ``gamma_prime``).  Both must be expressed in one homogeneous frame:
    x and y in the same units, slopes given by tan of the stored angles
    times ``y_scale``.
    """

    actual: DerivedParams
    render: DerivedParams
    gamma: float = 0.0
    gamma_prime: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.gamma < 1.0 and 0.0 <= self.gamma_prime < 1.0):
            raise GeometryError("line phases must lie in [0, 1)")


def predict_lattice(model: LatticeModel, region: tuple[float, float, float, float]) -> np.ndarray:
    """Intersection points of the two line families inside a rectangle.

    When the rendered stripes do not run parallel to the visible lines,
    a camera sees one bright point wherever a lit stripe crosses a
    visible line; those points form a 2D lattice.  ``region`` is
    (x_min, y_min, x_max, y_max).  Returns an (N, 2) array of (x, y)
    points sorted lexicographically, empty if none fall inside.

    Raises :class:`DegenerateLatticeError` when the families are parallel
    (equal slopes): the intersections then degenerate to whole lines.
    """
    act, ren = model.actual, model.render
    g, g_r = act.slope, ren.slope
    if abs(g - g_r) <= GEOMETRY_TOL * max(1.0, abs(g), abs(g_r)):
        raise DegenerateLatticeError(
            f"line families are parallel (slope {g} vs {g_r}); no point lattice forms"
        )
    x0, y0, x1, y1 = region
    if not (x1 > x0 and y1 > y0):
        raise GeometryError(f"empty lattice region {region}")

    # Intercepts of each family: x = slope * y + a_n with a_n = rho + (n+phase)*h.
    # Bound the intercept ranges by evaluating x - slope*y at the region corners.
    corners_x = np.array([x0, x0, x1, x1])
    corners_y = np.array([y0, y1, y0, y1])

    def index_range(slope, rho, phase, h):
        a = corners_x - slope * corners_y
        lo = (a.min() - rho) / h - phase
        hi = (a.max() - rho) / h - phase
        return np.arange(math.floor(lo) - 1, math.ceil(hi) + 2)

    n_vals = index_range(g, act.rho, model.gamma, act.h)
    m_vals = index_range(g_r, ren.rho, model.gamma_prime, ren.h)
    a_n = act.rho + (n_vals + model.gamma) * act.h        # visible-line intercepts
    b_m = ren.rho + (m_vals + model.gamma_prime) * ren.h  # stripe-line intercepts

    yy = (b_m[None, :] - a_n[:, None]) / (g - g_r)
    xx = g * yy + a_n[:, None]
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    keep = (
        (pts[:, 0] >= x0) & (pts[:, 0] <= x1) & (pts[:, 1] >= y0) & (pts[:, 1] <= y1)
    )
    pts = pts[keep]
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    return pts[order]


def check_rendering_correct(
    actual: DerivedParams, render: DerivedParams, tol: float = GEOMETRY_TOL
) -> bool:
    """True iff the rendered family equals the visible family within ``tol``.

    Offsets are compared circularly modulo the line spacing, so a rendered
    offset shifted by a whole number of periods still counts as correct
    (the two describe identical line sets).
    """
    if abs(actual.h - render.h) > tol:
        return False
    if abs(actual.alpha - render.alpha) > tol:
        return False
    if abs(actual.y_scale - render.y_scale) > tol * max(1.0, abs(actual.y_scale)):
        return False
    return abs(wrap_half(actual.rho - render.rho, actual.h)) <= tol

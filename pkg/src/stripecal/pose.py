"""Pinhole camera model, plane homographies, pose recovery, rectification.

World frame (shared with :mod:`stripecal.display`): x right, y down, z
pointing from the viewer into the panel, origin at the panel center, mm.
The panel lies in the plane z = 0; a camera in front of it sits at
C = (u, v, -d) with d > 0 and looks roughly along +z.  Camera axes follow
the usual computer-vision convention (x right, y down, z forward), so a
head-on view has R = I and extrinsic translation (-u, -v, d).

Pixel coordinates are zero-based with integer values at pixel centers.
Intrinsics are skew-free with square-pixel focal lengths given per axis;
radial distortion is assumed corrected upstream and is not modelled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import cv2
import numpy as np

from .errors import CornerError, GeometryError, SingularHomographyError

__all__ = [
    "Intrinsics",
    "CameraPose",
    "Homography",
    "homography_from_corners",
    "decompose",
    "project_points",
    "rectify",
]

_ORTHONORMAL_TOL = 1e-6


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics plus sensor resolution."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise GeometryError(f"focal lengths must be positive, got {self.fx}, {self.fy}")
        if self.width <= 0 or self.height <= 0:
            raise GeometryError(f"sensor size must be positive, got {self.width}x{self.height}")

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


@dataclass(frozen=True)
class CameraPose:
    """World-to-camera rigid transform with intrinsics attached.

    ``rotation`` maps world vectors into camera axes; ``translation`` is
    the camera-frame position of the world origin, x_cam = R x_world + t.
    """

    rotation: np.ndarray
    translation: np.ndarray
    intrinsics: Intrinsics

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)
        if R.shape != (3, 3):
            raise GeometryError(f"rotation must be 3x3, got {R.shape}")
        if np.abs(R @ R.T - np.eye(3)).max() > _ORTHONORMAL_TOL:
            raise GeometryError("rotation matrix is not orthonormal")
        if np.linalg.det(R) < 0:
            raise GeometryError("rotation matrix must be proper (det +1)")
        if self.d <= 0:
            raise GeometryError("camera must sit on the viewer side of the panel (d > 0)")

    @property
    def position(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    @property
    def u(self) -> float:
        return float(self.position[0])

    @property
    def v(self) -> float:
        return float(self.position[1])

    @property
    def d(self) -> float:
        """Perpendicular distance from the panel plane, mm."""
        return float(-self.position[2])

    @classmethod
    def frontal(cls, u: float, v: float, d: float, intrinsics: Intrinsics) -> "CameraPose":
        """Axis-aligned pose at (u, v, d) looking straight at the panel."""
        return cls(np.eye(3), np.array([-u, -v, d], dtype=float), intrinsics)

    @classmethod
    def looking_at(
        cls,
        position_uvd: tuple[float, float, float],
        intrinsics: Intrinsics,
        target_mm: tuple[float, float] = (0.0, 0.0),
        extra_rotation: np.ndarray | None = None,
    ) -> "CameraPose":
        """Pose at (u, v, d) aimed at a point on the panel plane.

        The camera keeps image-up aligned with world-up (no roll); an
        optional ``extra_rotation`` (3x3, e.g. a small jitter) is applied
        on top in the camera frame.
        """
        u, v, d = position_uvd
        center = np.array([u, v, -d], dtype=float)
        forward = np.array([target_mm[0], target_mm[1], 0.0]) - center
        norm = np.linalg.norm(forward)
        if norm <= 0 or forward[2] <= 0:
            raise GeometryError("camera must look toward the panel plane")
        z_cam = forward / norm
        x_cam = np.cross([0.0, 1.0, 0.0], z_cam)
        x_cam /= np.linalg.norm(x_cam)
        y_cam = np.cross(z_cam, x_cam)
        R = np.stack([x_cam, y_cam, z_cam])
        if extra_rotation is not None:
            R = np.asarray(extra_rotation, dtype=float) @ R
        return cls(R, -R @ center, intrinsics)


def project_points(pose: CameraPose, points: np.ndarray) -> np.ndarray:
    """Project world points, (N, 2) on the panel plane or (N, 3), to pixels."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] not in (2, 3):
        raise GeometryError(f"points must be (N, 2) or (N, 3), got {pts.shape}")
    if pts.shape[1] == 2:
        pts = np.column_stack([pts, np.zeros(len(pts))])
    cam = pts @ pose.rotation.T + pose.translation
    if (cam[:, 2] <= 0).any():
        raise GeometryError("point behind the camera")
    K = pose.intrinsics
    return np.column_stack(
        [K.fx * cam[:, 0] / cam[:, 2] + K.cx, K.fy * cam[:, 1] / cam[:, 2] + K.cy]
    )


# -- Homographies -------------------------------------------------------------


@dataclass(frozen=True)
class Homography:
    """A 3x3 projective map, scaled so the bottom-right entry is 1."""

    matrix: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=float)
        if M.shape != (3, 3):
            raise SingularHomographyError(f"homography must be 3x3, got {M.shape}")
        s = np.linalg.svd(M, compute_uv=False)
        if s[0] <= 0 or s[2] / s[0] < 1e-12:
            raise SingularHomographyError("homography matrix is rank deficient")
        if abs(M[2, 2]) > 1e-12 * s[0]:
            M = M / M[2, 2]
        object.__setattr__(self, "matrix", M)

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        squeeze = pts.ndim == 1
        pts = np.atleast_2d(pts)
        hom = np.column_stack([pts, np.ones(len(pts))]) @ self.matrix.T
        out = hom[:, :2] / hom[:, 2:3]
        return out[0] if squeeze else out

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.matrix))


def _normalization(points: np.ndarray) -> np.ndarray:
    """Similarity transform taking points to zero mean, sqrt(2) RMS radius."""
    mean = points.mean(axis=0)
    rms = np.sqrt(((points - mean) ** 2).sum(axis=1).mean())
    if rms <= 0:
        raise SingularHomographyError("degenerate point set (all points coincide)")
    s = math.sqrt(2.0) / rms
    return np.array([[s, 0, -s * mean[0]], [0, s, -s * mean[1]], [0, 0, 1.0]])


def _any_three_collinear(points: np.ndarray, tol: float = 1e-9) -> bool:
    scale = np.abs(points).max() + 1.0
    for i in range(4):
        a, b, c = np.delete(points, i, axis=0)
        area = abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
        if area < tol * scale * scale:
            return True
    return False


def homography_from_corners(world: np.ndarray, image: np.ndarray) -> Homography:
    """Direct linear transform from exactly four point correspondences.

    ``world`` holds plane coordinates (mm or any planar frame), ``image``
    pixel coordinates, both (4, 2) in matching order.  Four points give
    eight constraints for the eight degrees of freedom, so the returned
    homography reproduces the correspondences to machine precision.  Both
    point sets are Hartley-normalized before the solve for conditioning.
    """
    w = np.asarray(world, dtype=float)
    im = np.asarray(image, dtype=float)
    if w.shape != (4, 2) or im.shape != (4, 2):
        raise SingularHomographyError(
            f"need four 2D correspondences, got {w.shape} vs {im.shape}"
        )
    if _any_three_collinear(w) or _any_three_collinear(im):
        raise SingularHomographyError("three of the four corners are collinear")

    Tw, Ti = _normalization(w), _normalization(im)
    wn = np.column_stack([w, np.ones(4)]) @ Tw.T
    imn = np.column_stack([im, np.ones(4)]) @ Ti.T

    A = np.zeros((8, 9))
    for k in range(4):
        X, Y = wn[k, 0], wn[k, 1]
        x, y = imn[k, 0], imn[k, 1]
        A[2 * k] = [-X, -Y, -1, 0, 0, 0, x * X, x * Y, x]
        A[2 * k + 1] = [0, 0, 0, -X, -Y, -1, y * X, y * Y, y]
    _, _, Vt = np.linalg.svd(A)
    Hn = Vt[-1].reshape(3, 3)
    H = np.linalg.inv(Ti) @ Hn @ Tw
    return Homography(H)


def decompose(H: Homography, intrinsics: Intrinsics) -> CameraPose:
    """Recover the camera pose from a panel-plane-to-image homography.

    With world points (X, Y, 0), the homography equals K [r1 r2 t] up to
    scale.  The scale is fixed by forcing |r1| = 1, the sign by requiring
    the camera to sit on the viewer side (d > 0), r3 = r1 x r2, and the
    result is re-orthonormalized by projecting onto the nearest rotation
    (SVD).  The translation column then comes out directly in mm.
    """
    M = np.linalg.inv(intrinsics.matrix) @ H.matrix
    n1 = np.linalg.norm(M[:, 0])
    if n1 < 1e-12:
        raise SingularHomographyError("homography collapses the horizontal axis")
    M = M / n1
    r1, r2, t = M[:, 0], M[:, 1], M[:, 2]
    R = np.stack([r1, r2, np.cross(r1, r2)], axis=1)
    U, _, Vt = np.linalg.svd(R)
    R = U @ np.diag([1.0, 1.0, np.linalg.det(U @ Vt)]) @ Vt
    # d > 0 <=> world origin in front of the camera with a front-side center;
    # the homography sign is free, so flip if the first try faces backward.
    if (R.T @ t)[2] <= 0:
        t = -t
        R = np.stack([-M[:, 0], -M[:, 1], np.cross(-M[:, 0], -M[:, 1])], axis=1)
        U, _, Vt = np.linalg.svd(R)
        R = U @ np.diag([1.0, 1.0, np.linalg.det(U @ Vt)]) @ Vt
    return CameraPose(R, t, intrinsics)


# -- Rectification ------------------------------------------------------------

#: Panel-corner positions in the rectified index frame.  Subpixel centers sit
#: at integer coordinates, so the physical panel outline passes half a sample
#: outside the first and last centers.
def _rect_corners(panel_w: int, panel_h: int) -> np.ndarray:
    return np.array(
        [
            [-0.5, -0.5],
            [panel_w - 0.5, -0.5],
            [panel_w - 0.5, panel_h - 0.5],
            [-0.5, panel_h - 0.5],
        ]
    )


def rectify(
    image: np.ndarray,
    corners: np.ndarray,
    panel_w: int,
    panel_h: int,
    flip: bool = False,
    channels: tuple[int, ...] | None = None,
) -> np.ndarray:
    """Inverse-warp a capture onto the panel subpixel grid.

    ``corners`` are the pixel positions of the panel outline corners in
    the capture, ordered top-left, top-right, bottom-right, bottom-left.
    Output pixel (row j, column i) is the bilinear sample of the capture
    at the projection of panel subpixel (i, j), so the rectified image is
    (panel_h, panel_w, C) float32 regardless of the capture resolution.

    ``flip`` mirrors the capture horizontally first (for captures taken
    via a mirror); the corner coordinates still refer to the unflipped
    image.  ``channels`` restricts the warp to a subset of color planes
    (the full plane set is returned zero-filled elsewhere).
    """
    img = np.asarray(image)
    if img.ndim == 2:
        img = img[:, :, None]
    height, width = img.shape[:2]
    pts = np.asarray(corners, dtype=float)
    if pts.shape != (4, 2):
        raise CornerError(f"need four corners, got shape {pts.shape}")
    inside = (
        (pts[:, 0] >= -0.5) & (pts[:, 0] <= width - 0.5)
        & (pts[:, 1] >= -0.5) & (pts[:, 1] <= height - 0.5)
    )
    if not inside.all():
        raise CornerError(f"corner(s) outside the {width}x{height} capture: {pts[~inside]}")
    if flip:
        img = img[:, ::-1]
        pts = pts.copy()
        pts[:, 0] = (width - 1) - pts[:, 0]

    H = homography_from_corners(_rect_corners(panel_w, panel_h), pts)
    M = H.matrix
    xg = np.arange(panel_w, dtype=np.float64)[None, :]
    yg = np.arange(panel_h, dtype=np.float64)[:, None]
    den = M[2, 0] * xg + (M[2, 1] * yg + M[2, 2])
    map_x = ((M[0, 0] * xg + (M[0, 1] * yg + M[0, 2])) / den).astype(np.float32)
    map_y = ((M[1, 0] * xg + (M[1, 1] * yg + M[1, 2])) / den).astype(np.float32)

    n_ch = img.shape[2]
    out = np.zeros((panel_h, panel_w, n_ch), dtype=np.float32)
    for c in range(n_ch) if channels is None else channels:
        out[:, :, c] = cv2.remap(
            np.ascontiguousarray(img[:, :, c], dtype=np.float32),
            map_x, map_y, cv2.INTER_LINEAR,
            borderMode=cv2.BORDER_CONSTANT, borderValue=0.0,
        )
    return out

"""Coordinate frames and 2D homogeneous transforms for content-relative gaze.

Three frames are involved:

* screen: absolute display pixels, origin top-left, y down. Normalized gaze
  (xn, yn) scales to screen pixels by the display size.
* viewport: the image widget's local frame, origin at the widget's top-left
  corner on screen.
* intrinsic: pixel coordinates of the source image at native resolution.

User manipulation (uniform scale, rotation, translation) acts in the viewport
frame and pivots at the widget center (wd/2, hd/2). Positive rotation is
clockwise on screen because the y axis points down. Recovering where on the
source image a screen gaze landed means undoing that manipulation with the
inverse transform and then rescaling displayed pixels to intrinsic pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

DET_EPSILON = 1e-12


class GeometryError(ValueError):
    """Invalid geometry or transform input."""


class InvalidSampleError(GeometryError):
    """Gaze sample coordinates are not finite numbers."""


class DegenerateScaleError(GeometryError):
    """Transform scale factor is zero or negative."""


class SingularTransformError(GeometryError):
    """Transform matrix cannot be inverted; the sample should be discarded."""


@dataclass(frozen=True, slots=True)
class HomPoint:
    """2D point in homogeneous coordinates; w stays 1 across the public API."""

    x: float
    y: float
    w: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidSampleError(f"non-finite point ({self.x}, {self.y})")
        if self.w != 1.0:
            raise GeometryError(f"homogeneous coordinate must be 1, got {self.w}")

    def xy(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True, slots=True)
class TransformState:
    """One logged UI manipulation state.

    s is the uniform scale factor, theta the rotation in radians (clockwise
    positive in the y-down screen convention), (tx, ty) the user translation
    in viewport pixels, and t the Unix timestamp in milliseconds.
    """

    s: float
    theta: float
    tx: float
    ty: float
    t: int

    def __post_init__(self):
        if not (math.isfinite(self.s) and self.s > 0):
            raise DegenerateScaleError(f"scale must be positive, got {self.s}")
        if not math.isfinite(self.theta):
            raise GeometryError(f"non-finite rotation {self.theta}")
        if not (math.isfinite(self.tx) and math.isfinite(self.ty)):
            raise GeometryError(f"non-finite translation ({self.tx}, {self.ty})")
        if self.t < 0:
            raise GeometryError(f"negative timestamp {self.t}")


@dataclass(frozen=True, slots=True)
class ViewportGeometry:
    """Static screen/widget/image dimensions binding the three frames.

    W, H: display size in pixels. (ox, oy): widget top-left on screen.
    (wd, hd): displayed image size inside the widget. (wi, hi): intrinsic
    (native) image size.
    """

    W: float
    H: float
    ox: float
    oy: float
    wd: float
    hd: float
    wi: float
    hi: float

    def __post_init__(self):
        for name in ("W", "H", "wd", "hd", "wi", "hi"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise GeometryError(f"{name} must be positive and finite, got {v}")
        if not (0 <= self.ox < self.W and 0 <= self.oy < self.H):
            raise GeometryError(
                f"widget origin ({self.ox}, {self.oy}) outside display {self.W}x{self.H}"
            )

    @property
    def cx(self) -> float:
        """Widget-center pivot x in screen pixels."""
        return self.ox + self.wd / 2.0

    @property
    def cy(self) -> float:
        """Widget-center pivot y in screen pixels."""
        return self.oy + self.hd / 2.0


@dataclass(frozen=True, slots=True)
class Mat3:
    """Row-major 3x3 matrix with the bottom row pinned to (0, 0, 1)."""

    m00: float
    m01: float
    m02: float
    m10: float
    m11: float
    m12: float
    m20: float = 0.0
    m21: float = 0.0
    m22: float = 1.0

    def __post_init__(self):
        if (self.m20, self.m21, self.m22) != (0.0, 0.0, 1.0):
            raise GeometryError("bottom row must be (0, 0, 1)")

    @classmethod
    def identity(cls) -> "Mat3":
        return cls(1.0, 0.0, 0.0, 0.0, 1.0, 0.0)

    @classmethod
    def translation(cls, tx: float, ty: float) -> "Mat3":
        return cls(1.0, 0.0, tx, 0.0, 1.0, ty)

    @classmethod
    def rotation(cls, theta: float) -> "Mat3":
        c = math.cos(theta)
        s = math.sin(theta)
        return cls(c, -s, 0.0, s, c, 0.0)

    @classmethod
    def scaling(cls, s: float) -> "Mat3":
        return cls(s, 0.0, 0.0, 0.0, s, 0.0)

    def __matmul__(self, other: "Mat3") -> "Mat3":
        # Both operands are affine (bottom row (0,0,1)), so the product is too.
        return Mat3(
            self.m00 * other.m00 + self.m01 * other.m10,
            self.m00 * other.m01 + self.m01 * other.m11,
            self.m00 * other.m02 + self.m01 * other.m12 + self.m02,
            self.m10 * other.m00 + self.m11 * other.m10,
            self.m10 * other.m01 + self.m11 * other.m11,
            self.m10 * other.m02 + self.m11 * other.m12 + self.m12,
        )

    def apply(self, p: HomPoint) -> HomPoint:
        return HomPoint(
            self.m00 * p.x + self.m01 * p.y + self.m02,
            self.m10 * p.x + self.m11 * p.y + self.m12,
        )

    def det2(self) -> float:
        """Determinant of the upper-left 2x2 block."""
        return self.m00 * self.m11 - self.m01 * self.m10

    def rows(self) -> tuple[tuple[float, float, float], ...]:
        return (
            (self.m00, self.m01, self.m02),
            (self.m10, self.m11, self.m12),
            (self.m20, self.m21, self.m22),
        )


def screen_from_normalized(xn: float, yn: float, geom: ViewportGeometry) -> HomPoint:
    """Scale normalized gaze to absolute screen pixels (xn*W, yn*H, 1).

    Values outside [0, 1] are allowed; they mark the sample off-screen
    downstream rather than erroring here.
    """
    if not (math.isfinite(xn) and math.isfinite(yn)):
        raise InvalidSampleError(f"non-finite normalized gaze ({xn}, {yn})")
    return HomPoint(xn * geom.W, yn * geom.H)


def viewport_from_screen(p: HomPoint, geom: ViewportGeometry) -> HomPoint:
    """Shift a screen point into the widget-local frame."""
    return HomPoint(p.x - geom.ox, p.y - geom.oy)


def screen_from_viewport(p: HomPoint, geom: ViewportGeometry) -> HomPoint:
    return HomPoint(p.x + geom.ox, p.y + geom.oy)


def intrinsic_from_displayed(p: HomPoint, geom: ViewportGeometry) -> HomPoint:
    """Rescale displayed-image pixels to native image resolution."""
    return HomPoint(p.x * geom.wi / geom.wd, p.y * geom.hi / geom.hd)


def displayed_from_intrinsic(p: HomPoint, geom: ViewportGeometry) -> HomPoint:
    return HomPoint(p.x * geom.wd / geom.wi, p.y * geom.hd / geom.hi)


def normalized_from_screen(p: HomPoint, geom: ViewportGeometry) -> tuple[float, float]:
    return (p.x / geom.W, p.y / geom.H)


def compose_transform(st: TransformState, geom: ViewportGeometry) -> Mat3:
    """Build the viewport-frame manipulation matrix for a transform state.

    Rotation and scaling pivot at the widget center c = (wd/2, hd/2), then the
    user translation applies on top:

        M = T(tx, ty) @ T(c) @ R(theta) @ S(s) @ T(-c)

    The matrix maps un-manipulated displayed-image coordinates to where that
    content currently sits in the viewport.
    """
    cx = geom.wd / 2.0
    cy = geom.hd / 2.0
    return (
        Mat3.translation(st.tx, st.ty)
        @ Mat3.translation(cx, cy)
        @ Mat3.rotation(st.theta)
        @ Mat3.scaling(st.s)
        @ Mat3.translation(-cx, -cy)
    )


def invert_transform(m: Mat3) -> Mat3:
    """Invert an affine transform; raises SingularTransformError when the
    upper 2x2 determinant falls below DET_EPSILON."""
    det = m.det2()
    if abs(det) < DET_EPSILON:
        raise SingularTransformError(f"near-singular transform, |det|={abs(det)}")
    i00 = m.m11 / det
    i01 = -m.m01 / det
    i10 = -m.m10 / det
    i11 = m.m00 / det
    return Mat3(
        i00,
        i01,
        -(i00 * m.m02 + i01 * m.m12),
        i10,
        i11,
        -(i10 * m.m02 + i11 * m.m12),
    )


def reconstruct(
    xn: float, yn: float, st: TransformState, geom: ViewportGeometry
) -> HomPoint:
    """Map normalized screen gaze back onto the intrinsic image.

    Pipeline: screen pixels -> viewport frame -> undo the manipulation with
    the inverse transform -> rescale displayed pixels to intrinsic pixels.
    Results outside the image bounds are returned as-is; use off_image() to
    flag them. Raises SingularTransformError for uninvertible states.
    """
    p = viewport_from_screen(screen_from_normalized(xn, yn, geom), geom)
    p = invert_transform(compose_transform(st, geom)).apply(p)
    return intrinsic_from_displayed(p, geom)


def forward_project(
    p_i: HomPoint, st: TransformState, geom: ViewportGeometry
) -> tuple[float, float]:
    """Project an intrinsic-image point to normalized screen coordinates under
    a transform state. Exact inverse of reconstruct()."""
    p = displayed_from_intrinsic(p_i, geom)
    p = compose_transform(st, geom).apply(p)
    return normalized_from_screen(screen_from_viewport(p, geom), geom)


def off_screen(xn: float, yn: float) -> bool:
    """True when normalized gaze lies outside the display."""
    return not (0.0 <= xn <= 1.0 and 0.0 <= yn <= 1.0)


def off_image(p: HomPoint, geom: ViewportGeometry) -> bool:
    """True when an intrinsic-frame point lies outside the source image."""
    return not (0.0 <= p.x <= geom.wi and 0.0 <= p.y <= geom.hi)

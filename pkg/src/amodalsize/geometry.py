"""Simplified perspective camera with zero roll.

Image ordinates are measured from the optical center with y positive
*upward*, so ground contacts of objects below the camera satisfy
``y_b < y_h``.  Lengths are meters, angles radians, image quantities
real-valued pixels.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_finite, check_positive
from .errors import InputError, NumericalError

MAX_TILT = math.pi / 4


@dataclass(frozen=True)
class CameraModel:
    """Focal length ``f`` (px), tilt ``theta_x`` (rad) and height ``h_c`` (m)."""

    f: float
    theta_x: float
    h_c: float

    def __post_init__(self):
        check_positive(self.f, "f")
        check_positive(self.h_c, "h_c")
        check_finite(self.theta_x, "theta_x")
        if abs(self.theta_x) >= MAX_TILT:
            raise InputError(f"|theta_x| must be < pi/4, got {self.theta_x!r}")

    @property
    def horizon(self):
        """Small-tilt horizon ordinate ``f * theta_x``."""
        return horizon_from_tilt(self.f, self.theta_x)


@dataclass(frozen=True)
class WorldPoint:
    x_w: float
    y_w: float
    z_w: float


def horizon_from_tilt(f, theta_x):
    check_positive(f, "f")
    return f * check_finite(theta_x, "theta_x")


def project_point(cam, point):
    """Project a camera-centered world point to image ``(x, y)``.

    Applies the tilt rotation about the x axis followed by the pinhole
    intrinsics, then dehomogenizes.
    """
    c, s = math.cos(cam.theta_x), math.sin(cam.theta_x)
    depth = -s * point.y_w + c * point.z_w
    if depth <= 0:
        raise NumericalError("point is not in front of the camera")
    x = cam.f * point.x_w / depth
    y = cam.f * (c * point.y_w + s * point.z_w) / depth
    return x, y


def ground_point_approx(cam, d):
    """Ground-contact ordinate ``-f h_c / d + f theta_x`` (small tilt)."""
    d = check_positive(d, "d")
    return -cam.f * cam.h_c / d + cam.f * cam.theta_x


def ground_point_exact(cam, d):
    d = check_positive(d, "d")
    if cam.theta_x == 0.0:
        # identical in exact arithmetic; share the evaluation order
        return ground_point_approx(cam, d)
    return _exact_ordinate(cam, -cam.h_c, d)


def _exact_ordinate(cam, y_w, d):
    # y_w is the world height relative to the camera center
    t = math.tan(cam.theta_x)
    denom = 1.0 - (y_w / d) * t
    if abs(denom) < 1e-12:
        raise NumericalError("vanishing denominator in exact projection")
    return cam.f * (y_w / d + t) / denom


def top_point_approx(cam, H, d):
    return ground_point_approx(cam, d) + image_height(cam.f, H, d)


def top_point_exact(cam, H, d):
    d = check_positive(d, "d")
    check_positive(H, "H", strict=False)
    if cam.theta_x == 0.0:
        return top_point_approx(cam, H, d)
    return _exact_ordinate(cam, H - cam.h_c, d)


def image_height(f, H, d):
    """Image height in pixels of an object ``H`` meters tall at depth ``d``."""
    check_positive(H, "H", strict=False)
    d = check_positive(d, "d")
    return f * H / d


def depth_from_height(f, H, h):
    check_positive(f, "f")
    check_positive(H, "H")
    h = check_positive(h, "h")
    return f * H / h


def relative_depth(H, h):
    """Depth divided by focal length, ``H / h``; vectorized."""
    H = np.asarray(H, dtype=float)
    h = np.asarray(h, dtype=float)
    if np.any(h <= 0):
        raise InputError("image heights must be > 0")
    return H / h

"""Per-image horizon and camera-height least squares.

Substituting the image-height relation into the small-tilt ground-contact
model gives, for every object in an image,

    y_b = y_h - (h / H) * h_c

which is linear in the two unknowns ``(h_c, y_h)``.
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from ..errors import InputError, RankDeficiencyError
from ._robust import irls

MIN_CAMERA_HEIGHT = 1e-6


class CameraPrior(NamedTuple):
    h_c0: float = 1.4
    strength: float = 1e-2


@dataclass(frozen=True)
class CameraSolution:
    image_id: str
    h_c: float
    y_h: float
    clamped: bool = False


def _design(y_b, h, H):
    y_b = np.asarray(y_b, dtype=float)
    ratio = np.asarray(h, dtype=float) / np.asarray(H, dtype=float)
    # columns: h_c, y_h
    A = np.column_stack([-ratio, np.ones_like(ratio)])
    return A, y_b, ratio


def ground_residuals(y_b, h, H, h_c, y_h):
    """Observed minus predicted ground-contact ordinates."""
    A, b, _ = _design(y_b, h, H)
    return b - A @ np.array([h_c, y_h])


def solve_camera(y_b, h, H, prior=None, huber_delta=None, image_id="",
                 rel_tol=1e-12):
    """Least-squares ``(h_c, y_h)`` for one image.

    Parameters
    ----------
    y_b, h : array_like
        Centered (y-up) ground-contact ordinates and image heights in pixels.
    H : array_like
        Current real-world heights of the objects' size clusters, meters.
    prior : CameraPrior, optional
        Adds ``strength * (h_c - h_c0)**2`` to the objective.
    huber_delta : float, optional
        Huber threshold in pixels; enables IRLS.

    Raises
    ------
    RankDeficiencyError
        If the objects do not determine both unknowns and no prior is given.
    """
    A, b, ratio = _design(y_b, h, H)
    n = b.size
    if n == 0:
        raise InputError(f"image {image_id!r} has no instances")
    if not np.all(np.isfinite(ratio)) or np.any(ratio <= 0):
        raise InputError(f"image {image_id!r}: h and H must be positive")
    spread = np.ptp(ratio) if n > 1 else 0.0
    if prior is None and spread <= rel_tol * np.max(ratio):
        raise RankDeficiencyError(
            f"image {image_id!r}: camera is underdetermined "
            f"({n} instance(s), h/H spread {spread:.3g}); supply a prior",
            rank=1, n_unknowns=2)

    def solve(weights):
        sw = np.ones(n) if weights is None else np.sqrt(weights)
        M = A * sw[:, None]
        rhs = b * sw
        if prior is not None:
            s = np.sqrt(prior.strength)
            M = np.vstack([M, [s, 0.0]])
            rhs = np.append(rhs, s * prior.h_c0)
        params, *_ = np.linalg.lstsq(M, rhs, rcond=None)
        return params

    def residual_fn(params):
        return b - A @ params

    h_c, y_h = irls(solve, residual_fn, huber_delta)
    clamped = False
    if h_c < MIN_CAMERA_HEIGHT:
        # best horizon given the clamped height
        h_c = MIN_CAMERA_HEIGHT
        y_h = float(np.mean(b + ratio * h_c))
        clamped = True
    return CameraSolution(image_id, float(h_c), float(y_h), clamped)

"""Small input-validation helpers used across modules."""

import math
import numbers

import numpy as np

from .errors import InputError


def check_positive(value, name, strict=True):
    if not isinstance(value, numbers.Real) or not math.isfinite(value):
        raise InputError(f"{name} must be a finite real number, got {value!r}")
    if strict and value <= 0:
        raise InputError(f"{name} must be > 0, got {value!r}")
    if not strict and value < 0:
        raise InputError(f"{name} must be >= 0, got {value!r}")
    return float(value)


def check_finite(value, name):
    if not isinstance(value, numbers.Real) or not math.isfinite(value):
        raise InputError(f"{name} must be a finite real number, got {value!r}")
    return float(value)


def as_float_array(values, name, ndim=1, allow_empty=False):
    """Convert ``values`` to a float ndarray and check shape and finiteness."""
    try:
        arr = np.asarray(values, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{name} is not numeric: {exc}") from None
    if arr.ndim != ndim:
        raise InputError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if not allow_empty and arr.size == 0:
        raise InputError(f"{name} must not be empty")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite values")
    return arr


def check_fitted(estimator, attribute):
    from sklearn.exceptions import NotFittedError

    if not hasattr(estimator, attribute):
        raise NotFittedError(
            f"This {type(estimator).__name__} instance is not fitted yet; "
            "call 'fit' first."
        )

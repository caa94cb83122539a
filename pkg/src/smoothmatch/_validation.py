"""Input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np

from .exceptions import ParameterError


def as_float_array(x, name, ndim=None):
    """Coerce to a float ndarray, rejecting non-finite entries."""
    arr = np.asarray(x, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ParameterError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} contains non-finite values")
    return arr


def check_times(times, name="times"):
    """Validate a strictly increasing 1-D time array."""
    t = as_float_array(times, name, ndim=1)
    if t.size < 2:
        raise ParameterError(f"{name} must contain at least two points")
    if np.any(np.diff(t) <= 0):
        raise ParameterError(f"{name} must be strictly increasing")
    return t


def check_positive(value, name):
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ParameterError(f"{name} must be a positive finite number, got {value!r}")
    return value


def check_in_box(theta, box, name="theta"):
    """Check a parameter vector lies inside a box of (lo, hi) pairs."""
    theta = as_float_array(theta, name, ndim=1)
    box = np.asarray(box, dtype=float)
    if box.shape != (theta.size, 2):
        raise ParameterError(
            f"parameter box shape {box.shape} does not match {name} of length {theta.size}"
        )
    if np.any(theta < box[:, 0]) or np.any(theta > box[:, 1]):
        raise ParameterError(f"{name}={theta.tolist()} lies outside the parameter box")
    return theta


def check_matrix(y, n_rows, name="y"):
    """Validate an (n, d) reading matrix; 1-D input is promoted to one column."""
    arr = np.asarray(y, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] != n_rows:
        raise ParameterError(f"{name} must have shape ({n_rows}, d), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} contains non-finite values")
    return arr

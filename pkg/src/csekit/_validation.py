"""Input checks shared by the public API."""

import numpy as np

__all__ = [
    "check_param_point",
    "check_displacement",
    "check_unit_interval",
    "check_positive_int",
]


def check_param_point(theta, dim, allow_batch=False):
    theta = np.asarray(theta, dtype=float)
    if theta.ndim == 0:
        theta = theta.reshape(1)
    if not allow_batch and theta.ndim != 1:
        raise ValueError(f"expected a 1-D parameter point, got shape {theta.shape}")
    if theta.shape[-1] != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {theta.shape[-1]}")
    if not np.all(np.isfinite(theta)):
        raise ValueError("parameter point must be finite")
    return theta


def check_displacement(v, dim):
    """Displacements may be batched along leading axes: shape ``(..., dim)``."""
    v = np.asarray(v, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.shape[-1] != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {v.shape[-1]}")
    if not np.all(np.isfinite(v)):
        raise ValueError("displacement must be finite")
    return v


def check_unit_interval(x, name, open_low=False):
    x = float(x)
    if not (0.0 <= x <= 1.0) or (open_low and x == 0.0):
        bound = "(0, 1]" if open_low else "[0, 1]"
        raise ValueError(f"{name} must lie in {bound}, got {x}")
    return x


def check_positive_int(n, name):
    if int(n) != n or int(n) < 1:
        raise ValueError(f"{name} must be a positive integer, got {n}")
    return int(n)

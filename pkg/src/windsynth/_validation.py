"""Input validation helpers shared by the estimators."""

import numpy as np
from sklearn.utils.validation import check_array

from .errors import AxisMismatch, ShapeMismatch


def as_2d_float(X, n_features=None):
    """Finite float64 2-d array, optionally with a fixed column count."""
    X = check_array(X, dtype=np.float64, ensure_2d=True, ensure_min_samples=0)
    if n_features is not None and X.shape[1] != n_features:
        raise ShapeMismatch(f"expected {n_features} columns, got {X.shape[1]}")
    return X


def as_1d_float(y, name="y"):
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1:
        y = y.reshape(-1) if y.ndim == 2 and 1 in y.shape else None
        if y is None:
            raise ShapeMismatch(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(y)):
        raise ValueError(f"{name} contains non-finite values")
    return y


def values_of(x):
    """Plain float array from a series object or array-like."""
    return as_1d_float(getattr(x, "values", x), "series")


def check_aligned(obs, pred):
    """Return value arrays of two series after checking they line up."""
    a_axis = getattr(obs, "axis", None)
    b_axis = getattr(pred, "axis", None)
    if a_axis is not None and b_axis is not None and a_axis != b_axis:
        raise AxisMismatch(
            f"axes differ: {a_axis.start}+{a_axis.n_hours}h vs {b_axis.start}+{b_axis.n_hours}h"
        )
    a, b = values_of(obs), values_of(pred)
    if a.shape != b.shape:
        raise AxisMismatch(f"length mismatch: {len(a)} vs {len(b)}")
    return a, b

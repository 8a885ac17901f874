"""Predictor matrices: wind components over a grid selection plus calendar dummies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_2d_float
from .errors import AxisMismatch
from .grid import VARIABLES

WEEKDAYS = ("mon", "tue", "wed", "thu", "fri", "sat", "sun")
DUMMY_COLUMNS = tuple(
    [f"hour_{h:02d}" for h in range(24)]
    + [f"dow_{d}" for d in WEEKDAYS]
    + [f"month_{m:02d}" for m in range(1, 13)]
)
N_DUMMIES = len(DUMMY_COLUMNS)


@dataclass(frozen=True)
class FeatureMatrix:
    axis: object
    columns: tuple
    data: np.ndarray

    def __post_init__(self):
        columns = tuple(self.columns)
        data = np.asarray(self.data, dtype=np.float64)
        if data.shape != (self.axis.n_hours, len(columns)):
            raise ValueError(
                f"data shape {data.shape} does not match "
                f"({self.axis.n_hours}, {len(columns)})"
            )
        if len(set(columns)) != len(columns):
            raise ValueError("column descriptors must be unique")
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "data", data)

    @property
    def n_columns(self):
        return len(self.columns)

    def rows(self, mask):
        return self.data[mask]


def date_dummies(axis):
    """One-hot hour-of-day, weekday and month indicators (43 columns, UTC)."""
    n = axis.n_hours
    out = np.zeros((n, N_DUMMIES))
    rows = np.arange(n)
    out[rows, axis.hour_of_day()] = 1.0
    out[rows, 24 + axis.day_of_week()] = 1.0
    out[rows, 31 + axis.month() - 1] = 1.0
    return FeatureMatrix(axis, DUMMY_COLUMNS, out)


def assemble(field, sel, axis=None):
    """Wind block (variable-major, selection order) followed by the dummies."""
    if axis is None:
        axis = field.axis
    if not field.axis.covers(axis):
        raise AxisMismatch(
            f"wind field {field.axis.start}..{field.axis.end} does not cover "
            f"{axis.start}..{axis.end}"
        )
    if sel.grid != field.grid:
        raise AxisMismatch("selection was built for a different grid")
    idx = np.array(sel.indices)
    wind = field.window(axis).data[:, :, idx].reshape(axis.n_hours, len(VARIABLES) * len(idx))
    names = field.grid.column_names(idx)
    dummies = date_dummies(axis)
    return FeatureMatrix(axis, tuple(names) + dummies.columns, np.hstack([wind, dummies.data]))


@dataclass(frozen=True)
class ScalingParams:
    mean: np.ndarray
    range: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        rng = np.atleast_1d(np.asarray(self.range, dtype=np.float64))
        if mean.shape != rng.shape:
            raise ValueError("mean and range must have the same shape")
        if np.any(rng < 0):
            raise ValueError("range must be non-negative")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "range", rng)


def fit_scaling(m, rows=None):
    """Per-column mean and max-min over the selected rows."""
    x = m.data if isinstance(m, FeatureMatrix) else as_2d_float(m)
    if rows is not None:
        x = x[rows]
    if x.shape[0] == 0:
        raise ValueError("cannot fit scaling on zero rows")
    return ScalingParams(x.mean(axis=0), x.max(axis=0) - x.min(axis=0))


def _safe_range(params):
    return np.where(params.range > 0, params.range, 1.0)


def apply_scaling(m, params):
    """(x - mean) / range; zero-range columns become 0."""
    x = m.data if isinstance(m, FeatureMatrix) else np.asarray(m, dtype=np.float64)
    if x.shape[-1] != params.mean.shape[0]:
        raise ValueError("scaling params do not cover all columns")
    scaled = np.where(params.range > 0, (x - params.mean) / _safe_range(params), 0.0)
    if isinstance(m, FeatureMatrix):
        return FeatureMatrix(m.axis, m.columns, scaled)
    return scaled


def invert_scaling(values, params):
    x = np.asarray(values, dtype=np.float64)
    return np.where(params.range > 0, x * params.range + params.mean, params.mean)


class RangeScaler(TransformerMixin, BaseEstimator):
    """Mean-centre and divide by the value range, column by column.

    Constant columns map to zero.  ``inverse_transform`` restores the
    original units for columns with a positive range.
    """

    def fit(self, X, y=None):
        X = as_2d_float(X)
        self.params_ = fit_scaling(X)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        return apply_scaling(as_2d_float(X, n_features=self.n_features_in_), self.params_)

    def inverse_transform(self, X):
        check_is_fitted(self, "params_")
        return invert_scaling(as_2d_float(X, n_features=self.n_features_in_), self.params_)

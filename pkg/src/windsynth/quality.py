"""Validation battery comparing a modelled CF series with observations.

Deviations are always ``pred - obs``.  Binning by CF value always uses the
*observed* value.  Hour-of-day groups are labelled 1..24, where hour ``h``
collects timestamps whose UTC hour is ``h - 1``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import check_aligned, values_of
from .errors import DegenerateSeries, SeriesTooShort, ZeroMeanObservations

QUANTILE_LEVELS = (0.0, 0.25, 0.5, 0.75, 1.0)
RAMP_TIMEFRAMES = (1, 3, 6, 12)
RAMP_LIMIT = 0.2
SEASONS = ("DJF", "MAM", "JJA", "SON")
_SEASON_OF_MONTH = np.array([0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3, 0])  # Jan..Dec


class Threshold:
    """Comparison predicate such as ``< 0.005`` with a printable label."""

    _OPS = {
        "<": np.less,
        "<=": np.less_equal,
        ">": np.greater,
        ">=": np.greater_equal,
    }

    def __init__(self, op, value):
        if op not in self._OPS:
            raise ValueError(f"unsupported comparison {op!r}")
        self.op = op
        self.value = float(value)

    @classmethod
    def parse(cls, text):
        text = text.replace(" ", "")
        for op in ("<=", ">=", "<", ">"):
            if text.startswith(op):
                return cls(op, float(text[len(op):]))
        raise ValueError(f"cannot parse threshold {text!r}")

    @property
    def label(self):
        return f"{self.op}{self.value:g}"

    def __call__(self, x):
        return self._OPS[self.op](np.asarray(x), self.value)

    def __repr__(self):
        return f"Threshold({self.op!r}, {self.value!r})"


EXTREME_THRESHOLDS = tuple(Threshold(op, v) for op, v in (("<", 0.005), ("<", 0.01), (">", 0.75), (">", 0.8)))


def _between(lo, hi):
    def pred(x):
        x = np.asarray(x)
        return (x >= lo) & (x <= hi)

    pred.label = f"{lo:g}-{hi:g}"
    return pred


DISTRIBUTION_PREDICATES = {
    "<0.04": Threshold("<", 0.04),
    "0.08-0.12": _between(0.08, 0.12),
    ">0.8": Threshold(">", 0.8),
}


# -- point metrics -----------------------------------------------------------

def correlation(obs, pred):
    a, b = check_aligned(obs, pred)
    if len(a) < 2:
        raise SeriesTooShort("correlation needs at least two values")
    da, db = a - a.mean(), b - b.mean()
    sa, sb = math.sqrt(float(da @ da)), math.sqrt(float(db @ db))
    if sa == 0 or sb == 0:
        raise DegenerateSeries("correlation undefined for a constant series")
    return float(da @ db) / (sa * sb)


def variance(x):
    """Sample variance (n - 1 denominator); 0 for a single value."""
    x = values_of(x)
    if len(x) == 0:
        raise SeriesTooShort("variance of an empty series")
    if len(x) == 1:
        return 0.0
    return float(np.var(x, ddof=1))


def _obs_mean(a):
    m = float(np.mean(a))
    if not m > 0:
        raise ZeroMeanObservations(f"mean observed CF is {m}")
    return m


def nmae(obs, pred):
    """Mean absolute error divided by the mean observation."""
    a, b = check_aligned(obs, pred)
    return float(np.mean(np.abs(b - a))) / _obs_mean(a)


def nrmse(obs, pred):
    """Root mean squared error divided by the mean observation."""
    a, b = check_aligned(obs, pred)
    return math.sqrt(float(np.mean((b - a) ** 2))) / _obs_mean(a)


def quantiles(x, levels=QUANTILE_LEVELS):
    """Order-statistic quantiles with linear interpolation (position p(n-1)+1)."""
    x = values_of(x)
    if len(x) == 0:
        raise SeriesTooShort("quantiles of an empty series")
    levels = np.asarray(levels, dtype=np.float64)
    if np.any(levels < 0) or np.any(levels > 1):
        raise ValueError("quantile levels must lie in [0, 1]")
    return np.quantile(x, levels, method="linear")


# -- deviation groupings -------------------------------------------------------

def _summary(dev):
    if len(dev) == 0:
        return {"n": 0, "median": None, "mean": None, "min": None, "max": None}
    return {
        "n": int(len(dev)),
        "median": float(np.median(dev)),
        "mean": float(np.mean(dev)),
        "min": float(np.min(dev)),
        "max": float(np.max(dev)),
    }


def _class_edges(width, top):
    n = int(round(top / width))
    return np.round(np.arange(n + 1) * width, 12)


def _class_labels(edges):
    labels = [f"{lo:.1f}-{hi:.1f}" for lo, hi in zip(edges[:-1], edges[1:])]
    return labels + [f">{edges[-1]:.1f}"]


def classify(values, width, top=0.8):
    """Class index per value: [0,w), [w,2w), ..., [top, inf); negatives go to 0."""
    edges = _class_edges(width, top)
    idx = np.searchsorted(edges, np.asarray(values), side="right") - 1
    return np.clip(idx, 0, len(edges) - 1), _class_labels(edges)


def bin_deviations(obs, pred, width=0.1, top=0.8):
    a, b = check_aligned(obs, pred)
    idx, labels = classify(a, width, top)
    dev = b - a
    return [dict(bin=label, **_summary(dev[idx == k])) for k, label in enumerate(labels)]


def distribution_counts(x, predicates=None):
    x = values_of(x)
    predicates = DISTRIBUTION_PREDICATES if predicates is None else predicates
    return {name: int(np.count_nonzero(p(x))) for name, p in predicates.items()}


def histogram(x, width=0.01):
    """Density histogram on a fixed-width grid anchored at 0.

    Returns ``(edges, densities)``; bins are ``[edge_k, edge_k+1)`` and
    ``sum(densities) * width == 1``.
    """
    x = values_of(x)
    if len(x) == 0:
        raise SeriesTooShort("histogram of an empty series")
    lo = math.floor(x.min() / width)
    hi = math.floor(x.max() / width) + 1
    edge = lambda k: round(k * width, 12)  # noqa: E731
    # x / width can land one bin off when x sits on an edge
    while edge(lo) > x.min():
        lo -= 1
    while edge(hi) <= x.max():
        hi += 1
    edges = np.array([edge(k) for k in range(lo, hi + 1)])
    k = np.searchsorted(edges, x, side="right") - 1
    counts = np.bincount(k, minlength=len(edges) - 1).astype(np.float64)
    return edges, counts / (len(x) * width)


def _axis_of(obs, pred, axis):
    axis = axis or getattr(obs, "axis", None) or getattr(pred, "axis", None)
    if axis is None:
        raise ValueError("calendar statistics need a time axis")
    return axis


def diurnal_stats(obs, pred, axis=None):
    """Deviation summary per hour-of-day label 1..24."""
    a, b = check_aligned(obs, pred)
    axis = _axis_of(obs, pred, axis)
    hour = axis.hour_of_day()
    dev = b - a
    return [dict(hour=h + 1, **_summary(dev[hour == h])) for h in range(24)]


def season_of(axis):
    return _SEASON_OF_MONTH[axis.month() - 1]


def seasonal_stats(obs, pred, axis=None, width=0.2, top=0.8):
    """Deviation summary per (season, observed CF class); empty cells have n = 0."""
    a, b = check_aligned(obs, pred)
    axis = _axis_of(obs, pred, axis)
    season = season_of(axis)
    cls, labels = classify(a, width, top)
    dev = b - a
    out = []
    for s, name in enumerate(SEASONS):
        for k, label in enumerate(labels):
            cell = dev[(season == s) & (cls == k)]
            out.append(dict(season=name, cf_class=label, **_summary(cell)))
    return out


# -- events and ramps -----------------------------------------------------------

@dataclass(frozen=True)
class ExtremeEventStats:
    frequency: int
    mean_duration: float | None
    max_duration: int | None

    def to_dict(self):
        return {"frequency": self.frequency, "mean_duration": self.mean_duration,
                "max_duration": self.max_duration}


def run_lengths(mask):
    """Lengths of maximal runs of True in a boolean sequence."""
    m = np.asarray(mask, dtype=np.int8)
    if m.size == 0:
        return np.zeros(0, dtype=np.int64)
    edges = np.diff(np.concatenate([[0], m, [0]]))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1)
    return (stops - starts).astype(np.int64)


def extreme_events(x, predicate):
    """Frequency and durations of consecutive-hour runs satisfying ``predicate``."""
    x = values_of(x)
    if len(x) == 0:
        raise SeriesTooShort("extreme events of an empty series")
    if isinstance(predicate, str):
        predicate = Threshold.parse(predicate)
    runs = run_lengths(predicate(x))
    if len(runs) == 0:
        return ExtremeEventStats(0, None, None)
    return ExtremeEventStats(int(len(runs)), float(runs.mean()), int(runs.max()))


@dataclass(frozen=True)
class RampStats:
    timeframe: int
    min: float
    max: float
    neg_mean: float | None
    neg_freq: int
    pos_mean: float | None
    pos_freq: int
    zero_freq: int
    freq_below: int
    freq_above: int
    limit: float = RAMP_LIMIT

    @property
    def total(self):
        return self.neg_freq + self.pos_freq + self.zero_freq

    def to_dict(self):
        return {
            "timeframe_h": self.timeframe, "min": self.min, "max": self.max,
            "neg_mean": self.neg_mean, "neg_freq": self.neg_freq,
            "pos_mean": self.pos_mean, "pos_freq": self.pos_freq,
            "zero_freq": self.zero_freq,
            f"freq_below_-{self.limit:g}": self.freq_below,
            f"freq_above_+{self.limit:g}": self.freq_above,
        }


def pooled_differences(x, timeframe):
    """All ``x[t+k] - x[t]`` for lags ``k = 1..timeframe``, concatenated by lag."""
    x = values_of(x)
    if len(x) <= timeframe:
        raise SeriesTooShort(f"series of length {len(x)} is too short for a {timeframe}h timeframe")
    return np.concatenate([x[k:] - x[:-k] for k in range(1, timeframe + 1)])


def ramp_stats(x, timeframe, limit=RAMP_LIMIT):
    """Ramp statistics pooled over every lag from 1 to ``timeframe`` hours."""
    if timeframe < 1:
        raise ValueError("timeframe must be >= 1")
    d = pooled_differences(x, timeframe)
    neg = d[d < 0]
    pos = d[d > 0]
    return RampStats(
        timeframe=int(timeframe),
        min=float(d.min()),
        max=float(d.max()),
        neg_mean=float(neg.mean()) if len(neg) else None,
        neg_freq=int(len(neg)),
        pos_mean=float(pos.mean()) if len(pos) else None,
        pos_freq=int(len(pos)),
        zero_freq=int(np.count_nonzero(d == 0)),
        freq_below=int(np.count_nonzero(d < -limit)),
        freq_above=int(np.count_nonzero(d > limit)),
        limit=limit,
    )


def ramp_cdf(x, lag=1):
    """Empirical CDF of ``lag``-hour changes as (value, cumulative probability) pairs.

    Tied values collapse onto one point carrying the probability of the last tie.
    """
    x = values_of(x)
    if len(x) <= lag:
        raise SeriesTooShort(f"series of length {len(x)} is too short for lag {lag}")
    d = np.sort(x[lag:] - x[:-lag])
    n = len(d)
    last = np.flatnonzero(np.append(d[1:] != d[:-1], True))
    return d[last], (last + 1) / n


# -- full report ---------------------------------------------------------------

def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, NaN to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return None if math.isnan(v) else v
    return obj


@dataclass
class QualityReport:
    label: str
    n_hours: int
    correlation: float
    nmae: float
    nrmse: float
    variance: dict
    quantiles: dict
    negative_values: dict
    bin_deviations: list
    distribution: dict
    diurnal: list
    seasonal: list
    extremes: dict
    ramps: dict
    histogram: dict = field(repr=False)
    ramp_cdf: dict = field(repr=False)

    def to_dict(self, plot_data=False):
        d = {
            "label": self.label,
            "n_hours": self.n_hours,
            "metrics": {
                "correlation": self.correlation,
                "nmae": self.nmae,
                "nrmse": self.nrmse,
                "variance": self.variance,
                "quantiles": self.quantiles,
                "negative_values": self.negative_values,
            },
            "bin_deviations": self.bin_deviations,
            "distribution": self.distribution,
            "diurnal": self.diurnal,
            "seasonal": self.seasonal,
            "extremes": self.extremes,
            "ramps": self.ramps,
        }
        if plot_data:
            d["histogram"] = self.histogram
            d["ramp_cdf"] = self.ramp_cdf
        return _clean(d)

    @classmethod
    def from_dict(cls, d):
        """Inverse of ``to_dict(plot_data=True)``; NaN comes back from None."""
        m = d["metrics"]
        nan = lambda v: float("nan") if v is None else v  # noqa: E731
        return cls(
            label=d["label"], n_hours=d["n_hours"],
            correlation=nan(m["correlation"]), nmae=nan(m["nmae"]), nrmse=nan(m["nrmse"]),
            variance=m["variance"], quantiles=m["quantiles"], negative_values=m["negative_values"],
            bin_deviations=d["bin_deviations"], distribution=d["distribution"],
            diurnal=d["diurnal"], seasonal=d["seasonal"], extremes=d["extremes"], ramps=d["ramps"],
            histogram=d.get("histogram") or {k: {"edges": [], "density": []} for k in ("obs", "pred")},
            ramp_cdf=d.get("ramp_cdf") or {k: {"change": [], "cumprob": []} for k in ("obs", "pred")},
        )

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(**kwargs), indent=2, sort_keys=False)


def _quantile_dict(x):
    return {f"{int(round(p * 100))}%": float(q) for p, q in zip(QUANTILE_LEVELS, quantiles(x))}


def full_report(obs, pred, label=None, axis=None):
    """Every metric family for one aligned (obs, pred) pair."""
    a, b = check_aligned(obs, pred)
    axis = _axis_of(obs, pred, axis)
    if label is None:
        label = getattr(pred, "label", "") or "model"
    side = {"obs": a, "pred": b}
    report = QualityReport(
        label=label,
        n_hours=len(a),
        correlation=correlation(a, b),
        nmae=nmae(a, b),
        nrmse=nrmse(a, b),
        variance={k: variance(v) for k, v in side.items()},
        quantiles={k: _quantile_dict(v) for k, v in side.items()},
        negative_values={k: int(np.count_nonzero(v < 0)) for k, v in side.items()},
        bin_deviations=bin_deviations(a, b),
        distribution={k: distribution_counts(v) for k, v in side.items()},
        diurnal=diurnal_stats(a, b, axis),
        seasonal=seasonal_stats(a, b, axis),
        extremes={
            k: {t.label: extreme_events(v, t).to_dict() for t in EXTREME_THRESHOLDS}
            for k, v in side.items()
        },
        ramps={
            k: {f"{T}h": ramp_stats(v, T).to_dict() for T in RAMP_TIMEFRAMES}
            for k, v in side.items()
        },
        histogram={k: dict(zip(("edges", "density"), histogram(v))) for k, v in side.items()},
        ramp_cdf={k: dict(zip(("change", "cumprob"), ramp_cdf(v))) for k, v in side.items()},
    )
    return report


# -- table exports -------------------------------------------------------------

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return repr(v)
    return str(v)


def _write_rows(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_tables(reports, out_dir, candidates=None):
    """Write report tables and plot data for one or more reports.

    ``reports`` maps a model label to its QualityReport (all against the same
    observations).  ``candidates`` optionally lists (label, nmae, nrmse,
    correlation) tuples for the model-selection table.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports = dict(reports)
    labels = list(reports)
    first = reports[labels[0]]

    rows = candidates or [(lab, r.nmae, r.nrmse, r.correlation) for lab, r in reports.items()]
    _write_rows(out / "table2.csv", ["model", "nmae", "nrmse", "correlation"], rows)

    header = ["quality_measure", "observations"] + labels
    rows = [
        ["correlation", None] + [reports[k].correlation for k in labels],
        ["nmae", None] + [reports[k].nmae for k in labels],
        ["nrmse", None] + [reports[k].nrmse for k in labels],
        ["variance", first.variance["obs"]] + [reports[k].variance["pred"] for k in labels],
    ]
    for q in first.quantiles["obs"]:
        rows.append([f"quantile_{q}", first.quantiles["obs"][q]] + [reports[k].quantiles["pred"][q] for k in labels])
    rows.append(["negative_values", first.negative_values["obs"]] + [reports[k].negative_values["pred"] for k in labels])
    _write_rows(out / "table3.csv", header, rows)

    rows = []
    for t in first.extremes["obs"]:
        for stat in ("frequency", "mean_duration", "max_duration"):
            rows.append([t, stat, first.extremes["obs"][t][stat]]
                        + [reports[k].extremes["pred"][t][stat] for k in labels])
    _write_rows(out / "table3_extremes.csv", ["cf_range", "statistic", "observations"] + labels, rows)

    rows = []
    for tf, stats in first.ramps["obs"].items():
        for stat in stats:
            if stat == "timeframe_h":
                continue
            rows.append([tf, stat, stats[stat]] + [reports[k].ramps["pred"][tf][stat] for k in labels])
    _write_rows(out / "table4.csv", ["timeframe", "statistic", "observations"] + labels, rows)

    for lab, r in reports.items():
        safe = "".join(c if c.isalnum() or c in "-_" else "_" for c in lab)
        _write_rows(out / f"bins_{safe}.csv", ["bin", "n", "median", "mean", "min", "max"],
                    [[d["bin"], d["n"], d["median"], d["mean"], d["min"], d["max"]] for d in r.bin_deviations])
        _write_rows(out / f"diurnal_{safe}.csv", ["hour", "n", "median", "mean", "min", "max"],
                    [[d["hour"], d["n"], d["median"], d["mean"], d["min"], d["max"]] for d in r.diurnal])
        _write_rows(out / f"seasonal_{safe}.csv", ["season", "cf_class", "n", "median", "min", "max"],
                    [[d["season"], d["cf_class"], d["n"], d["median"], d["min"], d["max"]] for d in r.seasonal])
        for side, name in (("pred", safe), ("obs", "observations")):
            e, dens = r.histogram[side]["edges"], r.histogram[side]["density"]
            _write_rows(out / f"histogram_{name}.csv", ["cf", "density"],
                        [[float(lo), float(v)] for lo, v in zip(e[:-1], dens)])
            _write_rows(out / f"ramp_cdf_{name}.csv", ["change", "cumprob"],
                        [[float(c), float(p)] for c, p in zip(r.ramp_cdf[side]["change"], r.ramp_cdf[side]["cumprob"])])
    return out

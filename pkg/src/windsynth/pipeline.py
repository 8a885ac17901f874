"""Rolling train/predict folds, per-fold fitting and experiment orchestration."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from . import grid as gridmod
from ._validation import as_1d_float, as_2d_float, check_aligned
from .errors import AxisMismatch, ConfigError, PeriodTooShort
from .features import RangeScaler, assemble, fit_scaling, invert_scaling, apply_scaling, ScalingParams
from .ingest import CapacityFactorSeries, TimeAxis
from .mlp import MlpConfig, PerceptronRegressor, model_arrays, model_from_arrays, read_container, write_container
from .quality import correlation, nmae, nrmse

VARIANTS = ("mlm1", "mlm2", "mlm3")
TESTED_SIZES = (60, 80)


@dataclass(frozen=True)
class Fold:
    index: int
    predict_years: tuple
    train_years: tuple


@dataclass(frozen=True)
class FoldPlan:
    years: tuple
    folds: tuple

    def __post_init__(self):
        seen = []
        for f in self.folds:
            if set(f.predict_years) & set(f.train_years):
                raise ValueError(f"fold {f.index} trains on a predicted year")
            if set(f.predict_years) | set(f.train_years) != set(self.years):
                raise ValueError(f"fold {f.index} does not span the period")
            seen.extend(f.predict_years)
        if sorted(seen) != sorted(self.years) or len(seen) != len(set(seen)):
            raise ValueError("predict windows must partition the period")

    def __iter__(self):
        return iter(self.folds)

    def __len__(self):
        return len(self.folds)


def parse_years(years):
    """(2010, 2012), "2010-2012" or a list -> tuple of consecutive years."""
    return _year_list(years)


def _year_list(years):
    if isinstance(years, str):
        first, _, last = years.partition("-")
        years = (int(first), int(last or first))
    years = tuple(int(y) for y in years)
    if len(years) == 2 and years[1] >= years[0]:
        return tuple(range(years[0], years[1] + 1))
    if len(years) == 1:
        return years
    if list(years) != list(range(years[0], years[0] + len(years))):
        raise ValueError("years must be consecutive")
    return years


def build_fold_plan(years, block=2):
    """Consecutive ``block``-year predict windows, each trained on all other years.

    ``years`` is a ``(first, last)`` pair, a ``"first-last"`` string or an
    explicit consecutive list.  A trailing shorter window absorbs any remainder.
    """
    years = _year_list(years)
    if block < 1:
        raise PeriodTooShort("block must be at least one year")
    if len(years) < block + 1:
        raise PeriodTooShort(
            f"{len(years)} year(s) cannot hold a {block}-year predict window plus training data"
        )
    folds = []
    for i, start in enumerate(range(0, len(years), block)):
        predict = years[start:start + block]
        train = tuple(y for y in years if y not in predict)
        folds.append(Fold(i, predict, train))
    return FoldPlan(years, tuple(folds))


def fold_rows(fold, axis):
    """(train_rows, predict_rows) index arrays of ``fold`` on ``axis``."""
    year = axis.year()
    predict = np.flatnonzero(np.isin(year, fold.predict_years))
    train = np.flatnonzero(np.isin(year, fold.train_years))
    return train, predict


@dataclass(frozen=True)
class Provenance:
    """Which fold produced each hour and which rows each fold trained on."""

    fold_of_hour: np.ndarray
    train_rows: tuple

    def audit(self):
        """Raise AssertionError unless every hour comes from exactly one fold
        that never trained on it."""
        if np.any(self.fold_of_hour < 0):
            raise AssertionError("some hours were not produced by any fold")
        for k, rows in enumerate(self.train_rows):
            produced = np.flatnonzero(self.fold_of_hour == k)
            overlap = np.intersect1d(produced, rows)
            if len(overlap):
                raise AssertionError(f"fold {k} predicted {len(overlap)} hour(s) it trained on")
        return True


def plan_provenance(plan, axis):
    fold_of_hour = np.full(axis.n_hours, -1, dtype=np.int64)
    trains = []
    for fold in plan:
        train, predict = fold_rows(fold, axis)
        if np.any(fold_of_hour[predict] >= 0):
            raise AssertionError(f"fold {fold.index} overlaps an earlier fold")
        fold_of_hour[predict] = fold.index
        trains.append(train)
    return Provenance(fold_of_hour, tuple(trains))


class MLMRegressor(RegressorMixin, BaseEstimator):
    """Scale, train and unscale in one estimator.

    ``fit`` learns range scaling for the features and the target on the
    training rows, then trains a :class:`~windsynth.mlp.PerceptronRegressor`
    on scaled data.  ``predict`` returns values in the target's own units.
    """

    def __init__(self, hidden_sizes=60, learning_rate=0.05, epochs=40, seed=0,
                 batch_size=64, shuffle=True, momentum=0.9, stream=0):
        self.hidden_sizes = hidden_sizes
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.seed = seed
        self.batch_size = batch_size
        self.shuffle = shuffle
        self.momentum = momentum
        self.stream = stream

    def _network(self):
        return PerceptronRegressor(
            hidden_sizes=self.hidden_sizes, learning_rate=self.learning_rate,
            epochs=self.epochs, seed=self.seed, batch_size=self.batch_size,
            shuffle=self.shuffle, stream=self.stream, momentum=self.momentum,
        )

    def fit(self, X, y):
        X = as_2d_float(X)
        y = as_1d_float(y)
        self.x_scaler_ = RangeScaler().fit(X)
        self.y_params_ = fit_scaling(y[:, None])
        ys = apply_scaling(y[:, None], self.y_params_)[:, 0]
        self.network_ = self._network().fit(self.x_scaler_.transform(X), ys)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "network_")
        scaled = self.network_.predict(self.x_scaler_.transform(X))
        return invert_scaling(scaled, self.y_params_)

    @property
    def train_report_(self):
        return self.network_.report_

    def save(self, path, extra=None):
        """Write the fitted scalers and network into one container file."""
        check_is_fitted(self, "network_")
        model = self.network_.model_
        meta = {
            "kind": "MLMRegressor",
            "params": self.get_params(),
            "config": model.config.to_dict(),
            "stream": model.stream,
            "extra": extra or {},
        }
        meta["params"]["hidden_sizes"] = list(model.config.hidden_sizes)
        arrays = [
            ("x_mean", self.x_scaler_.params_.mean),
            ("x_range", self.x_scaler_.params_.range),
            ("y_mean", self.y_params_.mean),
            ("y_range", self.y_params_.range),
        ] + model_arrays(model)
        write_container(path, meta, arrays)

    @classmethod
    def load(cls, path):
        meta, arrays = read_container(path)
        if meta.get("kind") != "MLMRegressor":
            raise ConfigError(f"{path} does not hold an MLMRegressor")
        params = dict(meta["params"])
        params["hidden_sizes"] = tuple(params["hidden_sizes"])
        est = cls(**params)
        est.x_scaler_ = RangeScaler()
        est.x_scaler_.params_ = ScalingParams(arrays["x_mean"], arrays["x_range"])
        est.x_scaler_.n_features_in_ = len(arrays["x_mean"])
        est.y_params_ = ScalingParams(arrays["y_mean"], arrays["y_range"])
        net = est._network()
        net.model_ = model_from_arrays(meta, arrays)
        net.n_features_in_ = net.model_.n_inputs
        est.network_ = net
        est.n_features_in_ = net.model_.n_inputs
        est.extra_ = meta.get("extra", {})
        return est


@dataclass(frozen=True)
class ExperimentConfig:
    variant: str = "mlm2"
    hidden_sizes: tuple = (60, 60, 60)
    seed: int = 0
    years: tuple = (2010, 2016)
    block: int = 2
    k: int = 4
    learning_rate: float = 0.05
    epochs: int = 40
    batch_size: int | None = 64
    momentum: float = 0.9
    shuffle: bool = True

    def __post_init__(self):
        v = self.variant.lower()
        if v not in VARIANTS:
            raise ConfigError(f"variant must be one of {', '.join(VARIANTS)}")
        object.__setattr__(self, "variant", v)
        sizes = self.hidden_sizes
        if np.isscalar(sizes):
            sizes = (int(sizes),) * 3
        object.__setattr__(self, "hidden_sizes", tuple(int(s) for s in sizes))
        years = _year_list(self.years)
        object.__setattr__(self, "years", (years[0], years[-1]))
        # validates the network settings early
        self.mlp_config()

    def mlp_config(self):
        return MlpConfig(self.hidden_sizes, self.learning_rate, self.epochs, self.seed,
                         self.batch_size, self.shuffle, self.momentum)

    def estimator(self, stream=0):
        return MLMRegressor(self.hidden_sizes, self.learning_rate, self.epochs, self.seed,
                            self.batch_size, self.shuffle, self.momentum, stream)

    @property
    def label(self):
        sizes = self.hidden_sizes
        size = str(sizes[0]) if len(set(sizes)) == 1 else "x".join(map(str, sizes))
        return f"{self.variant.upper()}-{size}"


@dataclass(frozen=True)
class DataBundle:
    wind: object
    obs: CapacityFactorSeries
    plants: object = None


@dataclass(frozen=True)
class FoldResult:
    fold: Fold
    values: np.ndarray
    train_rows: np.ndarray
    predict_rows: np.ndarray
    estimator: MLMRegressor = field(repr=False)


@dataclass(frozen=True)
class SyntheticSeries:
    series: CapacityFactorSeries
    provenance: Provenance
    plan: FoldPlan
    selection: object
    folds: tuple = field(repr=False, default=())

    @property
    def axis(self):
        return self.series.axis

    @property
    def values(self):
        return self.series.values

    @property
    def label(self):
        return self.series.label


def run_fold(fold, features, target, cfg, axis=None):
    """Train on the fold's training years and predict its predict window (CF)."""
    axis = axis or features.axis
    if target.axis != axis:
        raise AxisMismatch("target and features must share one time axis")
    train, predict = fold_rows(fold, axis)
    if len(predict) == 0 or len(train) == 0:
        raise PeriodTooShort(f"fold {fold.index} has an empty train or predict window")
    est = cfg.estimator(stream=fold.index)
    est.fit(features.data[train], target.values[train])
    values = est.predict(features.data[predict])
    return FoldResult(fold, values, train, predict, est)


def experiment_axis(cfg):
    return TimeAxis.from_years(*cfg.years)


def select_for(cfg, bundle):
    return gridmod.select(cfg.variant, bundle.wind.grid, bundle.plants, cfg.k)


def run_experiment(cfg, bundle, jobs=1, selection=None):
    """Run every fold of the plan and stitch the predictions into one series."""
    axis = experiment_axis(cfg)
    if not bundle.wind.axis.covers(axis):
        raise AxisMismatch(f"wind data do not cover {cfg.years[0]}-{cfg.years[1]}")
    if not bundle.obs.axis.covers(axis):
        raise AxisMismatch(f"observations do not cover {cfg.years[0]}-{cfg.years[1]}")
    sel = selection or select_for(cfg, bundle)
    features = assemble(bundle.wind, sel, axis)
    target = bundle.obs.window(axis)
    plan = build_fold_plan(cfg.years, cfg.block)

    def work(fold):
        return run_fold(fold, features, target, cfg, axis)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, plan.folds))
    else:
        results = [work(f) for f in plan.folds]

    values = np.full(axis.n_hours, np.nan)
    fold_of_hour = np.full(axis.n_hours, -1, dtype=np.int64)
    for r in results:
        values[r.predict_rows] = r.values
        fold_of_hour[r.predict_rows] = r.fold.index
    provenance = Provenance(fold_of_hour, tuple(r.train_rows for r in results))
    provenance.audit()
    series = CapacityFactorSeries(axis, values, cfg.label)
    return SyntheticSeries(series, provenance, plan, sel, tuple(results))


def rank_candidates(metrics):
    """Order (label, nmae, nrmse, correlation) tuples best first.

    NMAE ascending, then NRMSE ascending, then correlation descending; a
    missing correlation ranks last among ties.  Python's sort is stable, so
    identical candidates keep their input order.
    """
    def key(item):
        _, e_mae, e_rmse, corr = item
        corr = -np.inf if corr is None or np.isnan(corr) else corr
        return (e_mae, e_rmse, -corr)

    return sorted(metrics, key=key)


def candidate_metrics(label, series, obs):
    a, b = check_aligned(obs, series)
    return (label, nmae(a, b), nrmse(a, b), correlation(a, b))


def select_model(candidates, obs=None):
    """Label of the best candidate.

    ``candidates`` holds ``(label, series)`` pairs (scored against ``obs``) or
    ready ``(label, nmae, nrmse, correlation)`` tuples.
    """
    if not candidates:
        raise ValueError("no candidates to select from")
    scored = []
    for cand in candidates:
        if len(cand) == 2:
            if obs is None:
                raise ValueError("observations are needed to score series candidates")
            scored.append(candidate_metrics(cand[0], cand[1], obs))
        else:
            label, e_mae, e_rmse, *rest = cand
            scored.append((label, e_mae, e_rmse, rest[0] if rest else None))
    return rank_candidates(scored)[0][0]


def climatology_forecast(obs, plan, axis=None):
    """Hourly climatology benchmark under the same fold plan.

    Each predicted hour receives the mean observed CF at the same calendar
    day and hour over the fold's training years (falling back to the
    month-hour mean where a calendar day is absent, e.g. 29 February).
    """
    axis = axis or obs.axis
    values = obs.window(axis).values
    ts = axis.timestamps()
    month = axis.month()
    day = (ts.astype("datetime64[D]") - ts.astype("datetime64[M]")).astype(np.int64) + 1
    hour = axis.hour_of_day()
    key_day = (month * 32 + day) * 24 + hour
    key_month = month * 24 + hour
    out = np.full(axis.n_hours, np.nan)
    for fold in plan:
        train, predict = fold_rows(fold, axis)
        sums = np.bincount(key_day[train], weights=values[train], minlength=13 * 32 * 24)
        counts = np.bincount(key_day[train], minlength=13 * 32 * 24)
        msums = np.bincount(key_month[train], weights=values[train], minlength=13 * 24)
        mcounts = np.bincount(key_month[train], minlength=13 * 24)
        k = key_day[predict]
        with np.errstate(invalid="ignore", divide="ignore"):
            day_mean = sums[k] / counts[k]
            month_mean = msums[key_month[predict]] / mcounts[key_month[predict]]
        out[predict] = np.where(counts[k] > 0, day_mean, month_mean)
    return CapacityFactorSeries(axis, out, "climatology")


def parse_config_file(path):
    """Read ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def parse_hidden(text):
    """'60' -> (60, 60, 60); '60,40,20' -> (60, 40, 20)."""
    parts = [p for p in str(text).replace("x", ",").split(",") if p.strip()]
    try:
        sizes = tuple(int(p) for p in parts)
    except ValueError:
        raise ConfigError(f"invalid hidden layer sizes {text!r}") from None
    if len(sizes) == 1:
        sizes = sizes * 3
    if len(sizes) != 3 or min(sizes) < 1:
        raise ConfigError("hidden sizes must be one size or three comma-separated sizes")
    return sizes


def config_from_mapping(values):
    """ExperimentConfig from string settings (config file and/or CLI flags)."""
    kwargs = {}
    conv = {
        "variant": str,
        "seed": int,
        "block": int,
        "k": int,
        "learning_rate": float,
        "epochs": int,
        "momentum": float,
    }
    for key, fn in conv.items():
        if values.get(key) is not None:
            try:
                kwargs[key] = fn(values[key])
            except ValueError:
                raise ConfigError(f"invalid value for {key}: {values[key]!r}") from None
    hidden = values.get("hidden_sizes", values.get("hidden"))
    if hidden is not None:
        kwargs["hidden_sizes"] = parse_hidden(hidden)
    if values.get("years") is not None:
        try:
            kwargs["years"] = _year_list(str(values["years"]))
        except ValueError:
            raise ConfigError(f"invalid years {values['years']!r}") from None
    if values.get("batch_size") is not None:
        b = str(values["batch_size"]).lower()
        kwargs["batch_size"] = None if b in ("full", "none", "0") else int(b)
    if values.get("shuffle") is not None:
        kwargs["shuffle"] = str(values["shuffle"]).lower() in ("1", "true", "yes", "on")
    try:
        return ExperimentConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def with_hidden(cfg, size):
    return replace(cfg, hidden_sizes=(int(size),) * 3)

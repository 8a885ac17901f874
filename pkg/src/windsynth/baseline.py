"""Simplified power-curve fleet model and a seeded synthetic scenario.

The fleet model interpolates wind speed magnitudes to plant sites,
extrapolates them to hub height with a two-height power law, runs them
through a single power curve and averages the result weighted by
capacity.  It is a comparator and a ground-truth generator for tests, not
a full reimplementation of any published model.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.signal import lfilter
from sklearn.base import BaseEstimator, RegressorMixin

from .errors import BisectionFailure, MalformedRow, NonPositiveSpeed, OutsideGrid
from .grid import VARIABLES, GridSpec, WindField
from .ingest import CapacityFactorSeries, PlantRegistry, TimeAxis

CURVE_HEADER = ["speed_ms", "power_fraction"]
CALM_SPEED = 0.01


@dataclass(frozen=True)
class PowerCurve:
    speeds: np.ndarray
    fractions: np.ndarray

    def __post_init__(self):
        s = np.array(self.speeds, dtype=np.float64)
        f = np.array(self.fractions, dtype=np.float64)
        if s.ndim != 1 or s.shape != f.shape or len(s) < 2:
            raise ValueError("a power curve needs at least two (speed, fraction) points")
        if np.any(np.diff(s) <= 0):
            raise ValueError("curve speeds must be strictly increasing")
        if np.any(f < 0) or np.any(f > 1):
            raise ValueError("power fractions must lie in [0, 1]")
        if f[0] != 0:
            raise ValueError("the first curve point must have zero output")
        object.__setattr__(self, "speeds", s)
        object.__setattr__(self, "fractions", f)

    @classmethod
    def from_points(cls, points):
        s, f = zip(*points)
        return cls(np.array(s), np.array(f))

    @property
    def rated_speed(self):
        return float(self.speeds[np.argmax(self.fractions)])


def default_power_curve():
    """Generic multi-megawatt curve: cut-in 3 m/s, rated 12 m/s, cut-out 25 m/s."""
    ramp = np.arange(3.0, 12.0, 0.5)
    frac = (ramp**3 - 27.0) / (12.0**3 - 27.0)
    speeds = np.concatenate([[0.0], ramp, [12.0, 25.0, 25.01]])
    fractions = np.concatenate([[0.0], frac, [1.0, 1.0, 0.0]])
    return PowerCurve(speeds, fractions)


def apply_curve(curve, speed):
    """Piecewise-linear curve lookup; zero outside the curve's speed range."""
    speed = np.asarray(speed, dtype=np.float64)
    return np.interp(speed, curve.speeds, curve.fractions, left=0.0, right=0.0)


def parse_curve_csv(path):
    points = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != CURVE_HEADER:
            raise MalformedRow(1, f"expected header {','.join(CURVE_HEADER)}")
        for fields in reader:
            if not fields:
                continue
            try:
                s, f = (float(x) for x in fields)
            except ValueError as exc:
                raise MalformedRow(reader.line_num, str(exc)) from None
            points.append((s, f))
    try:
        return PowerCurve.from_points(points)
    except ValueError as exc:
        raise MalformedRow(0, f"invalid power curve: {exc}") from None


def write_curve_csv(path, curve):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(CURVE_HEADER) + "\n")
        for s, f in zip(curve.speeds, curve.fractions):
            fh.write(f"{s:.17g},{f:.17g}\n")


class BiasMode(str, Enum):
    NONE = "NONE"
    MEAN_MATCH = "MEAN_MATCH"


@dataclass(frozen=True)
class BaselineConfig:
    hub_height: float = 100.0
    curve: PowerCurve = field(default_factory=default_power_curve)
    bias_mode: BiasMode = BiasMode.NONE

    def __post_init__(self):
        if not self.hub_height > 0:
            raise ValueError("hub height must be positive")
        object.__setattr__(self, "bias_mode", BiasMode(self.bias_mode))


def _bilinear_weights(grid, lon, lat):
    """Corner indices and weights of the cell enclosing each location."""
    lon = np.atleast_1d(np.asarray(lon, dtype=np.float64))
    lat = np.atleast_1d(np.asarray(lat, dtype=np.float64))
    fi = (lon - grid.lon0) / grid.dlon
    fj = (lat - grid.lat0) / grid.dlat
    eps = 1e-9
    outside = (fi < -eps) | (fi > grid.nlon - 1 + eps) | (fj < -eps) | (fj > grid.nlat - 1 + eps)
    if np.any(outside):
        k = int(np.flatnonzero(outside)[0])
        raise OutsideGrid(float(lon[k]), float(lat[k]))
    fi = np.clip(fi, 0, grid.nlon - 1)
    fj = np.clip(fj, 0, grid.nlat - 1)
    i0 = np.minimum(np.floor(fi).astype(int), max(grid.nlon - 2, 0))
    j0 = np.minimum(np.floor(fj).astype(int), max(grid.nlat - 2, 0))
    i1 = np.minimum(i0 + 1, grid.nlon - 1)
    j1 = np.minimum(j0 + 1, grid.nlat - 1)
    ti = fi - i0
    tj = fj - j0
    idx = np.stack([j0 * grid.nlon + i0, j0 * grid.nlon + i1,
                    j1 * grid.nlon + i0, j1 * grid.nlon + i1], axis=1)
    w = np.stack([(1 - ti) * (1 - tj), ti * (1 - tj), (1 - ti) * tj, ti * tj], axis=1)
    return idx, w


def interpolate_speeds(field, lon, lat):
    """Bilinearly interpolated 10 m and 50 m speed magnitudes.

    Returns two arrays of shape (n_hours, n_locations).  Magnitudes are
    formed at the grid points first, then interpolated.
    """
    idx, w = _bilinear_weights(field.grid, lon, lat)
    out = []
    for height in (10, 50):
        speed = field.speed(height)
        out.append(np.einsum("tlc,lc->tl", speed[:, idx], w))
    return out[0], out[1]


def interpolate_wind(field, lonlat, hour):
    """(v10, v50) at one location and one hour index (or timestamp)."""
    if not isinstance(hour, (int, np.integer)):
        hour = field.axis.index_of(hour)
    lon, lat = lonlat
    v10, v50 = interpolate_speeds(field.window(field.axis.slice(hour, hour + 1)), lon, lat)
    return float(v10[0, 0]), float(v50[0, 0])


def hub_height_speed(v10, v50, h):
    """Power-law extrapolation through the 10 m and 50 m speeds.

    Where either speed is calm (<= 0.01 m/s) the 50 m speed is used as is.
    """
    v10 = np.asarray(v10, dtype=np.float64)
    v50 = np.asarray(v50, dtype=np.float64)
    if np.any(v10 < 0) or np.any(v50 < 0):
        raise NonPositiveSpeed("wind speed magnitudes cannot be negative")
    if not h > 0:
        raise NonPositiveSpeed("hub height must be positive")
    calm = (v10 <= CALM_SPEED) | (v50 <= CALM_SPEED)
    alpha = np.log(np.where(calm, 1.0, v50) / np.where(calm, 1.0, v10)) / np.log(5.0)
    out = v50 * (h / 50.0) ** alpha
    return float(out) if out.ndim == 0 else out


def _fleet_cf(hub_speeds, capacity, curve, scale=1.0):
    frac = apply_curve(curve, hub_speeds * scale)
    return frac @ (capacity / capacity.sum())


def calibrate_scale(hub_speeds, capacity, curve, target_mean, lo=0.05, hi=20.0, tol=1e-10, max_iter=200):
    """Speed scale factor whose fleet mean CF equals ``target_mean`` (bisection)."""
    def gap(s):
        return float(np.mean(_fleet_cf(hub_speeds, capacity, curve, s))) - target_mean

    g_lo, g_hi = gap(lo), gap(hi)
    if g_lo > 0 or g_hi < 0:
        # beyond cut-out the curve falls again; search for an upper bracket
        for cand in np.geomspace(lo, hi, 60):
            if gap(cand) >= 0:
                hi, g_hi = cand, gap(cand)
                break
        if g_lo > 0 or g_hi < 0:
            raise BisectionFailure(f"target mean CF {target_mean:.4f} is not bracketed")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        g = gap(mid)
        if abs(g) < tol:
            return mid
        if g < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _hub_speeds(field, plants, cfg):
    v10, v50 = interpolate_speeds(field, plants.lon, plants.lat)
    return hub_height_speed(v10, v50, cfg.hub_height)


def fleet_speed_scale(field, plants, cfg, obs=None, calibration=None, hub=None):
    """Speed scale applied before the power curve (1.0 unless MEAN_MATCH)."""
    if cfg.bias_mode is not BiasMode.MEAN_MATCH:
        return 1.0
    if obs is None:
        raise ValueError("MEAN_MATCH needs observed capacity factors")
    if hub is None:
        hub = _hub_speeds(field, plants, cfg)
    window = calibration or obs.axis
    first = field.axis.index_of(window.start)
    rows = slice(first, first + window.n_hours)
    target = float(np.mean(obs.window(window).values))
    return calibrate_scale(hub[rows], plants.capacity, cfg.curve, target)


def simulate_fleet(field, plants, cfg=None, obs=None, calibration=None):
    """Capacity-weighted fleet capacity factor for every hour of ``field``.

    With ``MEAN_MATCH`` bias correction, ``obs`` supplies the observed series
    and ``calibration`` (a TimeAxis, default: the whole observed axis) the
    window over which mean modelled CF is matched to mean observed CF.
    """
    cfg = cfg or BaselineConfig()
    hub = _hub_speeds(field, plants, cfg)
    scale = fleet_speed_scale(field, plants, cfg, obs, calibration, hub=hub)
    return CapacityFactorSeries(field.axis, _fleet_cf(hub, plants.capacity, cfg.curve, scale), "baseline")


class PowerCurveModel(RegressorMixin, BaseEstimator):
    """Estimator face of :func:`simulate_fleet`.

    ``fit(field, obs)`` calibrates the speed scale (MEAN_MATCH) on the
    observed series; ``predict(field)`` returns capacity factors as an array.
    """

    def __init__(self, plants=None, hub_height=100.0, curve=None, bias_mode="NONE"):
        self.plants = plants
        self.hub_height = hub_height
        self.curve = curve
        self.bias_mode = bias_mode

    def _cfg(self):
        return BaselineConfig(self.hub_height, self.curve or default_power_curve(), self.bias_mode)

    def fit(self, field, obs=None):
        self.speed_scale_ = fleet_speed_scale(field, self.plants, self._cfg(), obs)
        return self

    def predict(self, field):
        cfg = self._cfg()
        hub = _hub_speeds(field, self.plants, cfg)
        return _fleet_cf(hub, self.plants.capacity, cfg.curve, getattr(self, "speed_scale_", 1.0))


def _ar1(rng, n, phi, sd, size=None):
    """Stationary AR(1) paths with marginal standard deviation ``sd``."""
    shape = (n,) if size is None else (n, size)
    eps = rng.standard_normal(shape) * sd * np.sqrt(1 - phi**2)
    eps[0] = rng.standard_normal(shape[1:]) * sd
    return lfilter([1.0], [1.0, -phi], eps, axis=0)


def default_synth_grid(nlon=6, nlat=6):
    return GridSpec(5.0, 46.0, 0.625, 0.5, nlon, nlat)


def synth_scenario(seed, years, grid=None, n_plants=24, start_year=2010, obs_noise=0.01):
    """Seeded synthetic (wind field, plant registry, observed CF) triple.

    Speeds combine a shared weather signal, an east-west gradient signal,
    seasonal and diurnal cycles and local autoregressive noise; they are
    positive by construction (log-space model).  The observed series is the
    power-curve fleet output plus small autoregressive noise, clipped to
    [0, 1].  Wind components are rounded to 4 decimals, the precision of
    the wind CSV writer, so file round trips are lossless.
    """
    if years < 1:
        raise ValueError("years must be >= 1")
    if n_plants < 1:
        raise ValueError("n_plants must be >= 1")
    grid = grid or default_synth_grid()
    rng = np.random.default_rng(seed)
    axis = TimeAxis.from_years(start_year, start_year + years - 1)
    n = axis.n_hours
    t_days = (axis.timestamps() - np.datetime64(f"{start_year}-01-01T00", "h")).astype(np.int64) / 24.0
    hour = axis.hour_of_day()

    glon, glat = grid.coordinates()
    x = (glon - glon.mean()) / max(np.ptp(glon), 1e-9) * 2
    y = (glat - glat.mean()) / max(np.ptp(glat), 1e-9) * 2

    weather = _ar1(rng, n, 0.985, 0.38)
    gradient = _ar1(rng, n, 0.97, 0.18)
    local = _ar1(rng, n, 0.9, 0.06, size=grid.size)
    seasonal = 0.18 * np.cos(2 * np.pi * (t_days - 15) / 365.25)
    diurnal = 0.10 * np.cos(2 * np.pi * (hour - 15) / 24.0)
    base = np.log(5.6 + 1.2 * y + rng.uniform(-0.3, 0.3, grid.size))
    log50 = (base[None, :] + (weather + seasonal + diurnal)[:, None]
             + gradient[:, None] * x[None, :] + local)
    v50 = np.exp(log50)
    shear = rng.uniform(0.12, 0.22, grid.size)[None, :] * (1 + 0.3 * np.cos(2 * np.pi * (hour - 3) / 24.0))[:, None]

    direction = np.deg2rad(250.0) + _ar1(rng, n, 0.99, 0.6)
    turn = rng.uniform(-0.15, 0.15, grid.size)
    angle = direction[:, None] + turn[None, :]
    data = np.empty((n, len(VARIABLES), grid.size))
    for height in (2, 10, 50):
        speed = v50 * (height / 50.0) ** shear
        data[:, VARIABLES.index(f"U{height}M")] = speed * np.cos(angle)
        data[:, VARIABLES.index(f"V{height}M")] = speed * np.sin(angle)
    data = np.round(data, 4)
    wind = WindField(grid, axis, data)

    lon_lo, lon_hi = grid.lon0, grid.lon0 + (grid.nlon - 1) * grid.dlon
    lat_lo, lat_hi = grid.lat0, grid.lat0 + (grid.nlat - 1) * grid.dlat
    plon = lon_lo + (lon_hi - lon_lo) * rng.uniform(0.05, 0.95, n_plants)
    plat = lat_lo + (lat_hi - lat_lo) * rng.beta(2.0, 1.0, n_plants) * 0.9 + 0.05 * (lat_hi - lat_lo)
    pcap = np.round(rng.uniform(5.0, 200.0, n_plants), 1)
    plants = PlantRegistry(np.round(plon, 4), np.round(plat, 4), pcap)

    clean = simulate_fleet(wind, plants).values
    noise = _ar1(rng, n, 0.7, obs_noise)
    observed = np.clip(clean + noise, 0.0, 1.0)
    return wind, plants, CapacityFactorSeries(axis, observed, "observed")

"""Regular lon/lat grids, wind-field storage and grid-point subsetting.

Grid points are indexed row-major: latitude rows, longitude columns,
``index = j * nlon + i`` for the point ``(lon0 + i*dlon, lat0 + j*dlat)``.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from enum import Enum

import numpy as np
import pandas as pd

from .errors import EmptySelection, MalformedRow, MissingColumn, NonConformingSpan
from .ingest import TimeAxis, _hourly_axis, format_hour, parse_hour

VARIABLES = ("U2M", "V2M", "U10M", "V10M", "U50M", "V50M")
EARTH_RADIUS_KM = 6371.0088

_COLUMN_RE = re.compile(r"^(U2M|V2M|U10M|V10M|U50M|V50M)_(-?\d+\.\d+)_(-?\d+\.\d+)$")


@dataclass(frozen=True)
class GridSpec:
    lon0: float
    lat0: float
    dlon: float
    dlat: float
    nlon: int
    nlat: int

    def __post_init__(self):
        if not (self.dlon > 0 and self.dlat > 0):
            raise ValueError("grid spacing must be positive")
        if self.nlon < 1 or self.nlat < 1:
            raise ValueError("grid must have at least one point per axis")

    @property
    def size(self):
        return self.nlon * self.nlat

    def point(self, i, j):
        return self.lon0 + i * self.dlon, self.lat0 + j * self.dlat

    def lons(self):
        return self.lon0 + np.arange(self.nlon) * self.dlon

    def lats(self):
        return self.lat0 + np.arange(self.nlat) * self.dlat

    def coordinates(self):
        """(lon, lat) arrays of length ``size`` in row-major order."""
        lon, lat = np.meshgrid(self.lons(), self.lats())
        return lon.ravel(), lat.ravel()

    def column_names(self, indices=None):
        lon, lat = self.coordinates()
        if indices is None:
            indices = np.arange(self.size)
        return [
            f"{var}_{lon[k]:.3f}_{lat[k]:.3f}" for var in VARIABLES for k in indices
        ]


def grid_from_bbox(lon_min, lon_max, lat_min, lat_max, dlon, dlat, tol=1e-9):
    """Grid covering a bounding box inclusive of both edges.

    >>> grid_from_bbox(5, 15.625, 46, 56, 0.625, 0.5).size
    378
    """
    if lon_min > lon_max or lat_min > lat_max:
        raise NonConformingSpan("bounding box minimum exceeds maximum")
    if dlon <= 0 or dlat <= 0:
        raise NonConformingSpan("grid spacing must be positive")
    counts = []
    for lo, hi, step, name in ((lon_min, lon_max, dlon, "lon"), (lat_min, lat_max, dlat, "lat")):
        steps = (hi - lo) / step
        if abs(steps - round(steps)) > tol:
            raise NonConformingSpan(
                f"{name} span {hi - lo} is not a multiple of spacing {step}"
            )
        counts.append(int(round(steps)) + 1)
    return GridSpec(float(lon_min), float(lat_min), float(dlon), float(dlat), *counts)


def haversine_km(lon1, lat1, lon2, lat2):
    lon1, lat1, lon2, lat2 = (np.radians(np.asarray(a, dtype=np.float64)) for a in (lon1, lat1, lon2, lat2))
    a = (
        np.sin((lat2 - lat1) / 2) ** 2
        + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2
    )
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


@dataclass(frozen=True)
class WindField:
    """Hourly wind components on a grid.

    ``data`` has shape ``(n_hours, 6, grid.size)``; variable order follows
    :data:`VARIABLES`.
    """

    grid: GridSpec
    axis: TimeAxis
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        expected = (self.axis.n_hours, len(VARIABLES), self.grid.size)
        if data.shape != expected:
            raise ValueError(f"wind data has shape {data.shape}, expected {expected}")
        if not np.all(np.isfinite(data)):
            raise ValueError("wind data must be finite")
        if data.flags.writeable:
            data = data.copy()
            data.setflags(write=False)
        object.__setattr__(self, "data", data)

    def variable(self, name):
        return self.data[:, VARIABLES.index(name), :]

    def speed(self, height):
        """Wind speed magnitude at 2, 10 or 50 m, shape (n_hours, grid.size)."""
        u = self.variable(f"U{height}M")
        v = self.variable(f"V{height}M")
        return np.hypot(u, v)

    def window(self, axis):
        if not self.axis.covers(axis):
            raise KeyError("requested window is not covered by the wind field")
        first = self.axis.index_of(axis.start) if axis.n_hours else 0
        return WindField(self.grid, axis, self.data[first:first + axis.n_hours])


class Strategy(str, Enum):
    ALL = "ALL"
    K_NEAREST = "K_NEAREST"
    CAPACITY_QUARTILE = "CAPACITY_QUARTILE"


@dataclass(frozen=True)
class SubsetSelection:
    strategy: Strategy
    indices: tuple
    grid: GridSpec

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if not idx:
            raise EmptySelection("selection is empty")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("selection indices must be strictly increasing")
        if idx[0] < 0 or idx[-1] >= self.grid.size:
            raise IndexError("selection index outside the grid")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "strategy", Strategy(self.strategy))

    def __len__(self):
        return len(self.indices)

    def coordinates(self):
        lon, lat = self.grid.coordinates()
        idx = np.array(self.indices)
        return lon[idx], lat[idx]


def select_all(grid):
    return SubsetSelection(Strategy.ALL, tuple(range(grid.size)), grid)


def _ranked_points(grid, lon, lat):
    """Grid indices ordered by distance from (lon, lat); ties by index."""
    glon, glat = grid.coordinates()
    d = haversine_km(lon, lat, glon, glat)
    return np.argsort(d, kind="stable")


def nearest_point(grid, lon, lat):
    return int(_ranked_points(grid, lon, lat)[0])


def select_k_nearest(grid, plants, k=4):
    """Union of each plant's ``k`` nearest grid points."""
    if k < 1:
        raise ValueError("k must be at least 1")
    k = min(int(k), grid.size)
    glon, glat = grid.coordinates()
    keep = np.zeros(grid.size, dtype=bool)
    # unique sites only; duplicates cannot change the union
    sites = np.unique(np.column_stack([plants.lon, plants.lat]), axis=0)
    for lon, lat in sites:
        d = haversine_km(lon, lat, glon, glat)
        keep[np.argsort(d, kind="stable")[:k]] = True
    return SubsetSelection(Strategy.K_NEAREST, tuple(np.flatnonzero(keep)), grid)


def assign_capacity(grid, plants):
    """Installed capacity per grid point, each plant fed to its nearest point."""
    glon, glat = grid.coordinates()
    caps = np.zeros(grid.size)
    for lon, lat, c in zip(plants.lon, plants.lat, plants.capacity):
        d = haversine_km(lon, lat, glon, glat)
        caps[int(np.argmin(d))] += c
    return caps


def select_capacity_quartile(grid, plants):
    """Grid points whose assigned capacity lies strictly above the third quartile.

    The quartile is taken over capacity-bearing points only, with linear
    interpolation between order statistics.
    """
    caps = assign_capacity(grid, plants)
    bearing = caps[caps > 0]
    if len(np.unique(bearing)) < 2:
        raise EmptySelection("need at least two distinct nonzero grid-point capacities")
    q3 = np.quantile(bearing, 0.75, method="linear")
    chosen = np.flatnonzero(caps > q3)
    if len(chosen) == 0:
        raise EmptySelection("no grid point lies strictly above the third quartile")
    return SubsetSelection(Strategy.CAPACITY_QUARTILE, tuple(chosen), grid)


def select(variant, grid, plants=None, k=4):
    """Selection for a model variant name (``mlm1``, ``mlm2``, ``mlm3``)."""
    variant = variant.lower()
    if variant == "mlm1":
        return select_all(grid)
    if plants is None:
        raise ValueError(f"variant {variant} needs a plant registry")
    if variant == "mlm2":
        return select_k_nearest(grid, plants, k)
    if variant == "mlm3":
        return select_capacity_quartile(grid, plants)
    raise ValueError(f"unknown variant {variant!r}")


def infer_grid(columns, tol=1e-6):
    """Recover the GridSpec from wind CSV column names."""
    lons, lats = set(), set()
    for name in columns:
        m = _COLUMN_RE.match(name)
        if m:
            lons.add(float(m.group(2)))
            lats.add(float(m.group(3)))
    if not lons:
        raise MissingColumn(f"{VARIABLES[0]}_<lon>_<lat>")
    lons, lats = sorted(lons), sorted(lats)

    def spacing(vals):
        if len(vals) == 1:
            return 1.0
        steps = np.diff(vals)
        step = float(np.min(steps))
        n = (vals[-1] - vals[0]) / step
        # column names round to 3 decimals, so spacing is recovered from the span
        step = (vals[-1] - vals[0]) / round(n)
        if np.any(np.abs(np.diff(vals) / step - np.round(np.diff(vals) / step)) > 1e-2):
            raise NonConformingSpan("wind columns do not form a regular grid")
        return step

    dlon, dlat = spacing(lons), spacing(lats)
    return GridSpec(
        lons[0], lats[0], dlon, dlat,
        int(round((lons[-1] - lons[0]) / dlon)) + 1,
        int(round((lats[-1] - lats[0]) / dlat)) + 1,
    )


def _locate_bad_row(path, n_columns):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for fields in reader:
            if len(fields) != n_columns:
                raise MalformedRow(reader.line_num, f"expected {n_columns} fields")
            try:
                parse_hour(fields[0])
                vals = [float(f) for f in fields[1:]]
            except ValueError as exc:
                raise MalformedRow(reader.line_num, str(exc)) from None
            if not all(np.isfinite(vals)):
                raise MalformedRow(reader.line_num, "non-finite value")
    raise MalformedRow(0, "unreadable wind file")


def read_wind_header(path):
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), None)
    if not header or header[0].strip() != "timestamp":
        raise MalformedRow(1, "wind file must start with a 'timestamp' column")
    return [h.strip() for h in header]


def load_wind_csv(path, grid=None):
    """Load a wide wind CSV into a :class:`WindField`.

    When ``grid`` is omitted it is inferred from the column names.
    """
    header = read_wind_header(path)
    if grid is None:
        grid = infer_grid(header[1:])
    wanted = grid.column_names()
    position = {name: i for i, name in enumerate(header)}
    for name in wanted:
        if name not in position:
            raise MissingColumn(name)
    try:
        frame = pd.read_csv(path, dtype={"timestamp": str}, float_precision="round_trip")
    except (pd.errors.ParserError, ValueError):
        _locate_bad_row(path, len(header))
    if len(frame.columns) != len(header):
        _locate_bad_row(path, len(header))
    block = frame[wanted]
    if not all(np.issubdtype(dt, np.number) for dt in block.dtypes):
        _locate_bad_row(path, len(header))
    values = block.to_numpy(dtype=np.float64)
    if not np.all(np.isfinite(values)):
        _locate_bad_row(path, len(header))
    stamps = []
    for offset, text in enumerate(frame["timestamp"]):
        try:
            stamps.append(parse_hour(str(text)))
        except ValueError as exc:
            raise MalformedRow(offset + 2, str(exc)) from None
    axis = _hourly_axis(stamps, list(range(2, len(stamps) + 2)))
    data = values.reshape(len(stamps), len(VARIABLES), grid.size)
    return WindField(grid, axis, data)


def write_wind_csv(path, field, float_format="%.4f"):
    cols = field.grid.column_names()
    frame = pd.DataFrame(
        field.data.reshape(field.axis.n_hours, -1), columns=cols
    )
    frame.insert(0, "timestamp", [format_hour(t) for t in field.axis.timestamps()])
    frame.to_csv(path, index=False, float_format=float_format, lineterminator="\n")

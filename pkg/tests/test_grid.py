import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from windsynth import grid, ingest
from windsynth.errors import EmptySelection, MalformedRow, MissingColumn, NonConformingSpan, NonContiguousAxis

from conftest import write_text


def naive_haversine(lon1, lat1, lon2, lat2, r=6371.0088):
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp, dl = p2 - p1, math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * r * math.asin(math.sqrt(a))


def brute_nearest(g, lon, lat, k):
    pts = []
    for j in range(g.nlat):
        for i in range(g.nlon):
            x, y = g.point(i, j)
            pts.append((naive_haversine(lon, lat, x, y), j * g.nlon + i))
    pts.sort()
    return [idx for _, idx in pts[:k]]


def test_germany_box_has_378_points():
    g = grid.grid_from_bbox(5, 15.625, 46, 56, 0.625, 0.5)
    assert (g.nlon, g.nlat, g.size) == (18, 21, 378)
    assert len(grid.select_all(g)) == 378


def test_degenerate_and_nonconforming_boxes():
    assert grid.grid_from_bbox(5, 5, 46, 46, 0.625, 0.5).size == 1
    with pytest.raises(NonConformingSpan):
        grid.grid_from_bbox(5, 15.7, 46, 56, 0.625, 0.5)


def test_point_is_row_major():
    g = grid.GridSpec(5, 46, 0.625, 0.5, 3, 2)
    lon, lat = g.coordinates()
    for j, i in itertools.product(range(2), range(3)):
        assert (lon[j * 3 + i], lat[j * 3 + i]) == g.point(i, j)


def test_haversine_matches_scalar_oracle():
    rng = np.random.default_rng(0)
    for _ in range(50):
        a = rng.uniform([-180, -80, -180, -80], [180, 80, 180, 80])
        assert grid.haversine_km(*a) == pytest.approx(naive_haversine(*a), rel=1e-12)


def test_select_small_grids():
    assert grid.select_all(grid.GridSpec(5, 46, 1, 1, 1, 1)).indices == (0,)
    assert grid.select_all(grid.GridSpec(5, 46, 1, 1, 2, 2)).indices == (0, 1, 2, 3)


def test_inside_cell_gives_four_corners():
    g = grid.GridSpec(5, 46, 0.625, 0.5, 4, 4)
    one = ingest.PlantRegistry([5.9], [46.7], [1.0])
    assert grid.select_k_nearest(g, one, 4).indices == (5, 6, 9, 10)
    two = ingest.PlantRegistry([5.9, 5.7], [46.7, 46.8], [1.0, 2.0])
    assert grid.select_k_nearest(g, two, 4).indices == (5, 6, 9, 10)


def test_k_clamps_to_grid_size():
    g = grid.GridSpec(5, 46, 0.625, 0.5, 2, 2)
    plants = ingest.PlantRegistry([5.3], [46.2], [1.0])
    assert grid.select_k_nearest(g, plants, 10).indices == (0, 1, 2, 3)


@settings(max_examples=60, deadline=None)
@given(
    nlon=st.integers(1, 12), nlat=st.integers(1, 12), k=st.integers(1, 6),
    sites=st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=6),
)
def test_k_nearest_union_matches_brute_force(nlon, nlat, k, sites):
    g = grid.GridSpec(5, 46, 0.625, 0.5, nlon, nlat)
    lon = [5 + a * (nlon - 1) * 0.625 for a, _ in sites]
    lat = [46 + b * (nlat - 1) * 0.5 for _, b in sites]
    plants = ingest.PlantRegistry(lon, lat, [1.0] * len(sites))
    expected = sorted(set().union(*(brute_nearest(g, x, y, min(k, g.size)) for x, y in zip(lon, lat))))
    sel = grid.select_k_nearest(g, plants, k)
    assert list(sel.indices) == expected
    assert len(sel) <= k * len(plants)
    # order and duplicate rows do not matter
    rev = ingest.PlantRegistry(lon[::-1] + lon, lat[::-1] + lat, [2.0] * (2 * len(sites)))
    assert grid.select_k_nearest(g, rev, k).indices == sel.indices


def test_nearest_assignment_exhaustive_50x50():
    g = grid.GridSpec(5, 46, 0.625, 0.5, 50, 50)
    rng = np.random.default_rng(4)
    lon = rng.uniform(5, 5 + 49 * 0.625, 40)
    lat = rng.uniform(46, 46 + 49 * 0.5, 40)
    caps = grid.assign_capacity(g, ingest.PlantRegistry(lon, lat, np.ones(40)))
    expected = np.zeros(g.size)
    for x, y in zip(lon, lat):
        expected[brute_nearest(g, x, y, 1)[0]] += 1
    assert np.array_equal(caps, expected)


def type7(values, p):
    v = sorted(values)
    h = p * (len(v) - 1)
    lo = math.floor(h)
    hi = min(lo + 1, len(v) - 1)
    return v[lo] + (h - lo) * (v[hi] - v[lo])


def test_capacity_quartile_keeps_points_above_q3():
    g = grid.GridSpec(5, 46, 1.0, 1.0, 2, 2)
    plants = ingest.PlantRegistry([5, 6, 5, 6], [46, 46, 47, 47], [1, 2, 3, 4])
    assert type7([1, 2, 3, 4], 0.75) == 3.25
    assert grid.select_capacity_quartile(g, plants).indices == (3,)


def test_capacity_quartile_random_vs_oracle():
    rng = np.random.default_rng(5)
    g = grid.GridSpec(5, 46, 0.625, 0.5, 8, 8)
    for _ in range(20):
        n = int(rng.integers(3, 30))
        plants = ingest.PlantRegistry(rng.uniform(5, 9.375, n), rng.uniform(46, 49.5, n), rng.uniform(0.5, 5, n))
        caps = grid.assign_capacity(g, plants)
        bearing = [c for c in caps if c > 0]
        if len(set(bearing)) < 2:
            continue
        q3 = type7(bearing, 0.75)
        expected = tuple(i for i, c in enumerate(caps) if c > q3)
        assert grid.select_capacity_quartile(g, plants).indices == expected


def test_capacity_quartile_single_point_is_empty():
    g = grid.GridSpec(5, 46, 1.0, 1.0, 2, 2)
    plants = ingest.PlantRegistry([5.1, 5.2], [46.1, 46.0], [1, 7])
    with pytest.raises(EmptySelection):
        grid.select_capacity_quartile(g, plants)


def test_selection_invariants():
    g = grid.GridSpec(5, 46, 1, 1, 2, 2)
    with pytest.raises(EmptySelection):
        grid.SubsetSelection(grid.Strategy.ALL, (), g)
    with pytest.raises(ValueError):
        grid.SubsetSelection(grid.Strategy.ALL, (1, 0), g)
    with pytest.raises(IndexError):
        grid.SubsetSelection(grid.Strategy.ALL, (4,), g)


def _wind_text(g, hours, rng, drop=None):
    cols = [c for c in g.column_names() if c != drop]
    lines = ["timestamp," + ",".join(cols)]
    for h in range(hours):
        lines.append(f"2010-01-01T{h:02d}:00Z," + ",".join(f"{v:.4f}" for v in rng.normal(size=len(cols))))
    return "\n".join(lines) + "\n"


def test_column_names_format():
    g = grid.GridSpec(5, 46, 0.625, 0.5, 2, 1)
    assert g.column_names()[:3] == ["U2M_5.000_46.000", "U2M_5.625_46.000", "V2M_5.000_46.000"]


def test_load_one_point_two_hours(tmp_path):
    g = grid.GridSpec(5, 46, 0.625, 0.5, 1, 1)
    path = write_text(tmp_path / "w.csv", _wind_text(g, 2, np.random.default_rng(0)))
    f = grid.load_wind_csv(path, g)
    assert f.data.size == 12 and f.grid == g
    # one point carries no spacing information; only its origin is inferred
    inferred = grid.load_wind_csv(path).grid
    assert (inferred.lon0, inferred.lat0, inferred.size) == (5, 46, 1)


def test_load_378_points_24_hours(tmp_path):
    g = grid.grid_from_bbox(5, 15.625, 46, 56, 0.625, 0.5)
    f = grid.load_wind_csv(write_text(tmp_path / "w.csv", _wind_text(g, 24, np.random.default_rng(0))), g)
    assert f.data.size == 54432
    assert f.grid.size == 378


def test_load_values_variable_major(tmp_path):
    g = grid.GridSpec(5, 46, 0.625, 0.5, 2, 2)
    rng = np.random.default_rng(3)
    text = _wind_text(g, 3, rng)
    f = grid.load_wind_csv(write_text(tmp_path / "w.csv", text))
    rows = [line.split(",") for line in text.splitlines()]
    header = rows[0]
    for t in range(3):
        for v, var in enumerate(grid.VARIABLES):
            for p in range(4):
                name = g.column_names()[v * 4 + p]
                assert f.data[t, v, p] == float(rows[t + 1][header.index(name)])


def test_load_errors(tmp_path):
    g = grid.GridSpec(5, 46, 0.625, 0.5, 1, 1)
    rng = np.random.default_rng(0)
    with pytest.raises(MissingColumn) as exc:
        grid.load_wind_csv(write_text(tmp_path / "a.csv", _wind_text(g, 2, rng, drop="V50M_5.000_46.000")), g)
    assert "V50M_5.000_46.000" in str(exc.value)
    text = _wind_text(g, 3, rng).splitlines()
    bad = text[:2] + [text[2].rsplit(",", 1)[0] + ",oops"] + text[3:]
    with pytest.raises(MalformedRow) as exc:
        grid.load_wind_csv(write_text(tmp_path / "b.csv", "\n".join(bad) + "\n"))
    assert exc.value.line == 3
    gap = [text[0], text[1], text[3]]
    with pytest.raises(NonContiguousAxis):
        grid.load_wind_csv(write_text(tmp_path / "c.csv", "\n".join(gap) + "\n"))


def test_write_then_load(tmp_path, tiny_field):
    grid.write_wind_csv(tmp_path / "w.csv", tiny_field)
    back = grid.load_wind_csv(tmp_path / "w.csv")
    assert back.grid == tiny_field.grid and back.axis == tiny_field.axis
    np.testing.assert_allclose(back.data, tiny_field.data, atol=5e-5)


def test_speed_is_component_magnitude(tiny_field):
    d = tiny_field.data
    np.testing.assert_array_equal(tiny_field.speed(10), np.hypot(d[:, 2], d[:, 3]))

import datetime as dt

import numpy as np
import pytest
from sklearn.utils.estimator_checks import check_transformer_general

from windsynth import features, grid, ingest
from windsynth.errors import AxisMismatch


def _axis(start, n):
    return ingest.TimeAxis(np.datetime64(start, "h"), n)


def test_first_hour_of_2010_is_a_friday_in_january():
    d = features.date_dummies(_axis("2010-01-01T00", 1))
    row = dict(zip(d.columns, d.data[0]))
    ones = sorted(k for k, v in row.items() if v == 1)
    assert ones == ["dow_fri", "hour_00", "month_01"]
    assert sum(row.values()) == 3 and len(row) == 43


def test_dummies_against_calendar_oracle():
    axis = _axis("2011-12-31T18", 24 * 9)
    d = features.date_dummies(axis)
    base = dt.datetime(2011, 12, 31, 18)
    names = ("mon", "tue", "wed", "thu", "fri", "sat", "sun")
    for k in range(axis.n_hours):
        t = base + dt.timedelta(hours=k)
        expected = {f"hour_{t.hour:02d}", f"dow_{names[t.weekday()]}", f"month_{t.month:02d}"}
        got = {c for c, v in zip(d.columns, d.data[k]) if v == 1}
        assert got == expected
    assert np.all(d.data.sum(axis=1) == 3)


def test_each_hour_once_per_day():
    d = features.date_dummies(_axis("2013-06-10T00", 24))
    assert np.all(d.data[:, :24].sum(axis=0) == 1)


def test_assemble_one_point(tiny_field):
    sel = grid.SubsetSelection(grid.Strategy.ALL, (2,), tiny_field.grid)
    fm = features.assemble(tiny_field, sel, _axis("2010-01-01T00", 2))
    assert fm.n_columns == 49
    assert fm.data.shape == (2, 49)
    # variable-major wind block, then dummies
    for t in range(2):
        for v in range(6):
            assert fm.data[t, v] == tiny_field.data[t, v, 2]
    assert fm.columns[:2] == ("U2M_5.000_46.500", "V2M_5.000_46.500")
    assert fm.columns[6:] == features.DUMMY_COLUMNS


def test_assemble_selection_order(tiny_field):
    sel = grid.SubsetSelection(grid.Strategy.ALL, (1, 3), tiny_field.grid)
    fm = features.assemble(tiny_field, sel)
    expected = np.column_stack([tiny_field.data[:, v, p] for v in range(6) for p in (1, 3)])
    np.testing.assert_array_equal(fm.data[:, :12], expected)


def test_column_count_for_206_points():
    g = grid.grid_from_bbox(5, 15.625, 46, 56, 0.625, 0.5)
    axis = _axis("2010-01-01T00", 2)
    field = grid.WindField(g, axis, np.ones((2, 6, g.size)))
    sel = grid.SubsetSelection(grid.Strategy.K_NEAREST, tuple(range(0, 378))[:206], g)
    assert features.assemble(field, sel).n_columns == 1279


def test_assemble_rejects_uncovered_axis(tiny_field):
    sel = grid.select_all(tiny_field.grid)
    with pytest.raises(AxisMismatch):
        features.assemble(tiny_field, sel, _axis("2010-01-01T01", 3))


def test_assemble_is_deterministic(small_scenario):
    wind, plants, _ = small_scenario
    sel = grid.select_k_nearest(wind.grid, plants)
    a = features.assemble(wind, sel).data
    b = features.assemble(wind, sel).data
    assert a.tobytes() == b.tobytes()


def test_scaling_hand_values():
    p = features.fit_scaling(np.array([[1.0], [2.0], [3.0]]))
    assert (p.mean[0], p.range[0]) == (2.0, 2.0)
    np.testing.assert_array_equal(features.apply_scaling(np.array([[1.0], [2.0], [3.0]]), p)[:, 0], [-0.5, 0, 0.5])
    const = features.fit_scaling(np.array([[5.0], [5.0]]))
    assert (const.mean[0], const.range[0]) == (5.0, 0.0)
    assert np.all(features.apply_scaling(np.array([[5.0], [7.0]]), const) == 0)


def test_dummy_column_scaling():
    d = features.date_dummies(_axis("2010-01-01T00", 48))
    p = features.fit_scaling(d)
    assert 0 < p.mean[0] < 1 and p.range[0] == 1


def test_fit_uses_only_selected_rows():
    x = np.array([[0.0], [10.0], [1.0], [3.0]])
    p = features.fit_scaling(x, rows=np.array([False, False, True, True]))
    assert (p.mean[0], p.range[0]) == (2.0, 2.0)


def test_round_trip_and_unit_span():
    rng = np.random.default_rng(0)
    x = rng.normal(3, 7, size=(200, 9))
    p = features.fit_scaling(x)
    s = features.apply_scaling(x, p)
    assert np.max(np.abs(features.invert_scaling(s, p) - x)) < 1e-12
    np.testing.assert_allclose(s.max(axis=0) - s.min(axis=0), 1.0, rtol=0, atol=1e-15)
    assert np.all(s.min(axis=0) >= -1)


def test_dummy_sum_survives_scaling_linearly():
    d = features.date_dummies(_axis("2010-01-01T00", 24 * 40))
    p = features.fit_scaling(d)
    s = features.apply_scaling(d, p).data
    recovered = (s * p.range + p.mean).sum(axis=1)
    np.testing.assert_allclose(recovered, 3.0, atol=1e-12)


def test_range_scaler_estimator():
    check_transformer_general("RangeScaler", features.RangeScaler())
    rng = np.random.default_rng(1)
    x = rng.normal(size=(30, 4))
    sc = features.RangeScaler().fit(x)
    np.testing.assert_allclose(sc.inverse_transform(sc.transform(x)), x, atol=1e-12)

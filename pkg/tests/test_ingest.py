import numpy as np
import pytest

from windsynth import ingest
from windsynth.errors import (
    EmptyRegistry, MalformedRow, MissingCapacityDate, NegativeValue, NonContiguousAxis,
    NonContiguousDates, ZeroCapacity,
)

from conftest import write_text


def test_two_row_generation_file(tmp_path):
    p = write_text(tmp_path / "g.csv", "timestamp,generation_mwh\n2010-01-01T00:00Z,5300\n2010-01-01T01:00Z,5400\n")
    gen = ingest.parse_generation_csv(p)
    assert gen.axis.n_hours == 2
    assert gen.values.tolist() == [5300.0, 5400.0]
    assert gen.axis.start == np.datetime64("2010-01-01T00", "h")


def test_missing_hour_is_reported(tmp_path):
    rows = [f"2010-01-01T{h:02d}:00Z,1" for h in range(6) if h != 3]
    p = write_text(tmp_path / "g.csv", "timestamp,generation_mwh\n" + "\n".join(rows) + "\n")
    with pytest.raises(NonContiguousAxis) as exc:
        ingest.parse_generation_csv(p)
    assert "03:00" in str(exc.value)


def test_duplicate_hour_is_not_contiguous(tmp_path):
    p = write_text(tmp_path / "g.csv", "timestamp,generation_mwh\n2010-01-01T00:00Z,1\n2010-01-01T00:00Z,1\n")
    with pytest.raises(NonContiguousAxis):
        ingest.parse_generation_csv(p)


@pytest.mark.parametrize("row, line", [
    ("2010-01-01T00:00Z", 2),
    ("2010-01-01T00:30Z,5", 2),
    ("2010-01-01T00:00Z,abc", 2),
    ("2010-01-01T00:00Z,nan", 2),
])
def test_malformed_rows_name_the_line(tmp_path, row, line):
    p = write_text(tmp_path / "g.csv", "timestamp,generation_mwh\n" + row + "\n")
    with pytest.raises(MalformedRow) as exc:
        ingest.parse_generation_csv(p)
    assert exc.value.line == line


def test_negative_generation(tmp_path):
    p = write_text(tmp_path / "g.csv", "timestamp,generation_mwh\n2010-01-01T00:00Z,1\n2010-01-01T01:00Z,-2\n")
    with pytest.raises(NegativeValue) as exc:
        ingest.parse_generation_csv(p)
    assert exc.value.line == 3


def test_wrong_header(tmp_path):
    p = write_text(tmp_path / "g.csv", "time,gen\n2010-01-01T00:00Z,1\n")
    with pytest.raises(MalformedRow) as exc:
        ingest.parse_generation_csv(p)
    assert exc.value.line == 1


def test_seven_year_axis_length():
    # 2557 days including the 2012 and 2016 leap days
    axis = ingest.TimeAxis.from_years(2010, 2016)
    assert axis.n_hours == 61368 == 2557 * 24
    assert ingest.format_hour(axis.end) == "2016-12-31T23:00Z"


def test_calendar_fields_match_datetime():
    import datetime as dt
    axis = ingest.TimeAxis(np.datetime64("2011-12-30T20", "h"), 60)
    base = dt.datetime(2011, 12, 30, 20)
    for k in range(60):
        t = base + dt.timedelta(hours=k)
        assert axis.hour_of_day()[k] == t.hour
        assert axis.day_of_week()[k] == t.weekday()
        assert axis.month()[k] == t.month
        assert axis.year()[k] == t.year


def test_capacity_and_plants(tmp_path):
    cap = ingest.parse_capacity_csv(write_text(tmp_path / "c.csv", "date,capacity_mw\n2010-01-01,26000\n2010-01-02,26010\n"))
    assert cap.values.tolist() == [26000.0, 26010.0]
    plants = ingest.parse_plants_csv(write_text(tmp_path / "p.csv", "lon,lat,capacity_mw\n13.4,52.5,2.0\n"))
    assert len(plants) == 1


def test_capacity_gap(tmp_path):
    p = write_text(tmp_path / "c.csv", "date,capacity_mw\n2010-01-01,1\n2010-01-03,1\n")
    with pytest.raises(NonContiguousDates):
        ingest.parse_capacity_csv(p)


def test_plants_negative_capacity_and_empty(tmp_path):
    with pytest.raises(MalformedRow):
        ingest.parse_plants_csv(write_text(tmp_path / "p.csv", "lon,lat,capacity_mw\n13.4,52.5,-1\n"))
    with pytest.raises(EmptyRegistry):
        ingest.parse_plants_csv(write_text(tmp_path / "q.csv", "lon,lat,capacity_mw\n"))


def _gen(values, start="2010-01-01T00"):
    axis = ingest.TimeAxis(np.datetime64(start, "h"), len(values))
    return ingest.GenerationSeries(axis, values)


def test_cf_single_division():
    gen = _gen([5300.0])
    cap = ingest.CapacitySeries(np.array(["2010-01-01"], dtype="datetime64[D]"), [53000.0])
    cf = ingest.to_capacity_factors(gen, cap)
    assert cf.values[0] == pytest.approx(0.1, rel=1e-15)
    assert cf.axis == gen.axis


def test_cf_uses_utc_date_per_hour():
    gen = _gen([10.0] * 48)
    cap = ingest.CapacitySeries(np.array(["2010-01-01", "2010-01-02"], dtype="datetime64[D]"), [100.0, 50.0])
    cf = ingest.to_capacity_factors(gen, cap).values
    assert np.all(cf[:24] == 0.1) and np.all(cf[24:] == 0.2)


def test_cf_zeros_and_errors():
    gen = _gen([0.0] * 24)
    cap = ingest.CapacitySeries(np.array(["2010-01-01"], dtype="datetime64[D]"), [5.0])
    assert np.all(ingest.to_capacity_factors(gen, cap).values == 0)
    gen = _gen([1.0] * 24, "2010-03-01T00")
    cap = ingest.CapacitySeries(np.array(["2010-02-28"], dtype="datetime64[D]"), [5.0])
    with pytest.raises(MissingCapacityDate):
        ingest.to_capacity_factors(gen, cap)
    with pytest.raises(ZeroCapacity):
        ingest.to_capacity_factors(_gen([1.0]), ingest.CapacitySeries(np.array(["2010-01-01"], dtype="datetime64[D]"), [0.0]))


def test_cf_round_trip_random():
    rng = np.random.default_rng(1)
    gen = _gen(rng.uniform(0, 5e4, 24 * 30))
    days = np.arange(np.datetime64("2010-01-01"), np.datetime64("2010-01-31"))
    cap = ingest.CapacitySeries(days, rng.uniform(2e4, 6e4, 30))
    cf = ingest.to_capacity_factors(gen, cap)
    back = cf.values * np.repeat(cap.values, 24)
    np.testing.assert_allclose(back, gen.values, rtol=1e-12)


def test_series_are_read_only_copies():
    src = np.array([0.1, 0.2])
    s = ingest.CapacityFactorSeries(ingest.TimeAxis(np.datetime64("2010-01-01T00", "h"), 2), src)
    src[0] = 9
    assert s.values[0] == 0.1
    with pytest.raises(ValueError):
        s.values[0] = 1


def test_writers_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    axis = ingest.TimeAxis(np.datetime64("2012-02-28T00", "h"), 72)
    cf = ingest.CapacityFactorSeries(axis, rng.uniform(-0.01, 1, 72))
    ingest.write_cf_csv(tmp_path / "cf.csv", cf)
    back = ingest.parse_cf_csv(tmp_path / "cf.csv")
    assert back.axis == axis and np.array_equal(back.values, cf.values)
    plants = ingest.PlantRegistry([5.1, 6.2], [46.3, 47.4], [2.5, 3.0])
    ingest.write_plants_csv(tmp_path / "p.csv", plants)
    p2 = ingest.parse_plants_csv(tmp_path / "p.csv")
    assert np.array_equal(p2.lon, plants.lon) and np.array_equal(p2.capacity, plants.capacity)

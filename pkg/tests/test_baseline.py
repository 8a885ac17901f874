import math

import numpy as np
import pytest

from windsynth import baseline, grid, ingest, quality
from windsynth.errors import OutsideGrid

CURVE = baseline.PowerCurve.from_points([(3, 0), (12, 1), (25, 1), (25.01, 0)])


def field_from_speeds(g, axis, s10, s50):
    """Field whose 10 m and 50 m magnitudes equal s10/s50 (all wind from the west)."""
    data = np.zeros((axis.n_hours, 6, g.size))
    data[:, 0] = s10
    data[:, 2] = s10
    data[:, 4] = s50
    return grid.WindField(g, axis, data)


def _axis(n):
    return ingest.TimeAxis(np.datetime64("2010-01-01T00", "h"), n)


def test_curve_lookup():
    assert baseline.apply_curve(CURVE, 2.0) == 0
    assert baseline.apply_curve(CURVE, 7.5) == pytest.approx(0.5, abs=1e-15)
    assert baseline.apply_curve(CURVE, 30.0) == 0
    assert baseline.apply_curve(CURVE, 20.0) == 1


def test_curve_validation():
    with pytest.raises(ValueError):
        baseline.PowerCurve([0, 1], [0.1, 0.2])
    with pytest.raises(ValueError):
        baseline.PowerCurve([0, 0], [0, 1])
    with pytest.raises(ValueError):
        baseline.PowerCurve([0, 1], [0, 1.5])


def test_curve_csv_round_trip(tmp_path):
    c = baseline.default_power_curve()
    baseline.write_curve_csv(tmp_path / "c.csv", c)
    back = baseline.parse_curve_csv(tmp_path / "c.csv")
    assert np.array_equal(back.speeds, c.speeds) and np.array_equal(back.fractions, c.fractions)


def test_hub_height_hand_values():
    assert baseline.hub_height_speed(4.0, 6.0, 50) == 6.0
    assert baseline.hub_height_speed(5.0, 5.0, 100) == 5.0
    alpha = math.log(1.5) / math.log(5)
    assert alpha == pytest.approx(0.2519, abs=1e-4)
    assert baseline.hub_height_speed(4.0, 6.0, 100) == pytest.approx(6 * 2 ** alpha, rel=1e-14)
    # the rounded worked value 7.146 is 2e-3 high of the exact 7.1448
    assert baseline.hub_height_speed(4.0, 6.0, 100) == pytest.approx(7.146, abs=2e-3)
    # calm 10 m speed falls back to the 50 m speed
    assert baseline.hub_height_speed(0.0, 6.0, 100) == 6.0


def test_hub_height_monotone_when_shear_positive():
    h = np.linspace(20, 200, 30)
    v = np.array([baseline.hub_height_speed(4.0, 6.0, x) for x in h])
    assert np.all(np.diff(v) > 0)


def test_bilinear_interpolation():
    g = grid.GridSpec(5, 46, 1.0, 1.0, 2, 2)
    axis = _axis(1)
    f = field_from_speeds(g, axis, np.array([1.0, 1.0, 3.0, 3.0]), np.array([2.0, 4.0, 6.0, 8.0]))
    v10, v50 = baseline.interpolate_wind(f, (5.5, 46.5), 0)
    assert v10 == pytest.approx(2.0, abs=1e-12) and v50 == pytest.approx(5.0, abs=1e-12)
    v10, v50 = baseline.interpolate_wind(f, (6.0, 46.0), 0)
    assert (v10, v50) == (1.0, 4.0)
    with pytest.raises(OutsideGrid):
        baseline.interpolate_wind(f, (7.0, 46.0), 0)


def test_magnitudes_are_interpolated_not_components():
    g = grid.GridSpec(5, 46, 1.0, 1.0, 2, 1)
    data = np.zeros((1, 6, 2))
    data[0, 2] = [4.0, -4.0]  # opposing U10M at the two points
    f = grid.WindField(g, _axis(1), data)
    v10, _ = baseline.interpolate_wind(f, (5.5, 46.0), 0)
    assert v10 == pytest.approx(4.0)


def test_simulate_fleet_simple_cases():
    g = grid.GridSpec(5, 46, 1.0, 1.0, 2, 2)
    axis = _axis(3)
    f = field_from_speeds(g, axis, 12.0, 12.0)
    one = ingest.PlantRegistry([5.5], [46.5], [3.0])
    cfg = baseline.BaselineConfig(hub_height=50, curve=CURVE)
    assert np.all(baseline.simulate_fleet(f, one, cfg).values == 1.0)
    # fractions 0.2 and 0.6 at speeds 4.8 and 8.4 m/s
    f = field_from_speeds(g, axis, np.array([4.8, 8.4, 4.8, 8.4]), np.array([4.8, 8.4, 4.8, 8.4]))
    two = ingest.PlantRegistry([5.0, 6.0], [46.0, 46.0], [2.0, 2.0])
    np.testing.assert_allclose(baseline.simulate_fleet(f, two, cfg).values, 0.4, atol=1e-12)


def test_mean_match_hits_target(small_scenario):
    wind, plants, obs = small_scenario
    cfg = baseline.BaselineConfig(bias_mode=baseline.BiasMode.MEAN_MATCH)
    shifted = ingest.CapacityFactorSeries(obs.axis, np.clip(obs.values * 0.8, 0, 1))
    sim = baseline.simulate_fleet(wind, plants, cfg, obs=shifted)
    assert abs(sim.values.mean() - shifted.values.mean()) < 1e-6
    assert np.all((sim.values >= 0) & (sim.values <= 1))


def test_mean_match_preserves_speed_order(small_scenario):
    wind, plants, obs = small_scenario
    cfg = baseline.BaselineConfig(bias_mode=baseline.BiasMode.MEAN_MATCH)
    hub = baseline._hub_speeds(wind, plants, cfg)
    scale = baseline.fleet_speed_scale(wind, plants, cfg, obs)
    fleet = hub @ plants.capacity
    assert np.array_equal(np.argsort(fleet, kind="stable"), np.argsort(fleet * scale, kind="stable"))


def test_synth_scenario_properties(small_scenario):
    wind, plants, obs = small_scenario
    again = baseline.synth_scenario(3, 1, baseline.default_synth_grid(4, 4), n_plants=8)
    assert again[0].data.tobytes() == wind.data.tobytes()
    assert again[1].lon.tobytes() == plants.lon.tobytes()
    assert again[2].values.tobytes() == obs.values.tobytes()
    assert np.all((obs.values >= 0) & (obs.values <= 1))
    assert np.all(wind.speed(10) > 0)
    obs.validate_observed()
    means = [d["mean"] for d in quality.diurnal_stats(obs, ingest.CapacityFactorSeries(obs.axis, np.zeros(len(obs))))]
    assert max(means) - min(means) > 0.01
    assert wind.axis.n_hours == 8760 and len(plants) == 8


def test_synth_scenario_fits_in_grid(small_scenario):
    wind, plants, _ = small_scenario
    baseline.interpolate_speeds(wind, plants.lon, plants.lat)


def test_power_curve_estimator(small_scenario):
    wind, plants, obs = small_scenario
    model = baseline.PowerCurveModel(plants=plants, bias_mode="MEAN_MATCH").fit(wind, obs)
    pred = model.predict(wind)
    assert abs(pred.mean() - obs.values.mean()) < 1e-6

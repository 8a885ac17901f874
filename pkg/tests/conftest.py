import numpy as np
import pytest

from windsynth import baseline, grid, ingest


def write_text(path, text):
    path.write_text(text, encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def small_scenario():
    """One year on a 4x4 grid: cheap enough for unit tests."""
    g = baseline.default_synth_grid(4, 4)
    return baseline.synth_scenario(3, 1, g, n_plants=8)


@pytest.fixture
def tiny_field():
    """2x2 grid, 3 hours, distinct values everywhere."""
    g = grid.GridSpec(5.0, 46.0, 0.625, 0.5, 2, 2)
    axis = ingest.TimeAxis(np.datetime64("2010-01-01T00", "h"), 3)
    data = np.arange(3 * 6 * 4, dtype=float).reshape(3, 6, 4) / 10 + 0.5
    return grid.WindField(g, axis, data)


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def verdict(request):
    """Record one acceptance line, then assert it."""
    lines = request.config.stash[_ACCEPTANCE]

    def record(n, ok, desc, measured, tolerance):
        line = f"ACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {desc} ({measured} vs {tolerance})"
        lines.append((n, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines, key=lambda t: t[0]):
            terminalreporter.write_line(line)

import numpy as np
import pytest
from hypothesis import given, strategies as st

from copguide.errors import SchemaError
from copguide.refpath import (
    GaitParams,
    ReferencePath,
    anticipatory_lookup,
    fixture_path,
    generate_gait_path,
    load_path,
    lookup,
    save_path,
)

from conftest import linear_path


def test_lookup_boundaries():
    path = generate_gait_path()
    assert lookup(path, 0.0) == (path.x[0], path.y[0])
    assert lookup(path, path.duration + 10) == (path.x[-1], path.y[-1])
    assert lookup(path, -3.0) == (path.x[0], path.y[0])


def test_lookup_two_point_path():
    path = ReferencePath(1.0, [0.0, 1.0], [0.0, 0.0])
    assert path.duration == 1.0
    assert lookup(path, 0.25) == (0.25, 0.0)


def test_anticipatory_lookup(ramp):
    assert anticipatory_lookup(ramp, 1.3, 0.0) == lookup(ramp, 1.3)
    assert anticipatory_lookup(ramp, ramp.duration, 2.0) == (ramp.x[-1], ramp.y[-1])
    # closed form 0.2 * (1 + 0.5)
    x, _ = anticipatory_lookup(ramp, 1.0, 0.5)
    assert x == pytest.approx(0.2 * 1.5, abs=1e-12)
    assert x == pytest.approx(lookup(ramp, 1.5)[0], abs=0)
    with pytest.raises(ValueError):
        anticipatory_lookup(ramp, 1.0, -0.1)


@given(st.floats(-1, 25), st.floats(0, 3))
def test_anticipation_is_shifted_lookup(t, t_a):
    path = generate_gait_path()
    assert anticipatory_lookup(path, t, t_a) == lookup(path, t + t_a)


@given(st.floats(-1, 25))
def test_scalar_and_vector_lookup_agree(t):
    path = generate_gait_path()
    xs, ys = path.lookup_many([t])
    x, y = path.lookup(t)
    assert x == pytest.approx(xs[0], abs=1e-12)
    assert y == pytest.approx(ys[0], abs=1e-12)


def test_lookup_continuity_at_grid_resolution():
    path = generate_gait_path()
    t = np.linspace(0, path.duration, 20001)
    x, y = path.lookup_many(t)
    step = np.hypot(np.diff(x), np.diff(y))
    # max reference speed is well under 1 m/s
    assert step.max() < 1.0 * (t[1] - t[0]) + 1e-12


def test_generate_zero_amplitude():
    path = generate_gait_path(GaitParams(ml_amplitude=0.0))
    assert np.all(path.y == 0.0)


def test_generate_step_count_and_end():
    p = GaitParams(path_length=3.0, step_length=0.3)
    path = generate_gait_path(p, 100.0)
    # count step boundaries: samples where progression restarts after a dwell
    t = path.times
    boundaries = np.flatnonzero(np.isclose(np.mod(t, p.step_period), 0.0, atol=1e-9))
    assert len(boundaries) - 1 == 10
    assert abs(path.x[-1] - 3.0) <= 0.3 / 100
    assert path.duration == pytest.approx(20.0)


def test_generate_windowed_increments():
    p = GaitParams(step_period=2.0)
    path = generate_gait_path(p, 100.0)
    inc = np.diff(path.x)
    for k in range(10):
        assert inc[200 * k : 200 * (k + 1)].sum() == pytest.approx(p.step_length, abs=1e-12)


def test_generate_shape_invariants():
    p = GaitParams()
    path = generate_gait_path(p, 100.0)
    assert np.all(np.diff(path.x) >= 0)
    assert np.max(np.abs(path.y)) == pytest.approx(p.ml_amplitude, abs=p.ml_amplitude * 1e-3)
    assert (path.x[0], path.y[0]) == (0.0, 0.0)
    # lateral extremes at mid single support
    assert path.y[100] == pytest.approx(p.ml_amplitude)
    assert path.y[300] == pytest.approx(-p.ml_amplitude)
    # dwell during double support
    assert path.x[200] == path.x[215] == pytest.approx(0.3)


def test_generate_partial_last_step():
    path = generate_gait_path(GaitParams(path_length=1.0, step_length=0.3))
    assert path.duration == pytest.approx(8.0)
    assert path.x[-1] == 1.0


@pytest.mark.parametrize(
    "kwargs",
    [{"step_length": 0}, {"step_period": -1}, {"path_length": 0}, {"double_support_fraction": 1.0}, {"ml_amplitude": -0.1}],
)
def test_gait_params_validation(kwargs):
    with pytest.raises(ValueError):
        GaitParams(**kwargs)


def test_path_invariants():
    with pytest.raises(ValueError):
        ReferencePath(100.0, [0.0], [0.0])
    with pytest.raises(ValueError):
        ReferencePath(0.0, [0.0, 1.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        ReferencePath(1.0, [0.0, np.nan], [0.0, 0.0])


def test_save_load_round_trip(tmp_path):
    path = generate_gait_path(GaitParams(ml_amplitude=0.07), 50.0)
    save_path(path, tmp_path / "p.csv")
    back = load_path(tmp_path / "p.csv")
    assert back.rate == path.rate
    assert back.x.tobytes() == path.x.tobytes()
    assert back.y.tobytes() == path.y.tobytes()


def test_load_rejects_single_point(tmp_path):
    f = tmp_path / "one.csv"
    f.write_text("# rate=100\nx,y\n0.0,0.0\n")
    with pytest.raises(SchemaError):
        load_path(f)


@pytest.mark.parametrize(
    "text",
    ["# rate=0\nx,y\n0,0\n1,0\n", "x,y\n0,0\n1,0\n", "# rate=10\n0,0\n1,abc\n", "# rate=10\n0,0,0\n1,0\n",
     "# rate=10\n# duration=5\n0,0\n1,0\n"],
)
def test_load_schema_errors(tmp_path, text):
    f = tmp_path / "bad.csv"
    f.write_text(text)
    with pytest.raises(SchemaError):
        load_path(f)


def test_shipped_fixture():
    f = fixture_path()
    path = load_path(f)
    header = {}
    for line in f.read_text().splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].partition("=")
            header[k.strip()] = float(v)
    n = len(path.x)
    assert header["duration"] == pytest.approx((n - 1) / header["rate"])
    assert path.duration == pytest.approx(header["duration"])
    assert path.x[-1] == pytest.approx(3.0)


def test_resampled_keeps_trajectory():
    path = linear_path(0.2, 5.0, 100.0)
    half = path.resampled(50.0)
    assert half.duration == pytest.approx(path.duration)
    assert half.lookup(1.23)[0] == pytest.approx(0.246, abs=1e-12)

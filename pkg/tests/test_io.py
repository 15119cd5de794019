import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from softkoop.core import ConfigError
from softkoop.io import (ExperimentConfig, SchemaError, TrajectoryParseError,
                         append_results_index, config_lines, load_config, load_trajectory,
                         moving_average, parse_config, save_trajectory)

HEADER = "t,x1,y1,z1,x2,y2,z2,x3,y3,z3,u1,u2"


def test_trajectory_roundtrip(tmp_path, rng):
    t = np.arange(6) * 0.5
    s, u = rng.normal(size=(6, 9)), rng.uniform(0, 1, (6, 2))
    path = tmp_path / "a.csv"
    save_trajectory(path, t, s, u)
    assert path.read_text().splitlines()[0] == HEADER
    t2, s2, u2 = load_trajectory(path)
    assert np.array_equal(t, t2) and np.array_equal(s, s2) and np.array_equal(u, u2)


def test_bad_cell_reports_line(tmp_path):
    row = ",".join(["0"] * 12)
    path = tmp_path / "b.csv"
    path.write_text(f"{HEADER}\n{row}\n0.5,nan" + ",0" * 10 + "\n")
    with pytest.raises(TrajectoryParseError) as info:
        load_trajectory(path)
    assert info.value.line == 3
    path.write_text(f"{HEADER}\n{row}\n{row}\n")
    with pytest.raises(TrajectoryParseError, match="increasing"):
        load_trajectory(path)


def test_bad_header(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text("t,x1\n0,0\n")
    with pytest.raises(SchemaError):
        load_trajectory(path)


def test_moving_average_examples():
    np.testing.assert_allclose(moving_average([1.0, 2.0, 3.0, 4.0, 5.0], 3),
                               [1.0, 2.0, 3.0, 4.0, 5.0])
    np.testing.assert_allclose(moving_average([0.0, 0.0, 3.0, 0.0, 0.0], 3),
                               [0.0, 1.0, 1.0, 1.0, 0.0])
    np.testing.assert_allclose(moving_average([0.0, 0.0, 5.0, 0.0, 0.0], 5),
                               [0.0, 5 / 3, 1.0, 5 / 3, 0.0])
    x = np.arange(7.0)
    np.testing.assert_array_equal(moving_average(x, 1), x)
    np.testing.assert_array_equal(moving_average(x, 4), moving_average(x, 3))


@given(arrays(float, (12, 2), elements=st.floats(-10, 10)),
       arrays(float, (12, 2), elements=st.floats(-10, 10)),
       st.integers(1, 9), st.floats(-3, 3))
def test_moving_average_linear(a, b, w, c):
    lhs = moving_average(a + c * b, w)
    rhs = moving_average(a, w) + c * moving_average(b, w)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)
    # constants pass through
    np.testing.assert_allclose(moving_average(np.full(12, c), w), c, atol=1e-12)


def test_config_examples():
    assert parse_config("") == ExperimentConfig()
    cfg = parse_config("H_p = 2  # shorter\nQ=1,2,3,4,5,6,7,8,9\n")
    assert cfg.H_p == 2 and cfg.mpc_config().Q == tuple(range(1, 10))
    for text, key in [("H_p=0", "H_p"), ("bogus=1", "bogus"), ("N_T=abc", "N_T"),
                      ("u_min=0.5", "u_min"), ("Q=1,2", "Q")]:
        with pytest.raises(ConfigError) as info:
            parse_config(text)
        assert info.value.key == key


def test_config_echo(tmp_path, caplog):
    path = tmp_path / "run.cfg"
    path.write_text("seed=4\n")
    with caplog.at_level("INFO"):
        cfg = load_config(path)
    assert cfg.seed == 4
    lines = config_lines(cfg)
    keys = [ln.split("=")[0] for ln in lines]
    assert len(keys) == len(set(keys)) and "seed=4" in lines
    assert sum("config " in r.getMessage() for r in caplog.records) == len(lines)


def test_results_index(tmp_path):
    path = tmp_path / "index.csv"
    append_results_index(path, {"a": 1, "b": 2})
    append_results_index(path, {"a": 3, "b": 4})
    assert path.read_text() == "a,b\n1,2\n3,4\n"

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ghostsim import ComplexField, ConfigError, Grid, IntensityMap
from ghostsim.errors import GridMismatchError
from ghostsim.io import (
    load_map_csv,
    read_field_csv,
    read_intensity_csv,
    read_matrix_csv,
    read_pgm,
    read_table_csv,
    write_field_csv,
    write_intensity_csv,
    write_matrix_csv,
    write_pgm,
    write_table_csv,
)

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@pytest.mark.parametrize("dims", [1, 2])
def test_intensity_round_trip_is_bit_exact(tmp_path, dims):
    g = Grid(16, 1.7e-6, dims)
    v = np.random.default_rng(0).exponential(size=g.shape) * 1e-3
    p = write_intensity_csv(tmp_path / "i.csv", IntensityMap(g, v), note="x")
    back = read_intensity_csv(p)
    assert back.grid == g
    assert np.array_equal(back.values, v)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(finite, finite), min_size=8, max_size=8))
def test_field_round_trip_is_bit_exact(tmp_path_factory, pairs):
    g = Grid(8, 3e-6)
    s = np.array([complex(a, b) for a, b in pairs])
    p = tmp_path_factory.mktemp("f") / "f.csv"
    write_field_csv(p, ComplexField(g, s, 532e-9))
    back = read_field_csv(p)
    assert np.array_equal(back.samples.view(np.float64), s.view(np.float64))
    assert back.wavelength == 532e-9


def test_field_round_trip_2d(tmp_path):
    g = Grid(8, 1e-6, 2)
    rng = np.random.default_rng(1)
    s = rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape)
    back = read_field_csv(write_field_csv(tmp_path / "f.csv", ComplexField(g, s, 633e-9)))
    assert np.array_equal(back.samples, s)


def test_matrix_round_trip(tmp_path):
    G = np.random.default_rng(2).normal(size=(5, 7))
    back, meta = read_matrix_csv(write_matrix_csv(tmp_path / "g.csv", G, frames=10))
    assert np.array_equal(back, G)
    assert meta["rows"] == "5" and meta["cols"] == "7" and meta["frames"] == "10"


def test_table_round_trip(tmp_path):
    cols = {"a": [0.1, 1e-300, -2.5], "label": ["x", "y", "z"], "k": [1, 2, 3]}
    back, meta = read_table_csv(write_table_csv(tmp_path / "t.csv", cols, key="source.d0"))
    assert np.array_equal(back["a"], np.array(cols["a"]))
    assert back["label"] == ["x", "y", "z"]
    assert np.array_equal(back["k"], [1.0, 2.0, 3.0])
    assert meta == {"key": "source.d0"}


def test_table_rejects_ragged_columns(tmp_path):
    with pytest.raises(ValueError):
        write_table_csv(tmp_path / "t.csv", {"a": [1.0], "b": [1.0, 2.0]})


def test_same_data_gives_identical_bytes(tmp_path):
    v = np.linspace(0, 1, 33)[:32]
    g = Grid(32, 1e-6)
    a = write_intensity_csv(tmp_path / "a.csv", IntensityMap(g, v))
    b = write_intensity_csv(tmp_path / "b.csv", IntensityMap(g, v))
    assert a.read_bytes() == b.read_bytes()


def test_pgm_round_trip_within_one_level(tmp_path):
    v = np.random.default_rng(3).uniform(2.0, 5.0, size=(6, 9))
    p = write_pgm(tmp_path / "m.pgm", v)
    assert (tmp_path / "m.pgm.scale.txt").exists()
    back, lo, hi = read_pgm(p)
    assert lo == v.min() and hi == v.max()
    assert np.max(np.abs(back - v)) <= (hi - lo) / 65535
    assert p.read_bytes().startswith(b"P5\n9 6\n65535\n")


def test_pgm_of_constant_and_1d_data(tmp_path):
    back, _, _ = read_pgm(write_pgm(tmp_path / "c.pgm", np.full(5, 2.0)))
    assert back.shape == (1, 5) and np.all(back == 2.0)


def test_pgm_clips_to_given_range(tmp_path):
    back, lo, hi = read_pgm(write_pgm(tmp_path / "c.pgm", [[-1.0, 0.5, 3.0]], vmin=0.0, vmax=1.0))
    assert np.allclose(back, [[0.0, 0.5, 1.0]], atol=1e-4)


def test_load_map_csv(tmp_path):
    g = Grid(8, 1e-6, 2)
    p = tmp_path / "m.csv"
    p.write_text("# phase map\n" + ",".join(["0.5"] * 8) + "\n")
    row = load_map_csv(p, g)
    assert row.shape == (8,) and np.all(row == 0.5)
    p.write_text("\n".join(",".join(["1"] * 8) for _ in range(8)) + "\n")
    assert load_map_csv(p, g).shape == (8, 8)


def test_load_map_csv_errors(tmp_path):
    g = Grid(8, 1e-6)
    p = tmp_path / "m.csv"
    p.write_text("# nothing\n")
    with pytest.raises(ConfigError):
        load_map_csv(p, g)
    p.write_text("1,2,3\n")
    with pytest.raises(GridMismatchError):
        load_map_csv(p, g)


def test_missing_grid_metadata(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("1.0,2.0\n")
    with pytest.raises(ConfigError):
        read_intensity_csv(p)

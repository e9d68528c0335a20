import numpy as np
import pytest

from skewlab import io
from skewlab.errors import InputError
from skewlab.ode import TrajectoryGrid


def test_csv_round_trip_is_exact(tmp_path, rng):
    g = TrajectoryGrid(0.0, 0.1, rng.normal(size=(11, 2)) * 1e-7)
    io.write_trajectory_csv(tmp_path / "t.csv", g, ["a", "b"])
    back = io.read_trajectory_csv(tmp_path / "t.csv")
    np.testing.assert_array_equal(back.states, g.states)
    header, _ = io.read_csv(tmp_path / "t.csv")
    assert header == ["time", "a", "b"]


def test_trj_round_trip(tmp_path, rng):
    g = TrajectoryGrid(0.5, 0.25, rng.normal(size=(7, 3)), "fast")
    io.write_trajectory_bin(tmp_path / "t.trj", g)
    blob = (tmp_path / "t.trj").read_bytes()
    assert blob[:4] == b"TRJ1" and len(blob) == 32 + 8 * 21
    back = io.read_trajectory_bin(tmp_path / "t.trj")
    assert (back.t0, back.dt, back.time_frame) == (0.5, 0.25, "fast")
    np.testing.assert_array_equal(back.states, g.states)


def test_bad_blocks_rejected(rng):
    g = TrajectoryGrid(0.0, 1.0, rng.normal(size=(3, 1)))
    blob = io.encode_trajectory(g)
    with pytest.raises(InputError):
        io.decode_trajectory(b"XXXX" + blob[4:])
    with pytest.raises(InputError):
        io.decode_trajectory(blob[:-8])
    with pytest.raises(InputError):
        io.decode_mu_samples(io.encode_mu_samples(np.ones((2, 3)))[:-1])


def test_mus_round_trip(tmp_path, rng):
    s = rng.normal(size=(5, 3))
    io.write_mu_samples(tmp_path / "m.mus", s)
    np.testing.assert_array_equal(io.read_mu_samples(tmp_path / "m.mus"), s)


def test_report_round_trip(tmp_path):
    items = {"a": 0.1, "flag": True, "mat": np.eye(2), "name": "lorenz"}
    io.write_report(tmp_path / "r.txt", items)
    back = io.read_report(tmp_path / "r.txt")
    assert back["a"] == 0.1 and back["flag"] is True and back["mat"] == [[1.0, 0.0], [0.0, 1.0]]
    assert back["name"] == "lorenz"


def test_atomic_write_leaves_no_temp(tmp_path):
    io.atomic_write(tmp_path / "x.bin", b"abc")
    assert [p.name for p in tmp_path.iterdir()] == ["x.bin"]
    assert io.sha256_file(tmp_path / "x.bin") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"

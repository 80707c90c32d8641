"""Trajectory dump round trips and the frozen binary layout."""

import struct

import numpy as np
import pytest

from marlab.nets import make_rng
from marlab.trajectory import MAGIC, TrajectoryWriter, read_trajectory


def make_episode(rng, n_steps=7, act_dims=(5, 2)):
    n = len(act_dims)
    steps = []
    for _ in range(n_steps):
        positions = rng.uniform(-1, 1, size=(n, 2))
        actions = [rng.uniform(-1, 1, size=d) for d in act_dims]
        rewards = rng.uniform(-5, 0, size=n)
        steps.append((positions, actions, rewards))
    return steps


@pytest.mark.parametrize("fmt,ext", [("csv", "csv"), ("binary", "bin")])
def test_round_trip_exact(tmp_path, fmt, ext):
    rng = make_rng(0)
    episode = make_episode(rng)
    path = tmp_path / f"ep.{ext}"
    with TrajectoryWriter(path, act_dims=(5, 2), fmt=fmt) as w:
        for positions, actions, rewards in episode:
            w.add(positions, actions, rewards)
    data = read_trajectory(path)
    assert data["steps"].tolist() == list(range(7))
    for t, (positions, actions, rewards) in enumerate(episode):
        np.testing.assert_array_equal(data["positions"][t], positions)
        for i, a in enumerate(actions):
            np.testing.assert_array_equal(data["actions"][i][t], a)
        np.testing.assert_array_equal(data["rewards"][t], rewards)


def test_binary_layout_is_the_documented_struct(tmp_path):
    path = tmp_path / "ep.bin"
    positions = np.array([[0.25, -0.5]])
    actions = [np.array([1.0, -1.0])]
    rewards = np.array([-3.0])
    with TrajectoryWriter(path, act_dims=(2,), fmt="binary") as w:
        w.add(positions, actions, rewards)
    expected = (
        MAGIC
        + struct.pack("<HH", 1, 1)       # version, n_agents
        + struct.pack("<1H", 2)          # action dims
        + struct.pack("<I", 0)           # step index
        + struct.pack("<5d", 0.25, -0.5, 1.0, -1.0, -3.0)
    )
    assert path.read_bytes() == expected


def test_csv_header_names_every_column(tmp_path):
    path = tmp_path / "ep.csv"
    with TrajectoryWriter(path, act_dims=(5, 2), fmt="csv") as w:
        pass
    header = path.read_text().strip()
    assert header == (
        "step,a0_px,a0_py,a1_px,a1_py,"
        "a0_f0,a0_f1,a0_f2,a0_f3,a0_f4,a1_f0,a1_f1,r0,r1"
    )


def test_writer_validates_shapes(tmp_path):
    w = TrajectoryWriter(tmp_path / "ep.csv", act_dims=(2,))
    with pytest.raises(ValueError):
        w.add(np.zeros((2, 2)), [np.zeros(2)], np.zeros(1))
    with pytest.raises(ValueError):
        w.add(np.zeros((1, 2)), [np.zeros(3)], np.zeros(1))
    with pytest.raises(ValueError):
        w.add(np.zeros((1, 2)), [np.zeros(2)], np.zeros(2))
    w.close()


def test_writer_rejects_unknown_format(tmp_path):
    with pytest.raises(ValueError):
        TrajectoryWriter(tmp_path / "x", act_dims=(2,), fmt="json")


def test_reader_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"nope" + b"\x00" * 16)
    with pytest.raises(ValueError):
        read_trajectory(bad)


def test_reader_rejects_truncated_binary(tmp_path):
    path = tmp_path / "ep.bin"
    with TrajectoryWriter(path, act_dims=(2,), fmt="binary") as w:
        w.add(np.zeros((1, 2)), [np.zeros(2)], np.zeros(1))
    blob = path.read_bytes()
    path.write_bytes(blob[:-3])
    with pytest.raises(ValueError):
        read_trajectory(path)


def test_empty_episode_round_trip(tmp_path):
    for fmt in ("csv", "binary"):
        path = tmp_path / f"empty_{fmt}"
        with TrajectoryWriter(path, act_dims=(2, 2), fmt=fmt):
            pass
        data = read_trajectory(path)
        assert data["positions"].shape == (0, 2, 2)
        assert data["rewards"].shape == (0, 2)

"""Per-episode trajectory dumps: one record per step, CSV or binary.

Record field order (both formats): step index, then agent positions in
agent order (px, py each), then action vectors in agent order, then
per-agent rewards.

CSV: header row names every column
  step, a{i}_px, a{i}_py ..., a{i}_f0, a{i}_f1, ... , r0, r1, ...
and floats are written with repr so parsing them back is exact.

Binary: little-endian throughout.
  magic  b"MLTJ"
  u16    format version (1)
  u16    number of agents
  u16[n] per-agent action dimensionality
  then fixed-size records until EOF:
  u32    step index
  f64[2n]      positions
  f64[sum(d)]  actions
  f64[n]       rewards
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"MLTJ"
VERSION = 1


class TrajectoryWriter:
    """Streams one episode to disk; use as a context manager or close()."""

    def __init__(self, path, act_dims, fmt="csv"):
        if fmt not in ("csv", "binary"):
            raise ValueError(f"format must be csv or binary, got {fmt!r}")
        self.path = str(path)
        self.act_dims = [int(d) for d in act_dims]
        self.fmt = fmt
        self.n_agents = len(self.act_dims)
        self._steps = 0
        if fmt == "csv":
            self._fh = open(self.path, "w")
            cols = ["step"]
            for i in range(self.n_agents):
                cols += [f"a{i}_px", f"a{i}_py"]
            for i, d in enumerate(self.act_dims):
                cols += [f"a{i}_f{k}" for k in range(d)]
            cols += [f"r{i}" for i in range(self.n_agents)]
            self._fh.write(",".join(cols) + "\n")
        else:
            self._fh = open(self.path, "wb")
            self._fh.write(MAGIC)
            self._fh.write(struct.pack("<HH", VERSION, self.n_agents))
            self._fh.write(struct.pack(f"<{self.n_agents}H", *self.act_dims))

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def add(self, positions, actions, rewards):
        positions = np.asarray(positions, dtype=np.float64)
        rewards = np.asarray(rewards, dtype=np.float64)
        if positions.shape != (self.n_agents, 2):
            raise ValueError(f"positions must be ({self.n_agents}, 2)")
        if len(actions) != self.n_agents or rewards.shape != (self.n_agents,):
            raise ValueError("actions/rewards must have one entry per agent")
        acts = [np.asarray(a, dtype=np.float64) for a in actions]
        for a, d in zip(acts, self.act_dims):
            if a.shape != (d,):
                raise ValueError(f"action shape {a.shape} does not match dim {d}")
        flat = np.concatenate([positions.ravel()] + acts + [rewards])
        if self.fmt == "csv":
            self._fh.write(
                ",".join([str(self._steps)] + [repr(float(v)) for v in flat]) + "\n"
            )
        else:
            self._fh.write(struct.pack("<I", self._steps))
            self._fh.write(flat.astype("<f8").tobytes())
        self._steps += 1

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def read_trajectory(path):
    """Read either format back; returns dict of arrays.

    keys: steps (T,), positions (T, n, 2), actions: list of (T, d_i),
    rewards (T, n).
    """
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        return _read_binary(path)
    return _read_csv(path)


def _split_columns(steps, table, n_agents, act_dims):
    t = len(steps)
    pos = table[:, : 2 * n_agents].reshape(t, n_agents, 2)
    off = 2 * n_agents
    actions = []
    for d in act_dims:
        actions.append(table[:, off:off + d])
        off += d
    rewards = table[:, off:off + n_agents]
    return {
        "steps": np.asarray(steps, dtype=np.int64),
        "positions": pos,
        "actions": actions,
        "rewards": rewards,
    }


def _read_binary(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise ValueError("not a trajectory file (bad magic)")
    version, n_agents = struct.unpack_from("<HH", blob, 4)
    if version != VERSION:
        raise ValueError(f"unsupported trajectory version {version}")
    act_dims = list(struct.unpack_from(f"<{n_agents}H", blob, 8))
    off = 8 + 2 * n_agents
    row = 2 * n_agents + sum(act_dims) + n_agents
    rec = 4 + 8 * row
    body = blob[off:]
    if len(body) % rec != 0:
        raise ValueError("truncated trajectory file")
    steps, rows = [], []
    for start in range(0, len(body), rec):
        steps.append(struct.unpack_from("<I", body, start)[0])
        rows.append(np.frombuffer(body, dtype="<f8", count=row, offset=start + 4))
    table = np.array(rows) if rows else np.zeros((0, row))
    return _split_columns(steps, table, n_agents, act_dims)


def _read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if not header or header[0] != "step":
            raise ValueError("not a trajectory file (bad header)")
        n_agents = sum(1 for c in header if c.endswith("_px"))
        act_dims = [
            sum(1 for c in header if c.startswith(f"a{i}_f")) for i in range(n_agents)
        ]
        steps, rows = [], []
        for line in fh:
            parts = line.strip().split(",")
            steps.append(int(parts[0]))
            rows.append([float(v) for v in parts[1:]])
    width = 2 * n_agents + sum(act_dims) + n_agents
    table = np.array(rows, dtype=np.float64) if rows else np.zeros((0, width))
    return _split_columns(steps, table, n_agents, act_dims)

#!/usr/bin/env python3
"""Dump one trained episode as a trajectory file and print it.

Usage: render_trajectory.py [scenario] [out_dir]

Trains briefly, then records every step of one evaluation episode
(positions, actions, rewards) to a CSV trajectory and echoes a compact
text rendering, one line per step.
"""

import sys
import tempfile
from pathlib import Path

import numpy as np

from marlab import TrainConfig, Trainer, read_trajectory

scenario = sys.argv[1] if len(sys.argv) > 1 else "keep_away"
out_dir = Path(sys.argv[2]) if len(sys.argv) > 2 else Path(tempfile.mkdtemp())
out_dir.mkdir(parents=True, exist_ok=True)

trainer = Trainer(TrainConfig(episodes=60), scenario, betas=0.0, seed=2)
trainer.run(50)
trainer.run(1, trajectory_dir=str(out_dir), trajectory_format="csv")

path = sorted(out_dir.glob("episode_*.csv"))[-1]
traj = read_trajectory(path)
print(f"wrote {path} ({len(traj['steps'])} steps)")
for t, (pos, rew) in enumerate(zip(traj["positions"], traj["rewards"])):
    flat = " ".join(f"({p[0]:+.2f},{p[1]:+.2f})" for p in pos)
    print(f"t={t:02d}  agents {flat}  rewards {np.round(rew, 3)}")

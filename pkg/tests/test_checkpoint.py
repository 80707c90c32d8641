"""Checkpoint blob: bit-exact state round trip and resume equivalence."""

import json

import numpy as np
import pytest

from marlab.checkpoint import load_checkpoint, save_checkpoint
from marlab.maddpg import TrainConfig, Trainer


def cfg_small(**over):
    kw = dict(batch_size=8, hidden=12, warmup_factor=1, buffer_capacity=5000,
              episodes=4, max_episode_length=10, ensemble_k=2)
    kw.update(over)
    return TrainConfig(**kw)


def trained_trainer(episodes=5, seed=3):
    tr = Trainer(cfg_small(), "keep_away", betas=[1e-3, 0.0], seed=seed)
    tr.run(episodes=episodes)
    return tr


def test_round_trip_restores_every_array_bitwise(tmp_path):
    tr = trained_trainer()
    path = tmp_path / "ckpt.npz"
    save_checkpoint(tr, path)
    back = load_checkpoint(path)

    assert back.scenario == tr.scenario
    assert back.betas == tr.betas
    assert back.episode == tr.episode
    assert back.global_step == tr.global_step
    assert back.cfg == tr.cfg
    for a, b in zip(tr.agents, back.agents):
        assert a.active == b.active and a.beta == b.beta
        for na, nb in zip(a.actors + a.actor_targets, b.actors + b.actor_targets):
            np.testing.assert_array_equal(na.params, nb.params)
        np.testing.assert_array_equal(a.critic.params, b.critic.params)
        np.testing.assert_array_equal(a.critic_target.params, b.critic_target.params)
        for oa, ob in zip(a.actor_opts + [a.critic_opt], b.actor_opts + [b.critic_opt]):
            assert oa.t == ob.t
            np.testing.assert_array_equal(oa.m, ob.m)
            np.testing.assert_array_equal(oa.v, ob.v)
        np.testing.assert_array_equal(a.window._buf, b.window._buf)
        assert len(a.window) == len(b.window)
        assert a.marginal.initialized == b.marginal.initialized
        np.testing.assert_array_equal(a.marginal.gaussian.mean, b.marginal.gaussian.mean)
        np.testing.assert_array_equal(a.marginal.gaussian.var, b.marginal.gaussian.var)
    assert tr.buffer.count == back.buffer.count
    n = tr.buffer.count
    np.testing.assert_array_equal(tr.buffer._x[:n], back.buffer._x[:n])
    np.testing.assert_array_equal(tr.buffer._xn[:n], back.buffer._xn[:n])
    # rng streams continue identically
    assert tr.env_rng.uniform() == back.env_rng.uniform()
    assert tr.sample_rng.uniform() == back.sample_rng.uniform()
    for ga, gb in zip(tr.noise_rngs + tr.ensemble_rngs,
                      back.noise_rngs + back.ensemble_rngs):
        assert ga.uniform() == gb.uniform()


def test_resume_produces_identical_training(tmp_path):
    tr = trained_trainer(episodes=5, seed=4)
    path = tmp_path / "ckpt.npz"
    save_checkpoint(tr, path)
    back = load_checkpoint(path)
    logs_a = tr.run(episodes=4)
    logs_b = back.run(episodes=4)
    for la, lb in zip(logs_a, logs_b):
        assert la.episode == lb.episode
        np.testing.assert_array_equal(la.rewards, lb.rewards)
        np.testing.assert_array_equal(la.mi, lb.mi)
    for a, b in zip(tr.agents, back.agents):
        np.testing.assert_array_equal(a.critic.params, b.critic.params)
        for na, nb in zip(a.actors, b.actors):
            np.testing.assert_array_equal(na.params, nb.params)


def test_save_without_buffer(tmp_path):
    tr = trained_trainer()
    path = tmp_path / "ckpt.npz"
    save_checkpoint(tr, path, include_buffer=False)
    back = load_checkpoint(path)
    assert back.buffer.count == 0
    np.testing.assert_array_equal(back.agents[0].critic.params,
                                  tr.agents[0].critic.params)


def test_version_mismatch_rejected(tmp_path):
    tr = trained_trainer(episodes=1)
    path = tmp_path / "ckpt.npz"
    save_checkpoint(tr, path)
    with np.load(path, allow_pickle=False) as blob:
        arrays = {k: blob[k] for k in blob.files}
    meta = json.loads(str(arrays["meta"]))
    meta["format_version"] = 999
    arrays["meta"] = np.array(json.dumps(meta))
    np.savez(path, **arrays)
    with pytest.raises(ValueError):
        load_checkpoint(path)

"""Versioned training checkpoints with a bit-exact round trip.

One .npz blob holds every float64 state array (network parameters,
optimizer moments, marginal estimates, action windows, and optionally
the replay buffer) plus a JSON metadata entry (config, scenario, betas,
rng states, counters).  float64 bits survive save/load unchanged, so a
loaded trainer continues exactly where the saved one stopped; with
include_buffer=False the replay contents are dropped and continued
training will resample from whatever the buffer then holds.
"""

from __future__ import annotations

import json
from dataclasses import asdict

import numpy as np

from .gaussians import DiagGaussian
from .maddpg import TrainConfig, Trainer

FORMAT_VERSION = 1


def _rng_state(rng):
    return rng.bit_generator.state


def _set_rng_state(rng, state):
    rng.bit_generator.state = state


def save_checkpoint(trainer, path, include_buffer=True):
    """Write the trainer's full state to path (.npz)."""
    arrays = {}
    meta = {
        "format_version": FORMAT_VERSION,
        "scenario": trainer.scenario,
        "betas": trainer.betas,
        "seed": trainer.seed,
        "episode": trainer.episode,
        "global_step": trainer.global_step,
        "cfg": asdict(trainer.cfg),
        "rng": {
            "env": _rng_state(trainer.env_rng),
            "sample": _rng_state(trainer.sample_rng),
            "noise": [_rng_state(g) for g in trainer.noise_rngs],
            "ensemble": [_rng_state(g) for g in trainer.ensemble_rngs],
        },
        "agents": [],
    }
    for i, agent in enumerate(trainer.agents):
        agent_meta = {
            "active": agent.active,
            "beta": agent.beta,
            "actor_opt_t": [opt.t for opt in agent.actor_opts],
            "critic_opt_t": agent.critic_opt.t,
            "marginal_initialized": agent.marginal.initialized,
            "window_count": agent.window._count,
            "window_head": agent.window._head,
        }
        meta["agents"].append(agent_meta)
        for k, (actor, target, opt) in enumerate(
            zip(agent.actors, agent.actor_targets, agent.actor_opts)
        ):
            arrays[f"agent{i}/actor{k}"] = actor.params
            arrays[f"agent{i}/actor_target{k}"] = target.params
            arrays[f"agent{i}/actor_opt{k}/m"] = opt.m
            arrays[f"agent{i}/actor_opt{k}/v"] = opt.v
        arrays[f"agent{i}/critic"] = agent.critic.params
        arrays[f"agent{i}/critic_target"] = agent.critic_target.params
        arrays[f"agent{i}/critic_opt/m"] = agent.critic_opt.m
        arrays[f"agent{i}/critic_opt/v"] = agent.critic_opt.v
        arrays[f"agent{i}/window"] = agent.window._buf
        if agent.marginal.initialized:
            arrays[f"agent{i}/marginal"] = np.stack(
                [agent.marginal.gaussian.mean, agent.marginal.gaussian.var]
            )
    meta["buffer"] = {"included": bool(include_buffer), "count": trainer.buffer.count,
                      "head": trainer.buffer._head}
    if include_buffer and trainer.buffer.count:
        buf = trainer.buffer
        arrays["buffer/x"] = buf._x[: buf.count]
        arrays["buffer/a"] = buf._a[: buf.count]
        arrays["buffer/r"] = buf._r[: buf.count]
        arrays["buffer/xn"] = buf._xn[: buf.count]
    arrays["meta"] = np.array(json.dumps(meta))
    np.savez(path, **arrays)


def load_checkpoint(path):
    """Rebuild a Trainer from a checkpoint written by save_checkpoint."""
    with np.load(path, allow_pickle=False) as blob:
        arrays = {k: blob[k] for k in blob.files}
    meta = json.loads(str(arrays.pop("meta")))
    if meta.get("format_version") != FORMAT_VERSION:
        raise ValueError(
            f"unsupported checkpoint version {meta.get('format_version')!r}"
        )
    cfg = TrainConfig(**meta["cfg"])
    trainer = Trainer(cfg, meta["scenario"], betas=meta["betas"], seed=meta["seed"])
    trainer.episode = meta["episode"]
    trainer.global_step = meta["global_step"]
    _set_rng_state(trainer.env_rng, meta["rng"]["env"])
    _set_rng_state(trainer.sample_rng, meta["rng"]["sample"])
    for g, s in zip(trainer.noise_rngs, meta["rng"]["noise"]):
        _set_rng_state(g, s)
    for g, s in zip(trainer.ensemble_rngs, meta["rng"]["ensemble"]):
        _set_rng_state(g, s)

    for i, (agent, agent_meta) in enumerate(zip(trainer.agents, meta["agents"])):
        agent.active = agent_meta["active"]
        agent.beta = agent_meta["beta"]
        for k, (actor, target, opt) in enumerate(
            zip(agent.actors, agent.actor_targets, agent.actor_opts)
        ):
            actor.params[:] = arrays[f"agent{i}/actor{k}"]
            target.params[:] = arrays[f"agent{i}/actor_target{k}"]
            opt.m[:] = arrays[f"agent{i}/actor_opt{k}/m"]
            opt.v[:] = arrays[f"agent{i}/actor_opt{k}/v"]
            opt.t = agent_meta["actor_opt_t"][k]
        agent.critic.params[:] = arrays[f"agent{i}/critic"]
        agent.critic_target.params[:] = arrays[f"agent{i}/critic_target"]
        agent.critic_opt.m[:] = arrays[f"agent{i}/critic_opt/m"]
        agent.critic_opt.v[:] = arrays[f"agent{i}/critic_opt/v"]
        agent.critic_opt.t = agent_meta["critic_opt_t"]
        agent.window._buf[:] = arrays[f"agent{i}/window"]
        agent.window._count = agent_meta["window_count"]
        agent.window._head = agent_meta["window_head"]
        if agent_meta["marginal_initialized"]:
            pair = arrays[f"agent{i}/marginal"]
            agent.marginal.gaussian = DiagGaussian(pair[0], pair[1])

    buf_meta = meta["buffer"]
    if buf_meta["included"] and buf_meta["count"]:
        count = buf_meta["count"]
        buf = trainer.buffer
        buf.reserve(count)
        buf._x[:count] = arrays["buffer/x"]
        buf._a[:count] = arrays["buffer/a"]
        buf._r[:count] = arrays["buffer/r"]
        buf._xn[:count] = arrays["buffer/xn"]
        buf.count = count
        buf._head = buf_meta["head"]
    return trainer

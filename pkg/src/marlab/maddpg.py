"""Multi-agent deterministic actor-critic training with centralized critics.

Each agent holds a deterministic actor over its own observation and a
centralized critic over the concatenated observations and actions of
everyone.  Critic targets bootstrap through target networks:

    y = (r_i - beta_i * I) + gamma * Q'_i(x', a'_1 .. a'_N),
    a'_j from agent j's TARGET actor at its next observation.

I is the policy mutual-information estimate for agent i, one scalar per
minibatch computed from agent i's own action columns, broadcast across
the batch.  beta_i = 0 recovers the plain centralized-critic target
exactly; beta_i > 0 charges the agent for the information its actions
carry about state.  The penalty only ever enters the critic target:
logged episode rewards are raw environment rewards.

Actors update along the sampled deterministic policy gradient: the
critic's input gradient with respect to agent i's action slot is
backpropagated through the live actor on the same minibatch, other
agents' actions taken from the batch as sampled.

Each agent's actor is an ensemble of K members (K = 1 by default); one
member is drawn uniformly at the start of every episode, acts for the
whole episode, and receives that episode's actor updates.

Per-step loop order: act -> env step -> store transition -> push action
to window -> update running marginal -> per-agent (sample minibatch ->
batch moments -> MI -> target -> critic update -> actor update) -> soft
target updates.  Updates start once the buffer holds warmup_factor *
batch_size transitions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaussians import (
    ActionWindow,
    MarginalEstimate,
    policy_mutual_information,
    running_update,
    window_snapshot_moments,
)
from .nets import Adam, DenseNet, gaussian_noise, soft_update, spawn_rngs
from .particles import SCENARIOS, action_dims, make_scenario, observe_all, step
from .trajectory import TrajectoryWriter


@dataclass
class TrainConfig:
    gamma: float = 0.95
    tau: float = 0.01
    batch_size: int = 256
    ensemble_k: int = 1
    buffer_capacity: int = 1_000_000
    noise_scale: float = 0.3        # initial exploration std
    noise_final: float = 0.05       # reached after the first half of training
    episodes: int = 2000
    max_episode_length: int = 25
    warmup_factor: int = 4          # updates start at warmup_factor * batch_size
    steps_per_update: int = 1
    actor_lr: float = 0.01
    critic_lr: float = 0.01
    alpha: float = 0.001            # running-marginal blend rate
    window_capacity: int = 100
    hidden: int = 64                # two hidden layers this wide
    compute_mi: bool = True         # False skips the estimator (betas must be 0)

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must be in (0, 1], got {self.tau}")
        if self.batch_size < 2:
            raise ValueError(f"batch size must be >= 2, got {self.batch_size}")
        if self.ensemble_k < 1:
            raise ValueError(f"ensemble size must be >= 1, got {self.ensemble_k}")
        if self.episodes < 1 or self.max_episode_length < 1:
            raise ValueError("episodes and max_episode_length must be >= 1")
        if self.buffer_capacity < self.batch_size:
            raise ValueError("buffer capacity smaller than one minibatch")
        if self.noise_scale < 0 or self.noise_final < 0:
            raise ValueError("noise scales must be >= 0")


def noise_schedule(cfg, episode):
    """Linear decay from noise_scale to noise_final over the first half
    of training, constant afterwards."""
    half = max(1, cfg.episodes // 2)
    if episode >= half:
        return cfg.noise_final
    frac = episode / half
    return cfg.noise_scale + (cfg.noise_final - cfg.noise_scale) * frac


class JointLayout:
    """Column offsets of each agent's block in concatenated vectors."""

    def __init__(self, obs_dims, act_dims):
        self.obs_dims = list(obs_dims)
        self.act_dims = list(act_dims)
        self.obs_total = sum(obs_dims)
        self.act_total = sum(act_dims)
        self.obs_slices, self.act_slices = [], []
        o = a = 0
        for d in obs_dims:
            self.obs_slices.append(slice(o, o + d))
            o += d
        for d in act_dims:
            self.act_slices.append(slice(a, a + d))
            a += d


class ReplayBuffer:
    """Uniform-sampling FIFO transition store.

    One transition is one row of a single contiguous table holding
    [x | a | r | xn] side by side, so a minibatch is a single row
    gather.  Storage grows geometrically up to capacity so short runs
    never pay for the full allocation.
    """

    def __init__(self, capacity, obs_total, act_total, n_agents):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self._dims = (obs_total, act_total, n_agents, obs_total)
        self._row = obs_total + act_total + n_agents + obs_total
        splits = np.cumsum((obs_total, act_total, n_agents))
        self._cols = [slice(0, splits[0]), slice(splits[0], splits[1]),
                      slice(splits[1], splits[2]), slice(splits[2], self._row)]
        self._table = None
        self._alloc = 0
        self.count = 0
        self._head = 0
        self._batch = None  # reused gather destination, keyed by sample size

    def _ensure(self):
        if self._alloc > self._head or self._alloc == self.capacity:
            return
        new = min(self.capacity, max(4096, self._alloc * 2))
        grown = np.empty((new, self._row))
        if self._alloc:
            grown[: self._alloc] = self._table
        self._table = grown
        self._alloc = new

    def _col(self, k):
        if self._table is None:
            return np.empty((0, self._cols[k].stop - self._cols[k].start))
        return self._table[:, self._cols[k]]

    # column views over the transition table (x, a, r, xn)
    _x = property(lambda self: self._col(0))
    _a = property(lambda self: self._col(1))
    _r = property(lambda self: self._col(2))
    _xn = property(lambda self: self._col(3))

    def reserve(self, n):
        """Grow storage to hold at least n rows (bulk restore path)."""
        if n > self.capacity:
            raise ValueError(f"cannot reserve {n} rows, capacity {self.capacity}")
        while self._alloc < n:
            saved = self._head
            self._head = self._alloc  # make _ensure see a full allocation
            self._ensure()
            self._head = saved

    def add(self, x, a, r, xn):
        self._ensure()
        row = self._table[self._head]
        c = self._cols
        row[c[0]] = x
        row[c[1]] = a
        row[c[2]] = r
        row[c[3]] = xn
        self._head = (self._head + 1) % self.capacity
        if self.count < self.capacity:
            self.count += 1

    def batch_arrays(self, size):
        """A fresh (x, a, r, xn) destination for sample(out=...): four
        column views of one gather table."""
        table = np.empty((size, self._row))
        return tuple(table[:, sl] for sl in self._cols)

    def sample(self, rng, size, out=None):
        """size transitions drawn uniformly with replacement.

        Without out, the four returned arrays are owned by the buffer
        and overwritten by the next plain sample() call; copy them (or
        pass out=, a tuple from batch_arrays) to keep a batch alive.
        """
        if self.count == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, self.count, size=size)
        idx.sort()  # ascending gather is kinder to the cache; row order
        # within a minibatch is semantically irrelevant (means/sums only)
        if out is None:
            if self._batch is None or self._batch[0].shape[0] != size:
                self._batch = self.batch_arrays(size)
            out = self._batch
        dest = out[0].base
        if dest is None or dest.shape != (size, self._row):
            raise ValueError("out must come from batch_arrays(size)")
        # the four views share one base table: gather all columns at once
        # (indices are in range by construction; mode="clip" skips the
        # bounds-check temporary np.take makes under mode="raise")
        self._table[: self.count].take(idx, axis=0, out=dest, mode="clip")
        return out


class Agent:
    """Actor ensemble + centralized critic + information-penalty state."""

    def __init__(self, index, obs_dim, act_dim, obs_total, act_total, beta, cfg, rng):
        if beta < 0:
            raise ValueError(f"beta must be >= 0, got {beta}")
        self.index = index
        self.beta = float(beta)
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        h = cfg.hidden
        self.actors = [
            DenseNet((obs_dim, h, h, act_dim), ("relu", "relu", "tanh"), rng=rng)
            for _ in range(cfg.ensemble_k)
        ]
        self.critic = DenseNet(
            (obs_total + act_total, h, h, 1), ("relu", "relu", "identity"), rng=rng
        )
        self.actor_targets = [a.clone() for a in self.actors]
        self.critic_target = self.critic.clone()
        self.actor_opts = [Adam(a, cfg.actor_lr) for a in self.actors]
        self.critic_opt = Adam(self.critic, cfg.critic_lr)
        self.window = ActionWindow(act_dim, cfg.window_capacity)
        self.marginal = MarginalEstimate(cfg.alpha)
        self.active = 0

    @property
    def ensemble_k(self):
        return len(self.actors)

    @property
    def actor(self):
        """The episode-active ensemble member."""
        return self.actors[self.active]

    @property
    def actor_target(self):
        return self.actor_targets[self.active]

    @property
    def actor_opt(self):
        return self.actor_opts[self.active]


def select_action(agent, obs, noise_scale, rng):
    """tanh-bounded actor output plus gaussian noise, clipped to [-1,1]."""
    a = agent.actor.forward(obs)
    a = a + gaussian_noise(rng, a.size, noise_scale)
    np.clip(a, -1.0, 1.0, out=a)
    return a


def draw_ensemble_member(agent, rng):
    """Pick the episode's actor uniformly; consumes one draw even at K=1."""
    agent.active = int(rng.integers(agent.ensemble_k))
    return agent.active


def _fill_joint(out, left, layout):
    """out[:, :obs_total] = left, returning the action-column block."""
    out[:, : layout.obs_total] = left
    return out[:, layout.obs_total:]


def critic_target(batch, agents, i, mi_value, cfg, layout, scratch=None, a_next=None):
    """Penalized bootstrap target, next actions from TARGET actors.

    scratch, if given, is a reusable (batch, obs_total + act_total)
    array; the default allocates a fresh one.  a_next, if given, is the
    precomputed (batch, act_total) matrix of target-actor outputs at the
    next observations (the trainer evaluates each target actor once over
    all agents' batches); the default computes it here.
    """
    _, _, r, xn = batch
    n = xn.shape[0]
    if scratch is None:
        scratch = np.empty((n, layout.obs_total + layout.act_total))
    act_block = _fill_joint(scratch, xn, layout)
    if a_next is None:
        for j, ag in enumerate(agents):
            act_block[:, layout.act_slices[j]] = ag.actor_target.forward(
                xn[:, layout.obs_slices[j]]
            )
    else:
        act_block[:] = a_next
    agent = agents[i]
    q = agent.critic_target.forward(scratch)[:, 0]
    return (r[:, i] - agent.beta * mi_value) + cfg.gamma * q


def critic_update(agent, batch, y, scratch=None):
    """One minimization step on mean squared error; returns pre-step loss."""
    x, a, _, _ = batch
    n = x.shape[0]
    if scratch is None:
        scratch = np.empty((n, x.shape[1] + a.shape[1]))
    scratch[:, : x.shape[1]] = x
    scratch[:, x.shape[1]:] = a
    q = agent.critic.forward(scratch)[:, 0]
    err = q - y
    loss = float(err @ err) / n
    if not np.isfinite(loss):
        raise FloatingPointError(f"non-finite critic loss {loss!r}")
    agent.critic.backward(((2.0 / n) * err)[:, None], input_grad=False)
    agent.critic_opt.step()
    return loss


def actor_update(agent, batch, agents, layout, scratch=None, scratch_preloaded=False):
    """Sampled deterministic policy-gradient ascent step on the active
    ensemble member; returns the pre-step gradient norm.

    Other agents' actions stay as sampled; agent i's slot is replaced by
    its live actor output so the critic's input gradient can chain into
    the actor parameters.

    scratch_preloaded=True asserts that scratch already holds this
    batch's (x, a) block (critic_update leaves it that way), so only
    agent i's action slot needs writing.
    """
    x, a, _, _ = batch
    n = x.shape[0]
    me = agent.index
    live = agent.actor.forward(x[:, layout.obs_slices[me]])
    if scratch is None:
        scratch = np.empty((n, layout.obs_total + layout.act_total))
    if scratch_preloaded:
        joint = scratch[:, layout.obs_total:]
    else:
        joint = _fill_joint(scratch, x, layout)
        joint[:] = a
    joint[:, layout.act_slices[me]] = live
    agent.critic.forward(scratch)
    # minimize -(1/n) sum Q  ==  ascend J; parameter grads of the critic
    # itself must stay untouched here, hence accumulate=False; only the
    # columns of agent i's action block of the input gradient are needed
    sl = layout.act_slices[me]
    cols = slice(layout.obs_total + sl.start, layout.obs_total + sl.stop)
    da = agent.critic.backward(
        np.full((n, 1), -1.0 / n), accumulate=False, input_grad=cols
    )
    agent.actor.backward(da, input_grad=False)
    gnorm = float(np.sqrt(agent.actor.grads @ agent.actor.grads))
    agent.actor_opt.step()
    return gnorm


@dataclass
class EpisodeLog:
    """Per-episode record: raw environment rewards and mean MI penalty
    input per agent (average over this episode's update steps)."""

    episode: int
    rewards: np.ndarray
    mi: np.ndarray
    updates: int = 0


class TrainingDiverged(RuntimeError):
    """Raised when a non-finite loss or gradient aborts a run."""

    def __init__(self, episode, step_index, agent_index, cause):
        super().__init__(
            f"training diverged at episode {episode}, step {step_index}, "
            f"agent {agent_index}: {cause}"
        )
        self.episode = episode
        self.step_index = step_index
        self.agent_index = agent_index


class Trainer:
    """Owns the full mutable state of one training run.

    rng substreams (spawned from the seed, in order): network init, env
    layout, minibatch sampling, one exploration-noise stream per agent,
    one ensemble-draw stream per agent.  Keeping purposes on separate
    streams makes runs bit-reproducible even when code paths consume
    different amounts of randomness.
    """

    def __init__(self, cfg, scenario, betas=0.0, seed=0):
        if scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {scenario!r}, expected one of {SCENARIOS}")
        probe = make_scenario(scenario, np.random.default_rng(0))
        n = len(probe.agents)
        if np.isscalar(betas):
            betas = [float(betas)] * n
        betas = [float(b) for b in betas]
        if len(betas) != n:
            raise ValueError(f"{scenario} has {n} agents but got {len(betas)} betas")
        if not cfg.compute_mi and any(b != 0.0 for b in betas):
            raise ValueError("compute_mi=False requires all betas to be 0")

        self.cfg = cfg
        self.scenario = scenario
        self.betas = betas
        self.seed = int(seed)
        self.layout = JointLayout(
            [o.size for o in observe_all(probe)], action_dims(probe)
        )

        rngs = spawn_rngs(self.seed, 3 + 2 * n)
        init_rng = rngs[0]
        self.env_rng = rngs[1]
        self.sample_rng = rngs[2]
        self.noise_rngs = rngs[3:3 + n]
        self.ensemble_rngs = rngs[3 + n:3 + 2 * n]

        self.agents = [
            Agent(
                i,
                self.layout.obs_dims[i],
                self.layout.act_dims[i],
                self.layout.obs_total,
                self.layout.act_total,
                betas[i],
                cfg,
                init_rng,
            )
            for i in range(n)
        ]
        self.buffer = ReplayBuffer(
            cfg.buffer_capacity, self.layout.obs_total, self.layout.act_total, n
        )
        self.episode = 0
        self.global_step = 0
        self.logs = []
        # one reusable critic-input block for the whole update sweep; safe
        # because every forward's backward (if any) runs before the next
        # routine overwrites it
        self._scratch = np.empty(
            (cfg.batch_size, self.layout.obs_total + self.layout.act_total)
        )
        self._batches = None  # per-agent minibatch destinations, lazy
        self._stacks = None   # per-target-actor stacked next-obs blocks
        self._anext = None    # per-agent target-actor joint actions

    @property
    def n_agents(self):
        return len(self.agents)

    def _update_all(self, step_index):
        cfg, layout, agents = self.cfg, self.layout, self.agents
        n, S = self.n_agents, cfg.batch_size
        if self._batches is None:
            self._batches = [self.buffer.batch_arrays(S) for _ in range(n)]
            self._stacks = [np.empty((n * S, d)) for d in layout.obs_dims]
            self._anext = np.empty((n, S, layout.act_total))
        # each agent updates on its own uniformly sampled minibatch; all
        # are drawn first (in agent order, preserving the sample stream)
        # so every target actor can run once over the stacked batches
        # instead of once per batch
        batches = [
            self.buffer.sample(self.sample_rng, S, out=dst)
            for dst in self._batches
        ]
        for j, ag in enumerate(agents):
            oj, aj = layout.obs_slices[j], layout.act_slices[j]
            xs = self._stacks[j]
            for i in range(n):
                xs[i * S:(i + 1) * S] = batches[i][3][:, oj]
            out = ag.actor_target.forward(xs)
            for i in range(n):
                self._anext[i, :, aj] = out[i * S:(i + 1) * S]
        mi_vec = np.zeros(n)
        for i, agent in enumerate(agents):
            try:
                batch = batches[i]
                mi = 0.0
                if cfg.compute_mi and agent.marginal.initialized:
                    mi = policy_mutual_information(
                        agent.marginal, batch[1][:, layout.act_slices[i]]
                    )
                y = critic_target(
                    batch, agents, i, mi, cfg, layout,
                    scratch=self._scratch, a_next=self._anext[i],
                )
                critic_update(agent, batch, y, scratch=self._scratch)
                # critic_update left (x, a) for this same batch in scratch
                actor_update(
                    agent, batch, agents, layout,
                    scratch=self._scratch, scratch_preloaded=True,
                )
                mi_vec[i] = mi
            except FloatingPointError as err:
                raise TrainingDiverged(self.episode, step_index, i, err) from err
        for agent in agents:
            for live, tgt in zip(agent.actors, agent.actor_targets):
                soft_update(tgt, live, cfg.tau)
            soft_update(agent.critic_target, agent.critic, cfg.tau)
        return mi_vec

    def _run_episode(self, trajectory_writer=None):
        cfg = self.cfg
        scale = noise_schedule(cfg, self.episode)
        for agent, rng in zip(self.agents, self.ensemble_rngs):
            draw_ensemble_member(agent, rng)
        world = make_scenario(self.scenario, self.env_rng, cfg.max_episode_length)
        obs = observe_all(world)
        ep_rewards = np.zeros(self.n_agents)
        mi_sum = np.zeros(self.n_agents)
        updates = 0
        warmup = cfg.warmup_factor * cfg.batch_size
        for t in range(cfg.max_episode_length):
            actions = [
                select_action(agent, obs[i], scale, self.noise_rngs[i])
                for i, agent in enumerate(self.agents)
            ]
            obs_next, r, _ = step(world, actions)
            self.buffer.add(
                np.concatenate(obs),
                np.concatenate(actions),
                r,
                np.concatenate(obs_next),
            )
            if cfg.compute_mi:
                for agent, action in zip(self.agents, actions):
                    agent.window.push(action)
                    if len(agent.window) >= 2:
                        g = window_snapshot_moments(agent.window)
                        running_update(agent.marginal, g.mean, g.var)
            obs = obs_next
            ep_rewards += r
            self.global_step += 1
            if (
                self.buffer.count >= warmup
                and self.global_step % cfg.steps_per_update == 0
            ):
                mi_sum += self._update_all(t)
                updates += 1
            if trajectory_writer is not None:
                trajectory_writer.add(
                    np.stack([a.position for a in world.agents]), actions, r
                )
        log = EpisodeLog(
            self.episode, ep_rewards, mi_sum / max(updates, 1), updates
        )
        self.episode += 1
        self.logs.append(log)
        return log

    def run(self, episodes=None, trajectory_dir=None, trajectory_format="csv"):
        """Train for `episodes` more episodes (default: cfg.episodes).

        Returns the logs produced by this call.  With trajectory_dir
        set, every episode is dumped as one trajectory file there.
        """
        if episodes is None:
            episodes = self.cfg.episodes
        out = []
        for _ in range(episodes):
            writer = None
            if trajectory_dir is not None:
                ext = "csv" if trajectory_format == "csv" else "bin"
                writer = TrajectoryWriter(
                    f"{trajectory_dir}/episode_{self.episode:05d}.{ext}",
                    self.layout.act_dims,
                    fmt=trajectory_format,
                )
            try:
                out.append(self._run_episode(writer))
            finally:
                if writer is not None:
                    writer.close()
        return out


def run_training(cfg, scenario, betas=0.0, seed=0, **run_kwargs):
    """One full training run; returns the list of EpisodeLogs."""
    return Trainer(cfg, scenario, betas=betas, seed=seed).run(**run_kwargs)

"""Deterministic 2D particle world and the four benchmark scenarios.

Scenarios (entity counts fixed):

  coop_navigation      3 good agents, 3 landmarks.  Shared reward
                       -sum over landmarks of the closest-agent distance,
                       minus 1 per colliding agent pair.
  coop_communication   stationary speaker + mobile listener, 3 colored
                       landmarks.  The speaker sees the target color and
                       broadcasts a continuous 3-vector; the listener sees
                       the message but not the target.  Shared reward
                       -||listener - target||^2.
  keep_away            1 good agent, 1 adversary, 2 landmarks (one is
                       secretly the target).  good: -||good - target||;
                       adversary: +||good - target|| - ||adversary - good||.
                       The adversary never observes which landmark is the
                       target.
  physical_deception   2 good agents, 1 adversary, target + dummy
                       landmark.  good (shared): -min_g ||g - target||
                       + ||adversary - target||; adversary:
                       -||adversary - target||.  The adversary never
                       observes which landmark is the target.

Physics: per movable entity, v <- (1-damping)*v + (F_action+F_contact)/m*dt
and p <- p + v*dt, with dt=0.1 and damping=0.25 per step.  Overlapping
collidable agents repel along the center line with force k*overlap,
k=100, applied equal-and-opposite.  Landmarks never move and exert no
contact force (agents must be able to sit on them).

Observation layouts (fixed per scenario, relative positions are
"entity minus self"):

  coop_navigation agent:   [vel(2), pos(2), landmarks rel(6), others rel(4)]
  coop_communication speaker:  [vel(2), pos(2), landmarks rel(6),
                                listener rel(2), target one-hot(3)]
  coop_communication listener: [vel(2), pos(2), landmarks rel(6),
                                speaker rel(2), message(3)]
  keep_away good:          [vel(2), pos(2), landmarks rel(4),
                            adversary rel(2), target one-hot(2)]
  keep_away adversary:     [vel(2), pos(2), landmarks rel(4), good rel(2)]
  physical_deception good: [vel(2), pos(2), landmarks rel(4),
                            others rel(4), target one-hot(2)]
  physical_deception adversary: [vel(2), pos(2), landmarks rel(4),
                                 others rel(4)]

Action layouts: 2 movement force components in [-1,1] for every agent;
the speaker carries 3 extra communication components in [-1,1] (its
movement components are ignored since it cannot move).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SCENARIOS = (
    "coop_navigation",
    "coop_communication",
    "keep_away",
    "physical_deception",
)

DT = 0.1
DAMPING = 0.25
CONTACT_STIFFNESS = 100.0
GOOD_RADIUS = 0.05
ADVERSARY_RADIUS = 0.075
LANDMARK_RADIUS = 0.08
DEFAULT_EPISODE_LENGTH = 25


@dataclass
class Entity:
    position: np.ndarray
    velocity: np.ndarray
    radius: float
    mass: float = 1.0
    movable: bool = True
    collide: bool = True
    color: str = "black"
    role: str = ""

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        self.velocity = np.asarray(self.velocity, dtype=np.float64)
        if self.radius <= 0 or self.mass <= 0:
            raise ValueError("radius and mass must be positive")


@dataclass
class World:
    scenario: str
    agents: list
    landmarks: list
    dt: float = DT
    damping: float = DAMPING
    timestep: int = 0
    max_steps: int = DEFAULT_EPISODE_LENGTH
    target_index: int | None = None
    message: np.ndarray | None = None
    clip_count: int = 0  # diagnostics: action components clipped so far

    @property
    def done(self):
        return self.timestep >= self.max_steps


def _agent(position, radius, color, role, movable=True, collide=True):
    return Entity(
        position=position,
        velocity=np.zeros(2),
        radius=radius,
        movable=movable,
        collide=collide,
        color=color,
        role=role,
    )


def _landmark(position, color="black"):
    return Entity(
        position=position,
        velocity=np.zeros(2),
        radius=LANDMARK_RADIUS,
        movable=False,
        collide=False,
        color=color,
        role="landmark",
    )


def make_scenario(name, rng, max_steps=DEFAULT_EPISODE_LENGTH):
    """Fresh episode: positions uniform in [-1,1]^2, velocities zero.

    Draw order is fixed (agents in index order, then landmarks, then the
    target index) so a given rng state always yields the same world.
    """

    def pos():
        return rng.uniform(-1.0, 1.0, size=2)

    if name == "coop_navigation":
        agents = [_agent(pos(), GOOD_RADIUS, "blue", "good") for _ in range(3)]
        landmarks = [_landmark(pos()) for _ in range(3)]
        return World(name, agents, landmarks, max_steps=max_steps)

    if name == "coop_communication":
        speaker = _agent(pos(), GOOD_RADIUS, "grey", "speaker",
                         movable=False, collide=False)
        listener = _agent(pos(), GOOD_RADIUS, "blue", "listener", collide=False)
        landmarks = [_landmark(pos(), color=c) for c in ("red", "green", "blue")]
        target = int(rng.integers(3))
        return World(name, [speaker, listener], landmarks, max_steps=max_steps,
                     target_index=target, message=np.zeros(3))

    if name == "keep_away":
        good = _agent(pos(), GOOD_RADIUS, "blue", "good")
        adversary = _agent(pos(), ADVERSARY_RADIUS, "red", "adversary")
        landmarks = [_landmark(pos()) for _ in range(2)]
        target = int(rng.integers(2))
        return World(name, [good, adversary], landmarks, max_steps=max_steps,
                     target_index=target)

    if name == "physical_deception":
        agents = [
            _agent(pos(), GOOD_RADIUS, "blue", "good"),
            _agent(pos(), GOOD_RADIUS, "blue", "good"),
            _agent(pos(), ADVERSARY_RADIUS, "red", "adversary"),
        ]
        landmarks = [_landmark(pos()) for _ in range(2)]
        target = int(rng.integers(2))
        return World(name, agents, landmarks, max_steps=max_steps,
                     target_index=target)

    raise ValueError(f"unknown scenario {name!r}, expected one of {SCENARIOS}")


def action_dims(world):
    """Per-agent action dimensionality (movement 2, speaker +3 comm)."""
    return [5 if a.role == "speaker" else 2 for a in world.agents]


def observation_dims(world):
    return [observe(world, i).size for i in range(len(world.agents))]


# ---------------------------------------------------------------- physics


def integrate_physics(world, forces):
    """One dt of damped point-mass motion with pairwise contact repulsion.

    Exactly overlapping centers (distance zero) repel along +x as a
    deterministic tie-break.
    """
    agents = world.agents
    total = [np.asarray(f, dtype=np.float64).copy() for f in forces]
    for i in range(len(agents)):
        if not agents[i].collide:
            continue
        for j in range(i + 1, len(agents)):
            if not agents[j].collide:
                continue
            delta = agents[i].position - agents[j].position
            dist = float(np.hypot(delta[0], delta[1]))
            min_dist = agents[i].radius + agents[j].radius
            if dist >= min_dist:
                continue
            direction = delta / dist if dist > 0.0 else np.array([1.0, 0.0])
            f = CONTACT_STIFFNESS * (min_dist - dist) * direction
            total[i] += f
            total[j] -= f
    keep = 1.0 - world.damping
    for agent, f in zip(agents, total):
        if not agent.movable:
            continue
        agent.velocity = keep * agent.velocity + (f / agent.mass) * world.dt
        agent.position = agent.position + agent.velocity * world.dt
    return world


# ----------------------------------------------------------- observations


def _one_hot(index, size):
    v = np.zeros(size)
    v[index] = 1.0
    return v


def observe(world, i):
    agent = world.agents[i]
    p = agent.position
    parts = [agent.velocity, p]
    parts.extend(lm.position - p for lm in world.landmarks)
    parts.extend(
        other.position - p for j, other in enumerate(world.agents) if j != i
    )
    role = agent.role
    if role == "speaker":
        parts.append(_one_hot(world.target_index, 3))
    elif role == "listener":
        parts.append(world.message)
    elif role == "good" and world.scenario in ("keep_away", "physical_deception"):
        parts.append(_one_hot(world.target_index, 2))
    # adversaries get no extras: target identity stays hidden from them
    return np.concatenate(parts)


def observe_all(world):
    return [observe(world, i) for i in range(len(world.agents))]


# ---------------------------------------------------------------- rewards


def _dist(a, b):
    d = a - b
    return float(np.hypot(d[0], d[1]))


def reward(world, i):
    agents = world.agents
    landmarks = world.landmarks
    s = world.scenario

    if s == "coop_navigation":
        r = 0.0
        for lm in landmarks:
            r -= min(_dist(a.position, lm.position) for a in agents)
        for j in range(len(agents)):
            for k in range(j + 1, len(agents)):
                if _dist(agents[j].position, agents[k].position) < (
                    agents[j].radius + agents[k].radius
                ):
                    r -= 1.0
        return r

    if s == "coop_communication":
        listener = agents[1]
        target = landmarks[world.target_index]
        d = listener.position - target.position
        return -float(d @ d)

    if s == "keep_away":
        good, adversary = agents
        target = landmarks[world.target_index]
        good_to_target = _dist(good.position, target.position)
        if agents[i].role == "good":
            return -good_to_target
        return good_to_target - _dist(adversary.position, good.position)

    if s == "physical_deception":
        target = landmarks[world.target_index]
        adversary = agents[2]
        adv_to_target = _dist(adversary.position, target.position)
        if agents[i].role == "good":
            nearest = min(
                _dist(a.position, target.position) for a in agents if a.role == "good"
            )
            return -nearest + adv_to_target
        return -adv_to_target

    raise ValueError(f"unknown scenario {s!r}")


def rewards(world):
    n = len(world.agents)
    if world.scenario in ("coop_navigation", "coop_communication"):
        # shared team reward, identical for every agent; compute once
        return np.full(n, reward(world, 0))
    return np.array([reward(world, i) for i in range(n)])


# ------------------------------------------------------------------- step


def step(world, actions):
    """Advance one timestep: clip actions, integrate, score, observe.

    Out-of-range action components are clipped into [-1,1] and counted
    in world.clip_count.  Episodes never terminate early; done is just
    timestep == max_steps.
    """
    if world.done:
        raise RuntimeError("step called on a finished episode")
    dims = action_dims(world)
    if len(actions) != len(world.agents):
        raise ValueError(f"expected {len(world.agents)} actions, got {len(actions)}")
    clipped = []
    for a, d in zip(actions, dims):
        a = np.asarray(a, dtype=np.float64)
        if a.shape != (d,):
            raise ValueError(f"expected action shape ({d},), got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite action component")
        c = np.clip(a, -1.0, 1.0)
        world.clip_count += int(np.count_nonzero(c != a))
        clipped.append(c)
    if world.scenario == "coop_communication":
        world.message = clipped[0][2:5].copy()
    integrate_physics(world, [c[:2] for c in clipped])
    world.timestep += 1
    r = rewards(world)
    return observe_all(world), r, world.done

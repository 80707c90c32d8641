"""Desk-scale multi-agent actor-critic laboratory.

Deterministic-policy agents with centralized critics train on small 2D
particle scenarios.  An optional per-agent penalty charges the critic
target for the mutual information between states and actions, estimated
from running Gaussian moment statistics of the policy's action stream.

Layers, bottom to top:

    nets        flat-buffer dense networks, Adam, soft target updates
    gaussians   diagonal-Gaussian moments, running marginal, MI estimate
    particles   the four 2D scenarios: physics, observations, rewards
    maddpg      agents, replay, the training loop
    checkpoint  full-state save/restore
    trajectory  per-step episode dumps (CSV or binary)
    harness     multi-seed experiments, CSV persistence, aggregation
    cli         `marlab run | aggregate | sweep | selftest`
"""

from .checkpoint import load_checkpoint, save_checkpoint
from .gaussians import (
    ActionWindow,
    DiagGaussian,
    MarginalEstimate,
    batch_moments,
    log_density,
    mixture_moments,
    plugin_entropy,
    policy_mutual_information,
    running_update,
    window_snapshot_moments,
)
from .harness import (
    SWEEP_BETAS,
    AggregateCurve,
    ExperimentConfig,
    Variant,
    aggregate,
    emit_plot_data,
    read_episode_csv,
    rolling_mean,
    run_experiment,
    run_seed,
    run_sweep,
    scenario_sides,
    sweep_configs,
    write_episode_csv,
)
from .maddpg import (
    Agent,
    EpisodeLog,
    JointLayout,
    ReplayBuffer,
    TrainConfig,
    Trainer,
    TrainingDiverged,
    noise_schedule,
    run_training,
)
from .nets import Adam, DenseNet, gaussian_noise, make_rng, soft_update, spawn_rngs
from .particles import (
    SCENARIOS,
    World,
    action_dims,
    make_scenario,
    observation_dims,
    observe,
    observe_all,
    reward,
    rewards,
    step,
)
from .selftest import run_selftest
from .trajectory import TrajectoryWriter, read_trajectory

__version__ = "0.1.0"

__all__ = [
    "ActionWindow",
    "Adam",
    "Agent",
    "AggregateCurve",
    "DenseNet",
    "DiagGaussian",
    "EpisodeLog",
    "ExperimentConfig",
    "JointLayout",
    "MarginalEstimate",
    "ReplayBuffer",
    "SCENARIOS",
    "SWEEP_BETAS",
    "TrainConfig",
    "Trainer",
    "TrainingDiverged",
    "TrajectoryWriter",
    "Variant",
    "World",
    "action_dims",
    "aggregate",
    "batch_moments",
    "emit_plot_data",
    "gaussian_noise",
    "load_checkpoint",
    "log_density",
    "make_rng",
    "make_scenario",
    "mixture_moments",
    "noise_schedule",
    "observation_dims",
    "observe",
    "observe_all",
    "plugin_entropy",
    "policy_mutual_information",
    "read_episode_csv",
    "read_trajectory",
    "reward",
    "rewards",
    "rolling_mean",
    "run_experiment",
    "run_seed",
    "run_selftest",
    "run_sweep",
    "run_training",
    "running_update",
    "save_checkpoint",
    "scenario_sides",
    "soft_update",
    "spawn_rngs",
    "step",
    "sweep_configs",
    "window_snapshot_moments",
    "write_episode_csv",
]

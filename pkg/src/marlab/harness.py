"""Multi-seed experiment runner and training-curve aggregator.

One experiment = one scenario, one variant assignment (which agents get
the mutual-information penalty, at what strength), and a list of seeds.
Each seed is an independent training run persisted as one CSV of
per-episode rewards and MI penalties.  Aggregation reproduces the usual
figure methodology: per-seed trailing rolling mean, across-seed mean,
and a Student-t confidence band, plus the across-seed variance of the
smoothed curves.

Files written per experiment (under ExperimentConfig.out_dir):

    {run}_seed{s}.csv       one per seed, header
                            episode,agent_0_reward,...,agent_0_mi,...
    {run}_failures.json     only when a seed aborted on divergence

and, from emit_plot_data, a tidy long-format curve table
(episode,mean,ci_low,ci_high,label) with a JSON manifest describing
exactly what produced it.

Runs are deterministic per (config, seed): a rerun overwrites each CSV
with byte-identical content.  Seeds share nothing, so they can run in
parallel worker processes without affecting the output.
"""

from __future__ import annotations

import dataclasses
import json
import os
import subprocess
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import t as student_t

from .maddpg import TrainConfig, Trainer, TrainingDiverged, make_scenario
from .particles import SCENARIOS

SWEEP_BETAS = (1e-2, 1e-3, 1e-4)


@dataclass(frozen=True)
class Variant:
    """What one side of an experiment runs: the plain algorithm, or the
    capacity-limited one with penalty weight beta."""

    kind: str
    beta: float = 0.0

    def __post_init__(self):
        if self.kind not in ("baseline", "cl"):
            raise ValueError(f"variant kind must be 'baseline' or 'cl', got {self.kind!r}")
        if self.beta < 0.0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.kind == "baseline" and self.beta != 0.0:
            raise ValueError("baseline variant cannot carry a nonzero beta")

    @classmethod
    def baseline(cls):
        return cls("baseline")

    @classmethod
    def cl(cls, beta):
        return cls("cl", float(beta))

    @property
    def label(self):
        """Human-readable curve label."""
        if self.kind == "baseline":
            return "MADDPG"
        return f"CL-MADDPG beta={self.beta:g}"

    @property
    def tag(self):
        """Short filesystem-safe token."""
        return "maddpg" if self.kind == "baseline" else f"cl{self.beta:g}"


def scenario_sides(scenario):
    """Role of every agent slot: 'good' or 'adversary', in agent order."""
    world = make_scenario(scenario, np.random.default_rng(0))
    return ["adversary" if a.role == "adversary" else "good" for a in world.agents]


@dataclass(frozen=True)
class ExperimentConfig:
    """One multi-seed experiment.

    `good` applies to every non-adversary agent, `adversary` to the
    rest; when `adversary` is None the good-side variant applies to all
    agents.  `train` carries the per-run hyperparameters; its episode
    count and MI switch are overridden here (episodes from this config,
    compute_mi from whether any side is capacity-limited).
    """

    scenario: str
    good: Variant = field(default_factory=Variant.baseline)
    adversary: Variant | None = None
    seeds: tuple = (1, 2, 3, 4, 5)
    episodes: int = 2000
    out_dir: str = "runs"
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(
                f"unknown scenario {self.scenario!r}, expected one of {SCENARIOS}"
            )
        seeds = tuple(int(s) for s in self.seeds)
        if not seeds:
            raise ValueError("seed list must be nonempty")
        if len(set(seeds)) != len(seeds):
            raise ValueError(f"seed list has duplicates: {seeds}")
        if self.episodes < 1:
            raise ValueError(f"episodes must be >= 1, got {self.episodes}")
        object.__setattr__(self, "seeds", seeds)

    @property
    def sides(self):
        return scenario_sides(self.scenario)

    @property
    def betas(self):
        """Per-agent penalty weights implied by the variant assignment."""
        adv = self.adversary if self.adversary is not None else self.good
        return [
            (self.good if s == "good" else adv).beta for s in self.sides
        ]

    @property
    def compute_mi(self):
        adv = self.adversary if self.adversary is not None else self.good
        return self.good.kind == "cl" or adv.kind == "cl"

    @property
    def run_name(self):
        name = f"{self.scenario}_{self.good.tag}"
        if self.adversary is not None:
            name += f"_vs_{self.adversary.tag}"
        return name

    @property
    def label(self):
        if self.adversary is None:
            return self.good.label
        return f"{self.good.label} vs {self.adversary.label}"

    def train_config(self):
        return dataclasses.replace(
            self.train, episodes=self.episodes, compute_mi=self.compute_mi
        )

    def seed_csv_path(self, seed):
        return Path(self.out_dir) / f"{self.run_name}_seed{seed}.csv"

    def failures_path(self):
        return Path(self.out_dir) / f"{self.run_name}_failures.json"


def write_episode_csv(path, logs, n_agents):
    """Persist EpisodeLogs with full float precision (repr round-trips)."""
    cols = [f"agent_{i}_reward" for i in range(n_agents)]
    cols += [f"agent_{i}_mi" for i in range(n_agents)]
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("episode," + ",".join(cols) + "\n")
        for log in logs:
            vals = [str(log.episode)]
            vals += [repr(float(v)) for v in log.rewards]
            vals += [repr(float(v)) for v in log.mi]
            f.write(",".join(vals) + "\n")


def read_episode_csv(path):
    """Inverse of write_episode_csv.

    Returns (episodes int array, rewards (M, N), mi (M, N)).
    """
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip().split(",")
        body = np.loadtxt(f, delimiter=",", ndmin=2)
    n2 = len(header) - 1
    if header[0] != "episode" or n2 == 0 or n2 % 2:
        raise ValueError(f"{path}: malformed episode CSV header {header!r}")
    n = n2 // 2
    expected = (
        ["episode"]
        + [f"agent_{i}_reward" for i in range(n)]
        + [f"agent_{i}_mi" for i in range(n)]
    )
    if header != expected:
        raise ValueError(f"{path}: unexpected columns {header!r}")
    if body.shape[1] != len(header):
        raise ValueError(f"{path}: row width {body.shape[1]} != header width")
    episodes = body[:, 0].astype(int)
    return episodes, body[:, 1 : 1 + n], body[:, 1 + n :]


def run_seed(cfg, seed):
    """Train one seed and write its CSV; returns the path.

    Deterministic: rerunning overwrites with byte-identical content.
    """
    trainer = Trainer(cfg.train_config(), cfg.scenario, betas=cfg.betas, seed=seed)
    logs = trainer.run(cfg.episodes)
    path = cfg.seed_csv_path(seed)
    write_episode_csv(path, logs, trainer.n_agents)
    return path


def _seed_task(cfg, seed):
    # worker-process entry point; exceptions are summarized, not pickled
    try:
        return seed, str(run_seed(cfg, seed)), None
    except TrainingDiverged as err:
        return seed, None, {
            "seed": seed,
            "episode": err.episode,
            "step": err.step_index,
            "agent": err.agent_index,
            "error": str(err),
        }


def run_experiment(cfg, workers=1):
    """Run every seed of an experiment; returns the list of CSV paths.

    The output directory is verified writable before any training.  A
    seed whose run diverges (non-finite loss or gradient) is recorded in
    {run}_failures.json and skipped; the remaining seeds still run.
    """
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    probe = out / f".{cfg.run_name}.probe"
    try:
        probe.write_text("")
    finally:
        if probe.exists():
            probe.unlink()

    results = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_seed_task, cfg, s) for s in cfg.seeds]
            results = [f.result() for f in futures]
    else:
        results = [_seed_task(cfg, s) for s in cfg.seeds]

    paths = [Path(p) for _, p, fail in results if fail is None]
    failures = [fail for _, _, fail in results if fail is not None]
    fpath = cfg.failures_path()
    if failures:
        fpath.write_text(
            json.dumps({"run": cfg.run_name, "failures": failures}, indent=2) + "\n",
            encoding="utf-8",
        )
    elif fpath.exists():
        fpath.unlink()  # stale manifest from an earlier broken run
    return paths


def rolling_mean(values, window):
    """Trailing rolling mean; defined from index window-1 onward."""
    values = np.asarray(values, dtype=float)
    if not 1 <= window <= values.size:
        raise ValueError(f"window {window} out of range for {values.size} values")
    return np.convolve(values, np.ones(window), mode="valid") / window


@dataclass
class AggregateCurve:
    """Across-seed summary of smoothed reward curves.

    Rows exist only where the trailing window is full.  half_width is
    the two-sided Student-t confidence half-width t* . sd / sqrt(n) with
    n-1 degrees of freedom; seed_variance is the across-seed sample
    variance (ddof=1) of the smoothed values at each episode.
    """

    episodes: np.ndarray
    mean: np.ndarray
    half_width: np.ndarray
    seed_means: np.ndarray
    seed_variance: np.ndarray
    n_seeds: int
    window: int
    confidence: float
    t_star: float

    @property
    def ci_low(self):
        return self.mean - self.half_width

    @property
    def ci_high(self):
        return self.mean + self.half_width


def aggregate(csv_paths, window=5, confidence=0.99, agents=None):
    """Aggregate per-seed episode CSVs into one AggregateCurve.

    agents selects the reward series per seed: None sums every agent's
    reward, an int takes one agent, a sequence sums those agents.
    Requires at least two seed files with identical episode columns.
    """
    csv_paths = list(csv_paths)
    if len(csv_paths) < 2:
        raise ValueError(f"need >= 2 seed files to aggregate, got {len(csv_paths)}")
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must be in (0, 1), got {confidence}")

    episodes = None
    series = []
    for path in csv_paths:
        eps, rewards, _ = read_episode_csv(path)
        if episodes is None:
            episodes = eps
        elif not np.array_equal(eps, episodes):
            raise ValueError(
                f"{path}: episode range misaligned with {csv_paths[0]}"
            )
        if agents is None:
            series.append(rewards.sum(axis=1))
        elif np.isscalar(agents):
            series.append(rewards[:, int(agents)])
        else:
            series.append(rewards[:, list(agents)].sum(axis=1))

    seed_means = np.stack([rolling_mean(s, window) for s in series])
    n = len(csv_paths)
    t_star = float(student_t.ppf(0.5 * (1.0 + confidence), n - 1))
    variance = seed_means.var(axis=0, ddof=1)
    return AggregateCurve(
        episodes=episodes[window - 1 :],
        mean=seed_means.mean(axis=0),
        half_width=t_star * np.sqrt(variance) / np.sqrt(n),
        seed_means=seed_means,
        seed_variance=variance,
        n_seeds=n,
        window=window,
        confidence=confidence,
        t_star=t_star,
    )


def _git_commit():
    try:
        out = subprocess.run(
            ["git", "rev-parse", "HEAD"],
            capture_output=True,
            text=True,
            cwd=os.path.dirname(os.path.abspath(__file__)),
            timeout=10,
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def emit_plot_data(curves, out_csv, manifest=None):
    """Write labeled curves as one tidy long-format CSV for plotting.

    curves maps label -> AggregateCurve.  The companion manifest (same
    path with a .json suffix) records what produced the curves plus a
    per-label summary: final smoothed mean, across-seed variance, and
    the labels ordered best-to-worst by final mean.  The ordering is
    informational; nothing downstream gates on it.
    """
    out_csv = Path(out_csv)
    with open(out_csv, "w", encoding="utf-8", newline="\n") as f:
        f.write("episode,mean,ci_low,ci_high,label\n")
        for label, c in curves.items():
            lo, hi = c.ci_low, c.ci_high
            for i, e in enumerate(c.episodes):
                f.write(
                    f"{int(e)},{repr(float(c.mean[i]))},"
                    f"{repr(float(lo[i]))},{repr(float(hi[i]))},{label}\n"
                )

    summary = {
        label: {
            "final_mean": float(c.mean[-1]),
            "final_seed_variance": float(c.seed_variance[-1]),
            "mean_seed_variance": float(c.seed_variance.mean()),
            "n_seeds": c.n_seeds,
            "window": c.window,
            "confidence": c.confidence,
            "t_star": c.t_star,
        }
        for label, c in curves.items()
    }
    ordering = sorted(summary, key=lambda k: summary[k]["final_mean"], reverse=True)
    doc = dict(manifest or {})
    doc["commit"] = _git_commit()
    doc["curves"] = summary
    doc["ordering_by_final_mean"] = ordering
    manifest_path = out_csv.with_suffix(".json")
    manifest_path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return out_csv, manifest_path


def sweep_configs(scenario, betas=SWEEP_BETAS, seeds=(1, 2, 3, 4, 5),
                  episodes=2000, out_dir="runs", train=None):
    """Experiment grid for one scenario: baseline plus each penalty
    weight; competitive scenarios get both matchup directions."""
    train = train if train is not None else TrainConfig()
    base = dict(scenario=scenario, seeds=tuple(seeds), episodes=episodes,
                out_dir=out_dir, train=train)
    competitive = "adversary" in scenario_sides(scenario)
    configs = [ExperimentConfig(good=Variant.baseline(), **base)]
    for beta in betas:
        if competitive:
            configs.append(ExperimentConfig(
                good=Variant.cl(beta), adversary=Variant.baseline(), **base))
            configs.append(ExperimentConfig(
                good=Variant.baseline(), adversary=Variant.cl(beta), **base))
        else:
            configs.append(ExperimentConfig(good=Variant.cl(beta), **base))
    return configs


def run_sweep(scenarios=None, betas=SWEEP_BETAS, seeds=(1, 2, 3, 4, 5),
              episodes=2000, out_dir="runs", train=None, workers=1,
              window=5, confidence=0.99):
    """Run the full grid and emit one plot-data CSV per scenario.

    For competitive scenarios each matchup contributes separate good-
    and adversary-side curves.  Returns {scenario: (csv, manifest)}.
    """
    scenarios = list(scenarios) if scenarios is not None else list(SCENARIOS)
    emitted = {}
    for scenario in scenarios:
        sides = scenario_sides(scenario)
        good_idx = [i for i, s in enumerate(sides) if s == "good"]
        adv_idx = [i for i, s in enumerate(sides) if s == "adversary"]
        curves = {}
        grid = sweep_configs(scenario, betas, seeds, episodes, out_dir, train)
        for cfg in grid:
            paths = run_experiment(cfg, workers=workers)
            if len(paths) < 2:
                continue  # divergences recorded in the failures manifest
            if adv_idx:
                curves[f"{cfg.label} [good]"] = aggregate(
                    paths, window, confidence, agents=good_idx)
                curves[f"{cfg.label} [adversary]"] = aggregate(
                    paths, window, confidence, agents=adv_idx)
            else:
                curves[cfg.label] = aggregate(paths, window, confidence)
        manifest = {
            "scenario": scenario,
            "variants": [cfg.label for cfg in grid],
            "betas": list(betas),
            "seeds": list(seeds),
            "episodes": episodes,
            "window": window,
            "confidence": confidence,
        }
        out_csv = Path(out_dir) / f"{scenario}_curves.csv"
        emitted[scenario] = emit_plot_data(curves, out_csv, manifest)
    return emitted

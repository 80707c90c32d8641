"""Command-line front end: train, aggregate, sweep, selftest.

    marlab run --scenario coop_communication --beta 1e-3 \
               --seeds 1,2,3,4,5 --episodes 2000 --out runs
    marlab aggregate --out curves.csv runs/*.csv
    marlab sweep --scenario coop_navigation --episodes 2000 --out runs
    marlab selftest

Every flag can also live in a config file of flat `key = value` lines
(keys are the flag names with dashes as underscores, `#` starts a
comment); explicit flags override file values.  Exit codes: 0 success,
1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .harness import (
    SWEEP_BETAS,
    ExperimentConfig,
    Variant,
    aggregate,
    emit_plot_data,
    run_experiment,
    run_sweep,
)
from .maddpg import TrainConfig
from .particles import SCENARIOS


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; the documented contract is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _seed_list(text):
    return tuple(int(s) for s in str(text).split(",") if s.strip())


def _float_list(text):
    return tuple(float(s) for s in str(text).split(",") if s.strip())


def _scenario_list(text):
    return tuple(s.strip() for s in str(text).split(",") if s.strip())


# every option a config file may set, with its parser
_OPTION_PARSERS = {
    "scenario": str,
    "beta": float,
    "good_beta": float,
    "adversary_beta": float,
    "betas": _float_list,
    "seeds": _seed_list,
    "episodes": int,
    "max_episode_length": int,
    "ensemble_k": int,
    "out": str,
    "workers": int,
    "window": int,
    "confidence": float,
    "label": str,
    "agents": _seed_list,
}


def parse_config_file(path):
    """Flat key = value lines; '#' comments; unknown keys rejected."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in _OPTION_PARSERS:
            raise ValueError(f"{path}:{lineno}: unknown option {key!r}")
        try:
            values[key] = _OPTION_PARSERS[key](val.strip())
        except ValueError as err:
            raise ValueError(f"{path}:{lineno}: bad value for {key}: {err}") from err
    return values


def _merge(args, parser, defaults):
    """Fill argparse None values from the config file, then defaults."""
    merged = dict(defaults)
    if getattr(args, "config", None):
        try:
            merged.update(parse_config_file(args.config))
        except (OSError, ValueError) as err:
            parser.error(str(err))
    for key in defaults:
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            merged[key] = flag_val
    return merged


def _train_config(opts):
    cfg = TrainConfig()
    over = {}
    if opts.get("max_episode_length") is not None:
        over["max_episode_length"] = opts["max_episode_length"]
    if opts.get("ensemble_k") is not None:
        over["ensemble_k"] = opts["ensemble_k"]
    return dataclasses.replace(cfg, **over) if over else cfg


def _variant(beta):
    return Variant.cl(beta) if beta > 0.0 else Variant.baseline()


_RUN_DEFAULTS = dict(
    scenario=None, beta=0.0, good_beta=None, adversary_beta=None,
    seeds=(1, 2, 3, 4, 5), episodes=2000, max_episode_length=None,
    ensemble_k=None, out="runs", workers=1,
)


def cmd_run(args, parser):
    opts = _merge(args, parser, _RUN_DEFAULTS)
    if not opts["scenario"]:
        parser.error("run requires --scenario (flag or config file)")
    if opts["scenario"] not in SCENARIOS:
        parser.error(f"unknown scenario {opts['scenario']!r}, choose from {SCENARIOS}")
    split = opts["good_beta"] is not None or opts["adversary_beta"] is not None
    if split:
        good = _variant(opts["good_beta"] or 0.0)
        adversary = _variant(opts["adversary_beta"] or 0.0)
    else:
        good, adversary = _variant(opts["beta"]), None
    cfg = ExperimentConfig(
        scenario=opts["scenario"],
        good=good,
        adversary=adversary,
        seeds=opts["seeds"],
        episodes=opts["episodes"],
        out_dir=opts["out"],
        train=_train_config(opts),
    )
    paths = run_experiment(cfg, workers=opts["workers"])
    for p in paths:
        print(p)
    n_failed = len(cfg.seeds) - len(paths)
    if n_failed:
        print(f"{n_failed} seed(s) diverged; see {cfg.failures_path()}", file=sys.stderr)
        return 2
    return 0


_AGG_DEFAULTS = dict(window=5, confidence=0.99, out="curves.csv",
                     label="run", agents=None)


def cmd_aggregate(args, parser):
    opts = _merge(args, parser, _AGG_DEFAULTS)
    if len(args.csvs) < 2:
        parser.error("aggregate needs at least two per-seed CSV files")
    curve = aggregate(
        args.csvs, window=opts["window"], confidence=opts["confidence"],
        agents=opts["agents"],
    )
    out_csv, manifest = emit_plot_data(
        {opts["label"]: curve}, opts["out"],
        {"sources": [str(c) for c in args.csvs]},
    )
    print(out_csv)
    print(manifest)
    return 0


_SWEEP_DEFAULTS = dict(
    scenario=None, betas=SWEEP_BETAS, seeds=(1, 2, 3, 4, 5), episodes=2000,
    max_episode_length=None, ensemble_k=None, out="runs", workers=1,
    window=5, confidence=0.99,
)


def cmd_sweep(args, parser):
    opts = _merge(args, parser, _SWEEP_DEFAULTS)
    scenarios = _scenario_list(opts["scenario"]) if opts["scenario"] else SCENARIOS
    for s in scenarios:
        if s not in SCENARIOS:
            parser.error(f"unknown scenario {s!r}, choose from {SCENARIOS}")
    emitted = run_sweep(
        scenarios=scenarios,
        betas=opts["betas"],
        seeds=opts["seeds"],
        episodes=opts["episodes"],
        out_dir=opts["out"],
        train=_train_config(opts),
        workers=opts["workers"],
        window=opts["window"],
        confidence=opts["confidence"],
    )
    for scenario, (csv_path, manifest) in emitted.items():
        print(f"{scenario}: {csv_path} {manifest}")
    return 0


def cmd_selftest(args, parser):
    from .selftest import run_selftest

    return 0 if run_selftest() else 2


def build_parser():
    parser = _Parser(prog="marlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train one experiment (all seeds)")
    run.add_argument("--scenario")
    run.add_argument("--beta", type=float, help="penalty weight for every agent; 0 = plain baseline")
    run.add_argument("--good-beta", type=float, dest="good_beta",
                     help="penalty weight for non-adversary agents only")
    run.add_argument("--adversary-beta", type=float, dest="adversary_beta",
                     help="penalty weight for adversary agents only")
    run.add_argument("--seeds", type=_seed_list, help="comma-separated, e.g. 1,2,3,4,5")
    run.add_argument("--episodes", type=int)
    run.add_argument("--max-episode-length", type=int, dest="max_episode_length")
    run.add_argument("--ensemble-k", type=int, dest="ensemble_k")
    run.add_argument("--out")
    run.add_argument("--workers", type=int)
    run.add_argument("--config", help="key = value file; flags override it")
    run.set_defaults(handler=cmd_run)

    agg = sub.add_parser("aggregate", help="summarize per-seed CSVs into one curve")
    agg.add_argument("csvs", nargs="+")
    agg.add_argument("--window", type=int)
    agg.add_argument("--confidence", type=float)
    agg.add_argument("--agents", type=_seed_list,
                     help="agent indices to sum (default: all)")
    agg.add_argument("--label")
    agg.add_argument("--out")
    agg.add_argument("--config")
    agg.set_defaults(handler=cmd_aggregate)

    sweep = sub.add_parser("sweep", help="baseline + penalty grid over scenarios")
    sweep.add_argument("--scenario", help="comma-separated subset (default: all four)")
    sweep.add_argument("--betas", type=_float_list)
    sweep.add_argument("--seeds", type=_seed_list)
    sweep.add_argument("--episodes", type=int)
    sweep.add_argument("--max-episode-length", type=int, dest="max_episode_length")
    sweep.add_argument("--ensemble-k", type=int, dest="ensemble_k")
    sweep.add_argument("--out")
    sweep.add_argument("--workers", type=int)
    sweep.add_argument("--window", type=int)
    sweep.add_argument("--confidence", type=float)
    sweep.add_argument("--config")
    sweep.set_defaults(handler=cmd_sweep)

    st = sub.add_parser("selftest", help="run built-in invariant checks")
    st.set_defaults(handler=cmd_selftest)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args, parser)
    except (OSError, ValueError, RuntimeError) as err:
        print(f"marlab: error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

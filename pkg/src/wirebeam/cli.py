"""Command-line entry points.

Verbs: train, eval, sweep, pattern, trajectory.  Exit codes: 0 success,
1 configuration/validation problem, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys

from . import bench
from .config import (ConfigError, SweepSpec, apply_smoke, build_config,
                     _parse_file)
from .policies import PolicyKind

_POLICY_FLAGS = {"oracle": PolicyKind.ORACLE,
                 "fixed": PolicyKind.FIXED_BEAM,
                 "dqn": PolicyKind.DQN_GREEDY}


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wirebeam",
                                description="Beam tracking on an overhead "
                                            "messenger wire: training, "
                                            "evaluation and sweeps")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="key=value config file")
        sp.add_argument("--seed", type=int, default=None, help="override the seed")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--smoke", action="store_true",
                        help="reduced-scale profile for quick runs")

    sp = sub.add_parser("train", help="train the DQN policy")
    common(sp)

    sp = sub.add_parser("eval", help="evaluate a policy over seeded episodes")
    common(sp)
    sp.add_argument("--policy", choices=sorted(_POLICY_FLAGS), required=True)
    sp.add_argument("--checkpoint", default=None, help="required for --policy dqn")
    sp.add_argument("--episodes", type=int, default=None,
                    help="override eval.episodes")

    sp = sub.add_parser("sweep", help="run the configured parameter sweep")
    common(sp)
    sp.add_argument("--axis", choices=("mass", "spring_k", "lookback"), default=None)
    sp.add_argument("--values", default=None, help="comma-separated axis values")
    sp.add_argument("--reps", type=int, default=None)
    sp.add_argument("--policies", default=None,
                    help="comma-separated subset of oracle,fixed,dqn")

    sp = sub.add_parser("pattern", help="export the beam-pattern CSV")
    common(sp)
    sp.add_argument("--span-deg", type=float, default=60.0)
    sp.add_argument("--step-deg", type=float, default=1.0)

    sp = sub.add_parser("trajectory", help="export an impulse-response trajectory")
    common(sp)
    sp.add_argument("--duration-s", type=float, default=0.5)
    sp.add_argument("--impulse-time-s", type=float, default=0.0)
    sp.add_argument("--with-wind", action="store_true")
    return p


def _load(args) -> "ExperimentConfig":
    values = _parse_file(args.config)
    if args.smoke:
        values = apply_smoke(values)
    if args.seed is not None:
        values["seed"] = str(args.seed)
    return build_config(values)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _load(args)
    except (ConfigError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1

    try:
        if args.verb == "train":
            ckpt, log = bench.run_train(cfg, args.out)
            print(f"checkpoint: {ckpt}\ntraining log: {log}")
        elif args.verb == "eval":
            episodes = args.episodes if args.episodes is not None else cfg.eval_episodes
            record = bench.run_eval(cfg, args.checkpoint,
                                    _POLICY_FLAGS[args.policy], episodes, args.out)
            print(record.to_json())
        elif args.verb == "sweep":
            sweep = cfg.sweep
            if any(v is not None for v in (args.axis, args.values, args.reps,
                                           args.policies)):
                sweep = SweepSpec(
                    axis=args.axis or sweep.axis,
                    values=tuple(float(v) for v in args.values.split(","))
                    if args.values else sweep.values,
                    repetitions=args.reps if args.reps is not None else sweep.repetitions,
                    policies=tuple(args.policies.split(","))
                    if args.policies else sweep.policies)
            summary = bench.run_sweep(cfg, sweep, args.out)
            print(f"sweep summary: {summary}")
        elif args.verb == "pattern":
            print(bench.export_pattern(cfg, args.out, args.span_deg, args.step_deg))
        elif args.verb == "trajectory":
            print(bench.export_trajectory(cfg, args.out, args.duration_s,
                                          args.impulse_time_s, args.with_wind))
    except (ConfigError, bench.EvalError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # runtime failure
        print(f"runtime error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

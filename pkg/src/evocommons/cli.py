"""Command-line entry points.

    evocommons train CONFIG [--output DIR] [--resume] [--strict-order]
    evocommons replay RUN_DIR EPISODE [--render text|png] [--out PATH]
    evocommons report-weights CHECKPOINT [--out CSV]
    evocommons validate-config CONFIG
    evocommons plot RUN_DIR [--out PNG]

The EVOCOMMONS_OUTPUT_ROOT environment variable, when set, prefixes any
relative output directory.
"""

from __future__ import annotations

import argparse
import sys

from .config import config_to_text, load_config
from .errors import ConfigError, IntegrityError, UsageError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evocommons",
        description="Evolve intrinsic social-preference rewards in commons-dilemma grid games.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run a training experiment from a config file")
    p_train.add_argument("config", help="path to a flat key-value config file")
    p_train.add_argument("--output", help="override the config's output_dir")
    p_train.add_argument("--resume", action="store_true",
                         help="continue from the latest checkpoint in the run directory")
    p_train.add_argument("--strict-order", action="store_true",
                         help="serialize evolution against episode order (always in "
                              "effect in this in-process implementation; accepted for "
                              "interface compatibility)")

    p_replay = sub.add_parser("replay", help="re-simulate a recorded episode and verify it")
    p_replay.add_argument("run_dir")
    p_replay.add_argument("episode", type=int)
    p_replay.add_argument("--render", choices=["text", "png"],
                          help="also emit frames (omit to validate only)")
    p_replay.add_argument("--out", help="frame output path")

    p_weights = sub.add_parser("report-weights",
                               help="summarize reward-network weight distributions")
    p_weights.add_argument("checkpoint")
    p_weights.add_argument("--out", help="write the report as CSV here")

    p_validate = sub.add_parser("validate-config", help="parse, validate, and echo a config")
    p_validate.add_argument("config")

    p_plot = sub.add_parser("plot", help="plot the social-outcome metrics of a run")
    p_plot.add_argument("run_dir")
    p_plot.add_argument("--out", help="output PNG path")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except (ConfigError, UsageError, IntegrityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    if args.command == "train":
        from .harness import run_experiment
        config = load_config(args.config)
        if args.output:
            config.output_dir = args.output
        result = run_experiment(config, resume=args.resume)
        print(f"run complete: {result.episodes_written} episodes in {result.run_dir}"
              + (f" ({result.flagged_episodes} flagged)" if result.flagged_episodes else ""))
        return 0

    if args.command == "replay":
        from .replay import replay_episode
        summary = replay_episode(args.run_dir, args.episode, render=args.render,
                                 frames_dir=args.out)
        print(f"episode {summary['episode']}: returns verified "
              f"{summary['returns']} over {summary['steps']} steps"
              + (f", frames at {summary['frames']}" if summary["frames"] else ""))
        return 0

    if args.command == "report-weights":
        from .reports import report_weights
        rows = report_weights(args.checkpoint, out_csv=args.out)
        width = max(len(r["param"]) for r in rows)
        print(f"{'param'.ljust(width)}  layer  {'mean':>10}  {'std':>10}  {'min':>10}  {'max':>10}")
        for r in rows:
            print(f"{r['param'].ljust(width)}  {r['layer']:>5}  {r['mean']:>10.4f}  "
                  f"{r['std']:>10.4f}  {r['min']:>10.4f}  {r['max']:>10.4f}")
        if args.out:
            print(f"written to {args.out}")
        return 0

    if args.command == "validate-config":
        config = load_config(args.config)
        config.validate()
        sys.stdout.write(config_to_text(config))
        print("# config OK")
        return 0

    if args.command == "plot":
        from .reports import plot_run
        out = plot_run(args.run_dir, out_png=args.out)
        print(f"plot written to {out}")
        return 0

    raise UsageError(f"unknown command {args.command!r}")


if __name__ == "__main__":
    raise SystemExit(main())

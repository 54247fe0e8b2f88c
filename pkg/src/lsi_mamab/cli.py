"""Command line entry point.

    lsi-mamab run --preset balanced_fig2a --replications 20 --output-dir out
    lsi-mamab plot out/balanced_fig2a.csv --x M --y overall_regret_mean --output fig.svg

``run`` is implied when the first argument is an option.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .engine import ConfigError
from .harness import (PRESETS, SETTINGS, get_preset, parse_config_file, plot_preset,
                      render_plot, run_preset)

_BOOL_TRUE = {"1", "true", "yes", "on"}


def _int_list(text: str) -> list[int]:
    try:
        return [int(float(v)) for v in str(text).replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lsi-mamab", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment preset and write CSV summaries")
    run.add_argument("--config", type=Path, help="flat key = value file; flags override it")
    run.add_argument("--preset", choices=sorted(PRESETS))
    run.add_argument("--agents", type=_int_list, help="M grid, e.g. 10,100,1000")
    run.add_argument("--arms", type=int, help="number of arms N")
    run.add_argument("--horizon", type=_int_list, help="T grid, e.g. 100000")
    run.add_argument("--balance-threshold", type=float, help="B >= 1")
    run.add_argument("--setting", choices=SETTINGS)
    run.add_argument("--replications", type=int)
    run.add_argument("--seed", type=int, help="base seed; replication k uses seed + k")
    run.add_argument("--output-dir", type=Path)
    run.add_argument("--trace", action="store_true", default=None, help="dump a per-pull JSONL trace per run")
    run.add_argument("--exclude-own-shares", action="store_true", default=None,
                     help="do not charge agents for their own broadcasts")
    run.add_argument("--workers", type=int, help="worker processes for replications")
    run.add_argument("--plot", action="store_true", default=None, help="also render the preset figure as SVG")

    plot = sub.add_parser("plot", help="render a summary CSV as a line plot")
    plot.add_argument("csv", type=Path)
    plot.add_argument("--x", required=True)
    plot.add_argument("--y", nargs="+", required=True)
    plot.add_argument("--output", type=Path, required=True)
    plot.add_argument("--title")
    return parser


def _merge_config(args: argparse.Namespace) -> dict:
    opts = {}
    if args.config is not None:
        raw = parse_config_file(args.config)
        converters = {
            "agents": _int_list, "horizon": _int_list, "arms": int, "balance_threshold": float,
            "replications": int, "seed": int, "workers": int, "output_dir": Path,
            "trace": lambda v: v.lower() in _BOOL_TRUE,
            "exclude_own_shares": lambda v: v.lower() in _BOOL_TRUE,
            "plot": lambda v: v.lower() in _BOOL_TRUE,
            "preset": str, "setting": str,
        }
        for key, value in raw.items():
            if key not in converters:
                raise ConfigError(f"unknown config key {key!r}; known keys: {sorted(converters)}")
            try:
                opts[key] = converters[key](value)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise ConfigError(f"bad value for {key}: {value!r}") from exc
    for key, value in vars(args).items():
        if key not in ("command", "config") and value is not None:
            opts[key] = value
    return opts


def _cmd_run(args: argparse.Namespace) -> int:
    opts = _merge_config(args)
    if "preset" not in opts:
        raise ConfigError("a preset is required (--preset or 'preset = ...' in --config)")
    if opts.get("setting") is not None and opts["setting"] not in SETTINGS:
        raise ConfigError(f"unknown setting {opts['setting']!r}")
    preset = get_preset(opts["preset"]).with_overrides(
        agents=opts.get("agents"), arms=opts.get("arms"), horizons=opts.get("horizon"),
        threshold=opts.get("balance_threshold"), setting=opts.get("setting"),
        replications=opts.get("replications"), seed=opts.get("seed"),
    )
    out = opts.get("output_dir", Path("results"))
    summary = run_preset(preset, out, workers=opts.get("workers", 1), trace=bool(opts.get("trace")),
                         exclude_own_shares=bool(opts.get("exclude_own_shares")))
    print(summary)
    if opts.get("plot"):
        print(plot_preset(preset, summary, Path(out) / f"{preset.name}.svg"))
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0].startswith("-") and argv[0] not in ("-h", "--help"):
        argv.insert(0, "run")
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        print(render_plot(args.csv, args.x, args.y, args.output, title=args.title))
        return 0
    except (ValueError, OSError) as exc:
        print(f"lsi-mamab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

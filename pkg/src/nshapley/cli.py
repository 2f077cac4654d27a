"""Command line interface.

Subcommands:

* ``explain``  order-n indices for selected points
* ``gam``      the full decomposition per point
* ``degree``   interaction-degree report over points
* ``check``    efficiency / dual-path / recovery suites on a config
* ``plot``     figures: ``plot bars`` or ``plot dependence FEATURE``

Every subcommand accepts either ``--config run.json`` or inline flags;
flags override config-file entries.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import ConfigError, RunConfig, RunError, run_check, run_degree, run_explain, run_gam, run_plot
from .datasets import DatasetError
from .models import ProcessFailed, ProtocolTimeout
from .valuefn import NoMatchingRows


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON run configuration file")
    parser.add_argument("--data", help="CSV dataset (header line required)")
    parser.add_argument("--model", help="model spec: JSON object or bare type name")
    parser.add_argument("--value-fn", help="value function spec: JSON object or bare type name")
    parser.add_argument("--background", help="'all' or a row range 'start:stop'")
    parser.add_argument("--order", help="explanation order: integer or 'all'")
    parser.add_argument("--points", help="'all', 'sample:N', or comma-joined row indices")
    parser.add_argument("--out", help="output path")
    parser.add_argument("--format", choices=["json", "csv", "svg"], help="output format")
    parser.add_argument("--seed", type=int, help="seed for point sampling")


def _json_or_name(raw: str):
    raw = raw.strip()
    if raw.startswith("{"):
        try:
            return json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"not valid JSON: {raw!r} ({exc})") from exc
    return {"type": raw}


def _assemble_config(args: argparse.Namespace) -> RunConfig:
    base: dict = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ConfigError(f"{args.config}: config document must be a JSON object")
        base.update(loaded)
    if args.data is not None:
        base["data"] = args.data
    if args.model is not None:
        base["model"] = _json_or_name(args.model)
    if args.value_fn is not None:
        base["value_fn"] = _json_or_name(args.value_fn)
    if args.background is not None:
        base["background"] = args.background
    if args.order is not None:
        base["order"] = args.order
    if args.points is not None:
        base["points"] = args.points
    if args.out is not None:
        base["out"] = args.out
    if args.format is not None:
        base["format"] = args.format
    if args.seed is not None:
        base["seed"] = args.seed
    return RunConfig.from_mapping(base)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nshapley",
        description="Exact interaction attributions and functional decompositions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("explain", "compute order-n indices for the selected points"),
        ("gam", "compute the full functional decomposition per point"),
        ("degree", "interaction-degree report over the selected points"),
        ("check", "run the efficiency/dual-path/recovery suites"),
    ):
        p = sub.add_parser(name, help=text)
        _add_common_flags(p)
    plot = sub.add_parser("plot", help="render figures (bars | dependence)")
    plot.add_argument("mode", choices=["bars", "dependence"])
    plot.add_argument(
        "feature",
        nargs="?",
        type=int,
        help="0-based feature index (dependence mode only)",
    )
    _add_common_flags(plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _assemble_config(args)
        if args.command == "explain":
            text = run_explain(config)
            if not config.out:
                sys.stdout.write(text)
        elif args.command == "gam":
            text = run_gam(config)
            if not config.out:
                sys.stdout.write(text)
        elif args.command == "degree":
            text = run_degree(config)
            if not config.out:
                sys.stdout.write(text)
        elif args.command == "check":
            text, ok = run_check(config)
            sys.stdout.write(text)
            return 0 if ok else 1
        elif args.command == "plot":
            if not config.out:
                raise ConfigError("plot: --out is required")
            written = run_plot(config, args.mode, args.feature, config.out)
            for path in written:
                sys.stdout.write(path + "\n")
    except (
        ConfigError,
        RunError,
        DatasetError,
        NoMatchingRows,
        ProcessFailed,
        ProtocolTimeout,
        FileNotFoundError,
    ) as exc:
        sys.stderr.write(f"nshapley: error: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

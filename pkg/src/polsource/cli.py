"""Command-line front end.

    polsource run --config PATH [--seed N] [--out DIR] [--threads N]
    polsource validate --config PATH
    polsource preset list
    polsource preset show NAME

Exit codes: 0 success, 1 invalid configuration, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, dump_config, parse_config
from .presets import PRESETS, preset
from .runner import OUTPUT_ENV, build, execute, resolve_output_dir, write_outputs

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("polsource")


def _load(path, seed=None):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    cfg = parse_config(text)
    if seed is not None:
        cfg.experiment.seed = seed
    return cfg


def cmd_run(args):
    cfg = _load(args.config, args.seed)
    build(cfg)
    try:
        outputs = execute(cfg, workers=args.threads)
    except ConfigError:
        raise
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        log.error("run failed: %s", exc)
        return EXIT_RUNTIME
    out_dir = resolve_output_dir(args.out, cfg)
    for path in write_outputs(outputs, out_dir):
        print(path)
    return EXIT_OK


def cmd_validate(args):
    cfg = _load(args.config, args.seed)
    build(cfg)
    print(f"ok: scenario {cfg.experiment.scenario}")
    return EXIT_OK


def cmd_preset(args):
    if args.action == "list":
        for name in sorted(PRESETS):
            print(name)
        return EXIT_OK
    if not args.name:
        raise ConfigError("preset show needs a preset name")
    try:
        cfg = preset(args.name)
    except KeyError as exc:
        raise ConfigError(exc.args[0]) from None
    sys.stdout.write(dump_config(cfg))
    return EXIT_OK


def make_parser():
    parser = argparse.ArgumentParser(prog="polsource", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a scenario")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help=f"output directory (default: ${OUTPUT_ENV} or ./polsource-out)")
    run.add_argument("--threads", type=int, default=1)
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("--config", required=True)
    val.add_argument("--seed", type=int)
    val.set_defaults(func=cmd_validate)

    pre = sub.add_parser("preset", help="list or show presets")
    pre.add_argument("action", choices=["list", "show"])
    pre.add_argument("name", nargs="?")
    pre.set_defaults(func=cmd_preset)
    return parser


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())

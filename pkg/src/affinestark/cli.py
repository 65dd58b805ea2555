"""Command-line entry point: ``affinestark <subcommand> [--config PATH] [--out DIR]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .config import CONFIG_SCHEMA, DEFAULT_CONFIG, load_config
from .errors import AffineStarkError, ConfigurationError
from .experiments import RUNNERS, RunContext, run_all, run_bessel
from .io import sha256_file, write_json

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

SUBCOMMANDS = tuple(RUNNERS) + ("all",)

log = logging.getLogger("affinestark")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="JSON experiment config (defaults if omitted)")
    common.add_argument("--out", type=Path, default=None, help="output directory (overrides config 'output')")
    common.add_argument("--threads", type=int, default=1, help="worker threads for independent sub-problems")
    common.add_argument("--verbose", action="store_true", help="log progress to stderr")
    parser = argparse.ArgumentParser(prog="affinestark", description="Self-similar potentials and geometric spectra.")
    parser.add_argument("--version", action="version", version=f"affinestark {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "bessel":
            sp.add_argument("--reconcile", action="store_true",
                            help="only certify the coupling convention and eigenvector argument")
    sp = sub.add_parser("schema", help="print the config JSON schema")
    sp.add_argument("--defaults", action="store_true", help="print the default config instead")
    return parser


def write_manifest(out: Path, files, command: str) -> Path:
    entries = []
    for f in sorted({Path(f).resolve() for f in files}):
        entries.append({"path": f.relative_to(out.resolve()).as_posix(), "bytes": f.stat().st_size,
                        "sha256": sha256_file(f)})
    return write_json(out / "manifest.json", {"command": command, "version": __version__, "files": entries})


def failing_module(exc: BaseException) -> str:
    """Name of the innermost package module on the traceback that raised ``exc``."""
    pkg = Path(__file__).resolve().parent
    name = "affinestark"
    tb = exc.__traceback__
    while tb is not None:
        f = Path(tb.tb_frame.f_code.co_filename).resolve()
        if pkg in f.parents and f.stem != "errors":
            name = ".".join(f.relative_to(pkg).with_suffix("").parts)
        tb = tb.tb_next
    return name


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "schema":
        print(json.dumps(DEFAULT_CONFIG if args.defaults else CONFIG_SCHEMA, indent=2, sort_keys=True))
        return EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
    except ConfigurationError as exc:
        print(f"config error: {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out if args.out is not None else Path(cfg["output"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory {out}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    ctx = RunContext(cfg, out, args.threads)
    try:
        if args.command == "all":
            run_all(ctx)
        elif args.command == "bessel":
            run_bessel(ctx, reconcile_only=args.reconcile)
        else:
            RUNNERS[args.command](ctx)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AffineStarkError as exc:
        print(f"numerical failure in {failing_module(exc)}: "
              f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    ctx.json("config.json", cfg.to_dict())
    manifest = write_manifest(out, ctx.files, args.command)
    log.info("wrote %d files and %s", len(ctx.files), manifest)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``lfgen {generate,preview,validate,bench}``.

Exit codes: 0 ok, 2 configuration error, 3 I/O error, 4 missing data,
5 validation failure. Progress goes to stderr, tables and results to stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from lfgen import __version__
from lfgen.config import resolve
from lfgen.dataset import atomic_write, bench, bench_document, format_table, generate_dataset, linearity, validate_dataset
from lfgen.errors import ConfigError, DatasetIOError, MissingDataError
from lfgen.preview import write_preview

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_MISSING = 4
EXIT_INVALID = 5

SPREAD_BOUND = 0.25


def _err(msg):
    print(msg, file=sys.stderr)


def _add_config_args(p):
    p.add_argument("-c", "--config", metavar="PATH", help="run configuration JSON")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE", help="dotted-path override, repeatable")


def cmd_generate(args) -> int:
    cfg = resolve(args.config, args.overrides, output_dir=args.out)

    def progress(done, total):
        _err(f"scene {done}/{total}")

    manifest = generate_dataset(cfg, overwrite=args.force, progress=progress)
    views = sum(len(s["views"]) for s in manifest.scenes)
    print(f"generated {len(manifest.scenes)} scenes ({views} views) in {manifest.timing['total_seconds']:.2f} s -> {cfg.output_dir}")
    return EXIT_OK


def cmd_preview(args) -> int:
    sheet, epi = write_preview(args.dataset, args.scene, args.out)
    print(sheet)
    print(epi)
    return EXIT_OK


def cmd_validate(args) -> int:
    root = Path(args.dataset)
    if not (root / "manifest.json").is_file():
        raise MissingDataError(f"no manifest.json in {root}")
    report = validate_dataset(root)
    print(report.summary())
    return EXIT_OK if report.ok else EXIT_INVALID


def _parse_sizes(text):
    try:
        sizes = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError("sizes", f"not a comma-separated list of integers: {text!r}") from None
    if not sizes:
        raise ConfigError("sizes", "need at least one dataset size")
    if any(n < 1 for n in sizes):
        raise ConfigError("sizes", "sizes must be >= 1")
    return sizes


def cmd_bench(args) -> int:
    sizes = _parse_sizes(args.sizes)
    template = resolve(args.config, args.overrides)
    out_dir = Path(args.out) if args.out else Path.cwd()

    def progress(row):
        _err(f"size {row.size}: {row.seconds:.2f} s")

    if args.repeats < 1:
        raise ConfigError("repeats", "must be >= 1")
    rows = bench(template, sizes, progress=progress, repeats=args.repeats)
    print(format_table(rows))
    stats = linearity(rows)
    verdict = "within" if stats["per_scene_spread"] < SPREAD_BOUND else "OUTSIDE"
    line = f"per-scene {stats['per_scene_mean']:.4f} s, spread {stats['per_scene_spread'] * 100:.1f}% ({verdict} +/-{SPREAD_BOUND * 100:.0f}%)"
    if "r2" in stats:
        line += f", linear fit R^2 = {stats['r2']:.4f}"
    print(line)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DatasetIOError(out_dir, e.strerror or str(e)) from e
    path = out_dir / "bench.json"
    atomic_write(path, (json.dumps(bench_document(template, rows), indent=2, sort_keys=True) + "\n").encode())
    _err(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lfgen", description="Synthetic light field dataset generator")
    parser.add_argument("--version", action="version", version=f"lfgen {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="render a dataset")
    _add_config_args(p)
    p.add_argument("--out", metavar="DIR", help="output directory (overrides output_dir)")
    p.add_argument("--force", action="store_true", help="overwrite a non-empty output directory")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("preview", help="contact sheet and EPI for one scene")
    p.add_argument("dataset", metavar="DATASET_DIR")
    p.add_argument("--scene", type=int, default=0, metavar="ID")
    p.add_argument("--out", metavar="DIR", help="where to write the images (default: the dataset dir)")
    p.set_defaults(func=cmd_preview)

    p = sub.add_parser("validate", help="check a dataset against its manifest")
    p.add_argument("dataset", metavar="DATASET_DIR")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("bench", help="time generation across dataset sizes")
    _add_config_args(p)
    p.add_argument("--sizes", default="100,200,500,1000,2000", metavar="CSV")
    p.add_argument("--repeats", type=int, default=1, metavar="N", help="time each size N times and keep the fastest")
    p.add_argument("--out", metavar="DIR", help="directory for bench.json (default: cwd)")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as e:
        _err(f"config error: {e}")
        return EXIT_CONFIG
    except MissingDataError as e:
        _err(f"missing data: {e}")
        return EXIT_MISSING
    except (DatasetIOError, OSError) as e:
        _err(f"I/O error: {e}")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

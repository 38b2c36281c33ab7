"""Command-line surface: augment, integrate, saliency, convert, bench.

Exit codes: 0 on success, 1 on usage errors, 2 on data errors.  A batch
``augment`` run with per-file failures still exits 0; the failures are
recorded in the manifest.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench as bench_mod
from . import core, pipeline
from .errors import EvaugError
from .integrator import integrate, slice_stream
from .spatial import PatchGrid, spatial_saliency
from .temporal import temporal_saliency

PROG = "evaug"


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; this tool reserves 2
    # for data errors.
    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _positive_int(value: str) -> int:
    try:
        n = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {value!r}")
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {n}")
    return n


def _read_bytes(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    return Path(path).read_bytes()


def _write_bytes(path: str, data: bytes) -> None:
    if path == "-":
        sys.stdout.buffer.write(data)
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(data)


def _load_stream(path: str, polarity_encoding: str = core.POLARITY_PM1) -> core.EventStream:
    data = _read_bytes(path)
    if data[:4] == core.STREAM_MAGIC:
        return core.parse_binary_stream(data)
    return core.parse_text_stream(data, polarity_encoding)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_augment(args: argparse.Namespace) -> int:
    config = pipeline.load_config(args.config)
    manifest = pipeline.walk_dataset(args.input, args.output, config,
                                     workers=args.workers, seed_override=args.seed)
    print(f"processed {len(manifest.records)} files, {len(manifest.errors)} errors; "
          f"manifest: {Path(args.output) / pipeline.MANIFEST_NAME}")
    for err in manifest.errors:
        print(f"  error: {err.input}: {err.error}", file=sys.stderr)
    return 0


def cmd_integrate(args: argparse.Namespace) -> int:
    stream = _load_stream(args.input)
    tensor = integrate(stream, slice_stream(stream, args.slices))
    _write_bytes(args.output, core.write_frame_tensor(tensor))
    return 0


def cmd_saliency(args: argparse.Namespace) -> int:
    stream = _load_stream(args.input)
    if args.mode == "spatial":
        grid = PatchGrid(stream.width, stream.height, args.patch_size)
        ranking = spatial_saliency(stream, grid)
        ranks = ranking.ranks()
        for idx in range(grid.num_patches):
            row, col = divmod(idx, grid.cols)
            print(f"{idx} {row} {col} {ranking.densities[idx]} {ranks[idx]}")
    else:
        plan = slice_stream(stream, args.slices)
        ranking = temporal_saliency(stream, plan)
        ranks = ranking.ranks()
        for idx in range(plan.num_slices):
            print(f"{idx} {ranking.densities[idx]} {ranks[idx]}")
    return 0


def cmd_convert(args: argparse.Namespace) -> int:
    stream = _load_stream(args.input, args.polarity)
    if args.to == "binary":
        payload = core.write_binary_stream(stream)
    else:
        payload = core.write_text_stream(stream)
    _write_bytes(args.output, payload)
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    if args.input is not None:
        stream = _load_stream(args.input)
    else:
        stream = bench_mod.synth_stream(args.events, args.width, args.height,
                                        seed=args.seed)
    ops = list(bench_mod.available_ops()) if args.ops == "all" \
        else [op.strip() for op in args.ops.split(",") if op.strip()]
    report = bench_mod.run_bench(stream, ops, repeat=args.repeat)
    print(json.dumps(report, indent=2))
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=PROG,
                     description="Event stream augmentation: multi-scale frame "
                                 "integration and saliency-guided masking.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p_aug = sub.add_parser("augment", help="augment every stream file in a "
                                           "directory tree, writing a manifest")
    p_aug.add_argument("--input", required=True, help="input dataset directory")
    p_aug.add_argument("--output", required=True, help="output directory (mirrored tree)")
    p_aug.add_argument("--config", required=True, help="config file (key = value lines)")
    p_aug.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
    p_aug.add_argument("--workers", type=_positive_int, default=1,
                       help="parallel workers (outputs are identical for any count)")
    p_aug.set_defaults(func=cmd_augment)

    p_int = sub.add_parser("integrate", help="integrate a stream into a frame tensor")
    p_int.add_argument("--input", required=True, help="stream file (.evst or text)")
    p_int.add_argument("--output", required=True, help="frame tensor file (.evfr)")
    p_int.add_argument("--slices", required=True, type=_positive_int,
                       help="number of slices T (>= 1)")
    p_int.set_defaults(func=cmd_integrate)

    p_sal = sub.add_parser("saliency", help="print a density saliency report")
    p_sal.add_argument("--input", required=True, help="stream file")
    p_sal.add_argument("--mode", required=True, choices=("spatial", "temporal"))
    p_sal.add_argument("--patch-size", type=_positive_int, default=16,
                       help="spatial mode: patch edge in pixels")
    p_sal.add_argument("--slices", type=_positive_int, default=10,
                       help="temporal mode: number of slices")
    p_sal.set_defaults(func=cmd_saliency)

    p_conv = sub.add_parser("convert", help="convert between text and binary "
                                            "stream formats ('-' = stdin/stdout)")
    p_conv.add_argument("--input", required=True)
    p_conv.add_argument("--output", required=True)
    p_conv.add_argument("--to", required=True, choices=("binary", "text"))
    p_conv.add_argument("--polarity", choices=core.POLARITY_ENCODINGS,
                        default=core.POLARITY_PM1,
                        help="polarity encoding of text input")
    p_conv.set_defaults(func=cmd_convert)

    p_bench = sub.add_parser("bench", help="measure op throughput")
    p_bench.add_argument("--input", default=None,
                         help="stream file; omit to synthesize one")
    p_bench.add_argument("--events", type=_positive_int, default=1_000_000,
                         help="synthetic stream size when --input is omitted")
    p_bench.add_argument("--width", type=_positive_int, default=128)
    p_bench.add_argument("--height", type=_positive_int, default=128)
    p_bench.add_argument("--ops", default="all",
                         help="comma-separated op names, or 'all'")
    p_bench.add_argument("--repeat", type=_positive_int, default=3)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except EvaugError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

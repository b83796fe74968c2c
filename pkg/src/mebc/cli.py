"""Command-line interface: ``mebc {compress,decompress,eval,rd,gen,info}``.

Raw files hold samples in little-endian order with the first dimension
varying slowest (C order).  Exit codes: 0 ok, 1 other failure, 2 bad
configuration, 3 corrupted stream, 4 error-bound violation.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__
from .core import CompressionConfig, ConfigError, ErrorMode, Grid, MebcError
from .metrics import evaluate, format_psnr, rd_curve
from .pipeline import compress, decompress, read_header, within_bound
from .synthetic import SyntheticKind, generate_synthetic

DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}


def parse_dims(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise ConfigError(f"bad dimension list {text!r}") from None
    if not 1 <= len(dims) <= 4 or any(n < 0 for n in dims):
        raise ConfigError(f"dims must be 1..4 non-negative extents, got {text!r}")
    return dims


def parse_pipeline(text: str) -> tuple[str, int | None]:
    """``lr``, ``interp``, ``adaptive``, ``trunc`` or ``trunc:K``."""
    name, _, k = text.partition(":")
    if name == "trunc" and k:
        try:
            return name, int(k)
        except ValueError:
            raise ConfigError(f"bad byte count in {text!r}") from None
    if k:
        raise ConfigError(f"pipeline {name!r} takes no parameter")
    return name, None


def parse_eb_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part]
    except ValueError:
        raise ConfigError(f"bad eb list {text!r}") from None


def read_raw(path, dtype: str, dims) -> Grid:
    data = np.fromfile(path, dtype=DTYPES[dtype])
    expected = int(np.prod(dims))
    if data.size != expected:
        raise ConfigError(f"{path}: holds {data.size} samples, dims {dims} need {expected}")
    return Grid(tuple(dims), data.astype(DTYPES[dtype].newbyteorder("=")))


def write_raw(path, grid: Grid):
    grid.data.astype(grid.dtype.newbyteorder("<")).tofile(path)


def _config(args, error_bound=None) -> CompressionConfig:
    pipeline, k = parse_pipeline(args.pipeline)
    return CompressionConfig(
        error_bound=args.error_bound if error_bound is None else error_bound,
        error_mode=ErrorMode[args.mode],
        pipeline=pipeline,
        truncation_bytes=k,
        block_size=args.block_size,
        quant_radius=args.radius,
        lossless=args.lossless,
        strict=args.strict,
    )


def cmd_compress(args):
    grid = read_raw(args.input, args.type, parse_dims(args.dims))
    stream = compress(grid, _config(args))
    with open(args.output, "wb") as fh:
        fh.write(stream)
    print(f"{grid.data.nbytes} -> {len(stream)} bytes (ratio {grid.data.nbytes / max(len(stream), 1):.3f})")


def cmd_decompress(args):
    with open(args.input, "rb") as fh:
        grid = decompress(fh.read())
    write_raw(args.output, grid)
    dtype = "f32" if grid.dtype == np.float32 else "f64"
    print(f"{dtype} {','.join(map(str, grid.dims))}")


def cmd_eval(args):
    dims = parse_dims(args.dims)
    a = read_raw(args.a, args.type, dims)
    b = read_raw(args.b, args.type, dims)
    compressed = args.compressed_size
    if args.compressed:
        with open(args.compressed, "rb") as fh:
            compressed = len(fh.read())
    report = evaluate(a, b, compressed or a.data.nbytes)
    if args.compressed or args.compressed_size:
        print(f"ratio {report.compression_ratio:.4f}")
        print(f"bit_rate {report.bit_rate:.4f}")
    print(f"psnr {format_psnr(report.psnr)}")
    print(f"max_abs_err {report.max_abs_error:.6g}")
    print(f"max_rel_err {report.max_rel_error:.6g}")
    if args.error_bound is not None:
        ok = within_bound(a.data, b.data, ErrorMode[args.mode], args.error_bound)
        if not ok.all():
            print(f"bound violation: {int((~ok).sum())} elements exceed eb={args.error_bound:g}",
                  file=sys.stderr)
            return 4
    return 0


def cmd_rd(args):
    grid = read_raw(args.input, args.type, parse_dims(args.dims))
    eb_list = parse_eb_list(args.eb_list)
    if not eb_list:
        raise ConfigError("eb list is empty")
    rows = rd_curve(grid, _config(args, error_bound=eb_list[0]), eb_list, args.csv)
    for row in rows:
        print(f"eb={row['eb']:g} bit_rate={row['bit_rate']:.4f} psnr={format_psnr(row['psnr'])}")


def cmd_gen(args):
    grid = generate_synthetic(SyntheticKind[args.kind.upper()], parse_dims(args.dims), args.seed,
                              DTYPES[args.type].newbyteorder("="))
    write_raw(args.output, grid)


def cmd_info(args):
    with open(args.input, "rb") as fh:
        header = read_header(fh.read())
    print(f"dtype {header.dtype}")
    print(f"dims {','.join(map(str, header.dims))}")
    print(f"mode {header.error_mode.name} eb {header.error_bound:g}")
    print(f"pipeline {header.pipeline.name}")


def _add_compress_options(p, with_eb=True):
    p.add_argument("-t", "--type", choices=sorted(DTYPES), required=True)
    p.add_argument("-d", "--dims", required=True, help="N1[,N2[,N3[,N4]]], slowest first")
    p.add_argument("-M", "--mode", choices=["ABS", "REL"], default="ABS")
    if with_eb:
        p.add_argument("-e", "--error-bound", type=float, required=True)
    p.add_argument("-p", "--pipeline", default="lr", help="lr | interp | trunc[:K] | adaptive")
    p.add_argument("--block-size", type=int, default=6)
    p.add_argument("--radius", type=int, default=32768, help="quantization radius")
    p.add_argument("--lossless", choices=["none", "deflate"], default=None)
    p.add_argument("--strict", action="store_true", help="reject NaN and infinity")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mebc", description="Error-bounded lossy compression of float grids.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compress", help="compress a raw file")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    _add_compress_options(p)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("decompress", help="decompress to a raw file")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_decompress)

    p = sub.add_parser("eval", help="compare an original and a decompressed raw file")
    p.add_argument("-a", required=True, help="original")
    p.add_argument("-b", required=True, help="decompressed")
    p.add_argument("-t", "--type", choices=sorted(DTYPES), required=True)
    p.add_argument("-d", "--dims", required=True)
    p.add_argument("-z", "--compressed", help="compressed file, for ratio and bit rate")
    p.add_argument("--compressed-size", type=int)
    p.add_argument("-M", "--mode", choices=["ABS", "REL"], default="ABS")
    p.add_argument("-e", "--error-bound", type=float, help="fail with exit code 4 if exceeded")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rd", help="rate-distortion sweep written as CSV")
    p.add_argument("-i", "--input", required=True)
    _add_compress_options(p, with_eb=False)
    p.add_argument("--eb-list", required=True, help="ascending, comma separated")
    p.add_argument("--csv", required=True)
    p.set_defaults(func=cmd_rd)

    p = sub.add_parser("gen", help="write a synthetic field")
    p.add_argument("-k", "--kind", choices=[k.name.lower() for k in SyntheticKind], required=True)
    p.add_argument("-t", "--type", choices=sorted(DTYPES), default="f32")
    p.add_argument("-d", "--dims", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("info", help="print a compressed stream's header")
    p.add_argument("-i", "--input", required=True)
    p.set_defaults(func=cmd_info)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args) or 0
    except MebcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Distortion metrics and rate-distortion sweeps."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import BoundViolation, CompressionConfig, ConfigError, ErrorMode, Grid
from .pipeline import compress, decompress, within_bound

CSV_COLUMNS = ("eb", "compressed_bytes", "ratio", "bit_rate", "psnr", "max_abs_err", "c_MBps", "d_MBps")


@dataclass(frozen=True)
class EvalReport:
    compression_ratio: float
    bit_rate: float
    psnr: float
    max_abs_error: float
    max_rel_error: float
    compress_seconds: float = float("nan")
    decompress_seconds: float = float("nan")


def _check_dims(orig: Grid, decomp: Grid):
    if orig.dims != decomp.dims:
        raise ConfigError(f"dimension mismatch: {orig.dims} vs {decomp.dims}")


def psnr(orig: Grid, decomp: Grid) -> float:
    """``20 log10(range) - 10 log10(MSE)`` with the original's value range as peak."""
    _check_dims(orig, decomp)
    a = orig.data.astype(np.float64)
    b = decomp.data.astype(np.float64)
    mse = float(np.mean((a - b) ** 2)) if a.size else 0.0
    if mse == 0:
        return math.inf
    value_range = float(a.max() - a.min())
    if value_range == 0:
        return -math.inf
    return 20 * math.log10(value_range) - 10 * math.log10(mse)


def bit_rate(original_bytes: int, compressed_bytes: int, bits_per_sample: int) -> float:
    if compressed_bytes <= 0:
        raise ValueError("compressed size must be positive")
    return bits_per_sample * compressed_bytes / original_bytes


def format_psnr(value: float) -> str:
    return "inf" if value == math.inf else f"{value:.4f}"


def max_errors(orig: Grid, decomp: Grid) -> tuple[float, float]:
    a = orig.data.astype(np.float64)
    b = decomp.data.astype(np.float64)
    if not a.size:
        return 0.0, 0.0
    err = np.abs(a - b)
    nonzero = a != 0
    rel = float((err[nonzero] / np.abs(a[nonzero])).max()) if nonzero.any() else 0.0
    return float(err.max()), rel


def evaluate(orig: Grid, decomp: Grid, compressed_bytes: int,
             compress_seconds: float = float("nan"), decompress_seconds: float = float("nan")) -> EvalReport:
    _check_dims(orig, decomp)
    original_bytes = orig.data.nbytes
    max_abs, max_rel = max_errors(orig, decomp)
    return EvalReport(
        compression_ratio=original_bytes / compressed_bytes,
        bit_rate=bit_rate(original_bytes, compressed_bytes, 8 * orig.dtype.itemsize),
        psnr=psnr(orig, decomp),
        max_abs_error=max_abs,
        max_rel_error=max_rel,
        compress_seconds=compress_seconds,
        decompress_seconds=decompress_seconds,
    )


def run_once(grid: Grid, config: CompressionConfig) -> tuple[EvalReport, bytes, Grid]:
    """Compress, decompress and evaluate; raises BoundViolation on any excess error."""
    t0 = time.perf_counter()
    stream = compress(grid, config)
    t1 = time.perf_counter()
    out = decompress(stream)
    t2 = time.perf_counter()
    ok = within_bound(grid.data, out.data, config.error_mode, config.error_bound)
    if not ok.all():
        bad = int(np.argmin(ok))
        raise BoundViolation(
            f"eb={config.error_bound:g}: element {bad} off by "
            f"{abs(float(out.data[bad]) - float(grid.data[bad])):.6g} ({config.error_mode.name})")
    return evaluate(grid, out, len(stream), t1 - t0, t2 - t1), stream, out


def rd_curve(grid: Grid, config: CompressionConfig, eb_list: Sequence[float], csv_path=None) -> list[dict]:
    """One row per error bound; ``config.error_bound`` is replaced by each entry."""
    if not eb_list:
        raise ConfigError("eb_list must not be empty")
    if list(eb_list) != sorted(eb_list):
        raise ConfigError("eb_list must be ascending")
    rows = []
    megabytes = grid.data.nbytes / 1e6
    for eb in eb_list:
        cfg = CompressionConfig(**{**config.__dict__, "error_bound": float(eb)})
        report, stream, _ = run_once(grid, cfg)
        rows.append({
            "eb": float(eb),
            "compressed_bytes": len(stream),
            "ratio": report.compression_ratio,
            "bit_rate": report.bit_rate,
            "psnr": report.psnr,
            "max_abs_err": report.max_abs_error,
            "c_MBps": megabytes / report.compress_seconds if report.compress_seconds > 0 else math.inf,
            "d_MBps": megabytes / report.decompress_seconds if report.decompress_seconds > 0 else math.inf,
        })
    if csv_path is not None:
        write_csv(rows, csv_path)
    return rows


def write_csv(rows: list[dict], path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([
                f"{row['eb']:g}", row["compressed_bytes"], f"{row['ratio']:.6g}", f"{row['bit_rate']:.6g}",
                format_psnr(row["psnr"]), f"{row['max_abs_err']:.6g}", f"{row['c_MBps']:.3f}",
                f"{row['d_MBps']:.3f}",
            ])


__all__ = ["CSV_COLUMNS", "EvalReport", "ErrorMode", "bit_rate", "evaluate", "format_psnr", "max_errors",
           "psnr", "rd_curve", "run_once", "write_csv"]

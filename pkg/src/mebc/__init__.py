"""Modular error-bounded lossy compression for scientific floating-point grids."""

from .core import (
    BoundViolation,
    CompressionConfig,
    ConfigError,
    CorruptionError,
    ErrorMode,
    Grid,
    MebcError,
    iterate_blocks,
    neighbor,
)
from .metrics import EvalReport, bit_rate, evaluate, psnr, rd_curve
from .pipeline import adaptive_select, compress, decompress, truncation_compress, truncation_decompress
from .synthetic import SyntheticKind, generate_synthetic

__version__ = "0.1.0"

__all__ = [
    "BoundViolation",
    "CompressionConfig",
    "ConfigError",
    "CorruptionError",
    "ErrorMode",
    "EvalReport",
    "Grid",
    "MebcError",
    "SyntheticKind",
    "adaptive_select",
    "bit_rate",
    "compress",
    "decompress",
    "evaluate",
    "generate_synthetic",
    "iterate_blocks",
    "neighbor",
    "psnr",
    "rd_curve",
    "truncation_compress",
    "truncation_decompress",
]

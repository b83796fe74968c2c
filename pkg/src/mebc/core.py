"""Grid model, compression configuration and block iteration.

Every stage of the compressor works on a :class:`Grid`: a row-major array of
float32 or float64 samples with 1 to 4 dimensions.  Blocks are views into the
parent grid produced by :func:`iterate_blocks`; edge blocks are clipped, never
padded.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

MAX_DIMS = 4
SUPPORTED_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))


class MebcError(Exception):
    """Base class for all compressor errors."""

    exit_code = 1


class ConfigError(MebcError, ValueError):
    """Invalid configuration or unsupported input."""

    exit_code = 2


class CorruptionError(MebcError):
    """A compressed stream is malformed, truncated or inconsistent."""

    exit_code = 3

    def __init__(self, message: str, section: str | None = None):
        self.section = section
        if section:
            message = f"[{section}] {message}"
        super().__init__(message)


class BoundViolation(MebcError):
    """Decompressed data exceeded the configured error bound."""

    exit_code = 4


class ErrorMode(enum.IntEnum):
    ABS = 0
    REL = 1  # point-wise relative


PIPELINES = ("lr", "interp", "trunc", "adaptive")


@dataclass(frozen=True)
class Grid:
    """N-dimensional sample array with row-major (last index fastest) layout."""

    dims: tuple[int, ...]
    data: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not 1 <= len(dims) <= MAX_DIMS:
            raise ConfigError(f"grids must have 1..{MAX_DIMS} dimensions, got {len(dims)}")
        if any(d < 0 for d in dims):
            raise ConfigError(f"negative extent in dims {dims}")
        data = np.ascontiguousarray(self.data).reshape(-1)
        if data.dtype not in SUPPORTED_DTYPES:
            raise ConfigError(f"unsupported dtype {data.dtype}; use float32 or float64")
        if data.size != int(np.prod(dims, dtype=np.int64)):
            raise ConfigError(f"data has {data.size} elements but dims {dims} need {int(np.prod(dims))}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_array(cls, array: np.ndarray) -> "Grid":
        array = np.asarray(array)
        return cls(array.shape, array)

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def array(self) -> np.ndarray:
        """The samples as an ndarray of shape ``dims`` (a view, not a copy)."""
        return self.data.reshape(self.dims)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Grid):
            return NotImplemented
        return (
            self.dims == other.dims
            and self.dtype == other.dtype
            and self.data.tobytes() == other.data.tobytes()
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class CompressionConfig:
    """User-facing compression parameters.

    ``truncation_bytes`` only applies to the truncation pipeline; ``None``
    selects the smallest byte count that satisfies ``error_bound``.
    ``coefficient_eb_divisor`` sets the storage precision of regression
    intercepts (``error_bound / divisor``); slopes use ``divisor * block_size``.
    """

    error_bound: float
    error_mode: ErrorMode = ErrorMode.ABS
    pipeline: str = "lr"
    block_size: int = 6
    quant_radius: int = 32768
    truncation_bytes: int | None = None
    coefficient_eb_divisor: float = 2.0
    noise_coeff: float = 0.5
    lossless: str | None = None
    lossless_level: int = 6
    strict: bool = False

    def __post_init__(self):
        object.__setattr__(self, "error_mode", ErrorMode(self.error_mode))
        eb = float(self.error_bound)
        if not np.isfinite(eb) or eb <= 0:
            raise ConfigError(f"error bound must be positive and finite, got {self.error_bound}")
        if self.error_mode == ErrorMode.REL and eb >= 1:
            raise ConfigError(f"relative error bound must lie in (0, 1), got {eb}")
        object.__setattr__(self, "error_bound", eb)
        if self.pipeline not in PIPELINES:
            raise ConfigError(f"unknown pipeline {self.pipeline!r}; expected one of {PIPELINES}")
        if self.block_size < 1:
            raise ConfigError("block_size must be >= 1")
        if not 1 <= self.quant_radius < 2**31:
            raise ConfigError("quant_radius must be in [1, 2^31)")
        if self.truncation_bytes is not None and not 1 <= self.truncation_bytes <= 8:
            raise ConfigError(f"truncation_bytes must be in [1, 8], got {self.truncation_bytes}")
        if not self.coefficient_eb_divisor > 0:
            raise ConfigError("coefficient_eb_divisor must be positive")
        if not self.noise_coeff >= 0:
            raise ConfigError("noise_coeff must be non-negative")


@dataclass(frozen=True)
class BlockView:
    """A rectangular, possibly clipped, window into a parent array."""

    origin: tuple[int, ...]
    extents: tuple[int, ...]
    parent: np.ndarray = field(repr=False, compare=False)

    @property
    def slices(self) -> tuple[slice, ...]:
        return tuple(slice(o, o + e) for o, e in zip(self.origin, self.extents))

    @property
    def values(self) -> np.ndarray:
        return self.parent[self.slices]

    @property
    def size(self) -> int:
        return int(np.prod(self.extents))

    def indices(self) -> Iterator[tuple[int, ...]]:
        """Block-local indices in row-major order."""
        return itertools.product(*(range(e) for e in self.extents))

    def global_index(self, local: Sequence[int]) -> tuple[int, ...]:
        return tuple(o + i for o, i in zip(self.origin, local))


def _as_array(grid: Grid | np.ndarray) -> np.ndarray:
    return grid.array if isinstance(grid, Grid) else np.asarray(grid)


def iterate_blocks(grid: Grid | np.ndarray, block_size: int) -> list[BlockView]:
    """Tile ``grid`` with blocks of ``block_size`` per axis, row-major over origins."""
    if block_size < 1:
        raise ConfigError("block_size must be >= 1")
    array = _as_array(grid)
    starts = [range(0, n, block_size) for n in array.shape]
    blocks = []
    for origin in itertools.product(*starts):
        extents = tuple(min(block_size, n - o) for o, n in zip(origin, array.shape))
        blocks.append(BlockView(origin, extents, array))
    return blocks


def neighbor(block: BlockView, element_index: Sequence[int], offset: Sequence[int]) -> float:
    """Value at ``element_index + offset`` in the parent grid.

    ``element_index`` is local to ``block``.  Offsets must be non-positive
    (causal access); any negative resulting coordinate reads as 0.
    """
    if any(o > 0 for o in offset):
        raise ValueError(f"offset {tuple(offset)} is not causal")
    target = tuple(g + o for g, o in zip(block.global_index(element_index), offset))
    if any(t < 0 for t in target):
        return 0.0
    return float(block.parent[target])


def bytes_per_sample(dtype: np.dtype) -> int:
    return np.dtype(dtype).itemsize


def pad_dims3(dims: Sequence[int]) -> tuple[int, int, int]:
    """Trailing unit padding so 1D/2D grids run through 3D kernels unchanged."""
    if len(dims) > 3:
        raise ConfigError(f"{len(dims)}D grids are not supported by this predictor (max 3D)")
    return tuple(dims) + (1,) * (3 - len(dims))  # type: ignore[return-value]

"""Reversible transforms applied before prediction.

The log transform turns a point-wise relative bound into an absolute bound
in the log domain; signs and exact zeros travel in side bitmaps.  The
transposition changes the memory layout so a chosen axis becomes the
fastest-varying one.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

import numpy as np

from .core import ConfigError, CorruptionError, Grid


class PreprocessKind(enum.IntEnum):
    NONE = 0
    LOG = 1
    TRANSPOSE = 2


@dataclass(frozen=True)
class PreprocessState:
    kind: PreprocessKind = PreprocessKind.NONE
    sign_bitmap: np.ndarray | None = None
    zero_bitmap: np.ndarray | None = None
    permutation: tuple[int, ...] | None = None
    derived_abs_eb: float | None = None

    def to_bytes(self) -> bytes:
        out = bytearray([int(self.kind)])
        if self.kind == PreprocessKind.LOG:
            for bitmap in (self.sign_bitmap, self.zero_bitmap):
                out += struct.pack("<Q", bitmap.size)
                out += np.packbits(bitmap).tobytes()
        elif self.kind == PreprocessKind.TRANSPOSE:
            out.append(len(self.permutation))
            out += bytes(self.permutation)
        return bytes(out)

    @classmethod
    def from_bytes(cls, payload: bytes) -> "PreprocessState":
        if not payload:
            raise CorruptionError("empty preprocess section", "preprocess")
        kind = payload[0]
        try:
            kind = PreprocessKind(kind)
        except ValueError:
            raise CorruptionError(f"unknown preprocess kind {kind}", "preprocess") from None
        if kind == PreprocessKind.NONE:
            return cls()
        if kind == PreprocessKind.TRANSPOSE:
            if len(payload) < 2 or len(payload) != 2 + payload[1]:
                raise CorruptionError("bad permutation length", "preprocess")
            perm = tuple(payload[2:])
            if sorted(perm) != list(range(len(perm))):
                raise CorruptionError(f"invalid permutation {perm}", "preprocess")
            return cls(kind, permutation=perm)
        pos = 1
        bitmaps = []
        for _ in range(2):
            if len(payload) < pos + 8:
                raise CorruptionError("truncated bitmap header", "preprocess")
            (nbits,) = struct.unpack_from("<Q", payload, pos)
            pos += 8
            nbytes = (nbits + 7) // 8
            if len(payload) < pos + nbytes:
                raise CorruptionError("truncated bitmap", "preprocess")
            raw = np.frombuffer(payload, np.uint8, nbytes, pos)
            bitmaps.append(np.unpackbits(raw, count=nbits).astype(bool))
            pos += nbytes
        return cls(kind, sign_bitmap=bitmaps[0], zero_bitmap=bitmaps[1])


def log_forward(grid: Grid, rel_bound: float) -> tuple[Grid, PreprocessState, float]:
    """Map ``grid`` to ``ln|x|`` and derive the matching absolute bound.

    The result is always float64.  Zeros are replaced by a sentinel below the
    smallest log value so they do not disturb prediction.
    """
    if not 0 < rel_bound < 1:
        raise ConfigError(f"relative bound must lie in (0, 1), got {rel_bound}")
    data = grid.data
    bad = ~np.isfinite(data)
    if bad.any():
        index = np.unravel_index(int(np.argmax(bad)), grid.dims)
        raise ConfigError(f"non-finite value {data[bad][0]} at index {tuple(int(i) for i in index)}")
    abs_bound = float(np.log1p(rel_bound))
    zero = data == 0
    negative = np.signbit(data) & ~zero
    out = np.empty(data.size, dtype=np.float64)
    nonzero = ~zero
    out[nonzero] = np.log(np.abs(data[nonzero].astype(np.float64)))
    if zero.any():
        floor = out[nonzero].min() if nonzero.any() else 0.0
        out[zero] = floor - 2 * abs_bound
    state = PreprocessState(
        PreprocessKind.LOG, sign_bitmap=negative, zero_bitmap=zero, derived_abs_eb=abs_bound
    )
    return Grid(grid.dims, out), state, abs_bound


def log_inverse(grid: Grid, state: PreprocessState, dtype=np.float64) -> Grid:
    if state.kind != PreprocessKind.LOG:
        raise ValueError(f"expected LOG state, got {state.kind.name}")
    n = grid.size
    if state.sign_bitmap.size != n or state.zero_bitmap.size != n:
        raise CorruptionError(
            f"bitmap lengths {state.sign_bitmap.size}/{state.zero_bitmap.size} != {n} elements",
            "preprocess",
        )
    values = np.exp(grid.data.astype(np.float64))
    values[state.sign_bitmap] *= -1
    values[state.zero_bitmap] = 0.0
    return Grid(grid.dims, values.astype(dtype))


def _check_permutation(permutation, ndim: int) -> tuple[int, ...]:
    perm = tuple(int(p) for p in permutation)
    if sorted(perm) != list(range(ndim)):
        raise ConfigError(f"{perm} is not a permutation of 0..{ndim - 1}")
    return perm


def transpose_forward(grid: Grid, permutation) -> tuple[Grid, PreprocessState]:
    """Physically reorder ``grid`` so axis ``permutation[-1]`` varies fastest."""
    perm = _check_permutation(permutation, grid.ndim)
    moved = np.ascontiguousarray(np.transpose(grid.array, perm))
    return Grid(moved.shape, moved), PreprocessState(PreprocessKind.TRANSPOSE, permutation=perm)


def transpose_inverse(grid: Grid, state: PreprocessState) -> Grid:
    perm = _check_permutation(state.permutation, grid.ndim)
    restored = np.ascontiguousarray(np.transpose(grid.array, np.argsort(perm)))
    return Grid(restored.shape, restored)


def time_fastest_permutation(ndim: int) -> tuple[int, ...]:
    """Move axis 0 (time) to the end, e.g. ``(1, 2, 0)`` for 3D."""
    return tuple(range(1, ndim)) + (0,)

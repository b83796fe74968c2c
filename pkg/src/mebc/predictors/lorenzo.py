"""First-order Lorenzo prediction.

The prediction at a point is the inclusion-exclusion sum over its ``2^N - 1``
causal corner neighbours; out-of-range neighbours read as zero.
"""

from __future__ import annotations

import itertools

import numba
import numpy as np

from ..core import BlockView, neighbor


def lorenzo_offsets(ndim: int) -> list[tuple[tuple[int, ...], int]]:
    """``(offset, sign)`` pairs for the order-1 Lorenzo stencil in ``ndim`` dimensions."""
    terms = []
    for corner in itertools.product((0, -1), repeat=ndim):
        depth = -sum(corner)
        if depth:
            terms.append((corner, 1 if depth % 2 else -1))
    return terms


def lorenzo_predict(block: BlockView, element, dim: int | None = None) -> float:
    """Lorenzo prediction for the block-local ``element`` from parent-grid values."""
    ndim = len(block.extents) if dim is None else dim
    return float(sum(sign * neighbor(block, element, off) for off, sign in lorenzo_offsets(ndim)))


@numba.njit(cache=True, inline="always")
def _at(buf, i, j, k):
    if i < 0 or j < 0 or k < 0:
        return 0.0
    return np.float64(buf[i, j, k])


@numba.njit(cache=True, inline="always")
def lorenzo3(buf, i, j, k):
    """Lorenzo prediction at ``(i, j, k)`` of a (trailing-unit padded) 3D array."""
    return (
        _at(buf, i - 1, j, k) + _at(buf, i, j - 1, k) + _at(buf, i, j, k - 1)
        - _at(buf, i - 1, j - 1, k) - _at(buf, i - 1, j, k - 1) - _at(buf, i, j - 1, k - 1)
        + _at(buf, i - 1, j - 1, k - 1)
    )


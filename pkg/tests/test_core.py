from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mebc import CompressionConfig, ConfigError, ErrorMode, Grid, iterate_blocks, neighbor
from mebc.core import pad_dims3


def test_tiling_8x8_block_4():
    blocks = iterate_blocks(np.zeros((8, 8)), 4)
    assert [b.origin for b in blocks] == [(0, 0), (0, 4), (4, 0), (4, 4)]


def test_tiling_7x7_clips_edges():
    blocks = iterate_blocks(np.zeros((7, 7)), 4)
    assert [b.extents for b in blocks] == [(4, 4), (4, 3), (3, 4), (3, 3)]


def test_block_larger_than_grid():
    blocks = iterate_blocks(Grid.from_array(np.zeros(5, np.float32)), 6)
    assert len(blocks) == 1 and blocks[0].extents == (5,)


@given(st.lists(st.integers(1, 9), min_size=1, max_size=4), st.integers(1, 5))
def test_tiling_covers_every_index_once(dims, bs):
    seen = np.zeros(dims, dtype=int)
    for block in iterate_blocks(np.zeros(dims), bs):
        seen[block.slices] += 1
    assert (seen == 1).all()


def test_neighbor_examples():
    a = np.arange(27.0).reshape(3, 3, 3) + 1
    block = iterate_blocks(a, 3)[0]
    assert neighbor(block, (0, 0, 0), (-1, 0, 0)) == 0
    assert neighbor(block, (1, 1, 1), (-1, -1, -1)) == a[0, 0, 0]
    b2 = np.arange(16.0).reshape(4, 4)
    assert neighbor(iterate_blocks(b2, 4)[0], (2, 2), (0, -1)) == b2[2, 1]


def test_neighbor_uses_global_position():
    a = np.arange(64.0).reshape(8, 8)
    block = iterate_blocks(a, 4)[3]  # origin (4, 4)
    assert neighbor(block, (0, 0), (-1, -1)) == a[3, 3]


def test_neighbor_rejects_future_offsets():
    block = iterate_blocks(np.zeros((4, 4)), 4)[0]
    with pytest.raises(ValueError):
        neighbor(block, (1, 1), (0, 1))


def test_grid_validation():
    with pytest.raises(ConfigError):
        Grid((2, 2), np.zeros(3, np.float32))
    with pytest.raises(ConfigError):
        Grid.from_array(np.zeros((1,) * 5, np.float32))
    with pytest.raises(ConfigError):
        Grid.from_array(np.zeros(4, np.int32))
    g = Grid.from_array(np.arange(6, dtype=np.float32).reshape(2, 3))
    assert g.dims == (2, 3) and g.array[1, 2] == 5


def test_grid_equality_is_bitwise():
    a = Grid.from_array(np.array([0.0, 1.0], np.float32))
    b = Grid.from_array(np.array([-0.0, 1.0], np.float32))
    assert a != b
    assert a == Grid.from_array(np.array([0.0, 1.0], np.float32))


@pytest.mark.parametrize("kwargs", [
    dict(error_bound=0),
    dict(error_bound=-1),
    dict(error_bound=float("nan")),
    dict(error_bound=1.0, error_mode=ErrorMode.REL),
    dict(error_bound=1e-3, pipeline="zfp"),
    dict(error_bound=1e-3, quant_radius=0),
    dict(error_bound=1e-3, truncation_bytes=9),
    dict(error_bound=1e-3, block_size=0),
])
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        CompressionConfig(**kwargs)


def test_pad_dims3():
    assert pad_dims3((5,)) == (5, 1, 1)
    assert pad_dims3((5, 4)) == (5, 4, 1)
    with pytest.raises(ConfigError):
        pad_dims3((2, 2, 2, 2))

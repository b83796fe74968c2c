"""Seeded synthetic fields used by the tests, benchmarks and the ``gen`` CLI command."""

from __future__ import annotations

import enum
import math

import numpy as np

from .core import ConfigError, Grid, MAX_DIMS

GOLDEN = (1 + math.sqrt(5)) / 2
# cycles across the domain for the three sinusoids of each axis; pairwise ratios are irrational
_SINE_CYCLES = (1.0, math.sqrt(2.0), GOLDEN)
_SINE_AMPLITUDES = (1.0, 0.5, 0.25)


class SyntheticKind(enum.Enum):
    CONSTANT = "constant"
    AFFINE = "affine"
    SINES = "sines"
    NOISE = "noise"
    INTEGER_COUNTS = "integer_counts"


def _kind(kind) -> SyntheticKind:
    if isinstance(kind, SyntheticKind):
        return kind
    try:
        return SyntheticKind[str(kind).upper()]
    except KeyError:
        raise ConfigError(f"unknown synthetic kind {kind!r}") from None


def _axes(dims):
    return np.meshgrid(*[np.arange(n, dtype=np.float64) for n in dims], indexing="ij", sparse=True)


def _sines(dims, rng):
    # product over axes of a three-term sinusoid sum: smooth but not additively separable
    field = np.ones((1,) * len(dims))
    for axis, coords in zip(dims, _axes(dims)):
        scale = rng.uniform(1.0, 3.0)
        term = np.zeros_like(coords)
        for cycles, amp in zip(_SINE_CYCLES, _SINE_AMPLITUDES):
            phase = rng.uniform(0, 2 * np.pi)
            term = term + amp * np.sin(2 * np.pi * scale * cycles * coords / max(axis, 1) + phase)
        field = field * (term + 2.0)
    return field


def _integer_counts(dims, rng):
    # slowly varying intensity (axis 0 is time) sampled with Poisson noise
    axes = _axes(dims)
    intensity = np.full((1,) * len(dims), 2.0)
    for n, coords in zip(dims, axes):
        centre = rng.uniform(0.3, 0.7) * n
        width = max(n / 4.0, 1.0)
        intensity = intensity * (1.0 + 4.0 * np.exp(-((coords - centre) / width) ** 2))
    drift = 1.0 + 0.3 * np.sin(2 * np.pi * axes[0] / max(dims[0], 1) + rng.uniform(0, 2 * np.pi))
    intensity = np.broadcast_to(intensity * drift, dims)
    return rng.poisson(intensity).astype(np.float64)


def generate_synthetic(kind, dims, seed: int = 0, dtype=np.float32) -> Grid:
    """Deterministic field of ``dims`` for a given ``seed``."""
    kind = _kind(kind)
    dims = tuple(int(n) for n in dims)
    if not 1 <= len(dims) <= MAX_DIMS or any(n < 0 for n in dims):
        raise ConfigError(f"invalid dims {dims}")
    rng = np.random.default_rng(seed)
    if kind is SyntheticKind.CONSTANT:
        field = np.full(dims, rng.uniform(-100.0, 100.0))
    elif kind is SyntheticKind.AFFINE:
        # small integer coefficients keep every value exactly representable
        coeffs = rng.integers(-5, 6, size=len(dims) + 1)
        field = np.full(dims, float(coeffs[-1]))
        for c, coords in zip(coeffs, _axes(dims)):
            field = field + float(c) * coords
    elif kind is SyntheticKind.SINES:
        field = np.broadcast_to(_sines(dims, rng), dims)
    elif kind is SyntheticKind.NOISE:
        field = rng.standard_normal(dims)
    else:
        field = _integer_counts(dims, rng)
    return Grid.from_array(np.ascontiguousarray(field, dtype=dtype))

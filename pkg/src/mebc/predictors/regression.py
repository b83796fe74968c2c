"""Blockwise linear regression predictor.

A block of extents ``n1 x n2 x n3`` is fitted with the hyperplane
``b0 + i*b1 + j*b2 + k*b3`` minimizing squared error.  Because the sample
positions form a full grid, the normal equations decouple and the fit needs
only four moments of the block (``V0 = sum f``, ``Vx = sum i*f``, ...):

    b1 = 6 / (N (n1 + 1)) * (2 Vx / (n1 - 1) - V0)        N = n1 n2 n3
    b0 = V0 / N - ((n1 - 1) b1 + (n2 - 1) b2 + (n3 - 1) b3) / 2

and likewise for ``b2``, ``b3``.  An axis of extent 1 carries no slope
information; its coefficient is fixed at 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from ..core import BlockView, ConfigError


@dataclass(frozen=True)
class RegressionCoefficients:
    beta: tuple[float, float, float, float]

    def __iter__(self):
        return iter(self.beta)

    def __getitem__(self, i):
        return self.beta[i]


@numba.njit(cache=True)
def block_coefficients(buf, o0, o1, o2, e0, e1, e2, out):
    """Fit the block at ``origin``/``extents`` of a 3D array; writes 4 values to ``out``.

    Returns False when the moments are not finite.
    """
    v0 = 0.0
    vx = 0.0
    vy = 0.0
    vz = 0.0
    for i in range(e0):
        for j in range(e1):
            for k in range(e2):
                f = np.float64(buf[o0 + i, o1 + j, o2 + k])
                v0 += f
                vx += i * f
                vy += j * f
                vz += k * f
    n = np.float64(e0 * e1 * e2)
    b1 = 0.0 if e0 == 1 else 6.0 / (n * (e0 + 1)) * (2.0 * vx / (e0 - 1) - v0)
    b2 = 0.0 if e1 == 1 else 6.0 / (n * (e1 + 1)) * (2.0 * vy / (e1 - 1) - v0)
    b3 = 0.0 if e2 == 1 else 6.0 / (n * (e2 + 1)) * (2.0 * vz / (e2 - 1) - v0)
    b0 = v0 / n - ((e0 - 1) / 2.0 * b1 + (e1 - 1) / 2.0 * b2 + (e2 - 1) / 2.0 * b3)
    out[0] = b0
    out[1] = b1
    out[2] = b2
    out[3] = b3
    return np.isfinite(b0) and np.isfinite(b1) and np.isfinite(b2) and np.isfinite(b3)


@numba.njit(cache=True, inline="always")
def regression3(coeffs, i, j, k):
    return coeffs[0] + i * coeffs[1] + j * coeffs[2] + k * coeffs[3]


def _padded(block: BlockView) -> np.ndarray:
    values = np.asarray(block.values)
    if values.ndim > 3:
        raise ConfigError("regression supports at most 3 dimensions")
    return values.reshape(values.shape + (1,) * (3 - values.ndim))


def compute_regression_coefficients(block: BlockView) -> RegressionCoefficients | None:
    """Least-squares hyperplane of the block's values; ``None`` if not finite."""
    values = _padded(block)
    out = np.zeros(4)
    if not block_coefficients(values, 0, 0, 0, *values.shape, out):
        return None
    return RegressionCoefficients(tuple(float(b) for b in out))


def regression_predict(coeffs, local_index) -> float:
    idx = tuple(local_index) + (0,) * (3 - len(local_index))
    b = tuple(coeffs)
    return b[0] + idx[0] * b[1] + idx[1] * b[2] + idx[2] * b[3]

"""Independent reference implementations used to check the package.

Nothing here imports the code under test; each oracle is written the slow,
obvious way.
"""

from __future__ import annotations

import heapq
import itertools
import math
import struct

import numpy as np


def gaussian_solve(a, b):
    """Solve ``a x = b`` by Gaussian elimination with partial pivoting (plain floats)."""
    n = len(b)
    m = [list(map(float, row)) + [float(rhs)] for row, rhs in zip(a, b)]
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(m[r][col]))
        m[col], m[pivot] = m[pivot], m[col]
        for r in range(col + 1, n):
            factor = m[r][col] / m[col][col]
            for c in range(col, n + 1):
                m[r][c] -= factor * m[col][c]
    x = [0.0] * n
    for r in range(n - 1, -1, -1):
        x[r] = (m[r][n] - sum(m[r][c] * x[c] for c in range(r + 1, n))) / m[r][r]
    return x


def regression_oracle(block: np.ndarray):
    """Least-squares hyperplane ``b0 + b1 i + b2 j + b3 k`` via the normal equations.

    Axes of extent 1 carry no information; their slope is fixed at 0 and the
    column is dropped from the design matrix.
    """
    block = np.asarray(block, dtype=np.float64)
    block = block.reshape(block.shape + (1,) * (3 - block.ndim))
    rows, y = [], []
    for idx in itertools.product(*(range(n) for n in block.shape)):
        rows.append([1.0, *map(float, idx)])
        y.append(float(block[idx]))
    keep = [0] + [a + 1 for a in range(3) if block.shape[a] > 1]
    x = [[row[c] for c in keep] for row in rows]
    xtx = [[sum(r[p] * r[q] for r in x) for q in range(len(keep))] for p in range(len(keep))]
    xty = [sum(r[p] * v for r, v in zip(x, y)) for p in range(len(keep))]
    sol = gaussian_solve(xtx, xty)
    beta = [0.0] * 4
    for c, v in zip(keep, sol):
        beta[c] = v
    return beta


def lorenzo_oracle(field: np.ndarray, index) -> float:
    """Inclusion-exclusion over the causal unit-cube corners, zero outside the grid."""
    n = field.ndim
    total = 0.0
    for corner in itertools.product((0, 1), repeat=n):
        if not any(corner):
            continue
        pos = tuple(i - c for i, c in zip(index, corner))
        sign = 1 if sum(corner) % 2 else -1
        value = 0.0 if min(pos) < 0 else float(field[pos])
        total += sign * value
    return total


def truncate_oracle(value: float, k: int, fmt: str = ">f") -> float:
    """Zero all but the first ``k`` big-endian bytes of ``value``."""
    raw = struct.pack(fmt, value)
    kept = raw[:k] + b"\x00" * (len(raw) - k)
    return struct.unpack(fmt, kept)[0]


def entropy_bits(freq) -> float:
    freq = np.asarray([f for f in freq if f > 0], dtype=np.float64)
    p = freq / freq.sum()
    return float(-(p * np.log2(p)).sum())


def huffman_cost_oracle(freq) -> int:
    """Optimal prefix-code cost by textbook Huffman merging (sum of merged weights)."""
    weights = [int(f) for f in freq if f > 0]
    if len(weights) == 1:
        return weights[0]
    heapq.heapify(weights)
    cost = 0
    while len(weights) > 1:
        a = heapq.heappop(weights)
        b = heapq.heappop(weights)
        cost += a + b
        heapq.heappush(weights, a + b)
    return cost


def brute_force_prefix_cost(freq) -> int:
    """Minimum sum(freq * len) over every complete prefix code, by enumeration.

    Complete codes are enumerated as non-decreasing length sequences whose
    Kraft sum is exactly one; the shortest lengths go to the largest counts.
    """
    weights = sorted((int(f) for f in freq if f > 0), reverse=True)
    n = len(weights)
    if n == 1:
        return weights[0]
    depth = n - 1
    best = math.inf

    def walk(i, min_len, capacity, cost):
        nonlocal best
        if cost >= best:
            return
        if i == n:
            if capacity == 0:
                best = cost
            return
        left = n - i
        for length in range(min_len, depth + 1):
            share = 1 << (depth - length)
            rest = capacity - share
            # the remaining symbols need at least one unit each and at most ``share`` each
            if rest < left - 1 or rest > (left - 1) * share:
                continue
            walk(i + 1, length, rest, cost + weights[i] * length)

    walk(0, 1, 1 << depth, 0)
    return int(best)


def psnr_oracle(a, b) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    mse = sum((x - y) ** 2 for x, y in zip(a, b)) / a.size
    if mse == 0:
        return math.inf
    return 20 * math.log10(a.max() - a.min()) - 10 * math.log10(mse)

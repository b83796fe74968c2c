"""Multilevel interpolation predictor.

Starting from a single anchor at the origin, each level halves the stride.
Within a level the axes are processed in order; along axis ``a`` every point
at an odd multiple of the stride is predicted from its neighbours at even
multiples, which earlier passes have already reconstructed.  Points with all
four donors use the 4-point cubic stencil, points near the far edge fall back
to linear interpolation, and points past the last donor copy the previous one.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class InterpMethod(enum.IntEnum):
    COPY = 0
    LINEAR = 1
    CUBIC = 2


@dataclass(frozen=True)
class InterpPass:
    stride: int
    axis: int
    method: InterpMethod
    targets: tuple[int, ...]  # coordinates along ``axis``


@dataclass(frozen=True)
class InterpLevelPlan:
    dims: tuple[int, ...]
    passes: tuple[InterpPass, ...]

    def index(self, p: InterpPass, shift: int = 0) -> tuple:
        """Index tuple selecting the pass's points, moved ``shift`` along its axis."""
        idx = []
        for b in range(len(self.dims)):
            if b < p.axis:
                idx.append(slice(0, None, p.stride))
            elif b > p.axis:
                idx.append(slice(0, None, 2 * p.stride))
            else:
                idx.append(np.asarray(p.targets, dtype=np.intp) + shift)
        return tuple(idx)

    def pass_shape(self, p: InterpPass) -> tuple[int, ...]:
        shape = []
        for b, n in enumerate(self.dims):
            if b < p.axis:
                shape.append(-(-n // p.stride))
            elif b > p.axis:
                shape.append(-(-n // (2 * p.stride)))
            else:
                shape.append(len(p.targets))
        return tuple(shape)


def method_for(t: int, stride: int, extent: int) -> InterpMethod:
    if t - 3 * stride >= 0 and t + 3 * stride < extent:
        return InterpMethod.CUBIC
    if t + stride < extent:
        return InterpMethod.LINEAR
    return InterpMethod.COPY


def build_plan(dims) -> InterpLevelPlan:
    dims = tuple(int(d) for d in dims)
    largest = max(dims) if dims else 0
    passes = []
    stride = 1
    while stride * 2 < largest:
        stride *= 2
    while largest > 1 and stride >= 1:
        for axis, n in enumerate(dims):
            targets = range(stride, n, 2 * stride)
            for method in (InterpMethod.CUBIC, InterpMethod.LINEAR, InterpMethod.COPY):
                chosen = tuple(t for t in targets if method_for(t, stride, n) == method)
                if chosen:
                    passes.append(InterpPass(stride, axis, method, chosen))
        stride //= 2
    return InterpLevelPlan(dims, tuple(passes))


def cubic(a, b, c, d):
    return (-a + 9.0 * b + 9.0 * c - d) / 16.0


def linear(b, c):
    return (b + c) / 2.0


def interp_predict(array: np.ndarray, index, stride: int, axis: int, method=None) -> float:
    """Scalar prediction at ``index`` along ``axis`` from already-known donors.

    ``method=None`` picks the best stencil the donors allow; a requested
    method degrades (cubic -> linear -> copy) when donors are missing.
    """
    array = np.asarray(array)
    t = index[axis]
    n = array.shape[axis]

    def at(offset):
        pos = list(index)
        pos[axis] = t + offset
        return float(array[tuple(pos)])

    best = method_for(t, stride, n)
    method = best if method is None else InterpMethod(min(int(method), int(best)))
    if method == InterpMethod.CUBIC:
        return cubic(at(-3 * stride), at(-stride), at(stride), at(3 * stride))
    if method == InterpMethod.LINEAR:
        return linear(at(-stride), at(stride))
    return at(-stride)


def predict_pass(plan: InterpLevelPlan, buf: np.ndarray, p: InterpPass) -> np.ndarray:
    """Predictions for every point of pass ``p`` (float64, pass-shaped)."""
    s = p.stride

    def donor(shift):
        return buf[plan.index(p, shift)].astype(np.float64)

    if p.method == InterpMethod.CUBIC:
        return cubic(donor(-3 * s), donor(-s), donor(s), donor(3 * s))
    if p.method == InterpMethod.LINEAR:
        return linear(donor(-s), donor(s))
    return donor(-s)


def interp_compress(orig: np.ndarray, buf: np.ndarray, plan: InterpLevelPlan, quantizer) -> np.ndarray:
    """Predict and quantize all non-anchor points; ``buf`` holds decoded values.

    ``buf`` must already contain the anchor.  Returns the codes in plan order.
    """
    codes = []
    for p in plan.passes:
        idx = plan.index(p)
        pred = predict_pass(plan, buf, p)
        c, decoded = quantizer.quantize_batch(orig[idx], pred)
        buf[idx] = decoded.reshape(pred.shape)
        codes.append(c)
    return np.concatenate(codes) if codes else np.zeros(0, dtype=np.int64)


def interp_decompress(buf: np.ndarray, plan: InterpLevelPlan, quantizer, codes: np.ndarray) -> None:
    pos = 0
    for p in plan.passes:
        idx = plan.index(p)
        pred = predict_pass(plan, buf, p)
        stop = pos + pred.size
        buf[idx] = quantizer.recover_batch(codes[pos:stop], pred).reshape(pred.shape)
        pos = stop

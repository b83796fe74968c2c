"""Per-block choice between Lorenzo and regression prediction.

Each block's candidates are scored on its main diagonal using original
values.  Lorenzo's score is charged an extra ``(2^N - 1) * eb * noise_coeff``
per sample because at decompression time it reads reconstructed, not
original, neighbours.  The cheaper estimate wins; ties go to Lorenzo, which
stores nothing.

Regression coefficients are quantized (delta against the previous
regression block) before use, so compressor and decompressor predict from
identical values.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from ..core import BlockView, CorruptionError
from ..encoders import decode_section, encode_section
from ..quantizers import quantize_into, recover_into
from .lorenzo import lorenzo3
from .regression import RegressionCoefficients, block_coefficients, regression3


class PredictorTag(enum.IntEnum):
    LORENZO = 0
    REGRESSION = 1


@dataclass(frozen=True)
class PredictorChoice:
    tag: PredictorTag
    coeffs: RegressionCoefficients | None = None


@numba.njit(cache=True)
def _diag_errors(orig, o0, o1, o2, e0, e1, e2, ndim, coeffs):
    """Summed |residual| on the block diagonal for Lorenzo and regression."""
    if ndim == 1:
        samples = e0
    elif ndim == 2:
        samples = min(e0, e1)
    else:
        samples = min(e0, min(e1, e2))
    err_l = 0.0
    err_r = 0.0
    for t in range(samples):
        tj = t if ndim >= 2 else 0
        tk = t if ndim >= 3 else 0
        f = np.float64(orig[o0 + t, o1 + tj, o2 + tk])
        err_l += np.abs(f - lorenzo3(orig, o0 + t, o1 + tj, o2 + tk))
        err_r += np.abs(f - regression3(coeffs, t, tj, tk))
    return samples, err_l, err_r


@numba.njit(cache=True)
def analyze_blocks(orig, bs, ndim, eb, noise_coeff, is_reg, coeffs):
    """Fit, score and choose for every block in row-major block order."""
    n0, n1, n2 = orig.shape
    b = 0
    noise = ((1 << ndim) - 1) * eb * noise_coeff
    for o0 in range(0, n0, bs):
        for o1 in range(0, n1, bs):
            for o2 in range(0, n2, bs):
                e0 = min(bs, n0 - o0)
                e1 = min(bs, n1 - o1)
                e2 = min(bs, n2 - o2)
                ok = block_coefficients(orig, o0, o1, o2, e0, e1, e2, coeffs[b])
                if ok:
                    samples, err_l, err_r = _diag_errors(orig, o0, o1, o2, e0, e1, e2, ndim, coeffs[b])
                    is_reg[b] = err_r < err_l + samples * noise
                else:
                    is_reg[b] = False
                if not is_reg[b]:
                    coeffs[b, :] = 0.0
                b += 1


def estimate_block_error(block: BlockView, predictor: PredictorTag, coeffs=None, eb: float = 0.0,
                         noise_coeff: float = 0.5) -> float:
    """Sampled absolute prediction error of ``predictor`` on ``block``'s diagonal.

    Lorenzo reads original neighbours from the parent grid and is charged the
    decompression-noise term.
    """
    ndim = len(block.extents)
    parent = block.parent.reshape(block.parent.shape + (1,) * (3 - ndim))
    origin = tuple(block.origin) + (0,) * (3 - ndim)
    extents = tuple(block.extents) + (1,) * (3 - ndim)
    beta = np.asarray(tuple(coeffs) if coeffs is not None else (0.0,) * 4, dtype=np.float64)
    samples, err_l, err_r = _diag_errors(parent, *origin, *extents, ndim, beta)
    if PredictorTag(predictor) == PredictorTag.REGRESSION:
        return float(err_r)
    return float(err_l + samples * ((1 << ndim) - 1) * eb * noise_coeff)


def composite_select(est_lorenzo: float, est_regression: float, coeffs=None) -> PredictorChoice:
    if est_regression < est_lorenzo:
        return PredictorChoice(PredictorTag.REGRESSION, coeffs)
    return PredictorChoice(PredictorTag.LORENZO)


def select_for_block(block: BlockView, eb: float, noise_coeff: float = 0.5) -> PredictorChoice:
    from .regression import compute_regression_coefficients

    coeffs = compute_regression_coefficients(block)
    est_l = estimate_block_error(block, PredictorTag.LORENZO, None, eb, noise_coeff)
    if coeffs is None:
        return PredictorChoice(PredictorTag.LORENZO)
    est_r = estimate_block_error(block, PredictorTag.REGRESSION, coeffs, eb, noise_coeff)
    return composite_select(est_l, est_r, coeffs)


# -- coefficient storage ------------------------------------------------------

def coefficient_bounds(eb: float, divisor: float, block_size: int) -> np.ndarray:
    """Per-coefficient quantization bounds: intercept ``eb/divisor``, slopes ``eb/(divisor*bs)``."""
    slope = eb / (divisor * block_size)
    return np.array([eb / divisor, slope, slope, slope])


@numba.njit(cache=True)
def _quantize_coeffs(coeffs, bounds, radius, codes, decoded, raw):
    prev = np.zeros(4)
    nraw = 0
    for b in range(coeffs.shape[0]):
        for c in range(4):
            step = 2.0 * bounds[c]
            x = (coeffs[b, c] - prev[c]) / step
            q = np.floor(np.abs(x) + 0.5)
            if x < 0:
                q = -q
            if np.abs(q) < radius:
                codes[b * 4 + c] = radius + np.int64(q)
                prev[c] = prev[c] + step * q
            else:
                codes[b * 4 + c] = 0
                raw[nraw] = coeffs[b, c]
                nraw += 1
                prev[c] = coeffs[b, c]
            decoded[b, c] = prev[c]
    return nraw


@numba.njit(cache=True)
def _recover_coeffs(codes, bounds, radius, raw, decoded):
    prev = np.zeros(4)
    nraw = 0
    for b in range(decoded.shape[0]):
        for c in range(4):
            code = codes[b * 4 + c]
            if code == 0:
                if nraw >= raw.size:
                    return -1
                prev[c] = raw[nraw]
                nraw += 1
            else:
                prev[c] = prev[c] + 2.0 * bounds[c] * (code - radius)
            decoded[b, c] = prev[c]
    return nraw


def encode_block_choices(is_reg: np.ndarray, coeffs: np.ndarray, bounds: np.ndarray,
                         radius: int) -> tuple[bytes, np.ndarray]:
    """Serialize block tags and quantized coefficients; returns decoded coefficients too.

    Layout: block count u64, packed tag bits, encoder section of the
    coefficient codes, raw coefficient count u64, raw f64 values.
    """
    is_reg = np.asarray(is_reg, dtype=bool)
    reg = np.ascontiguousarray(coeffs[is_reg], dtype=np.float64)
    codes = np.zeros(reg.shape[0] * 4, dtype=np.int64)
    decoded_reg = np.zeros_like(reg)
    raw = np.zeros(codes.size)
    nraw = _quantize_coeffs(reg, bounds, radius, codes, decoded_reg, raw)
    decoded = np.zeros((is_reg.size, 4))
    decoded[is_reg] = decoded_reg
    out = bytearray(struct.pack("<Q", is_reg.size))
    out += np.packbits(is_reg).tobytes()
    out += encode_section(codes, 2 * radius)
    out += struct.pack("<Q", nraw)
    out += raw[:nraw].astype("<f8").tobytes()
    return bytes(out), decoded


def decode_block_choices(payload: bytes, bounds: np.ndarray, radius: int,
                         offset: int = 0) -> tuple[np.ndarray, np.ndarray, int]:
    if len(payload) < offset + 8:
        raise CorruptionError("truncated predictor section", "predictor")
    (nblocks,) = struct.unpack_from("<Q", payload, offset)
    offset += 8
    nbytes = (nblocks + 7) // 8
    if len(payload) < offset + nbytes:
        raise CorruptionError("truncated predictor tag bits", "predictor")
    is_reg = np.unpackbits(np.frombuffer(payload, np.uint8, nbytes, offset), count=nblocks).astype(bool)
    offset += nbytes
    nreg = int(is_reg.sum())
    codes, offset = decode_section(payload, nreg * 4, radius, offset)
    if len(payload) < offset + 8:
        raise CorruptionError("truncated raw coefficient count", "predictor")
    (nraw,) = struct.unpack_from("<Q", payload, offset)
    offset += 8
    if len(payload) < offset + 8 * nraw:
        raise CorruptionError("truncated raw coefficients", "predictor")
    raw = np.frombuffer(payload, "<f8", nraw, offset).astype(np.float64)
    offset += 8 * nraw
    decoded_reg = np.zeros((nreg, 4))
    if _recover_coeffs(codes, bounds, radius, raw, decoded_reg) != nraw:
        raise CorruptionError("raw coefficient count mismatch", "predictor")
    decoded = np.zeros((nblocks, 4))
    decoded[is_reg] = decoded_reg
    return is_reg, decoded, offset


def save_coefficients(choices: Sequence[PredictorChoice], eb: float, divisor: float = 2.0,
                      block_size: int = 6, radius: int = 32768) -> bytes:
    is_reg = np.array([c.tag == PredictorTag.REGRESSION for c in choices], dtype=bool)
    coeffs = np.array([tuple(c.coeffs) if c.coeffs is not None else (0.0,) * 4 for c in choices],
                      dtype=np.float64).reshape(-1, 4)
    payload, _ = encode_block_choices(is_reg, coeffs, coefficient_bounds(eb, divisor, block_size), radius)
    return payload


def load_coefficients(payload: bytes, eb: float, divisor: float = 2.0, block_size: int = 6,
                      radius: int = 32768) -> list[PredictorChoice]:
    is_reg, decoded, _ = decode_block_choices(payload, coefficient_bounds(eb, divisor, block_size), radius)
    return [
        PredictorChoice(PredictorTag.REGRESSION, RegressionCoefficients(tuple(float(x) for x in row)))
        if reg else PredictorChoice(PredictorTag.LORENZO)
        for reg, row in zip(is_reg, decoded)
    ]


# -- sequential prediction + quantization ------------------------------------

@numba.njit(cache=True)
def blockwise_compress(orig, buf, bs, is_reg, coeffs, step_eb, check_eb, radius, lsb, aware,
                       codes, uvals, uraw):
    """Predict and quantize every element, block by block in row-major order.

    ``buf`` receives decoded values, so Lorenzo reads what the decompressor
    will see.  Returns the number of unpredictable elements.
    """
    n0, n1, n2 = orig.shape
    pos = 0
    ucount = 0
    b = 0
    for o0 in range(0, n0, bs):
        for o1 in range(0, n1, bs):
            for o2 in range(0, n2, bs):
                reg = is_reg[b]
                for i in range(o0, min(o0 + bs, n0)):
                    for j in range(o1, min(o1 + bs, n1)):
                        for k in range(o2, min(o2 + bs, n2)):
                            if reg:
                                pred = regression3(coeffs[b], i - o0, j - o1, k - o2)
                            else:
                                pred = lorenzo3(buf, i, j, k)
                            ucount = quantize_into(buf, (i, j, k), np.float64(orig[i, j, k]), pred,
                                                   step_eb, check_eb, radius, lsb, aware,
                                                   codes, pos, uvals, uraw, ucount)
                            pos += 1
                b += 1
    return ucount


@numba.njit(cache=True)
def blockwise_decompress(buf, bs, is_reg, coeffs, step_eb, radius, codes, uvals, uraw):
    """Mirror of :func:`blockwise_compress`; returns unpredictables consumed or -1."""
    n0, n1, n2 = buf.shape
    pos = 0
    ucount = 0
    b = 0
    for o0 in range(0, n0, bs):
        for o1 in range(0, n1, bs):
            for o2 in range(0, n2, bs):
                reg = is_reg[b]
                for i in range(o0, min(o0 + bs, n0)):
                    for j in range(o1, min(o1 + bs, n1)):
                        for k in range(o2, min(o2 + bs, n2)):
                            if reg:
                                pred = regression3(coeffs[b], i - o0, j - o1, k - o2)
                            else:
                                pred = lorenzo3(buf, i, j, k)
                            code = codes[pos]
                            if code == 0 and ucount >= uvals.size:
                                return -1
                            ucount = recover_into(buf, (i, j, k), pred, code, step_eb, radius,
                                                  uvals, uraw, ucount)
                            pos += 1
                b += 1
    return ucount


def block_count(shape3, bs: int) -> int:
    return int(np.prod([-(-n // bs) for n in shape3]))

"""Error-controlled quantization of prediction residuals.

Two quantizers share the same bin layout: codes ``R + q`` for bins of width
``2 * eb`` around the prediction, and code 0 for unpredictable elements.
They differ in how unpredictables are stored:

* :class:`LinearQuantizer` keeps the raw sample.
* :class:`UnpredAwareQuantizer` aligns the residual to the error bound's
  exponent and writes the resulting integers plane by plane (most significant
  first), falling back to the raw sample only when float rounding would break
  the bound.
"""

from __future__ import annotations

import enum
import math
import struct

import numba
import numpy as np

from .core import ConfigError, CorruptionError


class QuantizerKind(enum.IntEnum):
    LINEAR = 1
    UNPRED_AWARE = 2


# Largest bitplane magnitude; anything above goes through the raw path.
MAX_PLANE_VALUE = 2.0**62


def round_half_away(x):
    """Round to nearest integer, ties away from zero (scalar or array)."""
    if np.ndim(x) == 0:
        return math.copysign(math.floor(abs(x) + 0.5), x)
    return np.copysign(np.floor(np.abs(x) + 0.5), x)


def lsb_exponent(eb: float) -> int:
    """``e`` such that ``2**e <= eb < 2**(e + 1)``."""
    if not eb > 0:
        raise ConfigError(f"error bound must be positive, got {eb}")
    _, exp = math.frexp(eb)
    return exp - 1


def linear_quantize(orig: float, pred: float, eb: float, radius: int) -> tuple[int, float]:
    """Quantize one residual; returns ``(code, decoded)``.

    Code 0 means unpredictable: ``decoded`` is then ``orig`` itself and the
    caller is responsible for storing it.
    """
    if not eb > 0:
        raise ConfigError(f"error bound must be positive, got {eb}")
    if not (math.isfinite(orig) and math.isfinite(pred)):
        return 0, orig
    step = 2.0 * eb
    q = round_half_away((orig - pred) / step)
    if abs(q) < radius:
        decoded = pred + step * q
        if abs(decoded - orig) <= eb:
            return int(radius + q), decoded
    return 0, orig


def linear_recover(code: int, pred: float, eb: float, radius: int, unpredictables) -> float:
    """Inverse of :func:`linear_quantize`; ``unpredictables`` is an iterator."""
    if code == 0:
        try:
            return next(unpredictables)
        except StopIteration:
            raise CorruptionError("unpredictable values exhausted", "quantizer") from None
    return pred + 2.0 * eb * (code - radius)


# -- numba element kernel -----------------------------------------------------

@numba.njit(cache=True, inline="always")
def quantize_into(buf, idx, orig, pred, step_eb, check_eb, radius, lsb, aware,
                  codes, pos, uvals, uraw, ucount):
    """Quantize ``orig`` against ``pred`` and write the decoded value to ``buf[idx]``.

    Returns the updated unpredictable count.  ``buf``'s dtype sets the
    precision of the decoded value, so the bound is checked after the cast.
    """
    if np.isfinite(orig) and np.isfinite(pred):
        step = 2.0 * step_eb
        x = (orig - pred) / step
        q = np.floor(np.abs(x) + 0.5)
        if x < 0:
            q = -q
        if np.abs(q) < radius:
            buf[idx] = pred + step * q
            if np.abs(buf[idx] - orig) <= check_eb:
                codes[pos] = radius + np.int64(q)
                return ucount
        if aware:
            d = orig - pred
            m = np.floor(np.abs(d) / lsb)
            if m < MAX_PLANE_VALUE:
                r = m * lsb
                if d < 0:
                    r = -r
                buf[idx] = pred + r
                if np.abs(buf[idx] - orig) <= check_eb:
                    codes[pos] = 0
                    uvals[ucount] = r
                    uraw[ucount] = False
                    return ucount + 1
    buf[idx] = orig
    codes[pos] = 0
    uvals[ucount] = orig
    uraw[ucount] = True
    return ucount + 1


@numba.njit(cache=True, inline="always")
def recover_into(buf, idx, pred, code, step_eb, radius, uvals, uraw, ucount):
    """Decode one element into ``buf[idx]``; returns the updated unpredictable cursor."""
    if code != 0:
        buf[idx] = pred + 2.0 * step_eb * (code - radius)
        return ucount
    if uraw[ucount]:
        buf[idx] = uvals[ucount]
    else:
        buf[idx] = pred + uvals[ucount]
    return ucount + 1


# -- bitplanes ----------------------------------------------------------------

def bitplane_encode(residuals, eb: float) -> bytes:
    """Align ``residuals`` to the exponent of ``eb`` and emit sign + magnitude planes.

    Layout: plane count ``K`` (u8); if ``K > 0`` a sign plane followed by
    ``K`` magnitude planes, MSB first, each ``ceil(n / 8)`` packed bytes.
    """
    d = np.asarray(residuals, dtype=np.float64).reshape(-1)
    bad = ~np.isfinite(d)
    if bad.any():
        raise ValueError(f"non-finite residual at index {int(np.argmax(bad))}")
    lsb = math.ldexp(1.0, lsb_exponent(eb))
    mags = np.floor(np.abs(d) / lsb)
    if mags.size and mags.max() >= MAX_PLANE_VALUE:
        raise ValueError(f"residual at index {int(np.argmax(mags))} too large for eb={eb}")
    q = mags.astype(np.uint64)
    nplanes = int(q.max()).bit_length() if q.size else 0
    out = bytearray([nplanes])
    if nplanes:
        out += np.packbits((d < 0) & (q > 0)).tobytes()
        for b in range(nplanes - 1, -1, -1):
            out += np.packbits(((q >> np.uint64(b)) & np.uint64(1)).astype(np.uint8)).tobytes()
    return bytes(out)


def bitplane_decode(payload: bytes, count: int, eb: float) -> np.ndarray:
    """Inverse of :func:`bitplane_encode`; returns ``sign * q * 2**e`` values."""
    if count == 0:
        return np.zeros(0)
    if not payload:
        raise CorruptionError("empty bitplane payload", "quantizer")
    nplanes = payload[0]
    if nplanes == 0:
        return np.zeros(count)
    if nplanes > 63:
        raise CorruptionError(f"bitplane count {nplanes} out of range", "quantizer")
    plane_bytes = (count + 7) // 8
    need = 1 + (nplanes + 1) * plane_bytes
    if len(payload) < need:
        raise CorruptionError(f"bitplane payload has {len(payload)} bytes, need {need}", "quantizer")

    def plane(i):
        raw = np.frombuffer(payload, np.uint8, plane_bytes, 1 + i * plane_bytes)
        return np.unpackbits(raw, count=count)

    negative = plane(0).astype(bool)
    q = np.zeros(count, dtype=np.uint64)
    for i in range(nplanes):
        q = (q << np.uint64(1)) | plane(i + 1).astype(np.uint64)
    values = np.ldexp(q.astype(np.float64), lsb_exponent(eb))
    values[negative] *= -1
    return values


def bitplane_size(payload: bytes, count: int) -> int:
    """Number of bytes a bitplane block starting at ``payload[0]`` occupies."""
    if not payload:
        raise CorruptionError("missing bitplane header", "quantizer")
    nplanes = payload[0]
    return 1 + (nplanes + 1) * ((count + 7) // 8) if nplanes else 1


# -- quantizer objects --------------------------------------------------------

class LinearQuantizer:
    """Linear-scaling quantizer with ``2 * radius`` codes.

    ``eb`` sets the bin width; ``check_eb`` (default ``eb``) is the bound
    every decoded value is verified against before it is accepted.
    """

    kind = QuantizerKind.LINEAR
    aware = False

    def __init__(self, eb: float, radius: int = 32768, dtype=np.float64, check_eb: float | None = None):
        if not eb > 0:
            raise ConfigError(f"error bound must be positive, got {eb}")
        if radius < 1:
            raise ConfigError("quantization radius must be >= 1")
        self.eb = float(eb)
        self.check_eb = float(eb if check_eb is None else check_eb)
        self.radius = int(radius)
        self.dtype = np.dtype(dtype)
        self.lsb = math.ldexp(1.0, lsb_exponent(self.eb))
        self.unpred_values = np.zeros(0)
        self.unpred_raw = np.zeros(0, dtype=bool)
        self._cursor = 0

    # Scalar interface.
    def quantize(self, orig: float, pred: float) -> tuple[int, float]:
        buf = np.zeros(1, dtype=self.dtype)
        codes = np.zeros(1, dtype=np.int64)
        uvals = np.zeros(1)
        uraw = np.zeros(1, dtype=np.bool_)
        n = quantize_into(buf, 0, float(orig), float(pred), self.eb, self.check_eb, self.radius,
                          self.lsb, self.aware, codes, 0, uvals, uraw, 0)
        if n:
            self.unpred_values = np.append(self.unpred_values, uvals[0])
            self.unpred_raw = np.append(self.unpred_raw, uraw[0])
        return int(codes[0]), buf[0].item()

    def recover(self, pred: float, code: int) -> float:
        if code == 0 and self._cursor >= self.unpred_values.size:
            raise CorruptionError("unpredictable values exhausted", "quantizer")
        buf = np.zeros(1, dtype=self.dtype)
        self._cursor = recover_into(buf, 0, float(pred), int(code), self.eb, self.radius,
                                    self.unpred_values, self.unpred_raw, self._cursor)
        return buf[0].item()

    # Batch interface used by vectorized predictors.
    def quantize_batch(self, orig: np.ndarray, pred: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Quantize arrays; returns ``(codes, decoded)`` and appends unpredictables."""
        orig = np.asarray(orig, dtype=self.dtype).reshape(-1)
        pred = np.asarray(pred, dtype=np.float64).reshape(-1)
        o64 = orig.astype(np.float64)
        step = 2.0 * self.eb
        with np.errstate(invalid="ignore", over="ignore"):
            x = (o64 - pred) / step
            q = np.copysign(np.floor(np.abs(x) + 0.5), x)
            ok = np.isfinite(x) & (np.abs(q) < self.radius)
            q = np.where(ok, q, 0.0)
            decoded = (pred + step * q).astype(self.dtype)
            ok &= np.abs(decoded.astype(np.float64) - o64) <= self.check_eb
        codes = np.where(ok, self.radius + q.astype(np.int64), 0)
        bad = np.flatnonzero(~ok)
        if bad.size:
            vals, raw, dec = self._unpredictable(o64[bad], pred[bad], orig[bad])
            decoded[bad] = dec
            self.unpred_values = np.concatenate([self.unpred_values, vals])
            self.unpred_raw = np.concatenate([self.unpred_raw, raw])
        return codes, decoded

    def _unpredictable(self, o64, pred, orig):
        return o64.copy(), np.ones(o64.size, dtype=bool), orig

    def recover_batch(self, codes: np.ndarray, pred: np.ndarray) -> np.ndarray:
        codes = np.asarray(codes, dtype=np.int64).reshape(-1)
        pred = np.asarray(pred, dtype=np.float64).reshape(-1)
        out = (pred + 2.0 * self.eb * (codes - self.radius)).astype(self.dtype)
        bad = np.flatnonzero(codes == 0)
        if bad.size:
            stop = self._cursor + bad.size
            if stop > self.unpred_values.size:
                raise CorruptionError("unpredictable values exhausted", "quantizer")
            vals = self.unpred_values[self._cursor:stop]
            raw = self.unpred_raw[self._cursor:stop]
            out[bad] = np.where(raw, vals, pred[bad] + vals).astype(self.dtype)
            self._cursor = stop
        return out

    # Serialization: kind u8, eb f64, radius u32, unpredictable count u64, payload.
    def save(self) -> bytes:
        head = struct.pack("<BdIQ", int(self.kind), self.eb, self.radius, self.unpred_values.size)
        return head + self._save_payload()

    def _save_payload(self) -> bytes:
        return self.unpred_values.astype(self.dtype.newbyteorder("<")).tobytes()

    @classmethod
    def load(cls, payload: bytes, dtype) -> "LinearQuantizer":
        if len(payload) < 21:
            raise CorruptionError("truncated quantizer header", "quantizer")
        kind, eb, radius, count = struct.unpack_from("<BdIQ", payload)
        try:
            impl = {QuantizerKind.LINEAR: LinearQuantizer,
                    QuantizerKind.UNPRED_AWARE: UnpredAwareQuantizer}[QuantizerKind(kind)]
        except ValueError:
            raise CorruptionError(f"unknown quantizer kind {kind}", "quantizer") from None
        if not (eb > 0 and radius >= 1):
            raise CorruptionError(f"invalid quantizer parameters eb={eb} R={radius}", "quantizer")
        quantizer = impl(eb, radius, dtype)
        quantizer._load_payload(payload[21:], count)
        return quantizer

    def _load_payload(self, payload: bytes, count: int):
        width = self.dtype.itemsize
        if len(payload) != count * width:
            raise CorruptionError(
                f"expected {count * width} bytes of unpredictables, got {len(payload)}", "quantizer")
        self.unpred_values = np.frombuffer(payload, self.dtype.newbyteorder("<")).astype(np.float64)
        self.unpred_raw = np.ones(count, dtype=bool)
        self._cursor = 0


class UnpredAwareQuantizer(LinearQuantizer):
    """Linear quantizer whose unpredictable residuals are stored as bitplanes."""

    kind = QuantizerKind.UNPRED_AWARE
    aware = True

    def _unpredictable(self, o64, pred, orig):
        d = o64 - pred
        with np.errstate(invalid="ignore", over="ignore"):
            mags = np.floor(np.abs(d) / self.lsb)
            ok = np.isfinite(d) & (mags < MAX_PLANE_VALUE)
            r = np.copysign(np.where(ok, mags, 0.0) * self.lsb, d)
            decoded = (pred + r).astype(self.dtype)
            ok &= np.abs(decoded.astype(np.float64) - o64) <= self.check_eb
        decoded = np.where(ok, decoded, orig)
        return np.where(ok, r, o64), ~ok, decoded

    def _save_payload(self) -> bytes:
        raw = self.unpred_raw
        out = bytearray(np.packbits(raw).tobytes())
        out += bitplane_encode(self.unpred_values[~raw], self.eb)
        out += self.unpred_values[raw].astype(self.dtype.newbyteorder("<")).tobytes()
        return bytes(out)

    def _load_payload(self, payload: bytes, count: int):
        flag_bytes = (count + 7) // 8
        if len(payload) < flag_bytes:
            raise CorruptionError("truncated unpredictable flags", "quantizer")
        raw = np.unpackbits(np.frombuffer(payload, np.uint8, flag_bytes), count=count).astype(bool)
        rest = payload[flag_bytes:]
        n_planes = int(count - raw.sum())
        used = bitplane_size(rest, n_planes)
        residuals = bitplane_decode(rest[:used], n_planes, self.eb)
        raw_bytes = rest[used:]
        width = self.dtype.itemsize
        if len(raw_bytes) != int(raw.sum()) * width:
            raise CorruptionError("raw unpredictable payload size mismatch", "quantizer")
        values = np.empty(count)
        values[~raw] = residuals
        values[raw] = np.frombuffer(raw_bytes, self.dtype.newbyteorder("<")).astype(np.float64)
        self.unpred_values = values
        self.unpred_raw = raw
        self._cursor = 0


def load_quantizer(payload: bytes, dtype) -> LinearQuantizer:
    return LinearQuantizer.load(payload, dtype)

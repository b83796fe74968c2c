"""Self-describing compressed stream container.

Layout (little-endian)::

    magic "MEBC" | version u16 | dtype u8 | N u8 | dims N x u64
    | error mode u8 | error bound f64
    | stage ids 5 x u8 | parameter blob length u16 | parameter blob
    | lossless section wrapping the section bundle (absent for empty grids)

The bundle is a sequence of ``tag u8 | length u64 | payload`` sections.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

import numpy as np

from .core import CorruptionError, ErrorMode, MAX_DIMS
from .encoders import EncoderKind
from .lossless import LosslessBackend
from .preprocess import PreprocessKind

MAGIC = b"MEBC"
VERSION = 1
DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
NO_STAGE = 255


class PredictorKind(enum.IntEnum):
    NONE = 0
    LORENZO_1D = 2
    COMPOSITE = 3
    INTERP = 4


class SectionTag(enum.IntEnum):
    PREPROCESS = 1
    PREDICTOR = 2
    QUANTIZER = 3
    ENCODER = 4
    PATCH = 5
    TRUNCATION = 6


_PARAMS = struct.Struct("<IIdBB")


@dataclass(frozen=True)
class Pipeline:
    """Stage instances making up one compressor, plus their shared parameters."""

    preprocess: PreprocessKind
    predictor: PredictorKind
    quantizer: int  # QuantizerKind value, or NO_STAGE
    encoder: int  # EncoderKind value, or NO_STAGE
    lossless: LosslessBackend
    block_size: int = 6
    quant_radius: int = 32768
    coefficient_eb_divisor: float = 2.0
    truncation_bytes: int = 0
    lossless_level: int = 6

    @property
    def name(self) -> str:
        if self.predictor == PredictorKind.NONE:
            return f"trunc:{self.truncation_bytes}"
        if self.predictor == PredictorKind.LORENZO_1D:
            return "adaptive-1d"
        return {PredictorKind.COMPOSITE: "lr", PredictorKind.INTERP: "interp"}[self.predictor]

    @property
    def fixed_encoder(self) -> bool:
        return self.encoder == EncoderKind.FIXED

    def to_bytes(self) -> bytes:
        stages = bytes([self.preprocess, self.predictor, self.quantizer, self.encoder, self.lossless])
        params = _PARAMS.pack(self.block_size, self.quant_radius, self.coefficient_eb_divisor,
                              self.truncation_bytes, self.lossless_level)
        return stages + struct.pack("<H", len(params)) + params

    @classmethod
    def parse(cls, data: bytes, offset: int) -> tuple["Pipeline", int]:
        if len(data) < offset + 7:
            raise CorruptionError("truncated pipeline descriptor", "header")
        ids = data[offset:offset + 5]
        (nparams,) = struct.unpack_from("<H", data, offset + 5)
        offset += 7
        if nparams != _PARAMS.size or len(data) < offset + nparams:
            raise CorruptionError("bad pipeline parameter blob", "header")
        params = _PARAMS.unpack_from(data, offset)
        try:
            pipeline = cls(PreprocessKind(ids[0]), PredictorKind(ids[1]), ids[2], ids[3],
                           LosslessBackend(ids[4]), *params)
        except ValueError as exc:
            raise CorruptionError(f"unknown stage id: {exc}", "header") from None
        if pipeline.block_size < 1 or pipeline.quant_radius < 1:
            raise CorruptionError("invalid pipeline parameters", "header")
        return pipeline, offset + nparams


@dataclass(frozen=True)
class StreamHeader:
    dtype: np.dtype
    dims: tuple[int, ...]
    error_mode: ErrorMode
    error_bound: float
    pipeline: Pipeline

    def to_bytes(self) -> bytes:
        out = bytearray(MAGIC)
        out += struct.pack("<HBB", VERSION, DTYPE_CODES[np.dtype(self.dtype)], len(self.dims))
        out += struct.pack(f"<{len(self.dims)}Q", *self.dims)
        out += struct.pack("<Bd", self.error_mode, self.error_bound)
        out += self.pipeline.to_bytes()
        return bytes(out)

    @classmethod
    def parse(cls, data: bytes) -> tuple["StreamHeader", int]:
        if data[:4] != MAGIC:
            raise CorruptionError("not a compressed stream (bad magic)", "header")
        if len(data) < 8:
            raise CorruptionError("truncated header", "header")
        version, dtype_code, ndim = struct.unpack_from("<HBB", data, 4)
        if version != VERSION:
            raise CorruptionError(f"unsupported stream version {version}", "header")
        dtypes = {v: k for k, v in DTYPE_CODES.items()}
        if dtype_code not in dtypes:
            raise CorruptionError(f"unknown dtype code {dtype_code}", "header")
        if not 1 <= ndim <= MAX_DIMS:
            raise CorruptionError(f"invalid dimension count {ndim}", "header")
        offset = 8
        if len(data) < offset + 8 * ndim + 9:
            raise CorruptionError("truncated header", "header")
        dims = struct.unpack_from(f"<{ndim}Q", data, offset)
        offset += 8 * ndim
        mode, eb = struct.unpack_from("<Bd", data, offset)
        offset += 9
        try:
            mode = ErrorMode(mode)
        except ValueError:
            raise CorruptionError(f"unknown error mode {mode}", "header") from None
        pipeline, offset = Pipeline.parse(data, offset)
        return cls(dtypes[dtype_code], tuple(dims), mode, eb, pipeline), offset


def section_parts(sections: dict) -> list:
    parts = []
    for tag, payload in sections.items():
        parts.append(struct.pack("<BQ", tag, memoryview(payload).nbytes))
        parts.append(payload)
    return parts


def pack_sections(sections: dict[int, bytes]) -> bytes:
    return b"".join(section_parts(sections))


def unpack_sections(bundle: bytes) -> dict[SectionTag, bytes]:
    sections = {}
    pos = 0
    while pos < len(bundle):
        if len(bundle) < pos + 9:
            raise CorruptionError("truncated section header", "bundle")
        tag, length = struct.unpack_from("<BQ", bundle, pos)
        pos += 9
        try:
            tag = SectionTag(tag)
        except ValueError:
            raise CorruptionError(f"unknown section tag {tag}", "bundle") from None
        if tag in sections:
            raise CorruptionError(f"duplicate section {tag.name}", "bundle")
        if len(bundle) < pos + length:
            raise CorruptionError(f"section {tag.name} overruns the bundle", tag.name.lower())
        sections[tag] = bundle[pos:pos + length]
        pos += length
    return sections

"""Final general-purpose lossless stage.

Section layout: backend id u8, level u8, raw size u64, compressed size u64,
payload.  ``zlib`` provides the DEFLATE backend.
"""

from __future__ import annotations

import enum
import struct
import zlib

from .core import ConfigError, CorruptionError

_HEADER = struct.Struct("<BBQQ")


class LosslessBackend(enum.IntEnum):
    PASSTHROUGH = 0
    DEFLATE = 1


BACKEND_NAMES = {"none": LosslessBackend.PASSTHROUGH, "passthrough": LosslessBackend.PASSTHROUGH,
                 "deflate": LosslessBackend.DEFLATE, "zlib": LosslessBackend.DEFLATE}


def backend_from_name(name: str) -> LosslessBackend:
    try:
        return BACKEND_NAMES[name.lower()]
    except KeyError:
        raise ConfigError(f"unknown lossless backend {name!r}") from None


def lossless_compress(data: bytes, backend=LosslessBackend.DEFLATE, level: int = 6) -> bytes:
    return b"".join(lossless_parts([data], backend, level))


def lossless_parts(parts, backend=LosslessBackend.DEFLATE, level: int = 6) -> list:
    """Like :func:`lossless_compress` on the concatenated ``parts``, returned unjoined.

    Passthrough avoids copying large buffers until the caller's final join.
    """
    backend = LosslessBackend(backend)
    if not 0 <= level <= 9:
        raise ConfigError(f"lossless level must be in [0, 9], got {level}")
    size = sum(memoryview(p).nbytes for p in parts)
    if backend == LosslessBackend.PASSTHROUGH:
        return [_HEADER.pack(backend, level, size, size), *parts]
    payload = zlib.compress(b"".join(parts), level)
    return [_HEADER.pack(backend, level, size, len(payload)), payload]


def lossless_decompress(data: bytes, expected_size: int | None = None) -> bytes:
    if len(data) < _HEADER.size:
        raise CorruptionError("truncated lossless header", "lossless")
    backend, _level, raw_size, size = _HEADER.unpack_from(data)
    payload = data[_HEADER.size:]
    if len(payload) != size:
        raise CorruptionError(f"lossless payload is {len(payload)} bytes, header says {size}", "lossless")
    if expected_size is not None and raw_size != expected_size:
        raise CorruptionError(f"raw size {raw_size} != expected {expected_size}", "lossless")
    if backend == LosslessBackend.PASSTHROUGH:
        out = payload
    elif backend == LosslessBackend.DEFLATE:
        try:
            out = zlib.decompress(payload)
        except zlib.error as exc:
            raise CorruptionError(f"deflate stream damaged: {exc}", "lossless") from None
    else:
        raise ConfigError(f"stream needs unsupported lossless backend id {backend}")
    if len(out) != raw_size:
        raise CorruptionError(f"decompressed {len(out)} bytes, header says {raw_size}", "lossless")
    return out

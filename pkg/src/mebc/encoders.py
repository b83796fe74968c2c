"""Huffman coding of quantization codes.

Tables are canonical: codewords follow from the code lengths alone (shorter
codes first, ties broken by symbol value), so only lengths are serialized.
Bits are packed MSB-first within each byte.
"""

from __future__ import annotations

import enum
import functools
import heapq
import struct
from dataclasses import dataclass
from typing import Mapping

import numba
import numpy as np

from .core import ConfigError, CorruptionError

MAX_CODE_LENGTH = 32


class EncoderKind(enum.IntEnum):
    DYNAMIC = 0
    FIXED = 1


FIXED_PROFILES = {"default": 0}


@dataclass(frozen=True)
class HuffmanTable:
    lengths: np.ndarray  # uint8 per symbol, 0 = absent
    codes: np.ndarray  # uint64 canonical codeword per symbol

    @classmethod
    def from_lengths(cls, lengths) -> "HuffmanTable":
        lengths = np.asarray(lengths, dtype=np.uint8)
        return cls(lengths, canonical_codes(lengths))

    @property
    def alphabet_size(self) -> int:
        return int(self.lengths.size)

    def kraft_sum(self) -> float:
        used = self.lengths[self.lengths > 0].astype(np.float64)
        return float(np.sum(np.exp2(-used)))

    def __eq__(self, other):
        if not isinstance(other, HuffmanTable):
            return NotImplemented
        return np.array_equal(self.lengths, other.lengths) and np.array_equal(self.codes, other.codes)

    __hash__ = None  # type: ignore[assignment]


def _frequency_array(frequencies) -> np.ndarray:
    if isinstance(frequencies, Mapping):
        if not frequencies:
            return np.zeros(0, dtype=np.int64)
        size = max(int(k) for k in frequencies) + 1
        freq = np.zeros(size, dtype=np.int64)
        for k, v in frequencies.items():
            freq[int(k)] = v
        return freq
    return np.asarray(frequencies, dtype=np.int64).reshape(-1)


def huffman_code_lengths(freq: np.ndarray) -> np.ndarray:
    """Optimal code lengths for the nonzero entries of ``freq`` (unbounded)."""
    symbols = np.flatnonzero(freq > 0)
    lengths = np.zeros(freq.size, dtype=np.int64)
    if symbols.size == 0:
        raise ValueError("cannot build a Huffman table from an empty frequency map")
    if symbols.size == 1:
        lengths[symbols[0]] = 1
        return lengths
    n = symbols.size
    parent = np.zeros(2 * n - 1, dtype=np.int64)
    # (weight, node id); ids are unique so ties resolve deterministically
    heap = [(int(freq[s]), i) for i, s in enumerate(symbols)]
    heapq.heapify(heap)
    next_id = n
    while len(heap) > 1:
        w1, a = heapq.heappop(heap)
        w2, b = heapq.heappop(heap)
        parent[a] = parent[b] = next_id
        heapq.heappush(heap, (w1 + w2, next_id))
        next_id += 1
    depth = np.zeros(2 * n - 1, dtype=np.int64)
    for node in range(2 * n - 3, -1, -1):  # parents always have larger ids
        depth[node] = depth[parent[node]] + 1
    lengths[symbols] = depth[:n]
    return lengths


def limit_code_lengths(freq: np.ndarray, lengths: np.ndarray, max_length: int) -> np.ndarray:
    """Rebalance ``lengths`` so none exceeds ``max_length`` (Kraft-complete)."""
    if lengths.max() <= max_length:
        return lengths
    counts = np.bincount(lengths[lengths > 0], minlength=lengths.max() + 1).astype(np.int64)
    # Pairs of overflowing leaves are hoisted, splitting a shorter leaf each time.
    for length in range(counts.size - 1, max_length, -1):
        while counts[length] > 0:
            j = length - 2
            while counts[j] == 0:
                j -= 1
            counts[length] -= 2
            counts[length - 1] += 1
            counts[j + 1] += 2
            counts[j] -= 1
    counts = counts[: max_length + 1]
    symbols = np.flatnonzero(freq > 0)
    order = symbols[np.lexsort((symbols, -freq[symbols]))]
    new = np.zeros_like(lengths)
    pos = 0
    for length in range(1, max_length + 1):
        new[order[pos:pos + counts[length]]] = length
        pos += counts[length]
    return new


def canonical_codes(lengths: np.ndarray) -> np.ndarray:
    codes = np.zeros(lengths.size, dtype=np.uint64)
    used = np.flatnonzero(lengths > 0)
    if used.size == 0:
        return codes
    order = used[np.lexsort((used, lengths[used]))]
    code = 0
    prev = int(lengths[order[0]])
    for s in order:
        length = int(lengths[s])
        code <<= length - prev
        prev = length
        codes[s] = code
        code += 1
    return codes


def huffman_build(frequencies, alphabet_size: int | None = None) -> HuffmanTable:
    """Canonical, length-limited Huffman table for a symbol -> count mapping or array."""
    freq = _frequency_array(frequencies)
    if alphabet_size is not None:
        if freq.size > alphabet_size:
            raise ValueError(f"symbol {freq.size - 1} outside alphabet of size {alphabet_size}")
        freq = np.pad(freq, (0, alphabet_size - freq.size))
    lengths = huffman_code_lengths(freq)
    lengths = limit_code_lengths(freq, lengths, MAX_CODE_LENGTH)
    return HuffmanTable.from_lengths(lengths)


# -- bit packing kernels ------------------------------------------------------

@numba.njit(cache=True)
def _encode_kernel(symbols, codes, lengths, out):
    acc = np.uint64(0)
    nacc = 0
    pos = 0
    for i in range(symbols.size):
        s = symbols[i]
        length = lengths[s]
        acc = (acc << np.uint64(length)) | codes[s]
        nacc += length
        while nacc >= 8:
            nacc -= 8
            out[pos] = np.uint8((acc >> np.uint64(nacc)) & np.uint64(0xFF))
            pos += 1
        acc &= (np.uint64(1) << np.uint64(nacc)) - np.uint64(1)
    if nacc > 0:
        out[pos] = np.uint8((acc << np.uint64(8 - nacc)) & np.uint64(0xFF))


@numba.njit(cache=True)
def _decode_kernel(data, nbits, count, bl_count, sorted_symbols, out):
    """Canonical decode; returns symbols written or -1 when the stream runs dry."""
    bit = 0
    for i in range(count):
        code = 0
        first = 0
        index = 0
        length = 1
        while True:
            if bit >= nbits or length > 32:
                return -1
            code |= (data[bit >> 3] >> (7 - (bit & 7))) & 1
            bit += 1
            n = bl_count[length]
            if code - n < first:
                out[i] = sorted_symbols[index + code - first]
                break
            index += n
            first += n
            first <<= 1
            code <<= 1
            length += 1
    return count


def huffman_encode(codes, table: HuffmanTable) -> tuple[bytes, int]:
    """Encode integer ``codes``; returns ``(payload, bit_count)``."""
    symbols = np.asarray(codes, dtype=np.int64).reshape(-1)
    if symbols.size == 0:
        return b"", 0
    if symbols.min() < 0 or symbols.max() >= table.alphabet_size:
        raise ValueError("symbol outside the table's alphabet")
    lengths = table.lengths.astype(np.int64)
    used = lengths[symbols]
    if not used.all():
        missing = int(symbols[np.argmin(used)])
        raise ValueError(f"symbol {missing} has no codeword in the table")
    nbits = int(used.sum())
    out = np.zeros((nbits + 7) // 8, dtype=np.uint8)
    _encode_kernel(symbols, table.codes, lengths, out)
    return out.tobytes(), nbits


def huffman_decode(payload: bytes, nbits: int, count: int, table: HuffmanTable) -> np.ndarray:
    out = np.zeros(count, dtype=np.int64)
    if count == 0:
        return out
    if len(payload) * 8 < nbits:
        raise CorruptionError(f"payload holds {len(payload) * 8} bits, header says {nbits}", "encoder")
    lengths = table.lengths.astype(np.int64)
    used = np.flatnonzero(lengths > 0)
    if used.size == 0:
        raise CorruptionError("empty Huffman table", "encoder")
    sorted_symbols = used[np.lexsort((used, lengths[used]))]
    bl_count = np.bincount(lengths[used], minlength=MAX_CODE_LENGTH + 1).astype(np.int64)
    data = np.frombuffer(payload, dtype=np.uint8)
    if _decode_kernel(data, nbits, count, bl_count, sorted_symbols, out) < 0:
        raise CorruptionError("Huffman bitstream exhausted before all symbols decoded", "encoder")
    return out


# -- fixed tables -------------------------------------------------------------

@functools.lru_cache(maxsize=8)
def fixed_huffman_table(profile: str = "default", radius: int = 32768) -> HuffmanTable:
    """Predefined table over ``[0, 2 * radius)`` favouring codes near ``radius``.

    The default profile weights each code by ``1 / (1 + |code - radius|)^2``,
    so code lengths grow roughly like ``2 * log2(distance)``; every symbol
    gets a codeword and the code is Kraft-complete.
    """
    if profile not in FIXED_PROFILES:
        raise ConfigError(f"unknown fixed Huffman profile {profile!r}")
    distance = np.abs(np.arange(2 * radius, dtype=np.int64) - radius)
    weights = np.floor(2.0**40 / (1.0 + distance) ** 2).astype(np.int64) + 1
    return huffman_build(weights)


def profile_name(profile_id: int) -> str:
    for name, pid in FIXED_PROFILES.items():
        if pid == profile_id:
            return name
    raise CorruptionError(f"unknown fixed Huffman profile id {profile_id}", "encoder")


# -- serialization ------------------------------------------------------------

def save_table(table: HuffmanTable) -> bytes:
    """Symbol count u32, run count u32, then ``(length u8, run u32)`` pairs."""
    lengths = table.lengths
    runs = []
    if lengths.size:
        edges = np.flatnonzero(np.diff(lengths.astype(np.int16))) + 1
        starts = np.concatenate([[0], edges])
        stops = np.concatenate([edges, [lengths.size]])
        runs = [(int(lengths[a]), int(b - a)) for a, b in zip(starts, stops)]
    out = bytearray(struct.pack("<II", lengths.size, len(runs)))
    for length, run in runs:
        out += struct.pack("<BI", length, run)
    return bytes(out)


def load_table(payload: bytes, offset: int = 0) -> tuple[HuffmanTable, int]:
    """Parse a table at ``offset``; returns the table and the offset past it."""
    if len(payload) < offset + 8:
        raise CorruptionError("truncated Huffman table header", "encoder")
    nsym, nruns = struct.unpack_from("<II", payload, offset)
    offset += 8
    if len(payload) < offset + 5 * nruns:
        raise CorruptionError("truncated Huffman table runs", "encoder")
    runs = np.frombuffer(payload, np.dtype([("len", "u1"), ("run", "<u4")]), nruns, offset)
    offset += 5 * nruns
    if int(runs["run"].sum()) != nsym:
        raise CorruptionError("Huffman table run lengths do not cover the alphabet", "encoder")
    if nruns and runs["len"].max() > MAX_CODE_LENGTH:
        raise CorruptionError("Huffman code length exceeds limit", "encoder")
    lengths = np.repeat(runs["len"], runs["run"].astype(np.int64)).astype(np.uint8)
    used = lengths[lengths > 0].astype(np.int64)
    if int(np.sum(np.left_shift(1, MAX_CODE_LENGTH - used))) > 1 << MAX_CODE_LENGTH:
        raise CorruptionError("Huffman table violates the Kraft inequality", "encoder")
    return HuffmanTable.from_lengths(lengths), offset


def encode_section(codes, alphabet_size: int, fixed_profile: str | None = None, radius: int = 0) -> bytes:
    """Encoder section: kind u8 [+ profile u8 | table], bit count u64, payload."""
    codes = np.asarray(codes, dtype=np.int64).reshape(-1)
    if fixed_profile is not None:
        table = fixed_huffman_table(fixed_profile, radius)
        head = bytes([EncoderKind.FIXED, FIXED_PROFILES[fixed_profile]])
    elif codes.size:
        table = huffman_build(np.bincount(codes, minlength=alphabet_size))
        head = bytes([EncoderKind.DYNAMIC]) + save_table(table)
    else:
        table = HuffmanTable.from_lengths(np.zeros(0))
        head = bytes([EncoderKind.DYNAMIC]) + save_table(table)
    payload, nbits = huffman_encode(codes, table)
    return head + struct.pack("<Q", nbits) + payload


def decode_section(payload: bytes, count: int, radius: int = 0, offset: int = 0) -> tuple[np.ndarray, int]:
    """Inverse of :func:`encode_section`; returns codes and the offset past the section."""
    if len(payload) <= offset:
        raise CorruptionError("missing encoder section", "encoder")
    kind = payload[offset]
    if kind == EncoderKind.FIXED:
        if len(payload) < offset + 2:
            raise CorruptionError("truncated fixed-profile header", "encoder")
        table = fixed_huffman_table(profile_name(payload[offset + 1]), radius)
        offset += 2
    elif kind == EncoderKind.DYNAMIC:
        table, offset = load_table(payload, offset + 1)
    else:
        raise CorruptionError(f"unknown encoder kind {kind}", "encoder")
    if len(payload) < offset + 8:
        raise CorruptionError("truncated encoder bit count", "encoder")
    (nbits,) = struct.unpack_from("<Q", payload, offset)
    offset += 8
    nbytes = (nbits + 7) // 8
    if len(payload) < offset + nbytes:
        raise CorruptionError("truncated encoder payload", "encoder")
    codes = huffman_decode(payload[offset:offset + nbytes], nbits, count, table)
    return codes, offset + nbytes

"""Compressor composition and the reference pipelines.

``compress`` runs preprocess -> predict + quantize -> save predictor and
quantizer state -> entropy coding -> lossless wrapping.  The decompressor
rebuilds the same pipeline from the stream header alone.

After quantization the compressor reconstructs the output exactly as the
decompressor will and records any element that still misses the bound (float
rounding in the inverse log transform, for instance) in a small patch
section, so the bound holds unconditionally.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numba
import numpy as np

from .core import (
    BoundViolation,
    ConfigError,
    CorruptionError,
    CompressionConfig,
    ErrorMode,
    Grid,
    bytes_per_sample,
    pad_dims3,
)
from .encoders import EncoderKind, decode_section, encode_section
from .lossless import LosslessBackend, backend_from_name, lossless_decompress, lossless_parts
from .predictors.composite import (
    analyze_blocks,
    block_count,
    blockwise_compress,
    blockwise_decompress,
    coefficient_bounds,
    decode_block_choices,
    encode_block_choices,
)
from .predictors.interp import build_plan, interp_compress, interp_decompress
from .preprocess import (
    PreprocessKind,
    PreprocessState,
    log_forward,
    log_inverse,
    time_fastest_permutation,
    transpose_forward,
    transpose_inverse,
)
from .quantizers import LinearQuantizer, QuantizerKind, UnpredAwareQuantizer, load_quantizer
from .stream import NO_STAGE, Pipeline, PredictorKind, SectionTag, StreamHeader, section_parts, unpack_sections

# Absolute bounds below this switch the adaptive pipeline to its lossless branch.
ADAPTIVE_THRESHOLD = 0.5
# Bin half-width of the lossless branch: integer residuals map to their own bin.
LOSSLESS_STEP_EB = 0.5


@dataclass(frozen=True)
class DataProfile:
    integer_valued: bool
    value_range: float


def profile_data(grid: Grid) -> DataProfile:
    data = grid.data
    finite = np.isfinite(data)
    integer = bool(finite.all() and np.array_equal(data, np.round(data)))
    value_range = float(data.max() - data.min()) if data.size and finite.all() else float("nan")
    return DataProfile(integer, value_range)


def _lossless_choice(config: CompressionConfig, default: LosslessBackend) -> LosslessBackend:
    return default if config.lossless is None else backend_from_name(config.lossless)


def build_pipeline(config: CompressionConfig, grid: Grid | None = None) -> Pipeline:
    """Stage selection for the ``lr``, ``interp`` and ``trunc`` pipelines."""
    common = dict(block_size=config.block_size, quant_radius=config.quant_radius,
                  coefficient_eb_divisor=config.coefficient_eb_divisor,
                  lossless_level=config.lossless_level)
    pre = PreprocessKind.LOG if config.error_mode == ErrorMode.REL else PreprocessKind.NONE
    if config.pipeline == "trunc":
        return Pipeline(PreprocessKind.NONE, PredictorKind.NONE, NO_STAGE, NO_STAGE,
                        _lossless_choice(config, LosslessBackend.PASSTHROUGH),
                        truncation_bytes=config.truncation_bytes or 0, **common)
    if config.pipeline == "adaptive":
        if grid is None:
            raise ConfigError("the adaptive pipeline needs the data to profile")
        return adaptive_select(config, profile_data(grid), grid.ndim)
    predictor = {"lr": PredictorKind.COMPOSITE, "interp": PredictorKind.INTERP}[config.pipeline]
    return Pipeline(pre, predictor, QuantizerKind.LINEAR, EncoderKind.DYNAMIC,
                    _lossless_choice(config, LosslessBackend.DEFLATE), **common)


def adaptive_select(config: CompressionConfig, data_profile: DataProfile, ndim: int = 3) -> Pipeline:
    """Lossless 1D branch for integer data under a sub-0.5 absolute bound, else LR.

    LR handles at most three dimensions, so 4D grids outside the lossless
    branch use linearized 1D Lorenzo instead.
    """
    common = dict(block_size=config.block_size, quant_radius=config.quant_radius,
                  coefficient_eb_divisor=config.coefficient_eb_divisor,
                  lossless_level=config.lossless_level)
    lossless = _lossless_choice(config, LosslessBackend.DEFLATE)
    if (config.error_mode == ErrorMode.ABS and config.error_bound < ADAPTIVE_THRESHOLD
            and data_profile.integer_valued):
        return Pipeline(PreprocessKind.TRANSPOSE, PredictorKind.LORENZO_1D, QuantizerKind.UNPRED_AWARE,
                        EncoderKind.FIXED, lossless, **common)
    if ndim > 3:
        pre = PreprocessKind.LOG if config.error_mode == ErrorMode.REL else PreprocessKind.NONE
        return Pipeline(pre, PredictorKind.LORENZO_1D, QuantizerKind.LINEAR, EncoderKind.DYNAMIC, lossless, **common)
    return build_pipeline(CompressionConfig(**{**config.__dict__, "pipeline": "lr"}))


# -- helpers ------------------------------------------------------------------

def _check_finite(grid: Grid, strict: bool):
    if strict:
        bad = ~np.isfinite(grid.data)
        if bad.any():
            index = np.unravel_index(int(np.argmax(bad)), grid.dims)
            raise ConfigError(f"non-finite value at index {tuple(int(i) for i in index)} (strict mode)")


def within_bound(orig: np.ndarray, recon: np.ndarray, mode: ErrorMode, eb: float) -> np.ndarray:
    """Element-wise bound check; non-finite originals must reproduce exactly."""
    o = orig.astype(np.float64)
    r = recon.astype(np.float64)
    with np.errstate(invalid="ignore", over="ignore"):
        err = np.abs(r - o)
        ok = err <= (eb if mode == ErrorMode.ABS else eb * np.abs(o))
    bad = np.flatnonzero(~ok)
    if bad.size:
        width = orig.dtype.itemsize
        same = (orig[bad].view(np.uint8).reshape(-1, width) == recon[bad].view(np.uint8).reshape(-1, width)).all(1)
        ok[bad] = same
    return ok


def _encode_patch(orig: np.ndarray, recon: np.ndarray, mode: ErrorMode, eb: float) -> bytes:
    bad = np.flatnonzero(~within_bound(orig, recon, mode, eb))
    le = orig.dtype.newbyteorder("<")
    return struct.pack("<Q", bad.size) + bad.astype("<u8").tobytes() + orig[bad].astype(le).tobytes()


def _apply_patch(payload: bytes, out: np.ndarray):
    if len(payload) < 8:
        raise CorruptionError("truncated patch section", "patch")
    (count,) = struct.unpack_from("<Q", payload)
    width = out.dtype.itemsize
    if len(payload) != 8 + count * (8 + width):
        raise CorruptionError("patch section size mismatch", "patch")
    idx = np.frombuffer(payload, "<u8", count, 8).astype(np.int64)
    if count and idx.max() >= out.size:
        raise CorruptionError("patch index out of range", "patch")
    out[idx] = np.frombuffer(payload, out.dtype.newbyteorder("<"), count, 8 + 8 * count)


def _log_step(rel_bound: float, abs_bound: float, dtype: np.dtype) -> float:
    # leave room for rounding in exp() and in the final cast to ``dtype``
    margin = float(np.finfo(dtype).eps)
    return abs_bound - margin if abs_bound > 2 * margin else abs_bound / 2


# -- truncation ---------------------------------------------------------------

def _truncate(data: np.ndarray, k: int) -> np.ndarray:
    """Keep the ``k`` most significant bytes of each sample (big-endian order)."""
    width = data.dtype.itemsize
    le = data.astype(data.dtype.newbyteorder("<"), copy=False).view(np.uint8).reshape(-1, width)
    return np.ascontiguousarray(le[:, :width - k - 1 if k < width else None:-1])


def _untruncate(kept: np.ndarray, dtype: np.dtype, n: int) -> np.ndarray:
    width = dtype.itemsize
    k = kept.shape[1]
    full = np.zeros((n, width), dtype=np.uint8)
    full[:, width - k:] = kept[:, ::-1]
    return full.view(dtype.newbyteorder("<")).reshape(-1).astype(dtype, copy=False)


@numba.njit(cache=True)
def _required_bytes(values, bits, truncated, width, rel, eb):
    # ``truncated`` aliases a one-element float view of a scratch integer buffer
    scratch = truncated.view(bits.dtype)
    need = 1
    for i in range(values.size):
        x = np.float64(values[i])
        bound = eb * abs(x) if rel else eb
        while need < width:
            shift = 8 * (width - need)
            scratch[0] = (bits[i] >> shift) << shift
            if scratch[0] == bits[i] or abs(np.float64(truncated[0]) - x) <= bound:
                break
            need += 1
        if need == width:
            break
    return need


def choose_truncation_bytes(grid: Grid, mode: ErrorMode, eb: float) -> int:
    """Smallest byte count whose truncation meets the bound for every element."""
    width = bytes_per_sample(grid.dtype)
    data = np.ascontiguousarray(grid.data)
    bits = data.view(np.uint32 if width == 4 else np.uint64)
    scratch = np.zeros(1, dtype=data.dtype)
    return int(_required_bytes(data, bits, scratch, width, mode == ErrorMode.REL, float(eb)))


# -- compression --------------------------------------------------------------

def compress(grid: Grid, config: CompressionConfig) -> bytes:
    """Compress ``grid`` so that every element honours ``config``'s error bound.

    An explicit ``truncation_bytes`` that cannot meet the bound raises
    BoundViolation; use :func:`truncation_compress` for unbounded truncation.
    """
    return _compress(grid, config, enforce=True)


def _compress(grid: Grid, config: CompressionConfig, enforce: bool) -> bytes:
    if not isinstance(grid, Grid):
        grid = Grid.from_array(grid)
    _check_finite(grid, config.strict)
    pipeline = build_pipeline(config, grid)
    if pipeline.predictor == PredictorKind.NONE:
        k = pipeline.truncation_bytes or choose_truncation_bytes(grid, config.error_mode, config.error_bound)
        if k > bytes_per_sample(grid.dtype):
            raise ConfigError(f"cannot keep {k} bytes of a {bytes_per_sample(grid.dtype)}-byte sample")
        pipeline = Pipeline(**{**pipeline.__dict__, "truncation_bytes": k})
    elif pipeline.predictor in (PredictorKind.COMPOSITE, PredictorKind.INTERP) and grid.ndim > 3:
        raise ConfigError(f"the {pipeline.name} pipeline supports at most 3 dimensions")
    header = StreamHeader(grid.dtype, grid.dims, config.error_mode, config.error_bound, pipeline)
    if grid.size == 0:
        return header.to_bytes()
    if pipeline.predictor == PredictorKind.NONE:
        k = pipeline.truncation_bytes
        if enforce and config.truncation_bytes is not None and \
                choose_truncation_bytes(grid, config.error_mode, config.error_bound) > k:
            raise BoundViolation(
                f"keeping {k} bytes violates eb={config.error_bound:g}; "
                f"omit the byte count to pick one automatically")
        kept = _truncate(grid.data, k)
        # the section is assembled by hand so the kept bytes are copied only once
        parts = [struct.pack("<BQ", SectionTag.TRUNCATION, 1 + kept.nbytes), bytes([k]), kept]
    else:
        parts = section_parts(_compress_predictive(grid, config, pipeline))
    wrapped = lossless_parts(parts, pipeline.lossless, pipeline.lossless_level)
    return b"".join([header.to_bytes(), *wrapped])


def _compress_predictive(grid: Grid, config: CompressionConfig, pipeline: Pipeline) -> dict:
    eb = config.error_bound
    step_eb = check_eb = eb
    state = PreprocessState()
    work = grid
    if pipeline.preprocess == PreprocessKind.LOG:
        work, state, abs_eb = log_forward(grid, eb)
        step_eb = check_eb = _log_step(eb, abs_eb, grid.dtype)
    elif pipeline.preprocess == PreprocessKind.TRANSPOSE:
        work, state = transpose_forward(grid, time_fastest_permutation(grid.ndim))
    if pipeline.quantizer == QuantizerKind.UNPRED_AWARE:
        step_eb = LOSSLESS_STEP_EB
        quantizer = UnpredAwareQuantizer(step_eb, pipeline.quant_radius, work.dtype, check_eb=check_eb)
    else:
        quantizer = LinearQuantizer(step_eb, pipeline.quant_radius, work.dtype, check_eb=check_eb)

    radius = pipeline.quant_radius
    if pipeline.predictor == PredictorKind.INTERP:
        orig = work.array
        buf = np.zeros_like(orig)
        anchor = (0,) * work.ndim
        buf[anchor] = orig[anchor]
        codes = interp_compress(orig, buf, build_plan(work.dims), quantizer)
        predictor_payload = orig[anchor].astype(work.dtype.newbyteorder("<")).tobytes()
    else:
        if pipeline.predictor == PredictorKind.LORENZO_1D:
            orig = work.data.reshape(-1, 1, 1)
            nblocks = block_count(orig.shape, pipeline.block_size)
            is_reg = np.zeros(nblocks, dtype=bool)
            coeffs = np.zeros((nblocks, 4))
            predictor_payload = b""
        else:
            orig = work.data.reshape(pad_dims3(work.dims))
            nblocks = block_count(orig.shape, pipeline.block_size)
            is_reg = np.zeros(nblocks, dtype=bool)
            raw_coeffs = np.zeros((nblocks, 4))
            analyze_blocks(orig, pipeline.block_size, work.ndim, step_eb, config.noise_coeff, is_reg, raw_coeffs)
            bounds = coefficient_bounds(step_eb, pipeline.coefficient_eb_divisor, pipeline.block_size)
            predictor_payload, coeffs = encode_block_choices(is_reg, raw_coeffs, bounds, radius)
        buf = np.zeros_like(orig)
        codes = np.zeros(orig.size, dtype=np.int64)
        uvals = np.zeros(orig.size)
        uraw = np.zeros(orig.size, dtype=np.bool_)
        n = blockwise_compress(orig, buf, pipeline.block_size, is_reg, coeffs, step_eb, check_eb, radius,
                               quantizer.lsb, quantizer.aware, codes, uvals, uraw)
        quantizer.unpred_values = uvals[:n].copy()
        quantizer.unpred_raw = uraw[:n].copy()

    recon = _postprocess(Grid(work.dims, buf), state, grid.dtype)
    encoder = encode_section(codes, 2 * radius, "default" if pipeline.fixed_encoder else None, radius)
    return {
        SectionTag.PREPROCESS: state.to_bytes(),
        SectionTag.PREDICTOR: predictor_payload,
        SectionTag.QUANTIZER: quantizer.save(),
        SectionTag.ENCODER: encoder,
        SectionTag.PATCH: _encode_patch(grid.data, recon.data, config.error_mode, config.error_bound),
    }


def _postprocess(work: Grid, state: PreprocessState, dtype) -> Grid:
    if state.kind == PreprocessKind.LOG:
        return log_inverse(work, state, dtype)
    if state.kind == PreprocessKind.TRANSPOSE:
        return transpose_inverse(work, state)
    return work


# -- decompression ------------------------------------------------------------

def _require(sections: dict, tag: SectionTag) -> bytes:
    if tag not in sections:
        raise CorruptionError(f"missing {tag.name.lower()} section", tag.name.lower())
    return sections[tag]


def decompress(stream: bytes) -> Grid:
    header, offset = StreamHeader.parse(stream)
    pipeline = header.pipeline
    dtype = np.dtype(header.dtype)
    n = math.prod(header.dims)
    if n == 0:
        return Grid(header.dims, np.zeros(0, dtype=dtype))
    sections = unpack_sections(lossless_decompress(stream[offset:]))

    if pipeline.predictor == PredictorKind.NONE:
        payload = _require(sections, SectionTag.TRUNCATION)
        k = payload[0] if payload else 0
        if not 1 <= k <= dtype.itemsize or len(payload) != 1 + k * n:
            raise CorruptionError("truncation payload size mismatch", "truncation")
        kept = np.frombuffer(payload, np.uint8, k * n, 1).reshape(n, k)
        return Grid(header.dims, _untruncate(kept, dtype, n))

    state = PreprocessState.from_bytes(_require(sections, SectionTag.PREPROCESS))
    work_dims = header.dims
    work_dtype = dtype
    if state.kind == PreprocessKind.LOG:
        work_dtype = np.dtype(np.float64)
    elif state.kind == PreprocessKind.TRANSPOSE:
        if len(state.permutation) != len(header.dims):
            raise CorruptionError("permutation does not match grid rank", "preprocess")
        work_dims = tuple(header.dims[p] for p in state.permutation)
    quantizer = load_quantizer(_require(sections, SectionTag.QUANTIZER), work_dtype)
    radius = quantizer.radius
    if radius != pipeline.quant_radius:
        raise CorruptionError("quantizer radius disagrees with header", "quantizer")
    predictor_payload = _require(sections, SectionTag.PREDICTOR)
    encoder_payload = _require(sections, SectionTag.ENCODER)
    # every code takes at least one bit, so a damaged header cannot force a huge allocation
    if n > 8 * len(encoder_payload):
        raise CorruptionError(f"{n} elements cannot fit a {len(encoder_payload)}-byte code stream", "header")

    if pipeline.predictor == PredictorKind.INTERP:
        if len(predictor_payload) != work_dtype.itemsize:
            raise CorruptionError("bad anchor size", "predictor")
        buf = np.zeros(work_dims, dtype=work_dtype)
        buf[(0,) * len(work_dims)] = np.frombuffer(predictor_payload, work_dtype.newbyteorder("<"))[0]
        codes, _ = decode_section(encoder_payload, n - 1, radius)
        interp_decompress(buf, build_plan(work_dims), quantizer, codes)
    elif pipeline.predictor in (PredictorKind.COMPOSITE, PredictorKind.LORENZO_1D):
        shape = (n, 1, 1) if pipeline.predictor == PredictorKind.LORENZO_1D else pad_dims3(work_dims)
        nblocks = block_count(shape, pipeline.block_size)
        if pipeline.predictor == PredictorKind.COMPOSITE:
            bounds = coefficient_bounds(quantizer.eb, pipeline.coefficient_eb_divisor, pipeline.block_size)
            is_reg, coeffs, _ = decode_block_choices(predictor_payload, bounds, radius)
            if is_reg.size != nblocks:
                raise CorruptionError(f"{is_reg.size} block tags for {nblocks} blocks", "predictor")
        else:
            is_reg = np.zeros(nblocks, dtype=bool)
            coeffs = np.zeros((nblocks, 4))
        codes, _ = decode_section(encoder_payload, n, radius)
        if codes.size and codes.max() >= 2 * radius:
            raise CorruptionError("quantization code out of range", "encoder")
        buf = np.zeros(shape, dtype=work_dtype)
        used = blockwise_decompress(buf, pipeline.block_size, is_reg, coeffs, quantizer.eb, radius,
                                    codes, quantizer.unpred_values, quantizer.unpred_raw)
        if used != quantizer.unpred_values.size:
            raise CorruptionError("unpredictable value count mismatch", "quantizer")
    else:
        raise CorruptionError(f"unsupported predictor {pipeline.predictor}", "header")

    out = _postprocess(Grid(work_dims, buf.reshape(-1)), state, dtype)
    data = out.data.astype(dtype, copy=True)
    _apply_patch(_require(sections, SectionTag.PATCH), data)
    return Grid(header.dims, data)


def truncation_compress(grid: Grid, k: int, lossless: str = "passthrough") -> bytes:
    """Keep ``k`` most-significant bytes per sample; no error bound is implied."""
    if not 1 <= k <= bytes_per_sample(grid.dtype):
        raise ConfigError(f"k must be in [1, {bytes_per_sample(grid.dtype)}], got {k}")
    # the recorded bound is nominal: explicit-k truncation does not target one
    config = CompressionConfig(1.0, pipeline="trunc", truncation_bytes=k, lossless=lossless)
    return _compress(grid, config, enforce=False)


def truncation_decompress(stream: bytes) -> Grid:
    return decompress(stream)


def read_header(stream: bytes) -> StreamHeader:
    return StreamHeader.parse(stream)[0]

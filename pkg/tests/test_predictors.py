from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mebc import iterate_blocks
from mebc.predictors import (
    InterpMethod,
    PredictorChoice,
    PredictorTag,
    RegressionCoefficients,
    build_plan,
    composite_select,
    compute_regression_coefficients,
    estimate_block_error,
    interp_predict,
    load_coefficients,
    lorenzo_predict,
    regression_predict,
    save_coefficients,
    select_for_block,
)
from mebc.predictors.composite import coefficient_bounds, decode_block_choices, encode_block_choices
from mebc.predictors.interp import predict_pass
from mebc.predictors.lorenzo import lorenzo3

from oracles import lorenzo_oracle, regression_oracle


def _whole(a):
    return iterate_blocks(a, max(a.shape))[0]


# -- Lorenzo ------------------------------------------------------------------

def test_lorenzo_zero_field():
    assert lorenzo_predict(_whole(np.zeros((4, 4, 4))), (2, 2, 2)) == 0


def test_lorenzo_affine_interior_exact():
    i, j, k = np.meshgrid(*[np.arange(6.0)] * 3, indexing="ij")
    f = 2 * i + 3 * j + 5 * k + 1
    block = _whole(f)
    for idx in [(1, 1, 1), (3, 2, 4), (5, 5, 5)]:
        assert lorenzo_predict(block, idx) == f[idx]


def test_lorenzo_ijk_example():
    i, j, k = np.meshgrid(*[np.arange(3.0)] * 3, indexing="ij")
    f = i * j * k
    assert lorenzo_predict(_whole(f), (1, 1, 1)) == 0
    assert f[1, 1, 1] - lorenzo_predict(_whole(f), (1, 1, 1)) == 1


@given(st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_lorenzo_matches_oracle(ndim, seed):
    rng = np.random.default_rng(seed)
    f = rng.standard_normal((5,) * ndim)
    idx = tuple(rng.integers(0, 5, ndim))
    assert lorenzo_predict(_whole(f), idx) == pytest.approx(lorenzo_oracle(f, idx), abs=1e-12)


def test_lorenzo_kernel_matches_reference():
    rng = np.random.default_rng(3)
    f = rng.standard_normal((4, 5, 6))
    block = _whole(f)
    for idx in block.indices():
        assert lorenzo3(f, *idx) == pytest.approx(lorenzo_predict(block, idx), abs=1e-12)


def test_lorenzo_1d_residual_is_the_slope():
    # order-1 Lorenzo in 1D is the previous sample, so a ramp leaves its slope behind
    f = 2.5 * np.arange(7.0) + 1
    block = _whole(f)
    assert all(f[i] - lorenzo_predict(block, (i,)) == 2.5 for i in range(1, 7))


@pytest.mark.parametrize("ndim", [2, 3])
def test_lorenzo_annihilates_affine(ndim):
    axes = np.meshgrid(*[np.arange(7.0)] * ndim, indexing="ij")
    f = sum((a + 1.5) * ax for a, ax in enumerate(axes)) - 4.0
    block = _whole(f)
    for idx in block.indices():
        if min(idx) >= 1:
            assert lorenzo_predict(block, idx) == f[idx]


# -- regression ---------------------------------------------------------------

def test_regression_constant_block():
    c = compute_regression_coefficients(_whole(np.full((6, 6, 6), 5.0)))
    assert tuple(c) == pytest.approx((5, 0, 0, 0), abs=1e-12)


def test_regression_ramp():
    i = np.meshgrid(*[np.arange(4.0)] * 3, indexing="ij")[0]
    assert tuple(compute_regression_coefficients(_whole(i))) == pytest.approx((0, 1, 0, 0), abs=1e-12)


def test_regression_random_block_matches_normal_equations():
    block = np.random.default_rng(11).standard_normal((6, 6, 6))
    got = tuple(compute_regression_coefficients(_whole(block)))
    assert got == pytest.approx(regression_oracle(block), rel=1e-9, abs=1e-12)


def test_regression_degenerate_axis_has_zero_slope():
    block = np.random.default_rng(2).standard_normal((4, 1, 5))
    c = compute_regression_coefficients(_whole(block))
    assert c[2] == 0.0
    assert tuple(c) == pytest.approx(regression_oracle(block), rel=1e-9, abs=1e-12)


def test_regression_predict_examples():
    assert regression_predict(RegressionCoefficients((1, 2, 3, 4)), (0, 0, 0)) == 1
    assert regression_predict(RegressionCoefficients((1, 2, 3, 4)), (1, 1, 1)) == 10
    assert regression_predict(RegressionCoefficients((0, 1, 0, 0)), (5, 2, 7)) == 5


def test_regression_non_finite_block():
    block = np.ones((3, 3, 3))
    block[1, 1, 1] = np.inf
    assert compute_regression_coefficients(_whole(block)) is None


# -- interpolation --------------------------------------------------------------

def test_interp_linear_midpoint():
    a = np.array([2.0, 0.0, 4.0])
    assert interp_predict(a, (1,), 1, 0, InterpMethod.LINEAR) == 3


def test_interp_cubic_exact_on_cubic():
    t = np.arange(-3.0, 4.0)
    g = t**3
    assert interp_predict(g, (3,), 1, 0, InterpMethod.CUBIC) == 0 == g[3]


def test_interp_cubic_constant():
    assert interp_predict(np.full(7, 2.5), (3,), 1, 0, InterpMethod.CUBIC) == 2.5


@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.integers(1, 4))
def test_cubic_exact_for_any_cubic(poly, stride):
    t = np.arange(8 * stride, dtype=np.float64)
    g = np.polyval(poly, t)
    idx = 3 * stride
    pred = interp_predict(g, (idx,), stride, 0, InterpMethod.CUBIC)
    assert pred == pytest.approx(g[idx], rel=1e-9, abs=1e-6 * max(1.0, np.abs(g).max()))


def test_linear_exact_on_degree_one():
    g = 3.0 * np.arange(9.0) - 2.0
    assert interp_predict(g, (8,), 4, 0, InterpMethod.LINEAR) != g[8]  # donor missing -> copy
    assert interp_predict(g, (4,), 2, 0, InterpMethod.LINEAR) == g[4]


@pytest.mark.parametrize("dims", [(1,), (2,), (17,), (5, 9), (8, 8), (3, 1, 7), (9, 6, 5)])
def test_plan_covers_every_index_once(dims):
    plan = build_plan(dims)
    seen = np.zeros(dims, dtype=int)
    seen[(0,) * len(dims)] += 1
    for p in plan.passes:
        seen[plan.index(p)] += 1
    assert (seen == 1).all()


def test_plan_strides_descend_by_powers_of_two():
    plan = build_plan((20, 7))
    strides = [p.stride for p in plan.passes]
    assert strides[0] == 16 and strides[-1] == 1
    assert strides == sorted(strides, reverse=True)


def test_plan_passes_only_read_known_donors():
    dims = (11, 6, 9)
    plan = build_plan(dims)
    known = np.zeros(dims, dtype=bool)
    known[0, 0, 0] = True
    for p in plan.passes:
        shifts = {InterpMethod.CUBIC: (-3, -1, 1, 3), InterpMethod.LINEAR: (-1, 1), InterpMethod.COPY: (-1,)}
        for s in shifts[p.method]:
            assert known[plan.index(p, s * p.stride)].all()
        known[plan.index(p)] = True


def test_vectorized_pass_matches_scalar_predictor():
    rng = np.random.default_rng(5)
    buf = rng.standard_normal((9, 10))
    plan = build_plan(buf.shape)
    for p in plan.passes:
        batch = predict_pass(plan, buf, p).reshape(-1)
        idx = plan.index(p)
        points = np.stack(np.meshgrid(*[np.arange(buf.shape[a])[s] for a, s in enumerate(idx)],
                                      indexing="ij"), -1).reshape(-1, 2)
        scalar = [interp_predict(buf, tuple(pt), p.stride, p.axis, p.method) for pt in points]
        assert np.allclose(batch, scalar, rtol=0, atol=1e-12)


# -- composite selection ------------------------------------------------------------

def test_estimate_constant_block_lorenzo():
    a = np.full((12, 12, 12), 3.0)
    block = iterate_blocks(a, 6)[-1]  # away from the origin, so every neighbour exists
    assert estimate_block_error(block, PredictorTag.LORENZO, None, 0.1) == pytest.approx(2.1)


def test_estimate_exact_plane_regression():
    i, j, k = np.meshgrid(*[np.arange(6.0)] * 3, indexing="ij")
    block = _whole(1 + 2 * i - j + 0.5 * k)
    c = compute_regression_coefficients(block)
    assert estimate_block_error(block, PredictorTag.REGRESSION, c, 0.1) == pytest.approx(0, abs=1e-12)


def test_estimate_without_noise_is_plain_residual():
    a = np.random.default_rng(1).standard_normal((6, 6, 6))
    block = _whole(a)
    expected = sum(abs(a[t, t, t] - lorenzo_oracle(a, (t, t, t))) for t in range(6))
    assert estimate_block_error(block, PredictorTag.LORENZO, None, 0.0) == pytest.approx(expected)


def test_select_rules():
    assert composite_select(2.1, 0.3).tag == PredictorTag.REGRESSION
    assert composite_select(1.0, 1.0).tag == PredictorTag.LORENZO


def test_smooth_plane_at_large_eb_prefers_regression():
    i, j, k = np.meshgrid(*[np.arange(12.0)] * 3, indexing="ij")
    f = 0.3 * i + 0.2 * j - 0.1 * k
    block = iterate_blocks(f, 6)[-1]
    assert select_for_block(block, eb=1.0).tag == PredictorTag.REGRESSION


def test_coefficients_first_block_deltas_from_zero():
    choices = [PredictorChoice(PredictorTag.REGRESSION, RegressionCoefficients((1.0, 0.5, 0.0, -0.25)))]
    back = load_coefficients(save_coefficients(choices, eb=0.1), eb=0.1)
    bounds = coefficient_bounds(0.1, 2.0, 6)
    for got, want, bound in zip(back[0].coeffs, choices[0].coeffs, bounds):
        assert abs(got - want) <= bound * (1 + 1e-12)


def test_identical_coefficients_give_zero_deltas():
    c = np.tile([[2.0, 0.1, 0.2, 0.3]], (5, 1))
    is_reg = np.ones(5, bool)
    bounds = coefficient_bounds(0.01, 2.0, 6)
    from mebc.predictors.composite import _quantize_coeffs

    codes = np.zeros(20, dtype=np.int64)
    _quantize_coeffs(c, bounds, 32768, codes, np.zeros_like(c), np.zeros(20))
    assert (codes[4:] == 32768).all()
    payload, decoded = encode_block_choices(is_reg, c, bounds, 32768)
    _, back, _ = decode_block_choices(payload, bounds, 32768)
    assert np.array_equal(back, decoded)


@given(st.integers(0, 2**32 - 1), st.floats(1e-8, 10))
def test_coefficient_round_trip_is_bit_exact(seed, eb):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 40))
    is_reg = rng.random(n) < 0.6
    coeffs = rng.standard_normal((n, 4)) * 10 ** rng.uniform(-3, 6, (n, 1))
    bounds = coefficient_bounds(eb, 2.0, 6)
    payload, decoded = encode_block_choices(is_reg, coeffs, bounds, 32768)
    tags, back, _ = decode_block_choices(payload, bounds, 32768)
    assert np.array_equal(tags, is_reg)
    assert np.array_equal(back, decoded)
    err = np.abs(decoded[is_reg] - coeffs[is_reg])
    assert (err <= bounds * (1 + 1e-9)).all()


def test_choice_determinism():
    a = np.random.default_rng(8).standard_normal((6, 6, 6)).cumsum(0)
    block = _whole(a)
    assert select_for_block(block, 0.05) == select_for_block(block, 0.05)

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gfid.dst import (
    ObservationSet,
    Variant,
    build_system,
    dst,
    filters_from_solution,
    pair_order,
    true_coefficients,
)
from gfid.errors import FewerThanTwoBlocks, InvalidParams, LengthMismatch, NonIncreasingOrders
from gfid.filters import IncrementBank

from helpers import make_instance

CASES = [
    ("multi_known", (3, 2, 4), None),
    ("multi_overshoot", (3, 2, 4), (4, 4, 5)),
    ("single_known", (2, 4, 5), None),
    ("single_overshoot", (2, 4, 5), (3, 5, 5)),
    ("single_overshoot", (3, 5, 7), (7, 7, 7)),
]


def test_pair_order():
    assert pair_order(2) == [(0, 1)]
    assert pair_order(4) == [(0, 1), (0, 2), (1, 2), (0, 3), (1, 3), (2, 3)]


def test_dst_layout_by_hand():
    a = [np.full((1, 1), v) for v in (1.0, 2.0, 3.0)]
    expected = np.array([
        [2.0, -1.0, 0.0],   # pair (0, 1)
        [3.0, 0.0, -1.0],   # pair (0, 2)
        [0.0, 3.0, -2.0],   # pair (1, 2)
    ])
    np.testing.assert_array_equal(dst(a), expected)


def test_dst_recursive_definition():
    # stacking the pairs of the first m blocks, then the new block against each earlier one
    rng = np.random.default_rng(0)
    blocks = [rng.standard_normal((2, 3)) for _ in range(4)]
    prev = dst(blocks[:3])
    full = dst(blocks)
    np.testing.assert_array_equal(full[:prev.shape[0], :9], prev)
    np.testing.assert_array_equal(full[:prev.shape[0], 9:], 0.0)


def test_dst_errors():
    with pytest.raises(FewerThanTwoBlocks):
        dst([np.eye(2)])
    with pytest.raises(InvalidParams):
        dst([np.eye(2), np.eye(3)])


@pytest.mark.parametrize("variant,orders,overshoot", CASES)
def test_truth_spans_null_space(variant, orders, overshoot):
    rng = np.random.default_rng([len(variant), *orders])
    inst = make_instance(rng, variant, orders, overshoot)
    a = inst.system.matrix
    m = len(orders)
    assert a.shape == (m * (m - 1) // 2 * 20, sum(inst.cols) if "multi" in variant or overshoot
                       else orders[-1])
    assert np.linalg.norm(a @ inst.truth) <= 1e-9 * np.linalg.norm(a)


@pytest.mark.parametrize("variant,orders,overshoot", CASES)
def test_filters_from_solution_inverts_truth(variant, orders, overshoot):
    rng = np.random.default_rng(1)
    inst = make_instance(rng, variant, orders, overshoot)
    bank = filters_from_solution(inst.truth, variant, inst.cols)
    for got, want in zip(bank, inst.filters):
        np.testing.assert_allclose(got.coeffs[:want.order], want.coeffs)
        np.testing.assert_array_equal(got.coeffs[want.order:], 0.0)


def test_single_overshoot_truth_layout():
    bank = IncrementBank.from_full([1.0, 0.8, 0.6, 0.5, 0.3], (2, 4, 5))
    truth = true_coefficients(bank, Variant.SINGLE_OVERSHOOT, (5, 5, 5))
    np.testing.assert_array_equal(truth, [1, 0.8, 0, 0, 0, 0, 0, 0.6, 0.5, 0, 0, 0, 0, 0, 0.3])


def test_build_system_errors(rng):
    inst = make_instance(rng, "multi_known", (2, 2))
    obs = ObservationSet.from_outputs(inst.outputs, inst.basis)
    with pytest.raises(LengthMismatch):
        build_system(obs, inst.basis, (2, 2, 2), "multi_known")
    with pytest.raises(NonIncreasingOrders):
        build_system(obs, inst.basis, (3, 3), "single_known")
    with pytest.raises(ValueError):
        build_system(obs, inst.basis, (2, 2), "bogus")
    with pytest.raises(FewerThanTwoBlocks):
        ObservationSet.from_outputs(inst.outputs[:1], inst.basis)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4), st.integers(1, 4))
def test_overshoot_truth_in_null_space(seed, m, order):
    rng = np.random.default_rng(seed)
    orders = (order,) * m
    inst = make_instance(rng, "multi_overshoot", orders, tuple(o + 2 for o in orders), n=15)
    a = inst.system.matrix
    assert np.linalg.norm(a @ inst.truth) <= 1e-9 * np.linalg.norm(a)

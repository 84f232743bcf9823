"""Graph-level contracts of the autodiff core.

Covers gradient accumulation on fan-out, deep-graph traversal without
recursion, the scalar-only backward contract, and the finiteness guard.
"""

import numpy as np
import pytest

from convaffect.errors import ContractError, NumericError
from convaffect.numkit import Tensor, as_tensor, ops


def test_fanout_accumulates_gradients():
    x = Tensor([1.0, -2.0, 3.0], requires_grad=True)
    # y = sum(x*x + x)  =>  dy/dx = 2x + 1
    y = ops.sum_all(ops.add(ops.mul(x, x), x))
    y.backward()
    np.testing.assert_allclose(x.grad, [3.0, -3.0, 7.0], atol=1e-15)


def test_same_tensor_as_both_operands():
    x = Tensor([2.0], requires_grad=True)
    ops.sum_all(ops.mul(x, x)).backward()
    np.testing.assert_allclose(x.grad, [4.0], atol=0)


def test_diamond_graph_single_visit():
    # a feeds two paths that rejoin; each backward rule must fire exactly once
    x = Tensor([1.5], requires_grad=True)
    a = ops.scale(x, 2.0)
    y = ops.sum_all(ops.add(ops.scale(a, 3.0), ops.scale(a, 5.0)))
    y.backward()
    np.testing.assert_allclose(x.grad, [16.0], atol=0)


def test_deep_chain_does_not_recurse():
    # ~2000 nodes would blow the interpreter stack if topo order were recursive
    x = Tensor([1.0], requires_grad=True)
    t = x
    for _ in range(2000):
        t = ops.add_scalar(t, 0.001)
    ops.sum_all(t).backward()
    np.testing.assert_allclose(x.grad, [1.0], atol=0)


def test_backward_requires_scalar():
    t = ops.add(Tensor([1.0, 2.0], requires_grad=True), Tensor([3.0, 4.0]))
    with pytest.raises(ContractError):
        t.backward()


def test_item_requires_scalar():
    with pytest.raises(ContractError):
        Tensor([1.0, 2.0]).item()
    assert Tensor(7.0).item() == 7.0


def test_leaf_backward_seeds_one():
    t = Tensor(3.0, requires_grad=True)
    t.backward()
    np.testing.assert_allclose(t.grad, 1.0, atol=0)


def test_no_grad_leaves_stay_untouched():
    x = Tensor([1.0, 2.0])
    y = Tensor([3.0, 4.0], requires_grad=True)
    ops.sum_all(ops.mul(x, y)).backward()
    assert x.grad is None
    np.testing.assert_allclose(y.grad, [1.0, 2.0], atol=0)


def test_nonfinite_result_names_the_op():
    big = Tensor([1e308])
    with np.errstate(over="ignore"), pytest.raises(NumericError, match="mul"):
        ops.mul(big, big)


def test_as_tensor_wraps_and_passes_through():
    t = Tensor([1.0])
    assert as_tensor(t) is t
    wrapped = as_tensor([1.0, 2.0])
    assert isinstance(wrapped, Tensor)
    assert wrapped.data.dtype == np.float64


def test_requires_grad_propagates_through_ops():
    a = Tensor([1.0], requires_grad=True)
    b = Tensor([2.0])
    assert ops.add(a, b).requires_grad
    assert not ops.add(b, b).requires_grad


def test_structural_roundtrip_properties():
    rng = np.random.default_rng(42)
    for _ in range(25):
        T = int(rng.integers(1, 7))
        d = int(rng.integers(1, 5))
        X = rng.normal(size=(T, d))
        # double reversal is the identity
        np.testing.assert_array_equal(
            ops.reverse_rows(ops.reverse_rows(Tensor(X))).data, X
        )
        # take then pad restores shape with zero tail
        n = int(rng.integers(1, T + 1))
        back = ops.pad_rows(ops.take_rows(Tensor(X), n), T).data
        np.testing.assert_array_equal(back[:n], X[:n])
        assert not back[n:].any()
        # stack of rows reproduces the matrix
        stacked = ops.stack_rows([Tensor(X[i]) for i in range(T)]).data
        np.testing.assert_array_equal(stacked, X)


def test_softmax_rows_normalized_property():
    rng = np.random.default_rng(7)
    for _ in range(25):
        n = int(rng.integers(1, 6))
        k = int(rng.integers(1, 9))
        probs = ops.softmax(Tensor(rng.normal(scale=5.0, size=(n, k)))).data
        assert (probs >= 0).all()
        np.testing.assert_allclose(probs.sum(axis=1), np.ones(n), atol=1e-12)


def test_masked_rows_never_reach_maxpool_gradient():
    rng = np.random.default_rng(9)
    for _ in range(25):
        T, d = int(rng.integers(2, 6)), int(rng.integers(1, 4))
        n = int(rng.integers(1, T))
        H = Tensor(rng.normal(size=(T, d)), requires_grad=True)
        ops.sum_all(ops.maxpool_time(H, n)).backward()
        assert not H.grad[n:].any()

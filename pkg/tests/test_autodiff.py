import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dgshock import autodiff as ad
from dgshock.autodiff import Tensor, concat, conv1d, relu


def numeric_grad(fn, arr, eps=1e-6):
    g = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = arr[i]
        arr[i] = old + eps
        hi = fn()
        arr[i] = old - eps
        lo = fn()
        arr[i] = old
        g[i] = (hi - lo) / (2 * eps)
    return g


def check_grads(build, *arrays, tol=1e-7):
    tensors = [Tensor(a, requires_grad=True) for a in arrays]
    build(*tensors).backward()
    for t in tensors:
        fd = numeric_grad(lambda: build(*[Tensor(x.data) for x in tensors]).item(), t.data)
        np.testing.assert_allclose(t.grad, fd, rtol=tol, atol=tol)


def test_conv1d_example():
    x = np.array([[1.0, 2.0, 3.0, 4.0]])
    w = np.array([[[1.0, 0.0, -1.0]]])
    np.testing.assert_array_equal(conv1d(x, w).data, [[-2.0, -2.0, -2.0, 3.0]])


def test_conv1d_identity_kernel(rng):
    x = rng.normal(size=(1, 9))
    np.testing.assert_array_equal(conv1d(x, np.array([[[0.0, 1.0, 0.0]]])).data, x)


def test_conv1d_bias_gradient_counts_positions():
    x = Tensor(np.zeros((2, 7)))
    w = Tensor(np.zeros((3, 2, 3)))
    b = Tensor(np.zeros(3), requires_grad=True)
    conv1d(x, w, b).sum().backward()
    np.testing.assert_array_equal(b.grad, [7.0, 7.0, 7.0])


def test_conv1d_errors():
    with pytest.raises(ValueError):
        conv1d(np.zeros((2, 5)), np.zeros((1, 3, 3)))
    with pytest.raises(ValueError):
        conv1d(np.zeros((1, 5)), np.zeros((1, 1, 2)))


def test_conv1d_matches_loop(rng):
    x = rng.normal(size=(3, 11))
    w = rng.normal(size=(4, 3, 5))
    b = rng.normal(size=4)
    ref = np.zeros((4, 11))
    xp = np.pad(x, ((0, 0), (2, 2)))
    for o in range(4):
        for i in range(11):
            ref[o, i] = b[o] + np.sum(w[o] * xp[:, i:i + 5])
    np.testing.assert_allclose(conv1d(x, w, b).data, ref, atol=1e-13)


def test_conv1d_gradients(rng):
    weights = rng.normal(size=(2, 9))
    check_grads(lambda x, w, b: (conv1d(x, w, b) * weights).sum(),
                rng.normal(size=(3, 9)), rng.normal(size=(2, 3, 3)), rng.normal(size=2))


def test_relu():
    x = Tensor(np.array([-1.0, 0.0, 2.0]), requires_grad=True)
    y = relu(x)
    np.testing.assert_array_equal(y.data, [0.0, 0.0, 2.0])
    y.sum().backward()
    np.testing.assert_array_equal(x.grad, [0.0, 0.0, 1.0])


def test_backward_examples():
    a = Tensor(3.0, requires_grad=True)
    b = Tensor(4.0, requires_grad=True)
    (a * b + a).backward()
    assert a.grad == 5.0 and b.grad == 3.0
    x = Tensor(2.0, requires_grad=True)
    (x ** 3).backward()
    assert x.grad == 12.0


def test_shared_subexpression_accumulates():
    x = Tensor(1.5, requires_grad=True)
    y = x * x
    (y + y * 2.0).backward()
    assert x.grad == pytest.approx(9.0)


def test_leaf_grads_accumulate_across_calls():
    x = Tensor(2.0, requires_grad=True)
    (x * 3.0).backward()
    (x * 3.0).backward()
    assert x.grad == 6.0
    x.zero_grad()
    assert x.grad is None


def test_backward_needs_scalar_seed():
    with pytest.raises(ValueError):
        Tensor(np.ones(3), requires_grad=True).backward()


def test_ndarray_on_the_left_stays_a_tensor():
    x = Tensor(np.ones(2), requires_grad=True)
    assert isinstance(np.ones(2) * x, Tensor)
    assert isinstance(np.ones((3, 2)) @ x, Tensor)


def test_elementwise_gradients(rng):
    a = rng.uniform(0.5, 2.0, size=(3, 4))
    b = rng.uniform(0.5, 2.0, size=(1, 4))
    check_grads(lambda x, y: ((x - y) * x / y + x ** 2.0 - 1.0 / x).mean(), a, b)
    check_grads(lambda x: ad.absolute(x).sum(), rng.normal(size=5))


def test_matmul_index_and_shape_gradients(rng):
    check_grads(lambda x, y: ((x @ y).T[1:, ::2] * 2.0).sum(), rng.normal(size=(3, 4)), rng.normal(size=(4, 5)))
    check_grads(lambda x: x.reshape(2, 6).sum(axis=0).mean() + x[[0, 0, 1]].sum(), rng.normal(size=(3, 4)))


def test_concat_stack_where_maximum(rng):
    mask = rng.random(size=(2, 3)) > 0.5
    check_grads(lambda x, y: (concat([x, y], axis=1) ** 2.0).sum() + ad.stack([x, y]).mean()
                + (ad.where(mask, x, y) * 3.0).sum() + ad.maximum(x, y).sum(),
                rng.normal(size=(2, 3)), rng.normal(size=(2, 3)))


def test_maximum_tie_goes_to_first():
    a = Tensor(np.array([1.0]), requires_grad=True)
    b = Tensor(np.array([1.0]), requires_grad=True)
    ad.maximum(a, b).sum().backward()
    assert a.grad[0] == 1.0 and (b.grad is None or b.grad[0] == 0.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.sampled_from([1, 3, 5]), st.integers(3, 12), st.integers(0, 2 ** 31))
def test_conv1d_shapes(c_in, c_out, k, n, seed):
    r = np.random.default_rng(seed)
    y = conv1d(r.normal(size=(c_in, n)), r.normal(size=(c_out, c_in, k)), np.zeros(c_out))
    assert y.shape == (c_out, n)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_conv1d_is_linear_in_input(seed):
    r = np.random.default_rng(seed)
    w = r.normal(size=(2, 3, 3))
    x1, x2 = r.normal(size=(2, 3, 8))
    np.testing.assert_allclose(conv1d(2 * x1 - x2, w).data, 2 * conv1d(x1, w).data - conv1d(x2, w).data,
                               atol=1e-12)

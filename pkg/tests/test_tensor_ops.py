"""Gradient checks and algebraic invariants for every differentiable op."""

import numpy as np
import pytest

from s2ut import tensor as T
from s2ut.gradcheck import grad_check
from s2ut.rng import RngStream
from s2ut.tensor import Tensor


def rand(rng, *shape):
    return Tensor(rng.normal(shape), requires_grad=True)


def check(fn, inputs, tol=1e-4, eps=1e-5):
    report = grad_check(fn, inputs, eps=eps, tol=tol)
    assert report.passed, str(report)
    return report


SEEDS = [0, 1, 2]


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_elementwise(seed):
    rng = RngStream(seed)
    x = rand(rng, 3, 4)
    y = rand(rng, 3, 4)
    check(lambda a, b: T.tsum(a * b + a - 0.5 * b), [x, y])
    check(lambda a: T.tsum(T.exp(a) + T.log(T.exp(a) + 1.0)), [rand(rng, 5)])
    check(lambda a: T.tsum(T.sqrt(a * a + 1.0)), [rand(rng, 4, 2)])
    check(lambda a: T.tsum(T.tanh(a) + T.sigmoid(a)), [rand(rng, 6)])
    check(lambda a: T.tsum(T.power(a, 3.0)), [rand(rng, 3, 3)])
    check(lambda a, b: T.tsum(a / (b * b + 1.0)), [rand(rng, 2, 3), rand(rng, 2, 3)])


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_matmul(seed):
    rng = RngStream(100 + seed)
    a = rand(rng, 3, 4)
    b = rand(rng, 4, 5)
    check(lambda x, y: T.tsum(T.matmul(x, y)), [a, b])
    # batched with broadcast weight
    xb = rand(rng, 2, 3, 4)
    w = rand(rng, 4, 5)
    check(lambda x, y: T.tsum(T.matmul(x, y) ** 2.0), [xb, w])
    # batched-batched
    q = rand(rng, 2, 3, 4)
    k = rand(rng, 2, 4, 3)
    check(lambda x, y: T.tsum(T.matmul(x, y)), [q, k])


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_softmax_logsoftmax(seed):
    rng = RngStream(200 + seed)
    x = rand(rng, 3, 5)
    coef_x = Tensor(rng.normal((3, 5)))
    check(lambda a: T.tsum(T.softmax(a) * coef_x), [x])
    y = rand(rng, 2, 4, 6)
    coef_y = Tensor(rng.normal((2, 4, 6)))
    check(lambda a: T.tsum(T.log_softmax(a) * coef_y), [y])


def test_softmax_rows_sum_to_one():
    rng = RngStream(42)
    x = Tensor(rng.normal((10, 33)) * 5.0)
    s = T.softmax(x).data
    assert np.abs(s.sum(axis=-1) - 1.0).max() <= 1e-12


def test_layer_norm_moments_before_affine():
    rng = RngStream(43)
    x = Tensor(rng.normal((20, 64)) * 3.0 + 1.5)
    y = T.layer_norm(x).data
    assert np.abs(y.mean(axis=-1)).max() < 1e-10
    assert np.abs(y.var(axis=-1) - 1.0).max() < 1e-8


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_layer_norm(seed):
    rng = RngStream(300 + seed)
    x = rand(rng, 4, 7)
    coef = Tensor(rng.normal((4, 7)))
    check(lambda a: T.tsum(T.layer_norm(a) * coef), [x])


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_conv1d(seed):
    rng = RngStream(400 + seed)
    x = rand(rng, 2, 9, 3)
    w = rand(rng, 3, 3, 4)
    check(lambda a, b: T.tsum(T.conv1d(a, b) ** 2.0), [x, w])
    check(lambda a, b: T.tsum(T.conv1d(a, b, stride=2)), [x, w])


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_depthwise_conv(seed):
    rng = RngStream(500 + seed)
    x = rand(rng, 2, 8, 4)
    w = rand(rng, 3, 4)
    check(lambda a, b: T.tsum(T.depthwise_conv1d(a, b) ** 2.0), [x, w])


def test_conv1d_length_contract():
    x = Tensor(np.zeros((1, 10, 2)))
    w = Tensor(np.zeros((3, 2, 5)))
    assert T.conv1d(x, w, stride=2).shape == (1, 4, 5)
    with pytest.raises(ValueError):
        T.conv1d(Tensor(np.zeros((1, 2, 2))), w)


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_embedding(seed):
    rng = RngStream(600 + seed)
    w = rand(rng, 11, 5)
    ids = np.asarray(rng.integers(11, (2, 6)))
    coef = Tensor(rng.normal((2, 6, 5)))
    check(lambda a: T.tsum(T.embedding(a, ids) * coef), [w])


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_gelu_and_friends(seed):
    rng = RngStream(700 + seed)
    check(lambda a: T.tsum(T.gelu(a)), [rand(rng, 4, 5)])
    check(lambda a: T.tsum(T.swish(a)), [rand(rng, 4, 5)])
    check(lambda a: T.tsum(T.relu(a) * a), [rand(rng, 17)])


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_shape_ops(seed):
    rng = RngStream(800 + seed)
    x = rand(rng, 2, 3, 4)
    coef = Tensor(rng.normal((4, 6)))
    check(lambda a: T.tsum(T.reshape(a, (4, 6)) * coef), [x])
    coef2 = Tensor(rng.normal((4, 2, 3)))
    check(lambda a: T.tsum(T.transpose(a, (2, 0, 1)) * coef2), [x])
    y = rand(rng, 2, 2, 4)
    coefc = Tensor(rng.normal((2, 5, 4)))
    check(lambda a, b: T.tsum(T.concat([a, b], axis=1) * coefc), [x, y])
    coefp = Tensor(rng.normal((2, 7, 4)))
    check(lambda a: T.tsum(T.pad1d(a, 1, 3) * coefp), [x])
    coefg = Tensor(rng.normal((2, 2, 2)))
    check(lambda a: T.tsum(a[:, 1:3, :2] * coefg), [x])


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_take_along_last(seed):
    rng = RngStream(900 + seed)
    x = rand(rng, 3, 4, 6)
    ids = np.asarray(rng.integers(6, (3, 4)))
    check(lambda a: T.tsum(T.take_along_last(a, ids) ** 2.0), [x])


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_attention_composite(seed):
    """Scaled dot-product attention assembled from primitives."""
    rng = RngStream(1000 + seed)
    q = rand(rng, 2, 3, 4)
    k = rand(rng, 2, 5, 4)
    v = rand(rng, 2, 5, 4)
    coef = Tensor(rng.normal((2, 3, 4)))

    def attn(q_, k_, v_):
        scores = T.matmul(q_, T.transpose(k_, (0, 2, 1))) * (1.0 / 2.0)
        return T.tsum(T.matmul(T.softmax(scores), v_) * coef)

    check(attn, [q, k, v])


def test_grad_check_polynomial_exact():
    x = Tensor([1.0, 2.0], requires_grad=True)
    report = grad_check(lambda a: T.tsum(a * a), [x], eps=1e-5, tol=1e-4)
    assert report.passed and report.max_rel_err < 1e-8
    x.grad = None
    T.tsum(x * x).backward()
    assert np.allclose(x.grad, [2.0, 4.0])


def test_grad_check_linear_tight_tol():
    x = Tensor(np.arange(5, dtype=float), requires_grad=True)
    report = grad_check(lambda a: T.tsum(a), [x], eps=1e-5, tol=1e-10)
    assert report.passed
    x.grad = None
    T.tsum(x).backward()
    assert np.array_equal(x.grad, np.ones(5))


def test_grad_check_rejects_nonscalar_and_bad_eps():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ValueError):
        grad_check(lambda a: a * 2.0, [x])
    with pytest.raises(ValueError):
        grad_check(lambda a: T.tsum(a), [x], eps=1e-2)


def test_backward_accumulates_without_zeroing():
    x = Tensor([3.0], requires_grad=True)
    loss = T.tsum(x * x)
    loss.backward()
    first = x.grad.copy()
    loss2 = T.tsum(x * x)
    loss2.backward()
    assert np.allclose(x.grad, 2 * first)


def test_shared_tensor_gets_gradients_from_all_paths():
    w = Tensor(np.ones((2, 2)), requires_grad=True)
    x = Tensor(np.ones((2, 2)))
    out = T.tsum(T.matmul(x, w) + T.matmul(w, x))
    out.backward()
    assert np.allclose(w.grad, 4.0)


def test_no_grad_blocks_graph():
    x = Tensor(np.ones(3), requires_grad=True)
    with T.no_grad():
        y = x * 2.0
    assert y._backward is None and not y.requires_grad


def test_dropout_inverted_and_deterministic():
    x = Tensor(np.ones((1000,)), requires_grad=True)
    y1 = T.dropout(x, 0.3, RngStream(5), training=True)
    y2 = T.dropout(x, 0.3, RngStream(5), training=True)
    assert np.array_equal(y1.data, y2.data)
    kept = y1.data != 0
    assert abs(kept.mean() - 0.7) < 0.05
    assert np.allclose(y1.data[kept], 1.0 / 0.7)
    # eval mode is identity
    assert T.dropout(x, 0.3, RngStream(5), training=False) is x

import numpy as np
import pytest

from cfisac import autodiff as ad

H = 1e-6


def _fd(f, X):
    """Central differences with the same complex convention as the tape."""
    g = np.zeros_like(X)
    for idx in np.ndindex(X.shape):
        E = np.zeros_like(X)
        E[idx] = H
        g[idx] = (f(X + E) - f(X - E)) / (2 * H)
        if np.iscomplexobj(X):
            g[idx] += 1j * (f(X + 1j * E) - f(X - 1j * E)) / (2 * H)
    return g


def _check(build, X, rtol=1e-6):
    t = ad.leaf(X)
    build(t).backward()
    fd = _fd(lambda x: float(build(ad.Tensor(x)).value), X)
    assert np.allclose(t.grad, fd, rtol=rtol, atol=rtol * max(1.0, np.abs(fd).max()))


@pytest.fixture
def Z(rng):
    return rng.normal(size=(3, 4)) + 1j * rng.normal(size=(3, 4))


@pytest.fixture
def R(rng):
    return rng.normal(size=(3, 4))


def test_complex_quadratic(Z, rng):
    M = rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2))
    _check(lambda z: ad.tsum(ad.abs2(z @ M)), Z)


def test_complex_real_imag_conj(Z):
    _check(lambda z: ad.tsum(ad.real(z * ad.conj(z) * 0.5 + z) * ad.imag(z)), Z)


def test_make_complex(R, rng):
    other = rng.normal(size=R.shape)
    _check(lambda r: ad.tsum(ad.abs2(ad.make_complex(r, ad.as_tensor(other) * r))), R)


@pytest.mark.parametrize("fn", [
    lambda x: ad.tsum(ad.exp(x * 0.3)),
    lambda x: ad.tsum(ad.log(x * x + 1.0)),
    lambda x: ad.tsum(ad.sqrt(x * x + 0.5)),
    lambda x: ad.tsum(ad.tanh(x) * ad.sin(x) + ad.cos(x)),
    lambda x: ad.tsum(ad.relu(x) * x),
    lambda x: ad.tsum(ad.maximum(x, 0.1) ** 2),
    lambda x: ad.tsum(x / (x * x + 2.0)),
    lambda x: ad.tsum(ad.transpose(x) @ x),
    lambda x: ad.tsum(ad.reshape(x, (4, 3))[1:3] ** 3),
    lambda x: ad.tsum(x.mean(axis=1, keepdims=True) * x),
    lambda x: ad.tsum(ad.concat([x, x * 2.0], axis=0) ** 2),
    lambda x: ad.tsum(ad.stack([x, x * x]) * 1.5),
    lambda x: ad.tsum(ad.gather_rows(x, np.array([0, 2, 2, 1])) ** 2),
    lambda x: ad.tsum(ad.segment_sum(x, np.array([1, 0, 1]), 3) ** 2),
    lambda x: ad.tsum(ad.einsum("ij,ik->jk", x, x * x)),
    lambda x: ad.tsum(ad.tabs(x) * x),
])
def test_real_ops(fn, R):
    _check(fn, R)


def test_broadcasting(R, rng):
    b = rng.normal(size=(4,))
    tb = ad.leaf(b)
    loss = ad.tsum((ad.as_tensor(R) + tb) ** 2)
    loss.backward()
    assert np.allclose(tb.grad, np.sum(2 * (R + b), axis=0))


def test_detach_blocks_gradient(R):
    t = ad.leaf(R)
    ad.tsum(ad.detach(t) * t).backward()
    assert np.allclose(t.grad, R)


def test_gradient_accumulates_over_reuse(R):
    t = ad.leaf(R)
    ad.tsum(t + t + t).backward()
    assert np.allclose(t.grad, 3.0)


def test_real_leaf_gets_real_gradient(R):
    t = ad.leaf(R)
    ad.tsum(ad.abs2(t * (1 + 2j))).backward()
    assert not np.iscomplexobj(t.grad)
    assert np.allclose(t.grad, 10 * R)

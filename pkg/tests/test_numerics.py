import numpy as np
import pytest

from cfisac.numerics import (SingularFimError, fd_gradient, gaussian_complex, herm_inverse_2x2,
                             is_hermitian, make_rng)


def test_gaussian_mean_small():
    z = gaussian_complex(make_rng(0), 100_000, 1.0)
    assert abs(z.real.mean()) <= 0.02 and abs(z.imag.mean()) <= 0.02
    assert abs(np.mean(np.abs(z) ** 2) - 1.0) < 0.02


def test_gaussian_rejects_zero_variance():
    with pytest.raises(ValueError):
        gaussian_complex(make_rng(0), 4, 0.0)


def test_gaussian_deterministic():
    a = gaussian_complex(make_rng(7), (3, 5))
    b = gaussian_complex(make_rng(7), (3, 5))
    assert np.array_equal(a, b)


def test_streams_differ():
    assert not np.array_equal(gaussian_complex(make_rng(7, 0), 8), gaussian_complex(make_rng(7, 1), 8))


def test_inverse_identity():
    assert np.allclose(herm_inverse_2x2(np.eye(2)), np.eye(2))


def test_inverse_diag():
    assert np.allclose(herm_inverse_2x2(np.diag([4.0, 2.0])), np.diag([0.25, 0.5]))


def test_inverse_singular():
    with pytest.raises(SingularFimError):
        herm_inverse_2x2(np.diag([1.0, 0.0]))


def test_inverse_shape_checked():
    with pytest.raises(ValueError):
        herm_inverse_2x2(np.eye(3))


def test_inverse_random_hermitian(rng):
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    m = a @ a.conj().T + np.eye(2)
    assert np.allclose(herm_inverse_2x2(m) @ m, np.eye(2))
    assert is_hermitian(herm_inverse_2x2(m), 1e-10)


def test_fd_square():
    g = fd_gradient(lambda x: float(x[0] ** 2), [3.0], h=1e-4)
    assert abs(g[0] - 6.0) <= 1e-6


def test_fd_constant():
    assert np.array_equal(fd_gradient(lambda x: 5.0, np.ones(3)), np.zeros(3))


def test_fd_norm():
    g = fd_gradient(lambda x: float(x @ x), [1.0, 2.0])
    assert np.allclose(g, [2.0, 4.0], atol=1e-6)


def test_fd_nonfinite_raises():
    with pytest.raises(FloatingPointError), np.errstate(invalid="ignore"):
        fd_gradient(lambda x: float(np.log(x[0])), [0.0], h=1e-3)

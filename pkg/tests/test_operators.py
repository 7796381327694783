import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eqboot.core import Measurement, RngStream, Signal
from eqboot.operators import (box_kernel, circular_blur, gaussian_cs, inpainting_mask,
                              operator_from_descriptor)


def brute_force_blur(shape, kernel):
    # direct sum over kernel taps, independent of the FFT route
    H, W = shape
    kh, kw = kernel.shape
    n = H * W
    A = np.zeros((n, n))
    for i in range(H):
        for j in range(W):
            for a in range(kh):
                for b in range(kw):
                    src = ((i - (a - kh // 2)) % H) * W + (j - (b - kw // 2)) % W
                    A[i * W + j, src] += kernel[a, b]
    return A


@pytest.mark.parametrize("shape,kshape", [((8, 8), (7, 1)), ((6, 5), (3, 3)), ((5, 7), (1, 5))])
def test_blur_matches_brute_force(shape, kshape):
    kernel = RngStream(3).random(kshape)
    op = circular_blur(shape, kernel)
    np.testing.assert_allclose(op.dense(), brute_force_blur(shape, kernel), atol=1e-12)


def test_blur_adjoint_is_transpose():
    kernel = RngStream(5).random((3, 5))
    op = circular_blur((7, 9), kernel)
    x = RngStream(6).standard_normal(63)
    u = RngStream(7).standard_normal(63)
    assert np.isclose(op.apply(x) @ u, x @ op.adjoint(u), rtol=1e-12)


def test_box_blur_preserves_constants():
    op = circular_blur((16, 16), box_kernel(7))
    np.testing.assert_allclose(op.apply(np.ones(256)), np.ones(256), atol=1e-14)


def test_blur_rejects_bad_kernels():
    with pytest.raises(ValueError):
        circular_blur((8, 8), np.ones((2, 1)))
    with pytest.raises(ValueError):
        circular_blur((4, 4), np.ones((5, 1)))


def test_gaussian_cs_shape_and_scale():
    op = gaussian_cs(400, 200, RngStream(1))
    A = op.dense()
    assert A.shape == (200, 400)
    # entries N(0, 1/m): E||column||^2 = 1
    assert abs(np.mean(np.sum(A * A, axis=0)) - 1.0) < 0.02


def test_gaussian_cs_reproducible_from_descriptor():
    op = gaussian_cs(64, 20, RngStream(8, (2,)), shape=(8, 8))
    again = operator_from_descriptor(op.to_descriptor())
    np.testing.assert_array_equal(op.dense(), again.dense())
    assert again.image_shape == (8, 8)


def test_inpainting_mask():
    op = inpainting_mask((10, 10), 0.3, RngStream(2))
    x = RngStream(3).standard_normal(100)
    np.testing.assert_array_equal(op.apply(x), x * op.mask)
    np.testing.assert_array_equal(op.adjoint(x), x * op.mask)
    assert set(np.unique(op.mask)) <= {0.0, 1.0}
    full = inpainting_mask((4, 4), 1.0, RngStream(2))
    np.testing.assert_array_equal(full.dense(), np.eye(16))
    with pytest.raises(ValueError):
        inpainting_mask((4, 4), 1.5, RngStream(0))


def test_apply_wraps_types_and_batches():
    op = gaussian_cs(16, 5, RngStream(4), shape=(4, 4))
    s = Signal(np.arange(16.0), (4, 4))
    y = op(s)
    assert isinstance(y, Measurement)
    back = op.adjoint(y)
    assert isinstance(back, Signal) and back.shape == (4, 4)
    X = RngStream(5).standard_normal((3, 16))
    np.testing.assert_allclose(op.apply(X), X @ op.dense().T)
    with pytest.raises(ValueError):
        op.apply(np.ones(15))


def test_dense_refused_when_large():
    op = circular_blur((65, 65), box_kernel(3))
    with pytest.raises(ValueError):
        op.dense()


def test_opnorm_of_box_blur_is_one():
    assert np.isclose(circular_blur((8, 8), box_kernel(3)).opnorm_sq(), 1.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 6), st.integers(2, 6))
def test_blur_commutes_with_cyclic_shifts(seed, dy, dx):
    kernel = RngStream(seed).random((3, 3))
    op = circular_blur((6, 6), kernel)
    x = RngStream(seed, (1,)).standard_normal((6, 6))
    shifted = np.roll(x, (dy, dx), axis=(0, 1)).ravel()
    lhs = op.apply(shifted)
    rhs = np.roll(op.apply(x.ravel()).reshape(6, 6), (dy, dx), axis=(0, 1)).ravel()
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)

"""Forward operators for the compressed sensing, inpainting and deblurring problems."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .core import Measurement, RngStream, Signal, as_stream, check_array

__all__ = [
    "LinearOperator",
    "gaussian_cs",
    "inpainting_mask",
    "circular_blur",
    "box_kernel",
    "operator_from_descriptor",
]

DENSE_LIMIT = 4096


class LinearOperator:
    """Linear map ``A: R^n -> R^m`` acting on flattened images.

    ``apply`` and ``adjoint`` accept a single vector, a batch with one vector
    per row, or a ``Signal``/``Measurement`` (returned wrapped in the
    corresponding type).

    Parameters
    ----------
    m, n : int
        Output and input dimensions.
    matvec, rmatvec : callable
        Batched forward and adjoint maps on arrays of shape ``(N, n)`` and
        ``(N, m)``.
    image_shape : tuple of int
        Shape of the input image, ``height * width == n``.
    descriptor : dict
        JSON-serialisable recipe that rebuilds the operator.
    matrix : ndarray, optional
        Dense representation when it is already available.
    """

    def __init__(
        self,
        m: int,
        n: int,
        matvec: Callable[[np.ndarray], np.ndarray],
        rmatvec: Callable[[np.ndarray], np.ndarray],
        image_shape: tuple[int, int],
        descriptor: dict,
        matrix: np.ndarray | None = None,
    ):
        if image_shape[0] * image_shape[1] != n:
            raise ValueError(f"image_shape {image_shape} incompatible with n={n}")
        self.m, self.n = int(m), int(n)
        self.image_shape = (int(image_shape[0]), int(image_shape[1]))
        self._matvec = matvec
        self._rmatvec = rmatvec
        self.descriptor = descriptor
        if matrix is not None:
            matrix = np.array(matrix, dtype=np.float64)
            matrix.setflags(write=False)
        self._matrix = matrix

    @property
    def shape(self) -> tuple[int, int]:
        return (self.m, self.n)

    @property
    def kind(self) -> str:
        return self.descriptor["kind"]

    def _run(self, fn, x, size_in, wrap_as):
        if isinstance(x, Signal) and x.n != size_in:
            raise ValueError(f"signal has {x.n} entries, operator expects {size_in}")
        arr = check_array(x, "operator input")
        if arr.shape[-1] != size_in:
            raise ValueError(f"expected last dimension {size_in}, got {arr.shape}")
        out = fn(arr[None] if arr.ndim == 1 else arr)
        out = out[0] if arr.ndim == 1 else out
        if wrap_as is None:
            return out
        return wrap_as(out)

    def apply(self, x):
        wrap = Measurement if isinstance(x, Signal) else None
        return self._run(self._matvec, x, self.n, wrap)

    def adjoint(self, u):
        if isinstance(u, Measurement):
            shape = self.image_shape
            wrap = lambda d: Signal(d, shape)  # noqa: E731
        else:
            wrap = None
        return self._run(self._rmatvec, u, self.m, wrap)

    __call__ = apply

    def dense(self) -> np.ndarray:
        """Materialise the ``m x n`` matrix (cached; refused above 4096 columns)."""
        if self._matrix is None:
            if self.n > DENSE_LIMIT:
                raise ValueError(f"dense() refused for n={self.n} > {DENSE_LIMIT}")
            cols = self._matvec(np.eye(self.n))
            matrix = np.ascontiguousarray(cols.T)
            matrix.setflags(write=False)
            self._matrix = matrix
        return self._matrix

    def opnorm_sq(self) -> float:
        """Squared spectral norm ``||A||_op^2``."""
        return float(np.linalg.norm(self.dense(), 2) ** 2)

    def to_descriptor(self) -> dict:
        return dict(self.descriptor)

    def __repr__(self):
        return f"LinearOperator(kind={self.kind!r}, m={self.m}, n={self.n})"


def _matrix_operator(matrix: np.ndarray, image_shape, descriptor) -> LinearOperator:
    matrix = np.ascontiguousarray(matrix, dtype=np.float64)
    return LinearOperator(
        matrix.shape[0],
        matrix.shape[1],
        lambda X: X @ matrix.T,
        lambda U: U @ matrix,
        image_shape,
        descriptor,
        matrix=matrix,
    )


def _resolve_shape(n: int, shape) -> tuple[int, int]:
    if shape is None:
        side = int(round(np.sqrt(n)))
        return (side, side) if side * side == n else (1, n)
    return (int(shape[0]), int(shape[1]))


def gaussian_cs(n: int, m: int, rng, shape=None) -> LinearOperator:
    """Dense ``m x n`` matrix with i.i.d. ``N(0, 1/m)`` entries."""
    if n < 1 or m < 1:
        raise ValueError(f"need n, m >= 1, got n={n}, m={m}")
    rng = as_stream(rng)
    image_shape = _resolve_shape(n, shape)
    matrix = rng.standard_normal((m, n)) / np.sqrt(m)
    desc = {"kind": "gaussian_cs", "shape": list(image_shape), "params": {"m": int(m)},
            "seed": rng.to_list()}
    return _matrix_operator(matrix, image_shape, desc)


def inpainting_mask(shape, p: float, rng) -> LinearOperator:
    """Diagonal 0/1 operator keeping each pixel independently with probability ``p``.

    The output keeps ``m == n``; dropped pixels read as zero.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    rng = as_stream(rng)
    shape = (int(shape[0]), int(shape[1]))
    n = shape[0] * shape[1]
    mask = (rng.random(n) < p).astype(np.float64)
    desc = {"kind": "inpainting", "shape": list(shape), "params": {"p": float(p)},
            "seed": rng.to_list()}
    op = LinearOperator(n, n, lambda X: X * mask, lambda U: U * mask, shape, desc)
    op.mask = mask
    return op


def box_kernel(height: int, width: int = 1) -> np.ndarray:
    """Uniform ``height x width`` kernel summing to one."""
    return np.full((height, width), 1.0 / (height * width))


def circular_blur(shape, kernel) -> LinearOperator:
    """Circular 2-D convolution with an odd-sized kernel centred on its middle tap.

    Entry ``kernel[a, b]`` moves mass by ``(a - kh // 2, b - kw // 2)`` pixels
    with wrap-around, so the operator is block-circulant and commutes with
    every cyclic shift.
    """
    shape = (int(shape[0]), int(shape[1]))
    kernel = np.atleast_2d(np.asarray(kernel, dtype=np.float64))
    kh, kw = kernel.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError(f"kernel dimensions must be odd, got {kernel.shape}")
    if kh > shape[0] or kw > shape[1]:
        raise ValueError(f"kernel {kernel.shape} larger than image {shape}")
    padded = np.zeros(shape)
    padded[:kh, :kw] = kernel
    padded = np.roll(padded, (-(kh // 2), -(kw // 2)), axis=(0, 1))
    otf = np.fft.rfft2(padded)
    H, W = shape
    n = H * W

    def matvec(X):
        F = np.fft.rfft2(X.reshape(-1, H, W)) * otf
        return np.fft.irfft2(F, s=shape).reshape(-1, n)

    def rmatvec(U):
        F = np.fft.rfft2(U.reshape(-1, H, W)) * np.conj(otf)
        return np.fft.irfft2(F, s=shape).reshape(-1, n)

    desc = {"kind": "blur", "shape": list(shape), "params": {"kernel": kernel.tolist()},
            "seed": None}
    op = LinearOperator(n, n, matvec, rmatvec, shape, desc)
    op.kernel = kernel
    return op


def operator_from_descriptor(desc: dict) -> LinearOperator:
    """Rebuild an operator from the dict produced by ``to_descriptor``."""
    kind = desc["kind"]
    shape = tuple(desc["shape"])
    params = desc.get("params", {})
    if kind == "gaussian_cs":
        return gaussian_cs(shape[0] * shape[1], params["m"], as_stream(desc["seed"]), shape)
    if kind == "inpainting":
        return inpainting_mask(shape, params["p"], as_stream(desc["seed"]))
    if kind == "blur":
        return circular_blur(shape, np.asarray(params["kernel"]))
    raise ValueError(f"unknown operator kind {kind!r}")

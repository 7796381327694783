"""Reconstruction maps ``x_hat(y)`` with a scikit-learn style interface.

Every estimator is a ``BaseEstimator``: hyperparameters live in ``__init__``,
``fit`` computes the trailing-underscore state, and ``predict`` maps a batch
of measurements (one per row) to a batch of flattened images. Linear
estimators also expose their matrix through ``linear_matrix()``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .core import Measurement, Signal, check_array
from .operators import LinearOperator

__all__ = [
    "SingularSystemError",
    "ReconstructionEstimator",
    "LinearMap",
    "Tikhonov",
    "LearnedLinear",
    "OracleProjector",
    "ISTA",
    "tikhonov",
    "learned_linear",
    "oracle_projector",
    "ista",
    "default_lambda",
    "soft_threshold",
    "consistency_ratio",
]


class SingularSystemError(np.linalg.LinAlgError):
    """Raised when a closed-form estimator meets a singular linear system."""


def _solve(lhs: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    cond = np.linalg.cond(lhs)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularSystemError(f"{what} is singular (condition number {cond:.3g})")
    return np.linalg.solve(lhs, rhs)


def default_lambda(operator: LinearOperator) -> float:
    """Scale-aware default ``1e-3 * trace(A^T A) / n``."""
    A = operator.dense()
    return 1e-3 * float(np.sum(A * A)) / operator.n


def soft_threshold(v: np.ndarray, tau: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


class ReconstructionEstimator(BaseEstimator):
    """Common prediction plumbing; subclasses implement ``_predict``."""

    def _check_fitted(self):
        check_is_fitted(self)

    def predict(self, Y) -> np.ndarray:
        self._check_fitted()
        Y = check_array(Y, "measurements")
        single = Y.ndim == 1
        Y2 = Y[None] if single else Y
        if Y2.shape[1] != self.n_measurements_:
            raise ValueError(f"expected {self.n_measurements_} measurements, got {Y2.shape[1]}")
        out = self._predict(Y2)
        return out[0] if single else out

    def estimate(self, y) -> Signal:
        """Single-measurement reconstruction returned as a ``Signal``."""
        data = self.predict(y.data if isinstance(y, Measurement) else y)
        if data.ndim != 1:
            raise ValueError("estimate() takes a single measurement; use predict() for batches")
        return Signal(data, self.image_shape_)

    def linear_matrix(self) -> np.ndarray | None:
        return None

    def describe(self) -> dict:
        return {"kind": type(self).__name__.lower(), "params": self.get_params(deep=False)}


class _LinearMixin:
    def linear_matrix(self) -> np.ndarray:
        self._check_fitted()
        return self.matrix_

    def _predict(self, Y):
        return Y @ self.matrix_.T


class LinearMap(_LinearMixin, ReconstructionEstimator):
    """Fixed matrix estimator ``x_hat(y) = M y``."""

    def __init__(self, matrix=None, image_shape=None):
        self.matrix = matrix
        self.image_shape = image_shape

    def fit(self, Y=None, X=None):
        M = check_array(self.matrix, "matrix", ndim=2)
        self.matrix_ = M
        self.n_measurements_ = M.shape[1]
        self.image_shape_ = _image_shape(self.image_shape, M.shape[0])
        return self


class Tikhonov(_LinearMixin, ReconstructionEstimator):
    """Ridge inverse ``M = (A^T A + lam I)^{-1} A^T``.

    ``lam=None`` uses ``default_lambda(operator)``; ``lam=0`` is the
    least-squares inverse and needs ``A`` with full column rank.
    """

    def __init__(self, operator: LinearOperator | None = None, lam: float | None = None):
        self.operator = operator
        self.lam = lam

    def fit(self, Y=None, X=None):
        A = self.operator.dense()
        lam = default_lambda(self.operator) if self.lam is None else float(self.lam)
        if lam < 0:
            raise ValueError(f"lam must be >= 0, got {lam}")
        n = A.shape[1]
        self.lam_ = lam
        self.matrix_ = _solve(A.T @ A + lam * np.eye(n), A.T, "A^T A + lam I")
        self.n_measurements_ = A.shape[0]
        self.image_shape_ = self.operator.image_shape
        return self

    def describe(self) -> dict:
        return {"kind": "tikhonov", "lam": self.lam_ if hasattr(self, "lam_") else self.lam}


class LearnedLinear(_LinearMixin, ReconstructionEstimator):
    """Linear estimator fitted to training pairs by ridge least squares.

    ``fit(Y, X)`` takes measurements ``Y`` (N, m) and signals ``X`` (N, n) and
    sets ``M = (X^T Y)(Y^T Y + lam I)^{-1}``, the minimiser of
    ``sum_i ||M y_i - x_i||^2 + lam ||M||_F^2``.
    """

    def __init__(self, lam: float = 0.0, image_shape=None):
        self.lam = lam
        self.image_shape = image_shape

    def fit(self, Y, X):
        Y = check_array(Y, "training measurements", ndim=2)
        X = check_array(X, "training signals", ndim=2)
        if Y.shape[0] != X.shape[0] or Y.shape[0] < 1:
            raise ValueError(f"need matching nonempty training sets, got {Y.shape[0]} and {X.shape[0]}")
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        gram = Y.T @ Y + float(self.lam) * np.eye(Y.shape[1])
        cross = X.T @ Y
        # M gram = cross, gram symmetric
        self.matrix_ = _solve(gram, cross.T, "training Gram matrix").T
        self.n_measurements_ = Y.shape[1]
        self.image_shape_ = _image_shape(self.image_shape, X.shape[1])
        self.n_train_ = Y.shape[0]
        return self

    def describe(self) -> dict:
        return {"kind": "learned_linear", "lam": float(self.lam)}


class OracleProjector(_LinearMixin, ReconstructionEstimator):
    """Oracle estimator ``M* = U (A U)^+`` for signals in ``span(U)``.

    ``projector_`` is ``B* = M* A``, which equals ``U U^T`` on the subspace.
    A positive ``lam`` swaps the pseudoinverse for a ridge solve.
    """

    def __init__(self, operator: LinearOperator | None = None, basis=None, lam: float = 0.0):
        self.operator = operator
        self.basis = basis
        self.lam = lam

    def fit(self, Y=None, X=None):
        U = check_array(self.basis, "basis", ndim=2)
        if not np.allclose(U.T @ U, np.eye(U.shape[1]), atol=1e-8):
            raise ValueError("basis columns must be orthonormal")
        A = self.operator.dense()
        AU = A @ U
        k = U.shape[1]
        s = np.linalg.svd(AU, compute_uv=False)
        if s.size < k or s[-1] <= 1e-10 * max(s[0], 1.0):
            raise SingularSystemError("A restricted to span(basis) is not injective")
        if self.lam > 0:
            inner = np.linalg.solve(AU.T @ AU + self.lam * np.eye(k), AU.T)
        else:
            inner = np.linalg.pinv(AU)
        self.matrix_ = U @ inner
        self.projector_ = self.matrix_ @ A
        self.n_measurements_ = A.shape[0]
        self.image_shape_ = self.operator.image_shape
        return self

    def describe(self) -> dict:
        return {"kind": "oracle_projector", "lam": float(self.lam)}


class ISTA(ReconstructionEstimator):
    """Fixed-iteration ISTA for ``0.5 ||A x - y||^2 + lam ||x||_1`` from ``x = 0``.

    With a circulant ``A`` every iterate is shift-equivariant in ``y``.
    """

    def __init__(self, operator: LinearOperator | None = None, lam: float = 0.1,
                 n_iter: int = 100, step: float | None = None):
        self.operator = operator
        self.lam = lam
        self.n_iter = n_iter
        self.step = step

    def fit(self, Y=None, X=None):
        if self.n_iter < 1:
            raise ValueError(f"n_iter must be >= 1, got {self.n_iter}")
        L = self.operator.opnorm_sq()
        step = 1.0 / L if self.step is None else float(self.step)
        if not 0 < step < 2.0 / L:
            raise ValueError(f"step must lie in (0, 2/||A||^2) = (0, {2.0 / L:.4g}), got {step}")
        self.step_ = step
        self.n_measurements_ = self.operator.m
        self.image_shape_ = self.operator.image_shape
        return self

    def iterates(self, y) -> list[np.ndarray]:
        """Every iterate (including the zero start) for a single measurement."""
        self._check_fitted()
        y = check_array(y, "measurement", ndim=1)
        x = np.zeros(self.operator.n)
        out = [x]
        for _ in range(self.n_iter):
            x = self._step(x[None], y[None])[0]
            out.append(x)
        return out

    def _step(self, X, Y):
        A = self.operator
        grad = A.adjoint(A.apply(X) - Y)
        return soft_threshold(X - self.step_ * grad, self.step_ * self.lam)

    def _predict(self, Y):
        X = np.zeros((Y.shape[0], self.operator.n))
        for _ in range(self.n_iter):
            X = self._step(X, Y)
        return X

    def objective(self, x, y) -> float:
        r = self.operator.apply(np.asarray(x)) - np.asarray(y)
        return 0.5 * float(r @ r) + self.lam * float(np.abs(x).sum())

    def describe(self) -> dict:
        return {"kind": "ista", "lam": float(self.lam), "n_iters": int(self.n_iter),
                "step": getattr(self, "step_", self.step)}


def _image_shape(shape, n: int) -> tuple[int, int]:
    if shape is not None:
        shape = (int(shape[0]), int(shape[1]))
        if shape[0] * shape[1] != n:
            raise ValueError(f"image_shape {shape} incompatible with n={n}")
        return shape
    side = int(round(np.sqrt(n)))
    return (side, side) if side * side == n else (1, n)


def _stack(items, name):
    rows = [it.data if isinstance(it, (Signal, Measurement)) else np.asarray(it) for it in items]
    if not rows:
        raise ValueError(f"{name} is empty")
    return np.vstack([np.ravel(r) for r in rows])


def tikhonov(A: LinearOperator, lam: float | None = None) -> Tikhonov:
    return Tikhonov(A, lam).fit()


def learned_linear(train_x, train_y, lam: float = 0.0, image_shape=None) -> LearnedLinear:
    X = _stack(train_x, "train_x")
    Y = _stack(train_y, "train_y")
    if image_shape is None and train_x and isinstance(train_x[0], Signal):
        image_shape = train_x[0].shape
    return LearnedLinear(lam, image_shape).fit(Y, X)


def oracle_projector(basis, A: LinearOperator, lam: float = 0.0) -> OracleProjector:
    return OracleProjector(A, basis, lam).fit()


def ista(A: LinearOperator, lam: float, n_iters: int, step: float | None = None) -> ISTA:
    return ISTA(A, lam, n_iters, step).fit()


def consistency_ratio(estimator: ReconstructionEstimator, A: LinearOperator, y) -> float:
    """Relative measurement residual ``||A x_hat(y) - y|| / ||y||``."""
    y = check_array(y, "measurement", ndim=1)
    r = A.apply(estimator.predict(y)) - y
    ny = np.linalg.norm(y)
    return float(np.linalg.norm(r) / ny) if ny > 0 else float(np.linalg.norm(r))


"""Finite groups of pixel permutations: cyclic shifts and quarter-turn rotations.

An element ``(dy, dx, r)`` acts as ``T = S(dy, dx) R^r``; the image is first
rotated counterclockwise by ``r`` quarter turns (``np.rot90`` convention,
pixel ``(i, j)`` moves to ``(W - 1 - j, i)``) and then shifted circularly by
``dy`` rows and ``dx`` columns. Every ``T`` is a permutation matrix, so
inverses are exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np

from .core import RngStream, Signal, check_array

__all__ = [
    "GroupElement",
    "GroupAction",
    "act",
    "act_inverse",
    "sample_element",
    "dense_matrix",
    "IDENTITY",
]

DENSE_LIMIT = 4096


def _rotate_offset(dy: int, dx: int, r: int) -> tuple[int, int]:
    # linear part of one counterclockwise quarter turn: (dy, dx) -> (-dx, dy)
    for _ in range(r % 4):
        dy, dx = -dx, dy
    return dy, dx


@dataclass(frozen=True)
class GroupElement:
    dy: int = 0
    dx: int = 0
    quarter_turns: int = 0

    def __post_init__(self):
        object.__setattr__(self, "dy", int(self.dy))
        object.__setattr__(self, "dx", int(self.dx))
        object.__setattr__(self, "quarter_turns", int(self.quarter_turns) % 4)

    @property
    def is_identity(self) -> bool:
        return self.dy == 0 and self.dx == 0 and self.quarter_turns == 0

    def inverse(self) -> "GroupElement":
        r = self.quarter_turns
        dy, dx = _rotate_offset(-self.dy, -self.dx, -r)
        return GroupElement(dy, dx, -r)

    def compose(self, other: "GroupElement") -> "GroupElement":
        """Element acting as ``T_self T_other``."""
        ody, odx = _rotate_offset(other.dy, other.dx, self.quarter_turns)
        return GroupElement(self.dy + ody, self.dx + odx, self.quarter_turns + other.quarter_turns)

    def reduced(self, shape) -> "GroupElement":
        """Same action with shifts reduced modulo the image size."""
        return GroupElement(self.dy % shape[0], self.dx % shape[1], self.quarter_turns)

    def to_list(self) -> list[int]:
        return [self.dy, self.dx, self.quarter_turns]

    @classmethod
    def from_list(cls, values) -> "GroupElement":
        dy, dx, r = values
        return cls(dy, dx, r)


IDENTITY = GroupElement()


def _apply_batch(g: GroupElement, X: np.ndarray, shape) -> np.ndarray:
    H, W = shape
    imgs = X.reshape(-1, H, W)
    if g.quarter_turns:
        imgs = np.rot90(imgs, g.quarter_turns, axes=(1, 2))
    if g.dy or g.dx:
        imgs = np.roll(imgs, (g.dy, g.dx), axis=(1, 2))
    return np.ascontiguousarray(imgs).reshape(X.shape)


def _check_shape(g: GroupElement, shape):
    if g.quarter_turns and shape[0] != shape[1]:
        raise ValueError(f"rotations need a square image, got shape {shape}")


def _act(g: GroupElement, x, shape, inverse: bool):
    if isinstance(x, Signal):
        if shape is not None and tuple(shape) != x.shape:
            raise ValueError(f"signal shape {x.shape} does not match {tuple(shape)}")
        shape, data = x.shape, x.data
    else:
        if shape is None:
            raise ValueError("shape is required for raw arrays")
        data = check_array(x, "signal")
        shape = (int(shape[0]), int(shape[1]))
        if data.shape[-1] != shape[0] * shape[1]:
            raise ValueError(f"array with last dimension {data.shape[-1]} does not match shape {shape}")
    _check_shape(g, shape)
    out = _apply_batch(g.inverse() if inverse else g, data, shape)
    return Signal(out, shape) if isinstance(x, Signal) else out


def act(g: GroupElement, x, shape=None):
    """Apply ``T_g`` to a ``Signal`` or to flat arrays (one image per row)."""
    return _act(g, x, shape, inverse=False)


def act_inverse(g: GroupElement, x, shape=None):
    """Apply ``T_g^{-1}``; ``act_inverse(g, act(g, x)) == x`` bit for bit."""
    return _act(g, x, shape, inverse=True)


@lru_cache(maxsize=8192)
def _permutation(g: GroupElement, shape: tuple[int, int]) -> np.ndarray:
    n = shape[0] * shape[1]
    # (T_g x)[k] = x[perm[k]]
    perm = _apply_batch(g, np.arange(n, dtype=np.float64)[None], shape)[0].astype(np.intp)
    perm.setflags(write=False)
    return perm


def permutation(g: GroupElement, shape) -> np.ndarray:
    """Index array ``p`` with ``(T_g x)[k] == x[p[k]]``."""
    shape = (int(shape[0]), int(shape[1]))
    _check_shape(g, shape)
    return _permutation(g.reduced(shape), shape)


def dense_matrix(g: GroupElement, shape) -> np.ndarray:
    """The ``n x n`` permutation matrix of ``T_g``."""
    n = int(shape[0]) * int(shape[1])
    if n > DENSE_LIMIT:
        raise ValueError(f"dense_matrix refused for n={n} > {DENSE_LIMIT}")
    perm = permutation(g, shape)
    T = np.zeros((n, n))
    T[np.arange(n), perm] = 1.0
    return T


@dataclass(frozen=True)
class GroupAction:
    """Shift and/or rotation group acting on ``shape`` images.

    The group itself is every torus shift when ``max_shift > 0`` (trivial
    otherwise), times the four quarter turns when ``rotations`` is set.
    ``max_shift`` only bounds the sampling box: ``sample`` draws ``dy`` and
    ``dx`` uniformly from ``[-max_shift, max_shift]``.
    """

    shape: tuple[int, int]
    max_shift: int = 0
    rotations: bool = False

    def __post_init__(self):
        object.__setattr__(self, "shape", (int(self.shape[0]), int(self.shape[1])))
        if self.max_shift < 0:
            raise ValueError(f"max_shift must be >= 0, got {self.max_shift}")
        object.__setattr__(self, "max_shift", int(self.max_shift))
        object.__setattr__(self, "rotations", bool(self.rotations))
        if self.rotations and self.shape[0] != self.shape[1]:
            raise ValueError(f"rotations need a square image, got shape {self.shape}")

    @property
    def n(self) -> int:
        return self.shape[0] * self.shape[1]

    @property
    def is_trivial(self) -> bool:
        return self.max_shift == 0 and not self.rotations

    @property
    def order(self) -> int:
        shifts = self.n if self.max_shift > 0 else 1
        return shifts * (4 if self.rotations else 1)

    def elements(self) -> list[GroupElement]:
        """Every element of the full group, identity first."""
        H, W = self.shape
        shifts = list(product(range(H), range(W))) if self.max_shift > 0 else [(0, 0)]
        turns = range(4) if self.rotations else [0]
        return [GroupElement(dy, dx, r) for r in turns for dy, dx in shifts]

    def sample(self, rng: RngStream) -> GroupElement:
        """Draw shifts, then the rotation; degenerate factors consume no randomness."""
        dy = dx = r = 0
        if self.max_shift > 0:
            dy, dx = (int(v) for v in rng.integers(-self.max_shift, self.max_shift + 1, size=2))
        if self.rotations:
            r = int(rng.integers(0, 4))
        return GroupElement(dy, dx, r)

    def act(self, g: GroupElement, x):
        return act(g, x, self.shape)

    def act_inverse(self, g: GroupElement, x):
        return act_inverse(g, x, self.shape)

    def permutation(self, g: GroupElement) -> np.ndarray:
        return permutation(g, self.shape)

    def matrix(self, g: GroupElement) -> np.ndarray:
        return dense_matrix(g, self.shape)

    def to_descriptor(self) -> dict:
        return {"max_shift": self.max_shift, "rotations": self.rotations}

    @classmethod
    def from_descriptor(cls, shape, desc: dict) -> "GroupAction":
        return cls(shape, desc.get("max_shift", 0), desc.get("rotations", False))


def sample_element(action: GroupAction, rng: RngStream) -> GroupElement:
    return action.sample(rng)

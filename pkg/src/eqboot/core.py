"""Shared value types, the seeded RNG contract and array validation helpers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "Signal",
    "Measurement",
    "NoiseModel",
    "RngStream",
    "derive_stream",
    "as_stream",
    "sample_noise",
    "check_array",
    "check_finite",
]


def check_finite(arr: np.ndarray, name: str = "array") -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return arr


def check_array(x, name: str = "array", ndim: int | tuple[int, ...] = (1, 2)) -> np.ndarray:
    """Coerce ``x`` to a finite float64 array of the allowed dimensionality.

    ``Signal`` and ``Measurement`` instances are unwrapped to their data.
    """
    if isinstance(x, (Signal, Measurement)):
        x = x.data
    arr = np.asarray(x, dtype=np.float64)
    allowed = (ndim,) if isinstance(ndim, int) else ndim
    if arr.ndim not in allowed:
        raise ValueError(f"{name} must have ndim in {allowed}, got shape {arr.shape}")
    return check_finite(arr, name)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Signal:
    """A single-channel image stored as a flat float64 vector.

    Parameters
    ----------
    data : array-like of shape (height * width,)
        Pixel values in row-major order.
    shape : tuple of int
        ``(height, width)``.
    """

    data: np.ndarray
    shape: tuple[int, int]

    def __post_init__(self):
        h, w = (int(s) for s in self.shape)
        if h < 1 or w < 1:
            raise ValueError(f"shape must be positive, got {self.shape}")
        data = np.asarray(self.data, dtype=np.float64).ravel()
        if data.size != h * w:
            raise ValueError(f"data has {data.size} entries but shape {self.shape} needs {h * w}")
        check_finite(data, "Signal data")
        object.__setattr__(self, "shape", (h, w))
        object.__setattr__(self, "data", _frozen(data))

    @classmethod
    def from_image(cls, image) -> "Signal":
        image = np.asarray(image, dtype=np.float64)
        if image.ndim != 2:
            raise ValueError(f"expected a 2-D image, got shape {image.shape}")
        return cls(image.ravel(), image.shape)

    @property
    def n(self) -> int:
        return self.data.size

    @property
    def image(self) -> np.ndarray:
        return self.data.reshape(self.shape)

    def __eq__(self, other):
        if not isinstance(other, Signal):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.data, other.data)

    def __repr__(self):
        return f"Signal(shape={self.shape}, norm={np.linalg.norm(self.data):.4g})"


@dataclass(frozen=True, eq=False)
class Measurement:
    """A measurement vector ``y`` of length ``m``."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64).ravel()
        check_finite(data, "Measurement data")
        object.__setattr__(self, "data", _frozen(data))

    @property
    def m(self) -> int:
        return self.data.size

    def __eq__(self, other):
        if not isinstance(other, Measurement):
            return NotImplemented
        return np.array_equal(self.data, other.data)

    def __repr__(self):
        return f"Measurement(m={self.m}, norm={np.linalg.norm(self.data):.4g})"


@dataclass(frozen=True)
class NoiseModel:
    """Additive white Gaussian noise with standard deviation ``sigma``."""

    sigma: float = 0.0
    kind: str = "gaussian"

    def __post_init__(self):
        if self.kind != "gaussian":
            raise ValueError(f"unsupported noise kind {self.kind!r}")
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise ValueError(f"sigma must be a finite nonnegative number, got {self.sigma}")
        object.__setattr__(self, "sigma", float(self.sigma))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "sigma": self.sigma}


@dataclass(frozen=True)
class RngStream:
    """Deterministic random stream identified by a master seed and a key path.

    The generator is PCG64 seeded from ``SeedSequence(master_seed,
    spawn_key=path)``, so a stream depends only on its identity and never on
    the order in which sibling streams are created. ``spawn(i)`` derives the
    child stream ``path + (i,)``; two streams with equal identity replay
    identical sequences.
    """

    master_seed: int
    path: tuple[int, ...] = ()
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        seed = int(self.master_seed)
        path = tuple(int(p) for p in self.path)
        if seed < 0 or seed >= 2**64 or any(p < 0 or p >= 2**64 for p in path):
            raise ValueError("seeds and stream ids must be 64-bit unsigned integers")
        object.__setattr__(self, "master_seed", seed)
        object.__setattr__(self, "path", path)
        ss = np.random.SeedSequence(entropy=seed, spawn_key=path)
        object.__setattr__(self, "_gen", np.random.Generator(np.random.PCG64(ss)))

    @property
    def stream_id(self) -> int | None:
        return self.path[-1] if self.path else None

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def spawn(self, stream_id: int) -> "RngStream":
        return RngStream(self.master_seed, self.path + (int(stream_id),))

    def fresh(self) -> "RngStream":
        """Same identity, rewound to the start of the sequence."""
        return RngStream(self.master_seed, self.path)

    def standard_normal(self, size=None) -> np.ndarray:
        return self._gen.standard_normal(size)

    def integers(self, low, high=None, size=None) -> np.ndarray:
        return self._gen.integers(low, high, size=size)

    def random(self, size=None) -> np.ndarray:
        return self._gen.random(size)

    def to_list(self) -> list[int]:
        return [self.master_seed, *self.path]


def derive_stream(master_seed: int, stream_id: int) -> RngStream:
    """Stream number ``stream_id`` of the family rooted at ``master_seed``."""
    return RngStream(master_seed, (stream_id,))


def as_stream(rng) -> RngStream:
    """Accept an ``RngStream``, an int seed, or a ``[seed, *path]`` list."""
    if isinstance(rng, RngStream):
        return rng
    if rng is None:
        raise ValueError("an explicit seed or RngStream is required")
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng))
    if isinstance(rng, Sequence) and len(rng) >= 1:
        return RngStream(int(rng[0]), tuple(rng[1:]))
    raise TypeError(f"cannot build an RngStream from {rng!r}")


def sample_noise(model: NoiseModel, mean, rng: RngStream):
    """Draw ``mean + sigma * z`` with ``z`` i.i.d. standard normal.

    With ``sigma == 0`` the mean is returned unchanged and no random numbers
    are consumed. Returns a ``Measurement`` when given one, else an ndarray.
    """
    wrap = isinstance(mean, Measurement)
    mu = check_array(mean, "mean")
    if model.sigma == 0.0:
        out = mu.copy()
    else:
        out = mu + model.sigma * rng.standard_normal(mu.shape)
    return Measurement(out) if wrap else out

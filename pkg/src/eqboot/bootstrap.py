"""Naive and equivariant parametric bootstrap, confidence balls and per-pixel maps."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .core import Measurement, NoiseModel, RngStream, Signal, as_stream, check_array
from .groups import IDENTITY, GroupAction, GroupElement
from .operators import LinearOperator

__all__ = [
    "BootstrapConfig",
    "BootstrapResult",
    "ConfidenceRegion",
    "naive_bootstrap",
    "equivariant_bootstrap",
    "confidence_region",
    "contains",
    "pixelwise_std",
    "quantile_rank",
    "EquivariantBootstrap",
]

ERROR_MODES = ("forward", "inverse")


@dataclass(frozen=True)
class BootstrapConfig:
    """Bootstrap settings.

    ``group=None`` selects the naive bootstrap. ``error_mode="forward"``
    scores replicate ``i`` as ``||T_g x_hat(y) - x_hat(y_i)||^2`` and
    ``"inverse"`` as ``||T_g^{-1} x_hat(y_i) - x_hat(y)||^2``; the two agree for
    permutation actions. ``exhaustive=True`` replaces random group draws by
    one pass over every group element (``n_samples`` is then ignored).
    """

    n_samples: int = 100
    error_mode: str = "forward"
    group: GroupAction | None = None
    exhaustive: bool = False

    def __post_init__(self):
        if int(self.n_samples) < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if self.error_mode not in ERROR_MODES:
            raise ValueError(f"error_mode must be one of {ERROR_MODES}, got {self.error_mode!r}")
        if self.exhaustive and self.group is None:
            raise ValueError("exhaustive enumeration needs a group")
        object.__setattr__(self, "n_samples", int(self.n_samples))

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "error_mode": self.error_mode,
            "group": None if self.group is None else self.group.to_descriptor(),
            "exhaustive": self.exhaustive,
        }


@dataclass
class BootstrapResult:
    center: Signal
    errors: np.ndarray
    recons: np.ndarray
    elements: list[GroupElement] = field(default_factory=list)

    def __post_init__(self):
        self.errors = np.asarray(self.errors, dtype=np.float64)
        if len(self.errors) != len(self.recons) or len(self.errors) != len(self.elements):
            raise ValueError("errors, recons and elements must have equal length")

    @property
    def n_samples(self) -> int:
        return len(self.errors)

    def mean_error(self) -> float:
        return float(np.mean(self.errors))

    def to_dict(self) -> dict:
        return {
            "shape": list(self.center.shape),
            "center": self.center.data.tolist(),
            "errors": self.errors.tolist(),
            "elements": [g.to_list() for g in self.elements],
        }

    def save(self, directory, recons: bool = True) -> None:
        """Write ``result.json``, ``errors.csv`` and optionally ``recons.npy``."""
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        (out / "result.json").write_text(json.dumps(self.to_dict()))
        self.write_errors_csv(out / "errors.csv")
        if recons:
            np.save(out / "recons.npy", self.recons)

    def write_errors_csv(self, path) -> None:
        lines = ["error"] + [repr(float(e)) for e in self.errors]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_dict(cls, d: dict, recons=None) -> "BootstrapResult":
        shape = tuple(d["shape"])
        center = Signal(np.asarray(d["center"]), shape)
        errors = np.asarray(d["errors"])
        if recons is None:
            recons = np.full((len(errors), center.n), np.nan)
        return cls(center, errors, np.asarray(recons),
                   [GroupElement.from_list(e) for e in d["elements"]])


@dataclass(frozen=True)
class ConfidenceRegion:
    """Open ball ``{x : ||x - center||^2 < radius_sq}`` at confidence ``level``."""

    center: Signal
    radius_sq: float
    level: float

    def distance_sq(self, x) -> float:
        if isinstance(x, Signal) and x.shape != self.center.shape:
            raise ValueError(f"shape {x.shape} does not match region shape {self.center.shape}")
        data = check_array(x, "x", ndim=1)
        if data.size != self.center.n:
            raise ValueError(f"x has {data.size} entries, region has {self.center.n}")
        d = data - self.center.data
        return float(d @ d)

    def contains(self, x) -> bool:
        return self.distance_sq(x) < self.radius_sq


def _run(est, A: LinearOperator, noise: NoiseModel, y, config: BootstrapConfig, rng) -> BootstrapResult:
    y = check_array(y, "y", ndim=1)
    if y.size != A.m:
        raise ValueError(f"measurement has {y.size} entries, operator outputs {A.m}")
    xhat = est.predict(y)
    if xhat.size != A.n:
        raise ValueError(f"estimator returns {xhat.size} pixels, operator expects {A.n}")
    shape = A.image_shape
    group = config.group
    if group is not None and group.shape != shape:
        raise ValueError(f"group acts on {group.shape} images, operator on {shape}")
    root = as_stream(rng)
    if config.exhaustive:
        elements = group.elements()
    else:
        elements = []
    n = len(elements) if config.exhaustive else config.n_samples

    XG = np.empty((n, A.n))
    Z = np.zeros((n, A.m))
    for i in range(n):
        stream: RngStream = root.spawn(i)
        if config.exhaustive:
            g = elements[i]
        else:
            g = group.sample(stream) if group is not None else IDENTITY
            elements.append(g)
        # group draw first, then noise, from the replicate's own stream
        XG[i] = xhat if g.is_identity else xhat[group.permutation(g)]
        if noise.sigma > 0:
            Z[i] = stream.standard_normal(A.m)
    Ytil = A.apply(XG)
    if noise.sigma > 0:
        Ytil = Ytil + noise.sigma * Z
    Xtil = est.predict(Ytil)
    recons = np.empty_like(Xtil)
    for i, g in enumerate(elements):
        recons[i] = Xtil[i] if g.is_identity else Xtil[i][np.argsort(group.permutation(g))]
    if config.error_mode == "forward":
        diff = XG - Xtil
    else:
        diff = recons - xhat
    errors = np.einsum("ij,ij->i", diff, diff)
    return BootstrapResult(Signal(xhat, shape), errors, recons, elements)


def naive_bootstrap(est, A: LinearOperator, noise: NoiseModel, y, config: BootstrapConfig | None = None,
                    rng=0) -> BootstrapResult:
    """Parametric bootstrap around ``x_hat(y)``; replicate ``i`` uses stream ``i`` of ``rng``."""
    config = BootstrapConfig() if config is None else config
    if config.group is not None:
        raise ValueError("naive_bootstrap takes a config without a group")
    return _run(est, A, noise, y, config, rng)


def equivariant_bootstrap(est, A: LinearOperator, noise: NoiseModel, y, config: BootstrapConfig,
                          rng=0) -> BootstrapResult:
    """Bootstrap with measurements simulated from randomly transformed ``T_g x_hat(y)``."""
    if config.group is None:
        raise ValueError("equivariant_bootstrap needs config.group")
    return _run(est, A, noise, y, config, rng)


def quantile_rank(level: float, n: int) -> int:
    """1-based rank ``ceil(level * (n + 1))`` clamped to ``[1, n]``."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    if n < 1:
        raise ValueError("empty bootstrap sample")
    # guard against products such as 0.7 * 10 = 7.000000000000001
    k = math.ceil(level * (n + 1) - 1e-9)
    return min(max(k, 1), n)


def confidence_region(result: BootstrapResult, level: float) -> ConfidenceRegion:
    errors = np.sort(result.errors)
    k = quantile_rank(level, errors.size)
    return ConfidenceRegion(result.center, float(errors[k - 1]), float(level))


def contains(region: ConfidenceRegion, x) -> bool:
    return region.contains(x)


def pixelwise_std(result: BootstrapResult) -> Signal:
    """Per-pixel sample standard deviation (``ddof=1``) of the reconstructions."""
    if result.n_samples < 2:
        raise ValueError("pixelwise_std needs at least two bootstrap samples")
    return Signal(np.std(result.recons, axis=0, ddof=1), result.center.shape)


class EquivariantBootstrap(BaseEstimator):
    """Estimator-style wrapper: ``fit(y)`` runs the bootstrap around ``x_hat(y)``.

    Parameters
    ----------
    estimator : fitted reconstruction estimator
    operator : LinearOperator
    sigma : float
        Gaussian noise level used to simulate bootstrap measurements.
    max_shift : int
        Half-width of the shift sampling box; 0 disables shifts.
    rotations : bool
        Include quarter-turn rotations.
    n_samples : int
    error_mode : {"forward", "inverse"}
    random_state : int
        Master seed; replicate ``i`` draws from stream ``i``.

    With ``max_shift=0`` and ``rotations=False`` this is the naive bootstrap.
    """

    def __init__(self, estimator=None, operator=None, sigma: float = 0.0, max_shift: int = 0,
                 rotations: bool = False, n_samples: int = 100, error_mode: str = "forward",
                 random_state: int = 0):
        self.estimator = estimator
        self.operator = operator
        self.sigma = sigma
        self.max_shift = max_shift
        self.rotations = rotations
        self.n_samples = n_samples
        self.error_mode = error_mode
        self.random_state = random_state

    def _config(self) -> BootstrapConfig:
        group = None
        if self.max_shift or self.rotations:
            group = GroupAction(self.operator.image_shape, self.max_shift, self.rotations)
        return BootstrapConfig(self.n_samples, self.error_mode, group)

    def fit(self, y, x=None):
        if isinstance(y, Measurement):
            y = y.data
        self.result_ = _run(self.estimator, self.operator, NoiseModel(self.sigma), y,
                            self._config(), self.random_state)
        self.center_ = self.result_.center
        self.errors_ = self.result_.errors
        return self

    def predict(self, y=None) -> np.ndarray:
        """Point estimate ``x_hat(y)``; without ``y``, the fitted centre."""
        if y is None:
            check_is_fitted(self)
            return self.center_.data.copy()
        return self.estimator.predict(y)

    def confidence_region(self, level: float) -> ConfidenceRegion:
        check_is_fitted(self)
        return confidence_region(self.result_, level)

    def pixelwise_std(self) -> Signal:
        check_is_fitted(self)
        return pixelwise_std(self.result_)

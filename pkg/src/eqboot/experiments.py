"""Seeded coverage experiments on synthetic invariant-subspace signals.

Stream layout for ``master_seed = s`` (paths under ``SeedSequence(s)``):

* ``(0, t)`` trial ``t``; its children are ``0`` for ``x_star``, ``1`` for the
  measurement noise and ``2`` for the bootstrap family shared by every arm,
* ``(1,)`` signal model, ``(2,)`` forward operator, ``(3,)`` estimator training set.

Every arm of an experiment therefore sees the same truth, measurement and
bootstrap streams in a given trial.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .bootstrap import BootstrapConfig, _run, confidence_region, pixelwise_std, quantile_rank
from .core import NoiseModel, RngStream, Signal, as_stream, check_array
from .estimators import ISTA, LearnedLinear, OracleProjector, Tikhonov
from .groups import GroupAction
from .operators import LinearOperator, circular_blur
from .theory import equivariance_defect, lowpass, orbit_basis, subspace_invariance_defect

__all__ = [
    "SignalModel",
    "CoverageCurve",
    "make_invariant_model",
    "sample_signal",
    "build_estimator",
    "run_arms",
    "coverage_curve",
    "ablation_fig5",
    "grid_search",
    "pixel_maps",
    "psnr",
    "spearman",
    "coverage_mad",
    "thread_count",
    "PSNR_CAP",
]

PSNR_CAP = 300.0
ROUNDING_FLOOR = 1e-12
TRIALS, MODEL, OPERATOR, TRAIN = 0, 1, 2, 3


def model_stream(master_seed: int) -> RngStream:
    return RngStream(master_seed, (MODEL,))


def operator_stream(master_seed: int) -> RngStream:
    return RngStream(master_seed, (OPERATOR,))


def train_stream(master_seed: int) -> RngStream:
    return RngStream(master_seed, (TRAIN,))


def trial_stream(master_seed: int, t: int) -> RngStream:
    return RngStream(master_seed, (TRIALS, t))


@dataclass(frozen=True)
class SignalModel:
    """Gaussian coefficients on an orthonormal basis: ``x = U c``, ``c ~ N(0, coeff_sigma^2 I)``."""

    basis: np.ndarray
    coeff_sigma: float
    shape: tuple[int, int]

    def __post_init__(self):
        U = check_array(self.basis, "basis", ndim=2)
        if U.shape[0] != self.shape[0] * self.shape[1]:
            raise ValueError(f"basis has {U.shape[0]} rows, shape {self.shape} needs {self.shape[0] * self.shape[1]}")
        if self.coeff_sigma < 0:
            raise ValueError(f"coeff_sigma must be >= 0, got {self.coeff_sigma}")
        U = np.array(U)
        U.setflags(write=False)
        object.__setattr__(self, "basis", U)
        object.__setattr__(self, "shape", (int(self.shape[0]), int(self.shape[1])))

    @property
    def k(self) -> int:
        return self.basis.shape[1]

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    def sample(self, rng, size: int | None = None) -> np.ndarray:
        rng = as_stream(rng)
        if size is None:
            return self.basis @ (self.coeff_sigma * rng.standard_normal(self.k))
        return (self.coeff_sigma * rng.standard_normal((size, self.k))) @ self.basis.T


@dataclass
class CoverageCurve:
    levels: list[float]
    empirical: list[float]
    n_trials: int
    method_tag: str
    covered: list[int] = field(default_factory=list)

    def __post_init__(self):
        if len(self.levels) != len(self.empirical):
            raise ValueError("levels and empirical must have equal length")

    def mad(self) -> float:
        """Mean absolute deviation of the curve from the diagonal."""
        return coverage_mad(self)

    def at(self, level: float) -> float:
        for lv, e in zip(self.levels, self.empirical):
            if math.isclose(lv, level, abs_tol=1e-12):
                return e
        raise KeyError(f"level {level} not in curve")

    def rows(self) -> list[tuple[str, float, float, int]]:
        return [(self.method_tag, lv, e, self.n_trials) for lv, e in zip(self.levels, self.empirical)]


def coverage_mad(curve: CoverageCurve) -> float:
    return float(np.mean(np.abs(np.asarray(curve.empirical) - np.asarray(curve.levels))))


def make_invariant_model(action: GroupAction, shape, k: int, rng, cutoff: float | None = None,
                         coeff_sigma: float = 1.0) -> SignalModel:
    """Span of the group orbits of ``k`` Gaussian seed images.

    ``cutoff`` low-passes the seeds first. Under the full shift group the orbit
    of a generic image spans all of ``R^n``, so a band limit is what keeps a
    shift-invariant subspace low-dimensional. The radial mask is also
    invariant under quarter turns.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    shape = (int(shape[0]), int(shape[1]))
    if action.shape != shape:
        raise ValueError(f"group acts on {action.shape}, model shape is {shape}")
    seeds = as_stream(rng).standard_normal((k, shape[0] * shape[1]))
    if cutoff is not None:
        seeds = lowpass(seeds, shape, cutoff)
    if not np.any(np.abs(seeds) > 1e-12):
        raise ValueError("seed images are numerically zero; raise the cutoff")
    U = orbit_basis(action, seeds)
    if U.shape[1] == 0:
        raise ValueError("degenerate signal model of rank 0")
    return SignalModel(U, coeff_sigma, shape)


def sample_signal(model: SignalModel, rng) -> Signal:
    return Signal(model.sample(rng), model.shape)


def psnr(x_hat, x_star, peak: float = 1.0) -> float:
    """``10 log10(peak^2 / MSE)`` in dB, capped at ``PSNR_CAP`` when the error vanishes."""
    a = check_array(x_hat, "x_hat", ndim=(1, 2)).ravel()
    b = check_array(x_star, "x_star", ndim=(1, 2)).ravel()
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if peak <= 0:
        raise ValueError(f"peak must be positive, got {peak}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(peak * peak / mse))


def spearman(a, b) -> float:
    """Rank correlation; ``nan`` when either input is constant."""
    a = np.ravel(np.asarray(a, dtype=np.float64))
    b = np.ravel(np.asarray(b, dtype=np.float64))
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return float("nan")
    return float(stats.spearmanr(a, b).statistic)


def thread_count(n_jobs: int | None = None) -> int:
    """Explicit ``n_jobs``, else ``EQBOOT_THREADS``, else 1."""
    if n_jobs is None:
        raw = os.environ.get("EQBOOT_THREADS", "1")
        try:
            n_jobs = int(raw)
        except ValueError:
            raise ValueError(f"EQBOOT_THREADS must be an integer, got {raw!r}") from None
    return max(1, int(n_jobs))


def build_estimator(spec: dict, A: LinearOperator, model: SignalModel | None = None,
                    noise: NoiseModel | None = None, rng=None):
    """Fit the estimator described by ``spec`` (keys ``kind`` plus its parameters).

    ``learned_linear`` trains on ``n_train`` pairs drawn from ``model`` and
    ``noise`` using ``rng``; ``oracle_projector`` uses the model basis.
    """
    kind = spec.get("kind")
    lam = spec.get("lam")
    if kind == "tikhonov":
        return Tikhonov(A, lam).fit()
    if kind == "exact_inverse":
        return Tikhonov(A, 0.0).fit()
    if kind == "learned_linear":
        if model is None or rng is None:
            raise ValueError("learned_linear needs a signal model and a training stream")
        rng = as_stream(rng)
        n_train = int(spec.get("n_train", 1000))
        X = model.sample(rng.spawn(0), size=n_train)
        Y = A.apply(X)
        sigma = 0.0 if noise is None else noise.sigma
        if sigma > 0:
            Y = Y + sigma * rng.spawn(1).standard_normal(Y.shape)
        return LearnedLinear(0.0 if lam is None else lam, A.image_shape).fit(Y, X)
    if kind == "oracle_projector":
        if model is None:
            raise ValueError("oracle_projector needs a signal model")
        return OracleProjector(A, model.basis, 0.0 if lam is None else lam).fit()
    if kind == "ista":
        return ISTA(A, 0.1 if lam is None else lam, int(spec.get("n_iters", 100)), spec.get("step")).fit()
    raise ValueError(f"unknown estimator kind {kind!r}")


def _check_levels(levels) -> list[float]:
    levels = [float(v) for v in levels]
    if not levels:
        raise ValueError("levels must be nonempty")
    if any(not 0 < v < 1 for v in levels):
        raise ValueError(f"levels must lie in (0, 1), got {levels}")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError(f"levels must be strictly ascending, got {levels}")
    return levels


def _trial(t, model, A, noise, est, arms, levels, master_seed, radius_override):
    stream = trial_stream(master_seed, t)
    x_star = model.sample(stream.spawn(0))
    y = A.apply(x_star)
    if noise.sigma > 0:
        y = y + noise.sigma * stream.spawn(1).standard_normal(A.m)
    hit = np.zeros((len(arms), len(levels)), dtype=np.int64)
    true_err = None
    for a, config in enumerate(arms):
        res = _run(est, A, noise, y, config, stream.spawn(2))
        errors = np.sort(res.errors)
        d = res.center.data - x_star
        true_err = float(d @ d)
        for j, level in enumerate(levels):
            q = errors[quantile_rank(level, errors.size) - 1] if radius_override is None else radius_override
            hit[a, j] = true_err < q
    return hit, true_err


def run_arms(model: SignalModel, A: LinearOperator, noise: NoiseModel, est, arms: dict,
             levels, n_trials: int, master_seed: int, n_jobs: int | None = None,
             radius_override: float | None = None, progress=None) -> list[CoverageCurve]:
    """Paired coverage curves, one per ``tag -> BootstrapConfig`` entry of ``arms``.

    ``radius_override`` replaces every bootstrap radius (a debugging hook).
    ``progress`` is called with each finished trial index, in order.
    """
    levels = _check_levels(levels)
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")
    if model.shape != A.image_shape:
        raise ValueError(f"model shape {model.shape} does not match operator {A.image_shape}")
    tags = list(arms)
    configs = [arms[tag] for tag in tags]

    def job(t):
        return _trial(t, model, A, noise, est, configs, levels, master_seed, radius_override)

    total = np.zeros((len(tags), len(levels)), dtype=np.int64)
    workers = thread_count(n_jobs)
    if workers == 1:
        results = map(job, range(n_trials))
        pool = None
    else:
        pool = ThreadPoolExecutor(max_workers=workers)
        results = pool.map(job, range(n_trials))
    try:
        # integer counts summed in trial order
        for t, (hit, _) in enumerate(results):
            total += hit
            if progress is not None:
                progress(t)
    finally:
        if pool is not None:
            pool.shutdown()
    return [CoverageCurve(levels, [int(c) / n_trials for c in total[a]], n_trials, tag,
                          [int(c) for c in total[a]])
            for a, tag in enumerate(tags)]


def coverage_curve(model: SignalModel, A: LinearOperator, noise: NoiseModel, estimator_spec,
                   bootstrap_config: BootstrapConfig, levels, n_trials: int, master_seed: int,
                   n_jobs: int | None = None, radius_override: float | None = None,
                   method_tag: str | None = None) -> CoverageCurve:
    """Empirical coverage of one bootstrap method; ``estimator_spec`` is a dict or a fitted estimator."""
    est = _resolve_estimator(estimator_spec, A, model, noise, master_seed)
    if method_tag is None:
        method_tag = "naive" if bootstrap_config.group is None else "equivariant"
    return run_arms(model, A, noise, est, {method_tag: bootstrap_config}, levels, n_trials,
                    master_seed, n_jobs, radius_override)[0]


def _resolve_estimator(spec, A, model, noise, master_seed):
    if isinstance(spec, dict):
        return build_estimator(spec, A, model, noise, train_stream(master_seed))
    return spec


def fig5_arms(shape, n_samples: int = 200, max_shift: int = 5, error_mode: str = "forward") -> dict:
    return {
        "naive": BootstrapConfig(n_samples, error_mode),
        "shifts": BootstrapConfig(n_samples, error_mode, GroupAction(shape, max_shift, False)),
        "rotations": BootstrapConfig(n_samples, error_mode, GroupAction(shape, 0, True)),
    }


def ablation_fig5(shape, kernel, estimator_spec, configs: dict | None, levels, n_trials: int,
                  seed: int, sigma: float = 0.01, k: int = 1, cutoff: float | None = 7.0,
                  coeff_sigma: float = 1.0, n_jobs: int | None = None) -> list[CoverageCurve]:
    """Naive vs shifts-only vs rotations-only bootstrap under a circular blur.

    Signals live in a subspace invariant under shifts and quarter turns.
    ``configs`` maps arm tags to ``BootstrapConfig``; ``None`` gives the
    standard three arms. The estimator must commute with every shift.
    """
    shape = (int(shape[0]), int(shape[1]))
    if shape[0] != shape[1]:
        raise ValueError(f"rotation arm needs a square image, got {shape}")
    A = circular_blur(shape, kernel)
    full = GroupAction(shape, max_shift=1, rotations=True)
    model = make_invariant_model(full, shape, k, model_stream(seed), cutoff, coeff_sigma)
    noise = NoiseModel(sigma)
    est = _resolve_estimator(estimator_spec, A, model, noise, seed)
    check_shift_equivariant(est, A)
    arms = fig5_arms(shape) if configs is None else configs
    return run_arms(model, A, noise, est, arms, levels, n_trials, seed, n_jobs)


def check_shift_equivariant(est, A: LinearOperator, tol: float = 1e-8) -> float:
    """Raise unless the estimator commutes with cyclic shifts; returns the defect."""
    shifts = GroupAction(A.image_shape, max_shift=1)
    M = est.linear_matrix()
    if M is not None:
        defect = equivariance_defect(shifts, M)
    elif isinstance(est, ISTA):
        defect = equivariance_defect(shifts, A.dense())
    else:
        raise ValueError("cannot verify shift equivariance of a nonlinear estimator other than ISTA")
    scale = max(1.0, float(np.linalg.norm(M if M is not None else A.dense())))
    if defect > tol * scale:
        raise ValueError(f"estimator is not shift-equivariant (defect {defect:.3g})")
    return defect


def grid_search(model: SignalModel, A: LinearOperator, noise: NoiseModel, est, candidates: dict,
                levels, n_trials: int, master_seed: int, n_jobs: int | None = None):
    """Pick the candidate bootstrap configuration with the smallest coverage MAD.

    Returns ``(best_tag, {tag: mad})``; ties go to the first candidate.
    """
    curves = run_arms(model, A, noise, est, candidates, levels, n_trials, master_seed, n_jobs)
    scores = {c.method_tag: c.mad() for c in curves}
    best = min(scores, key=lambda tag: (scores[tag], list(scores).index(tag)))
    return best, scores


def pixel_maps(model: SignalModel, A: LinearOperator, noise: NoiseModel, est,
               config: BootstrapConfig, master_seed: int, trial: int = 0) -> dict:
    """Truth, estimate, bootstrap std map and true absolute error for one trial."""
    stream = trial_stream(master_seed, trial)
    x_star = model.sample(stream.spawn(0))
    y = A.apply(x_star)
    if noise.sigma > 0:
        y = y + noise.sigma * stream.spawn(1).standard_normal(A.m)
    res = _run(est, A, noise, y, config, stream.spawn(2))
    std = pixelwise_std(res).data
    # batched BLAS rows may differ in the last bits; treat that spread as zero
    if std.max() <= ROUNDING_FLOOR * max(1.0, float(np.abs(res.center.data).max())):
        std = np.zeros_like(std)
    err = np.abs(res.center.data - x_star)
    return {
        "x_star": Signal(x_star, model.shape),
        "x_hat": res.center,
        "std_map": Signal(std, model.shape),
        "true_abs_err": Signal(err, model.shape),
        "spearman": spearman(std, err),
        "result": res,
    }


def invariance_defect(model: SignalModel, action: GroupAction) -> float:
    return subspace_invariance_defect(action, model.basis)


def regions_nested(result, levels) -> bool:
    radii = [confidence_region(result, lv).radius_sq for lv in levels]
    return all(b >= a for a, b in zip(radii, radii[1:]))

"""Dense-matrix analysis of the bootstrap with a linear estimator.

All group sums run over the *full* group of a ``GroupAction`` (every torus
shift and/or quarter turn), never over the truncated sampling box. Matrices
are averaged as ``Pi(C) = mean_g T_g^{-1} C T_g`` (the Reynolds operator),
implemented through index permutations; the dense permutation matrices from
``groups.dense_matrix`` are used only by the tests as an independent route.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .core import as_stream
from .groups import GroupAction

__all__ = [
    "BiasReport",
    "ConsistencyReport",
    "CheckResult",
    "reynolds",
    "equivariance_defect",
    "bias_decomposition",
    "measurement_consistency_check",
    "orbit_basis",
    "subspace_invariance_defect",
    "lowpass",
    "random_instance",
    "run_theory_checks",
    "GROUP_LIMIT",
]

GROUP_LIMIT = 100_000
IDENTITY_RTOL = 1e-8
EXACT_TOL = 1e-10


def _inverse_perms(action: GroupAction) -> list[np.ndarray]:
    elems = action.elements()
    if len(elems) > GROUP_LIMIT:
        raise ValueError(f"group of order {len(elems)} too large to enumerate")
    return [np.argsort(action.permutation(g)) for g in elems]


def _check_square(C: np.ndarray, n: int) -> np.ndarray:
    C = np.asarray(C, dtype=np.float64)
    if C.shape != (n, n):
        raise ValueError(f"expected an {n}x{n} matrix, got {C.shape}")
    return C


def reynolds(action: GroupAction, C) -> np.ndarray:
    """Group average ``sum_g T_g^{-1} C T_g / |G|`` over the full group."""
    C = _check_square(C, action.n)
    if action.n > 1024:
        raise ValueError(f"reynolds needs n <= 1024, got {action.n}")
    out = np.zeros_like(C)
    invs = _inverse_perms(action)
    for q in invs:
        # (T_g^{-1} C T_g)[i, j] = C[q[i], q[j]] with q the inverse permutation
        out += C[np.ix_(q, q)]
    return out / len(invs)


def equivariance_defect(action: GroupAction, C) -> float:
    """``max_g ||T_g C - C T_g||_F / ||C||_F``; zero iff ``C`` commutes with the group."""
    C = _check_square(C, action.n)
    norm = np.linalg.norm(C)
    if norm == 0:
        return 0.0
    worst = 0.0
    for g in action.elements():
        p = action.permutation(g)
        q = np.argsort(p)
        worst = max(worst, float(np.linalg.norm(C[p, :] - C[:, q])))
    return worst / float(norm)


def subspace_invariance_defect(action: GroupAction, U) -> float:
    """``max_g ||(I - U U^T) T_g U||_F`` for an orthonormal basis ``U``."""
    U = np.asarray(U, dtype=np.float64)
    worst = 0.0
    for g in action.elements():
        TU = U[action.permutation(g), :]
        worst = max(worst, float(np.linalg.norm(TU - U @ (U.T @ TU))))
    return worst


def orbit_basis(action: GroupAction, seeds, rtol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis of the span of ``{T_g s}`` over all ``g`` and seeds ``s``.

    Directions with singular value below ``rtol`` times the largest are
    dropped, so the result spans an exactly invariant subspace.
    """
    seeds = np.atleast_2d(np.asarray(seeds, dtype=np.float64))
    stacked = np.vstack([seeds[:, action.permutation(g)] for g in action.elements()])
    _, s, Vt = np.linalg.svd(stacked, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        raise ValueError("seeds span the zero subspace")
    rank = int(np.sum(s > rtol * s[0]))
    return np.ascontiguousarray(Vt[:rank].T)


def lowpass(X, shape, cutoff: float) -> np.ndarray:
    """Keep the DFT coefficients with radial frequency ``<= cutoff`` (in cycles per image)."""
    H, W = shape
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    fy = np.fft.fftfreq(H) * H
    fx = np.fft.fftfreq(W) * W
    mask = (fy[:, None] ** 2 + fx[None, :] ** 2) <= cutoff**2 + 1e-12
    F = np.fft.fft2(X.reshape(-1, H, W)) * mask
    return np.real(np.fft.ifft2(F)).reshape(X.shape)


@dataclass
class BiasReport:
    """Both sides of the bootstrap-bias identity for one ``(B, U, G, x*)`` instance."""

    true_error: float
    bias1: float
    bias2: float
    lhs: float
    residual: float
    group_order: int

    @property
    def rhs(self) -> float:
        return self.true_error - self.bias1 + self.bias2

    @property
    def holds(self) -> bool:
        return self.residual <= IDENTITY_RTOL * max(1.0, abs(self.lhs))

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(rhs=self.rhs, holds=self.holds)
        return d


def bias_decomposition(B, basis, action: GroupAction, x_star, check: bool = True,
                       lhs_perturbation: float = 0.0) -> BiasReport:
    """Exact group-averaged noiseless bootstrap error and its three-term split.

    ``lhs`` is ``mean_g ||T_g^{-1} B T_g B x* - B x*||^2`` evaluated directly;
    the right-hand side is ``||R x*||^2 - (R x*)^T B* (R x*) + bias2`` with
    ``B* = U U^T``, ``R = B - B*`` and
    ``bias2 = (B x*)^T Pi(R^T R + R^T B* + B* R - 2R) (B x*)``.

    ``lhs_perturbation`` adds a constant to ``lhs``; it exists to check that a
    broken identity is detected.
    """
    n = action.n
    B = _check_square(B, n)
    U = np.asarray(basis, dtype=np.float64)
    x = np.asarray(x_star, dtype=np.float64).ravel()
    if U.ndim != 2 or U.shape[0] != n or x.size != n:
        raise ValueError("dimension mismatch between B, basis and x_star")
    if check:
        defect = subspace_invariance_defect(action, U)
        if defect > 1e-8:
            raise ValueError(f"basis is not invariant under the group (defect {defect:.3g})")
        off = np.linalg.norm(x - U @ (U.T @ x))
        if off > 1e-8 * max(1.0, np.linalg.norm(x)):
            raise ValueError(f"x_star lies outside span(basis) (distance {off:.3g})")
    Bstar = U @ U.T
    R = B - Bstar
    Bx = B @ x
    lhs = 0.0
    for q, p in ((np.argsort(action.permutation(g)), action.permutation(g)) for g in action.elements()):
        v = (B @ Bx[p])[q] - Bx
        lhs += float(v @ v)
    order = action.order
    lhs = lhs / order + lhs_perturbation
    Rx = R @ x
    true_error = float(Rx @ Rx)
    bias1 = float(Rx @ Bstar @ Rx)
    inner = R.T @ R + R.T @ Bstar + Bstar @ R - 2.0 * R
    bias2 = float(Bx @ reynolds(action, inner) @ Bx)
    residual = abs(lhs - (true_error - bias1 + bias2))
    return BiasReport(true_error, bias1, bias2, lhs, residual, order)


@dataclass
class ConsistencyReport:
    consistent: bool
    consistency_error: float
    bias1: float
    bias1_orthogonal: float
    n_probes: int

    def to_dict(self) -> dict:
        return asdict(self)


def measurement_consistency_check(A, M, basis, n_probes: int = 100, rng=0) -> ConsistencyReport:
    """Check ``A M = I`` and evaluate the first bias term on random subspace signals.

    ``bias1`` is the largest ``(R x)^T B* (R x)`` over the probes using the
    oblique oracle projector ``B* = M* A`` with ``M* = U (A U)^+``; it is
    zero (to rounding) whenever ``A M = I``. ``bias1_orthogonal`` reports the
    same quantity for ``B* = U U^T``, which need not vanish.
    """
    A = np.asarray(A, dtype=np.float64)
    M = np.asarray(M, dtype=np.float64)
    U = np.asarray(basis, dtype=np.float64)
    m, n = A.shape
    if M.shape != (n, m) or U.shape[0] != n:
        raise ValueError(f"dimension mismatch: A {A.shape}, M {M.shape}, basis {U.shape}")
    err = float(np.linalg.norm(A @ M - np.eye(m)))
    Mstar = U @ np.linalg.pinv(A @ U)
    Bstar = Mstar @ A
    Port = U @ U.T
    R = M @ A - Bstar
    stream = as_stream(rng)
    coeffs = stream.standard_normal((n_probes, U.shape[1]))
    X = coeffs @ U.T
    RX = X @ R.T
    b1 = np.einsum("ij,ij->i", RX @ Bstar.T, RX)
    b1o = np.einsum("ij,ij->i", RX @ Port, RX)
    return ConsistencyReport(err <= 1e-8, err, float(np.max(np.abs(b1))), float(np.max(b1o)), n_probes)


def random_instance(action: GroupAction, rng, residual_scale: float = 0.1, cutoff=None):
    """Random ``(B, U, x*)`` with ``U`` spanning a group-invariant subspace.

    Seeds are low-pass filtered when the group contains shifts (an unfiltered
    seed would span the whole space); ``B = U U^T + R`` with a dense random,
    generally non-equivariant ``R``.
    """
    stream = as_stream(rng)
    n = action.n
    H, W = action.shape
    n_seeds = 1 + int(stream.integers(0, 2))
    seeds = stream.standard_normal((n_seeds, n))
    if action.max_shift > 0:
        if cutoff is None:
            top = max(1, min(H, W) // 4) if min(H, W) > 1 else max(1, W // 4)
            cutoff = 1 + int(stream.integers(0, top))
        seeds = lowpass(seeds, action.shape, cutoff)
    U = orbit_basis(action, seeds)
    R = residual_scale * stream.standard_normal((n, n)) / np.sqrt(n)
    B = U @ U.T + R
    x = U @ stream.standard_normal(U.shape[1])
    return B, U, x


@dataclass
class CheckResult:
    name: str
    value: float
    tolerance: float
    passed: bool

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag}  {self.name:<44s} {self.value:11.3e}  (tol {self.tolerance:.1e})"


def _theory_action(n: int, group: str) -> GroupAction:
    if group == "shift":
        return GroupAction((1, n), max_shift=1)
    if group == "trivial":
        return GroupAction((1, n))
    side = int(round(np.sqrt(n)))
    if side * side != n:
        raise ValueError(f"group {group!r} needs a square image; n={n} is not a square")
    if group == "rotation":
        return GroupAction((side, side), rotations=True)
    if group == "shift2d":
        return GroupAction((side, side), max_shift=1)
    if group == "shift_rotation":
        return GroupAction((side, side), max_shift=1, rotations=True)
    raise ValueError(f"unknown group {group!r}")


def run_theory_checks(n: int = 16, group: str = "shift", n_instances: int = 100, seed: int = 0,
                      lhs_perturbation: float = 0.0) -> list[CheckResult]:
    """Randomised identity, Reynolds and consistency checks; one result per property."""
    action = _theory_action(n, group)
    root = as_stream(seed)
    worst_identity = 0.0
    worst_trivial = 0.0
    worst_idem = worst_contract = worst_fixed = worst_commutant = 0.0
    worst_consistency = 0.0
    for t in range(n_instances):
        B, U, x = random_instance(action, root.spawn(t))
        rep = bias_decomposition(B, U, action, x, lhs_perturbation=lhs_perturbation)
        worst_identity = max(worst_identity, rep.residual / max(1.0, abs(rep.lhs)))
        if action.is_trivial:
            # trivial group: the average collapses to the naive error ||(B - I) B x||^2
            v = B @ (B @ x) - B @ x
            worst_trivial = max(worst_trivial, abs(rep.lhs - float(v @ v)) / max(1.0, abs(rep.lhs)))
        C = root.spawn(t).spawn(1).standard_normal((n, n))
        P = reynolds(action, C)
        worst_idem = max(worst_idem, float(np.linalg.norm(reynolds(action, P) - P)))
        worst_contract = max(worst_contract, float(np.linalg.norm(P) - np.linalg.norm(C)))
        worst_commutant = max(worst_commutant, equivariance_defect(action, P))
        E = reynolds(action, root.spawn(t).spawn(2).standard_normal((n, n)))
        worst_fixed = max(worst_fixed, float(np.linalg.norm(reynolds(action, E) - E)))
        m = max(1, U.shape[1])
        A = root.spawn(t).spawn(3).standard_normal((m, n))
        Mri = A.T @ np.linalg.inv(A @ A.T)
        cons = measurement_consistency_check(A, Mri, U, n_probes=100, rng=root.spawn(t).spawn(4))
        worst_consistency = max(worst_consistency, cons.bias1)
    results = [
        CheckResult("bias identity |lhs - rhs| / max(1, |lhs|)", worst_identity, IDENTITY_RTOL,
                    worst_identity <= IDENTITY_RTOL),
        CheckResult("Reynolds idempotence ||Pi(Pi C) - Pi C||_F", worst_idem, EXACT_TOL,
                    worst_idem <= EXACT_TOL),
        CheckResult("Reynolds contraction ||Pi C||_F - ||C||_F", worst_contract, EXACT_TOL,
                    worst_contract <= EXACT_TOL),
        CheckResult("Reynolds image in commutant (defect)", worst_commutant, EXACT_TOL,
                    worst_commutant <= EXACT_TOL),
        CheckResult("Reynolds fixes equivariant matrices", worst_fixed, EXACT_TOL,
                    worst_fixed <= EXACT_TOL),
        CheckResult("consistent estimator bias term 1", worst_consistency, EXACT_TOL,
                    worst_consistency <= EXACT_TOL),
    ]
    if action.is_trivial:
        results.append(CheckResult("trivial group reduces to naive bootstrap", worst_trivial,
                                   IDENTITY_RTOL, worst_trivial <= IDENTITY_RTOL))
    return results

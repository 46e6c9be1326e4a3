"""Linear solves for the parameter velocity ``qdot``.

Four regimes are covered: the constrained metric-tensor system, its Tikhonov
regularised version, the regularised collocation least-squares problem, and the
plain SVD pseudoinverse.  Conserved quantities enter through Lagrange
multipliers solved from the small ``m x m`` constraint system.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as la

DEFAULT_TAU = 1e-12


class DependentConstraintsError(np.linalg.LinAlgError):
    """Constraint gradients are (numerically) linearly dependent."""


@dataclass(frozen=True)
class RegularizationConfig:
    """Tikhonov regularisation ``Gamma^T Gamma = alpha I`` and SVD truncation ``tau``.

    ``mode='none'`` requires ``alpha == 0``; ``tau`` is relative to the largest
    singular value.
    """

    mode: str = "none"
    alpha: float = 0.0
    tau: float = DEFAULT_TAU

    def __post_init__(self):
        if self.mode not in ("none", "tikhonov"):
            raise ValueError(f"unknown regularization mode {self.mode!r}")
        if not self.alpha >= 0.0:
            raise ValueError("alpha must be non-negative")
        if not 0.0 <= self.tau < 1.0:
            raise ValueError("tau must lie in [0, 1)")
        if (self.mode == "none") != (self.alpha == 0.0):
            raise ValueError("mode 'none' if and only if alpha == 0")

    @classmethod
    def tikhonov(cls, alpha: float, tau: float = DEFAULT_TAU) -> "RegularizationConfig":
        if alpha == 0.0:
            return cls("none", 0.0, tau)
        return cls("tikhonov", float(alpha), tau)

    def gamma(self, n: int) -> np.ndarray:
        return np.sqrt(self.alpha) * np.eye(n)


@dataclass
class LagrangeSolveReport:
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    condition: float = 1.0
    residual: float = 0.0


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite entries in linear system")


def _svd_cutoff(s: np.ndarray, tau: float) -> np.ndarray:
    if s.size == 0 or s[0] == 0.0:
        return np.zeros_like(s, dtype=bool)
    return s > tau * s[0]


def pinv_solve(A, b, tau: float = DEFAULT_TAU) -> np.ndarray:
    """Minimum-norm least-squares solution ``A^+ b`` through a truncated SVD.

    Singular values below ``tau * sigma_max`` are treated as zero.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    _check_finite(A, b)
    if not 0.0 <= tau < 1.0:
        raise ValueError("tau must lie in [0, 1)")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    keep = _svd_cutoff(s, tau)
    coef = np.zeros_like(s)
    coef[keep] = (U[:, keep].T @ b) / s[keep]
    return Vt.T @ coef


def pinv(A, tau: float = DEFAULT_TAU) -> np.ndarray:
    U, s, Vt = np.linalg.svd(np.asarray(A, dtype=float), full_matrices=False)
    keep = _svd_cutoff(s, tau)
    return (Vt[keep].T / s[keep]) @ U[:, keep].T


def _spd_inverse_action(H: np.ndarray, tau: float) -> Callable[[np.ndarray], np.ndarray]:
    """``z -> H^{-1} z`` by Cholesky, or the truncated pseudoinverse when that fails."""
    try:
        factor = la.cho_factor(H, lower=True, check_finite=False)
        return lambda z: la.cho_solve(factor, z, check_finite=False)
    except la.LinAlgError:
        H_pinv = pinv(H, tau)
        return lambda z: H_pinv @ z


def _as_grads(grads, n: int) -> np.ndarray:
    if grads is None:
        return np.zeros((0, n))
    G = np.atleast_2d(np.asarray(grads, dtype=float))
    if G.size == 0:
        return np.zeros((0, n))
    if G.shape[1] != n:
        raise ValueError(f"constraint gradient length {G.shape[1]} != n = {n}")
    return G


def _lagrange(solve, f: np.ndarray, G: np.ndarray):
    """Eliminate the multipliers of ``H qdot = f - G^T lam``, ``G qdot = 0``."""
    if G.shape[0] == 0:
        return solve(f), LagrangeSolveReport()
    Z = solve(np.column_stack([f, G.T]))
    y, Y = Z[:, 0], Z[:, 1:]
    C = G @ Y
    C = 0.5 * (C + C.T)
    b = G @ y
    sv = np.linalg.svd(C, compute_uv=False)
    if sv[-1] <= 1e-10 * sv[0] or sv[0] == 0.0:
        raise DependentConstraintsError(
            f"constraint matrix is singular (singular values {sv})"
        )
    lam = np.linalg.solve(C, b)
    qdot = y - Y @ lam
    report = LagrangeSolveReport(
        multipliers=lam,
        condition=float(sv[0] / sv[-1]),
        residual=float(np.linalg.norm(C @ lam - b)),
    )
    return qdot, report


def solve_constrained_rons(M, f, grads=None, tau: float = DEFAULT_TAU):
    """Solve ``M qdot = f - sum_k lam_k grad I_k`` with ``<grad I_k, qdot> = 0``.

    A singular metric tensor is handled with the truncated pseudoinverse.
    Returns ``(qdot, LagrangeSolveReport)``.
    """
    M = np.asarray(M, dtype=float)
    f = np.asarray(f, dtype=float)
    _check_finite(M, f)
    G = _as_grads(grads, f.size)
    return _lagrange(_spd_inverse_action(M, tau), f, G)


def solve_regularized_rons(M, f, grads=None, reg: RegularizationConfig | None = None):
    """Solve ``(M + alpha I) qdot = f - sum_k lam_k grad I_k`` under the constraints."""
    reg = reg or RegularizationConfig()
    M = np.asarray(M, dtype=float)
    f = np.asarray(f, dtype=float)
    _check_finite(M, f)
    G = _as_grads(grads, f.size)
    H = M.copy()
    H.flat[:: f.size + 1] += reg.alpha
    return _lagrange(_spd_inverse_action(H, reg.tau), f, G)


def solve_regularized_crons(system, grads=None, reg: RegularizationConfig | None = None):
    """Regularised (constrained) collocation solve.

    With ``alpha > 0`` the normal operator ``Mt^T Mt + alpha I`` is applied
    through the SVD of ``Mt`` itself, so the conditioning of ``Mt`` (not its
    square) governs the accuracy.  With ``alpha == 0`` the constraint rows are
    appended and the augmented system is solved by the pseudoinverse.
    """
    reg = reg or RegularizationConfig()
    Mt = np.asarray(system.Mtilde, dtype=float)
    ft = np.asarray(system.ftilde, dtype=float)
    _check_finite(Mt, ft)
    n = Mt.shape[1]
    G = _as_grads(grads, n)
    if reg.alpha == 0.0:
        if G.shape[0]:
            Mt = np.vstack([Mt, G])
            ft = np.concatenate([ft, np.zeros(G.shape[0])])
        return pinv_solve(Mt, ft, reg.tau), LagrangeSolveReport(np.zeros(G.shape[0]))
    U, s, Vt = np.linalg.svd(Mt, full_matrices=Mt.shape[0] < n)  # need all n right vectors
    s_full = np.zeros(n)
    s_full[: s.size] = s
    rhs = Vt[: s.size].T @ (s * (U[:, : s.size].T @ ft))  # Mt^T ft
    inv_diag = 1.0 / (s_full**2 + reg.alpha)

    def solve(z):
        return Vt.T @ (inv_diag[:, None] * (Vt @ z)) if z.ndim == 2 else Vt.T @ (inv_diag * (Vt @ z))

    return _lagrange(solve, rhs, G)


def solve_monte_carlo(mc_system, grads=None, reg: RegularizationConfig | None = None):
    """Solve the sampled normal equations ``(Mbar + alpha I) qdot = fbar``.

    Without regularisation ``Mbar`` is typically numerically singular, so the
    truncated pseudoinverse is applied directly instead of attempting Cholesky.
    """
    reg = reg or RegularizationConfig()
    if reg.alpha > 0.0:
        return solve_regularized_rons(mc_system.Mbar, mc_system.fbar, grads, reg)
    Mbar = np.asarray(mc_system.Mbar, dtype=float)
    fbar = np.asarray(mc_system.fbar, dtype=float)
    _check_finite(Mbar, fbar)
    P = pinv(Mbar, reg.tau)
    return _lagrange(lambda z: P @ z, fbar, _as_grads(grads, fbar.size))


def cost_functional(M, f, qdot, F_norm2: float) -> float:
    """Instantaneous residual ``0.5 (qdot^T M qdot - 2 f^T qdot + ||F||^2)``."""
    qdot = np.asarray(qdot, dtype=float)
    return 0.5 * (qdot @ np.asarray(M) @ qdot - 2.0 * np.asarray(f) @ qdot + F_norm2)


def condition_diagnostics(A) -> tuple[float, float, float]:
    """``(kappa, sigma_max, sigma_min)`` over the nonzero singular values of ``A``."""
    A = np.asarray(A, dtype=float)
    s = np.linalg.svd(A, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        raise ValueError("condition number of an all-zero matrix is undefined")
    nonzero = s[s > s[0] * max(A.shape) * np.finfo(float).eps]
    return float(nonzero[0] / nonzero[-1]), float(nonzero[0]), float(nonzero[-1])


def kkt_solve(H, f, G) -> tuple[np.ndarray, np.ndarray]:
    """Dense saddle-point solve of ``[[H, G^T], [G, 0]] [qdot; lam] = [f; 0]``.

    Independent check on the multiplier elimination used by the solvers.
    """
    H = np.asarray(H, dtype=float)
    G = np.atleast_2d(np.asarray(G, dtype=float))
    n, m = H.shape[0], G.shape[0]
    K = np.zeros((n + m, n + m))
    K[:n, :n] = H
    K[:n, n:] = G.T
    K[n:, :n] = G
    sol = np.linalg.solve(K, np.concatenate([f, np.zeros(m)]))
    return sol[:n], sol[n:]


def stack_gradients(grads: Sequence[np.ndarray] | None, n: int) -> np.ndarray:
    return _as_grads(None if grads is None or len(grads) == 0 else np.vstack(grads), n)

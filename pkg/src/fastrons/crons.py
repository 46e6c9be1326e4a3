"""Collocation systems: point-wise residual rows, constraint rows, and sampled normal equations."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _core
from .ansatz import KuramotoSivashinsky, ParameterState, TanhNetwork


@dataclass
class CollocationSystem:
    """Rows ``Mtilde qdot = ftilde``; the last ``n_constraints`` rows carry zero data."""

    points: np.ndarray
    Mtilde: np.ndarray
    ftilde: np.ndarray
    n_constraints: int = 0

    @property
    def shape(self) -> tuple[int, int]:
        return self.Mtilde.shape

    def residual(self, qdot) -> np.ndarray:
        """``R(x_i, q, qdot)`` at the collocation rows."""
        N = self.Mtilde.shape[0] - self.n_constraints
        return self.Mtilde[:N] @ qdot - self.ftilde[:N]


@dataclass
class MonteCarloSystem:
    samples: np.ndarray
    Mbar: np.ndarray
    fbar: np.ndarray
    domain_size: float
    collocation: CollocationSystem = field(repr=False, default=None)


def _values(q) -> np.ndarray:
    return q.values if isinstance(q, ParameterState) else np.asarray(q, dtype=float)


def wrap_periodic(points, bounds) -> np.ndarray:
    lo, hi = bounds
    return lo + np.mod(np.asarray(points, dtype=float) - lo, hi - lo)


def equidistant_points(ell: float, N: int) -> np.ndarray:
    """``N`` equidistant points on the half-open interval ``[-ell, ell)``."""
    return -ell + 2.0 * ell * np.arange(N) / N


def assemble_collocation(family, pde, q, points, t: float = 0.0, backend=None) -> CollocationSystem:
    """Collocation matrix ``Mtilde_ij = du/dq_j(x_i)`` and ``ftilde_i = F(u)(x_i)``."""
    points = np.asarray(points, dtype=float)
    if points.shape[0] < 1:
        raise ValueError("need at least one collocation point")
    if getattr(family, "periodic", None) is not None:
        points = wrap_periodic(points, family.periodic)
    values = _values(q)
    if isinstance(family, TanhNetwork) and isinstance(pde, KuramotoSivashinsky):
        modes = np.ascontiguousarray(values.reshape(-1, 4))
        Mt, ft = _core.get_backend(backend).tanh_collocation(
            np.ascontiguousarray(points.reshape(-1)), modes, float(family.ell)
        )
    else:
        Mt = family.jacobian(points, values)
        ft = pde(family, points, t, values)
    return CollocationSystem(points, Mt, ft)


def augment_constraints(system: CollocationSystem, grads, weight: float = 1.0) -> CollocationSystem:
    """Append ``grad I_k^T`` rows with zero right-hand side (optionally scaled by ``weight``)."""
    if grads is None or len(grads) == 0:
        return system
    G = np.atleast_2d(np.asarray(grads, dtype=float))
    n = system.Mtilde.shape[1]
    if G.shape[1] != n:
        raise ValueError(f"constraint gradient length {G.shape[1]} != n = {n}")
    return replace(
        system,
        Mtilde=np.vstack([system.Mtilde, weight * G]),
        ftilde=np.concatenate([system.ftilde, np.zeros(G.shape[0])]),
        n_constraints=system.n_constraints + G.shape[0],
    )


def assemble_monte_carlo(family, pde, q, samples, domain_size: float, t: float = 0.0, backend=None) -> MonteCarloSystem:
    """Sampled metric ``Mbar = |D|/N Mt^T Mt`` and ``fbar = |D|/N Mt^T ft``."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape[0] == 0:
        raise ValueError("Monte Carlo estimate needs at least one sample")
    sys_ = assemble_collocation(family, pde, q, samples, t, backend)
    scale = domain_size / samples.shape[0]
    Mt = sys_.Mtilde
    return MonteCarloSystem(sys_.points, scale * (Mt.T @ Mt), scale * (Mt.T @ sys_.ftilde), domain_size, sys_)


def trapezoid_metric(family, q, ell: float, nodes: int = 10_000) -> np.ndarray:
    """Periodic trapezoid-rule metric tensor on ``[-ell, ell)``."""
    x = equidistant_points(ell, nodes)
    J = family.jacobian(x, _values(q))
    return (2.0 * ell / nodes) * (J.T @ J)

"""Shape-morphing ansatz families and the PDE right-hand sides they are paired with.

Every family evaluates ``u(x, q)`` on a batch of points, its parameter Jacobian
``du/dq`` and the spatial derivatives the operators need.  Points are passed as
arrays of shape ``(N, d)`` (or ``(N,)`` for one-dimensional families); all
evaluators are pure functions of their arguments.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class LayoutError(ValueError):
    """Parameter vector or point array does not match the family layout."""


class SingularParameterError(ValueError):
    """A parameter value makes a closed-form quantity diverge (e.g. zero width)."""


@dataclass
class ParameterState:
    """Flat parameter vector ``q`` with a per-mode layout.

    ``values`` is ordered mode by mode, each mode holding ``K`` slots
    (amplitude first, then shape parameters).  Indices are zero based:
    slot ``k`` of mode ``i`` lives at ``i * K + k``.
    """

    values: np.ndarray
    K: int
    t: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.K < 1 or self.values.size % self.K:
            raise LayoutError(
                f"parameter vector of length {self.values.size} is not a multiple of K={self.K}"
            )

    @property
    def r(self) -> int:
        return self.values.size // self.K

    @property
    def n(self) -> int:
        return self.values.size

    def index(self, mode: int, slot: int) -> int:
        if not (0 <= mode < self.r and 0 <= slot < self.K):
            raise LayoutError(f"(mode={mode}, slot={slot}) outside r={self.r}, K={self.K}")
        return mode * self.K + slot

    def address(self, flat: int) -> tuple[int, int]:
        if not 0 <= flat < self.n:
            raise LayoutError(f"flat index {flat} outside n={self.n}")
        return divmod(flat, self.K)

    def modes(self) -> np.ndarray:
        """View of the values as an ``(r, K)`` array."""
        return self.values.reshape(self.r, self.K)

    def copy(self) -> "ParameterState":
        return ParameterState(self.values.copy(), self.K, self.t)


def _as_state(q, K) -> ParameterState:
    if isinstance(q, ParameterState):
        if q.K != K:
            raise LayoutError(f"state has K={q.K}, family expects K={K}")
        return q
    return ParameterState(q, K)


# ---------------------------------------------------------------------------
# Gaussian mixture
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianMixture:
    """``u(x) = sum_i A_i^2 exp(-w_i^2 |x - c_i|^2)`` on unbounded R^d.

    Mode layout is ``(A, w, c_1, ..., c_d)`` so ``K = d + 2``.  Only ``A_i^2``
    and ``w_i^2`` enter the value, so negative amplitudes and widths are
    valid parameters.
    """

    d: int
    periodic = None

    @property
    def K(self) -> int:
        return self.d + 2

    def _points(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1 and self.d == 1:
            x = x[:, None]
        elif x.ndim == 1:
            x = x[None, :]
        if x.shape[-1] != self.d:
            raise LayoutError(f"points have dimension {x.shape[-1]}, mixture has d={self.d}")
        return x

    def split(self, q):
        """Return ``(A, w, C)`` arrays of shapes ``(r,), (r,), (r, d)``."""
        m = _as_state(q, self.K).modes()
        return m[:, 0], m[:, 1], m[:, 2:]

    def _gaussians(self, x, q):
        A, w, C = self.split(q)
        x = self._points(x)
        diff = x[:, None, :] - C[None, :, :]  # (N, r, d)
        dist2 = np.einsum("nrd,nrd->nr", diff, diff)
        g = np.exp(-(w**2)[None, :] * dist2)
        return A, w, diff, dist2, g

    def evaluate(self, x, q) -> np.ndarray:
        A, w, diff, dist2, g = self._gaussians(x, q)
        return g @ (A**2)

    def jacobian(self, x, q) -> np.ndarray:
        """``(N, n)`` matrix of ``du/dq_j`` at each point."""
        A, w, diff, dist2, g = self._gaussians(x, q)
        N, r = g.shape
        J = np.empty((N, r, self.K))
        J[:, :, 0] = 2.0 * A * g
        J[:, :, 1] = -2.0 * w * A**2 * dist2 * g
        J[:, :, 2:] = (2.0 * w**2 * A**2)[None, :, None] * diff * g[:, :, None]
        return J.reshape(N, r * self.K)

    def gradient(self, x, q) -> np.ndarray:
        A, w, diff, dist2, g = self._gaussians(x, q)
        coef = -2.0 * (w**2 * A**2)[None, :] * g
        return np.einsum("nr,nrd->nd", coef, diff)

    def laplacian(self, x, q) -> np.ndarray:
        A, w, diff, dist2, g = self._gaussians(x, q)
        a = w**2
        return np.sum(
            (A**2 * a)[None, :] * (4.0 * a[None, :] * dist2 - 2.0 * self.d) * g, axis=1
        )

    def total_mass(self, q) -> float:
        return float(conserved_mass(self, q)[0])


def conserved_mass(family: GaussianMixture, q):
    """Total integral ``sum_i A_i^2 (pi / w_i^2)^(d/2)`` and its gradient in q."""
    A, w, C = family.split(q)
    if np.any(w == 0.0):
        raise SingularParameterError("mixture width w_i = 0 gives an infinite integral")
    vol = (np.pi / w**2) ** (family.d / 2.0)
    value = float(np.sum(A**2 * vol))
    grad = np.zeros((A.size, family.K))
    grad[:, 0] = 2.0 * A * vol
    grad[:, 1] = -family.d * A**2 * vol / w
    return value, grad.ravel()


# ---------------------------------------------------------------------------
# tanh network on a periodic interval
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TanhNetwork:
    """``u(x) = sum_i A_i tanh(w_i sin(pi x / ell + c_i) + d_i)`` on ``[-ell, ell]``.

    Mode layout is ``(A, w, c, d)``.  The inner sine makes every state
    exactly ``2 ell``-periodic.
    """

    ell: float
    K = 4

    @property
    def periodic(self) -> tuple[float, float]:
        return (-self.ell, self.ell)

    def split(self, q):
        m = _as_state(q, self.K).modes()
        return m[:, 0], m[:, 1], m[:, 2], m[:, 3]

    def _parts(self, x, q):
        A, w, c, d = self.split(q)
        x = np.asarray(x, dtype=float).reshape(-1)
        theta = (np.pi / self.ell) * x[:, None] + c[None, :]
        s = np.sin(theta)
        co = np.cos(theta)
        T = np.tanh(w[None, :] * s + d[None, :])
        return A, w, s, co, T

    def evaluate(self, x, q) -> np.ndarray:
        A, w, s, co, T = self._parts(x, q)
        return T @ A

    def jacobian(self, x, q) -> np.ndarray:
        A, w, s, co, T = self._parts(x, q)
        sech2 = 1.0 - T**2
        N, r = T.shape
        J = np.empty((N, r, 4))
        J[:, :, 0] = T
        J[:, :, 1] = A * sech2 * s
        J[:, :, 2] = A * sech2 * w * co
        J[:, :, 3] = A * sech2
        return J.reshape(N, 4 * r)

    def derivatives(self, x, q, order: int = 4) -> np.ndarray:
        """Rows ``u, u_x, ..., d^order u / dx^order`` at the points (order <= 4)."""
        if not 0 <= order <= 4:
            raise ValueError("tanh network derivatives are implemented up to order 4")
        A, w, s, co, T = self._parts(x, q)
        k = np.pi / self.ell
        S = 1.0 - T**2
        # z = w sin(theta) + d and its x-derivatives
        z1 = w * k * co
        z2 = -w * k**2 * s
        z3 = -w * k**3 * co
        z4 = w * k**4 * s
        # tanh derivatives in z
        T1 = S
        T2 = -2.0 * T * S
        T3 = (6.0 * T**2 - 2.0) * S
        T4 = (16.0 * T - 24.0 * T**3) * S
        out = np.empty((order + 1, T.shape[0]))
        out[0] = T @ A
        terms = [
            T1 * z1,
            T2 * z1**2 + T1 * z2,
            T3 * z1**3 + 3.0 * T2 * z1 * z2 + T1 * z3,
            T4 * z1**4 + 6.0 * T3 * z1**2 * z2 + T2 * (3.0 * z2**2 + 4.0 * z1 * z3) + T1 * z4,
        ]
        for m in range(1, order + 1):
            out[m] = terms[m - 1] @ A
        return out


# ---------------------------------------------------------------------------
# linear (Galerkin) family
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FourierGalerkin:
    """Linear combination of fixed orthonormal Fourier modes on ``[-ell, ell]``.

    Mode 0 is the constant ``1/sqrt(2 ell)``; modes ``2k-1, 2k`` are
    ``cos(k pi x/ell)/sqrt(ell)`` and ``sin(k pi x/ell)/sqrt(ell)``.  Each
    mode carries a single coefficient, so ``K = 1``.
    """

    ell: float
    n_modes: int
    K = 1

    @property
    def periodic(self) -> tuple[float, float]:
        return (-self.ell, self.ell)

    def wavenumbers(self) -> np.ndarray:
        j = np.arange(self.n_modes)
        return np.where(j == 0, 0, (j + 1) // 2) * np.pi / self.ell

    def basis(self, x, order: int = 0) -> np.ndarray:
        """``(N, n_modes)`` values of the ``order``-th x-derivative of each mode."""
        x = np.asarray(x, dtype=float).reshape(-1)
        j = np.arange(self.n_modes)
        k = self.wavenumbers()
        phase = k[None, :] * x[:, None]
        # d^m/dx^m cos = k^m cos(. + m pi/2), same shift for sin
        shift = order * np.pi / 2
        cos_part = np.cos(phase + shift) / np.sqrt(self.ell)
        sin_part = np.sin(phase + shift) / np.sqrt(self.ell)
        B = np.where(j % 2 == 1, cos_part, sin_part) * k[None, :] ** order
        B[:, 0] = 1.0 / np.sqrt(2 * self.ell) if order == 0 else 0.0
        return B

    def evaluate(self, x, q) -> np.ndarray:
        return self.basis(x) @ _as_state(q, 1).values

    def jacobian(self, x, q) -> np.ndarray:
        _as_state(q, 1)
        return self.basis(x)

    def derivatives(self, x, q, order: int = 2) -> np.ndarray:
        v = _as_state(q, 1).values
        return np.stack([self.basis(x, m) @ v for m in range(order + 1)])


# ---------------------------------------------------------------------------
# PDE right-hand sides
# ---------------------------------------------------------------------------


def harmonic_trap_forcing(t):
    """Trap centre ``a(t) = 1.25 (sin(pi t) + 1.5)``."""
    return 1.25 * (np.sin(np.pi * t) + 1.5)


@dataclass(frozen=True)
class FokkerPlanck:
    """Fokker-Planck operator of ``d`` interacting particles in a moving harmonic trap.

    Drift ``b_i(x) = a(t) - x_i + (alpha/d) sum_j (x_j - x_i)``, diffusion ``nu``.
    """

    d: int
    alpha: float = 0.25
    nu: float = 0.01
    forcing: Callable[[float], float] = field(default=harmonic_trap_forcing)

    explicit_time = True
    orders = (0, 1, 2)

    @property
    def drift_trace(self) -> float:
        """``tr(B)`` for the linear drift ``b = a 1 - B x``; equals ``-div b``."""
        return self.d + self.alpha * (self.d - 1)

    def drift(self, x, t) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        mean = x.mean(axis=1, keepdims=True)
        return self.forcing(t) - (1.0 + self.alpha) * x + self.alpha * mean

    def __call__(self, family: GaussianMixture, x, t, q) -> np.ndarray:
        if not isinstance(family, GaussianMixture):
            raise TypeError("the Fokker-Planck operator is implemented for Gaussian mixtures")
        x = family._points(x)
        p = family.evaluate(x, q)
        grad = family.gradient(x, q)
        lap = family.laplacian(x, q)
        b = self.drift(x, t)
        return self.drift_trace * p - np.einsum("nd,nd->n", b, grad) + self.nu * lap


@dataclass(frozen=True)
class KuramotoSivashinsky:
    """``F(u) = -u u_x - u_xx - u_xxxx``."""

    explicit_time = False
    orders = (0, 1, 2, 4)

    def __call__(self, family, x, t, q) -> np.ndarray:
        D = family.derivatives(x, q, order=4)
        return -D[0] * D[1] - D[2] - D[4]


@dataclass(frozen=True)
class Heat:
    """``F(u) = nu u_xx``; linear test operator for the Galerkin special case."""

    nu: float = 1.0
    explicit_time = False
    orders = (2,)

    def __call__(self, family, x, t, q) -> np.ndarray:
        return self.nu * family.derivatives(x, q, order=2)[2]

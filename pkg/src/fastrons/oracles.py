"""Reference solutions that share no code path with the reduced-order solvers.

* Moment equations of the harmonic-trap SDE (mean and second moments), solved
  with a high-order scipy integrator at tight tolerance.
* A Fourier pseudo-spectral Kuramoto-Sivashinsky solver (ETDRK4, 2/3 rule).
* Gauss-Hermite and periodic trapezoid quadrature for inner products.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .ansatz import GaussianMixture, ParameterState, SingularParameterError, harmonic_trap_forcing


# ---------------------------------------------------------------------------
# Fokker-Planck moments
# ---------------------------------------------------------------------------


@dataclass
class MomentState:
    """Mean ``X`` and second-moment matrix ``S = E[x x^T]``."""

    mean: np.ndarray
    second: np.ndarray

    @property
    def covariance(self) -> np.ndarray:
        return self.second - np.outer(self.mean, self.mean)

    def pack(self) -> np.ndarray:
        return np.concatenate([self.mean, self.second.ravel()])

    @classmethod
    def unpack(cls, y, d: int) -> "MomentState":
        y = np.asarray(y, dtype=float)
        return cls(y[:d].copy(), y[d:].reshape(d, d).copy())

    @classmethod
    def gaussian(cls, mean, cov) -> "MomentState":
        mean = np.asarray(mean, dtype=float)
        return cls(mean, np.asarray(cov, dtype=float) + np.outer(mean, mean))


def fp_moment_rhs(t, state: MomentState, alpha: float = 0.25, nu: float = 0.01,
                  forcing: Callable = harmonic_trap_forcing) -> MomentState:
    """Time derivative of the first and second moments of the trap SDE."""
    X, S = state.mean, state.second
    d = X.size
    a = float(forcing(t))
    dX = a - X + (alpha / d) * (X.sum() - d * X)
    row = S.sum(axis=0)
    dS = (
        a * (X[:, None] + X[None, :])
        - 2.0 * (1.0 + alpha) * S
        + (alpha / d) * (row[None, :] + row[:, None])
        + 2.0 * nu * np.eye(d)
    )
    return MomentState(dX, dS)


@dataclass
class MomentTrajectory:
    t: np.ndarray
    mean: np.ndarray  # (T, d)
    second: np.ndarray  # (T, d, d)

    @property
    def covariance(self) -> np.ndarray:
        return self.second - np.einsum("ti,tj->tij", self.mean, self.mean)


def integrate_moments(initial: MomentState, t_eval, alpha: float = 0.25, nu: float = 0.01,
                      forcing: Callable = harmonic_trap_forcing, rtol: float = 1e-12,
                      atol: float = 1e-14) -> MomentTrajectory:
    """Integrate the moment equations with scipy's DOP853 and sample at ``t_eval``."""
    d = initial.mean.size
    t_eval = np.asarray(t_eval, dtype=float)

    def rhs(t, y):
        return fp_moment_rhs(t, MomentState.unpack(y, d), alpha, nu, forcing).pack()

    sol = solve_ivp(rhs, (t_eval[0], t_eval[-1]), initial.pack(), method="DOP853",
                    t_eval=t_eval, rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"moment integration failed: {sol.message}")
    Y = sol.y.T
    second = Y[:, d:].reshape(-1, d, d)
    second = 0.5 * (second + second.transpose(0, 2, 1))
    return MomentTrajectory(sol.t, Y[:, :d], second)


def mixture_moments(family: GaussianMixture, q, normalize: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of the mixture density.

    With ``normalize=True`` the moments are those of ``u / I_1``.  With
    ``normalize=False`` they are taken from ``u`` itself, ``mean = int x u dx``
    and ``cov = int x x^T u dx - mean mean^T``, so a drift of the total
    probability shows up in the moments.
    """
    values = q.values if isinstance(q, ParameterState) else np.asarray(q, dtype=float)
    A, w, C = family.split(values)
    if np.any(w == 0):
        raise SingularParameterError("zero width")
    d = family.d
    mass = A**2 * (np.pi / w**2) ** (d / 2)
    total = mass.sum()
    if total == 0:
        raise SingularParameterError("mixture has zero total probability")
    p = mass / total if normalize else mass
    mean = p @ C
    second = np.einsum("i,ik,il->kl", p, C, C) + np.eye(d) * np.sum(p / (2 * w**2))
    return mean, second - np.outer(mean, mean)


def sample_mixture(family: GaussianMixture, q, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` points from the normalised mixture density."""
    A, w, C = family.split(np.asarray(q, dtype=float))
    mass = A**2 * (np.pi / w**2) ** (family.d / 2)
    comp = rng.choice(len(A), size=n, p=mass / mass.sum())
    return C[comp] + rng.standard_normal((n, family.d)) / np.sqrt(2 * w[comp] ** 2)[:, None]


# ---------------------------------------------------------------------------
# Kuramoto-Sivashinsky DNS
# ---------------------------------------------------------------------------


class BlowUpError(RuntimeError):
    pass


@dataclass
class SpectralField:
    """Real field on ``[-ell, ell)`` stored as ``rfft`` coefficients."""

    coeffs: np.ndarray
    ell: float
    mask: np.ndarray

    @property
    def n(self) -> int:
        return 2 * (self.coeffs.size - 1)

    def grid_values(self) -> np.ndarray:
        return np.fft.irfft(self.coeffs, n=self.n)


def ks_grid(ell: float, n: int) -> np.ndarray:
    return -ell + 2.0 * ell * np.arange(n) / n


def dealias_mask(n: int) -> np.ndarray:
    """Keep wavenumber indices ``|j| < n/3`` (2/3 rule)."""
    j = np.arange(n // 2 + 1)
    return j < n / 3.0


def _etdrk4_coefficients(L: np.ndarray, dt: float, contour: int = 32):
    E = np.exp(dt * L)
    E2 = np.exp(dt * L / 2)
    roots = np.exp(1j * np.pi * (np.arange(1, contour + 1) - 0.5) / contour)
    LR = dt * L[:, None] + roots[None, :]
    Q = dt * np.real(np.mean((np.exp(LR / 2) - 1) / LR, axis=1))
    f1 = dt * np.real(np.mean((-4 - LR + np.exp(LR) * (4 - 3 * LR + LR**2)) / LR**3, axis=1))
    f2 = dt * np.real(np.mean((2 + LR + np.exp(LR) * (-2 + LR)) / LR**3, axis=1))
    f3 = dt * np.real(np.mean((-4 - 3 * LR - LR**2 + np.exp(LR) * (4 - LR)) / LR**3, axis=1))
    return E, E2, Q, f1, f2, f3


@dataclass
class DnsResult:
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray  # (T, N)
    dt: float
    n_modes: int

    def to_csv(self, path) -> None:
        export_snapshots_csv(path, self.t, self.x, self.u)


def export_snapshots_csv(path, t, x, u) -> None:
    """One row per time: ``t, u(x_0), ..., u(x_{N-1})``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x={xi:.17g}" for xi in x])
        for ti, row in zip(t, u):
            w.writerow([f"{ti:.17g}"] + [f"{v:.17g}" for v in row])


def ks_dns(u0, t_eval, ell: float = 10.0, dt: float = 1e-3, linear: bool = True,
           nonlinear: bool = True, blowup: float = 1e6) -> DnsResult:
    """Pseudo-spectral solution of ``u_t = -u u_x - u_xx - u_xxxx`` on ``[-ell, ell)``.

    ``u0`` holds grid values on the ``n`` equidistant points ``ks_grid(ell, n)``.
    Time stepping is ETDRK4 with fixed step ``dt``; ``t_eval`` times are hit by
    shortening the step that would overshoot them.  ``linear`` / ``nonlinear``
    switch the two parts of the operator off for diagnostics.
    """
    u0 = np.asarray(u0, dtype=float)
    n = u0.size
    t_eval = np.asarray(t_eval, dtype=float)
    if np.any(np.diff(t_eval) < 0) or t_eval[0] < 0:
        raise ValueError("t_eval must be non-negative and sorted")
    k = np.pi / ell * np.arange(n // 2 + 1)
    L = (k**2 - k**4) if linear else np.zeros_like(k)
    g = -0.5j * k if nonlinear else np.zeros_like(k, dtype=complex)
    mask = dealias_mask(n)
    v = np.fft.rfft(u0) * mask

    def Nl(v):
        return g * np.fft.rfft(np.fft.irfft(v, n=n) ** 2) * mask

    cache = {}

    def coeffs(h):
        key = round(h, 15)
        if key not in cache:
            cache[key] = _etdrk4_coefficients(L.astype(complex), h)
        return cache[key]

    def step(v, h):
        E, E2, Q, f1, f2, f3 = coeffs(h)
        Nv = Nl(v)
        a = E2 * v + Q * Nv
        Na = Nl(a)
        b = E2 * v + Q * Na
        Nb = Nl(b)
        c = E2 * a + Q * (2 * Nb - Nv)
        Nc = Nl(c)
        return (E * v + Nv * f1 + 2 * (Na + Nb) * f2 + Nc * f3) * mask

    out = np.empty((t_eval.size, n))
    t = 0.0
    for idx, te in enumerate(t_eval):
        n_full = int(np.floor((te - t) / dt + 1e-9))
        for _ in range(n_full):
            v = step(v, dt)
        t += n_full * dt
        rem = te - t
        if rem > 1e-12:
            v = step(v, rem)
        t = te
        u = np.fft.irfft(v, n=n)
        nrm = np.sqrt(2 * ell / n) * np.linalg.norm(u)
        if not np.isfinite(nrm) or nrm > blowup:
            raise BlowUpError(f"DNS norm {nrm:.3e} exceeded {blowup:.1e} at t={te}")
        out[idx] = u
    return DnsResult(t_eval.copy(), ks_grid(ell, n), out, dt, n)


def spectral_resample(u, n_new: int) -> np.ndarray:
    """Band-limited interpolation of periodic grid values onto ``n_new`` points."""
    u = np.asarray(u, dtype=float)
    n = u.shape[-1]
    c = np.fft.rfft(u, axis=-1)
    c_new = np.zeros(u.shape[:-1] + (n_new // 2 + 1,), dtype=complex)
    m = min(c.shape[-1], c_new.shape[-1])
    c_new[..., :m] = c[..., :m]
    return np.fft.irfft(c_new, n=n_new, axis=-1) * (n_new / n)


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussHermite:
    """Tensor Gauss-Hermite rule for ``int_{R^d} f(x) dx``.

    Nodes are placed for the weight ``exp(-scale |x - center|^2)``; the weight
    is divided back out, so the rule is exact for ``polynomial * weight``
    integrands up to the node count's degree.
    """

    nodes: int
    d: int
    center: tuple | np.ndarray | None = None
    scale: float = 1.0
    domain = "unbounded"

    def points_weights(self):
        y, wt = np.polynomial.hermite.hermgauss(self.nodes)
        grids = np.meshgrid(*([y] * self.d), indexing="ij")
        Y = np.stack([g.ravel() for g in grids], axis=1)
        W = np.ones(Y.shape[0])
        for g in np.meshgrid(*([wt] * self.d), indexing="ij"):
            W = W * g.ravel()
        c = np.zeros(self.d) if self.center is None else np.asarray(self.center, dtype=float)
        root = np.sqrt(self.scale)
        X = c + Y / root
        W = W * np.exp(np.sum(Y**2, axis=1)) / root**self.d
        return X, W


@dataclass(frozen=True)
class PeriodicTrapezoid:
    """Equispaced rule on ``[-ell, ell)``; spectrally accurate for smooth periodic integrands."""

    nodes: int
    ell: float
    d: int = 1
    domain = "periodic"

    def points_weights(self):
        x = ks_grid(self.ell, self.nodes)
        return x[:, None], np.full(self.nodes, 2 * self.ell / self.nodes)


@dataclass(frozen=True)
class Integrand:
    fn: Callable[[np.ndarray], np.ndarray]
    d: int
    domain: str = "unbounded"


def quadrature_inner_product(integrand: Integrand, scheme) -> np.ndarray | float:
    """Apply ``scheme`` to ``integrand.fn`` evaluated on ``(N, d)`` points.

    The integrand may return ``(N,)`` or ``(N, ...)``; the result has the
    trailing shape.
    """
    if integrand.domain != scheme.domain:
        raise ValueError(f"scheme for {scheme.domain} domains cannot integrate over {integrand.domain}")
    if integrand.d != scheme.d:
        raise ValueError(f"dimension mismatch: integrand d={integrand.d}, scheme d={scheme.d}")
    X, W = scheme.points_weights()
    vals = np.asarray(integrand.fn(X))
    return np.tensordot(W, vals, axes=(0, 0))


def _pair_rule(family, Ai_mode, Aj_mode, nodes):
    d = family.d
    ai, aj = Ai_mode[1] ** 2, Aj_mode[1] ** 2
    s = ai + aj
    m = (ai * Ai_mode[2:] + aj * Aj_mode[2:]) / s
    return GaussHermite(nodes, d, tuple(m), s)


def quadrature_metric(family: GaussianMixture, q, nodes: int = 8) -> np.ndarray:
    """Brute-force ``M_jk = <du/dq_j, du/dq_k>``: one adapted Gauss-Hermite rule per mode pair."""
    modes = np.asarray(q, dtype=float).reshape(-1, family.K)
    r, K = modes.shape
    M = np.zeros((r * K, r * K))
    for i in range(r):
        for j in range(r):
            rule = _pair_rule(family, modes[i], modes[j], nodes)

            def fn(X, i=i, j=j):
                Ji = family.jacobian(X, modes[i])
                Jj = family.jacobian(X, modes[j])
                return Ji[:, :, None] * Jj[:, None, :]

            M[i * K:(i + 1) * K, j * K:(j + 1) * K] = quadrature_inner_product(
                Integrand(fn, family.d), rule
            )
    return M


def quadrature_rhs(family: GaussianMixture, operator, q, t: float, nodes: int = 8) -> np.ndarray:
    """Brute-force ``f_j = <du/dq_j, F(u)>`` using linearity of ``F`` over the modes."""
    modes = np.asarray(q, dtype=float).reshape(-1, family.K)
    r, K = modes.shape
    f = np.zeros(r * K)
    for i in range(r):
        for j in range(r):
            rule = _pair_rule(family, modes[i], modes[j], nodes)

            def fn(X, i=i, j=j):
                return family.jacobian(X, modes[i]) * operator(family, X, t, modes[j])[:, None]

            f[i * K:(i + 1) * K] += quadrature_inner_product(Integrand(fn, family.d), rule)
    return f

"""Closed-form L2 inner products for the Gaussian-mixture / Fokker-Planck pair.

Every metric entry is ``<du/dq_(i,a), du/dq_(j,b)>`` for slots ``a <= b`` of
modes ``i`` and ``j``; the entry with the slots exchanged is the same
expression with the two modes exchanged.  Every right-hand-side entry is
``sum_j <du/dq_(i,a), F(phi_j)>`` because the Fokker-Planck operator is
linear.  All evaluators are vectorised over the ``(r, r)`` grid of ordered
mode pairs.  Derivations are in ``docs/kernels.md``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

SLOT_A, SLOT_W = 0, 1


def slot_names(d: int) -> list[str]:
    return ["A", "w"] + [f"c{k}" for k in range(d)]


@dataclass
class PairGeometry:
    """Shared quantities of the product ``g_i g_j`` for all ordered pairs.

    ``g_i g_j = G * exp(-s |x - m|^2)`` up to normalisation, with
    ``s = w_i^2 + w_j^2`` and ``m = (w_i^2 c_i + w_j^2 c_j) / s``.
    ``u = m - c_i`` and ``v = m - c_j``; ``sig2 = 1 / (2 s)`` is the variance
    of each coordinate under the product Gaussian.
    """

    d: int
    Ai: np.ndarray
    Aj: np.ndarray
    wi: np.ndarray
    wj: np.ndarray
    ai: np.ndarray
    aj: np.ndarray
    s: np.ndarray
    sig2: np.ndarray
    G: np.ndarray
    m: np.ndarray
    u: np.ndarray
    v: np.ndarray
    uu: np.ndarray
    vv: np.ndarray
    uv: np.ndarray

    @classmethod
    def from_modes(cls, modes: np.ndarray) -> "PairGeometry":
        modes = np.asarray(modes, dtype=float)
        d = modes.shape[1] - 2
        A, w, C = modes[:, 0], modes[:, 1], modes[:, 2:]
        a = w**2
        ai, aj = a[:, None], a[None, :]
        s = ai + aj
        delta = C[:, None, :] - C[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", delta, delta)
        G = (np.pi / s) ** (d / 2.0) * np.exp(-ai * aj * d2 / s)
        m = (ai[..., None] * C[:, None, :] + aj[..., None] * C[None, :, :]) / s[..., None]
        u = -(aj / s)[..., None] * delta
        v = (ai / s)[..., None] * delta
        return cls(
            d=d,
            Ai=A[:, None],
            Aj=A[None, :],
            wi=w[:, None],
            wj=w[None, :],
            ai=ai,
            aj=aj,
            s=s,
            sig2=0.5 / s,
            G=G,
            m=m,
            u=u,
            v=v,
            uu=np.einsum("ijk,ijk->ij", u, u),
            vv=np.einsum("ijk,ijk->ij", v, v),
            uv=np.einsum("ijk,ijk->ij", u, v),
        )


@dataclass
class DriftPolynomial:
    """``F(phi_j) / phi_j = p0 + p1.y + y^T P2 y`` in the pair frame ``x = m + y``.

    Only ``tr(P2)`` is needed because odd and off-diagonal Gaussian moments vanish.
    """

    p0: np.ndarray
    p1: np.ndarray
    trP2: np.ndarray

    @classmethod
    def build(cls, geo: PairGeometry, a_t: float, alpha: float, nu: float) -> "DriftPolynomial":
        d = geo.d
        trB = d + alpha * (d - 1)
        # B z = (1 + alpha) z - alpha mean(z) 1
        Bm = (1.0 + alpha) * geo.m - alpha * geo.m.mean(axis=-1, keepdims=True)
        Bv = (1.0 + alpha) * geo.v - alpha * geo.v.mean(axis=-1, keepdims=True)
        beta0 = a_t - Bm
        aj = geo.aj
        p0 = trB + 2.0 * aj * np.einsum("ijk,ijk->ij", beta0, geo.v) + nu * (
            4.0 * aj**2 * geo.vv - 2.0 * d * aj
        )
        p1 = 2.0 * aj[..., None] * (beta0 - Bv) + 8.0 * nu * (aj**2)[..., None] * geo.v
        trP2 = -2.0 * aj * trB + 4.0 * nu * d * aj**2
        return cls(p0=p0, p1=p1, trP2=trP2)


# ---------------------------------------------------------------------------
# metric kernels
# ---------------------------------------------------------------------------


def _k_AA(g: PairGeometry):
    return 4.0 * g.Ai * g.Aj * g.G


def _k_Aw(g: PairGeometry):
    return -4.0 * g.Ai * g.wj * g.Aj**2 * (g.vv + g.d * g.sig2) * g.G


def _make_k_Ac(l: int):
    def k_Ac(g: PairGeometry):
        return 4.0 * g.Ai * g.aj * g.Aj**2 * g.v[..., l] * g.G

    return k_Ac


def _k_ww(g: PairGeometry):
    d, s2 = g.d, g.sig2
    moment = (d * d + 2 * d) * s2**2 + d * s2 * (g.uu + g.vv) + 4.0 * s2 * g.uv + g.uu * g.vv
    return 4.0 * g.wi * g.wj * g.Ai**2 * g.Aj**2 * moment * g.G


def _make_k_wc(l: int):
    def k_wc(g: PairGeometry):
        moment = g.v[..., l] * (g.d * g.sig2 + g.uu) + 2.0 * g.sig2 * g.u[..., l]
        return -4.0 * g.wi * g.Ai**2 * g.aj * g.Aj**2 * moment * g.G

    return k_wc


def _make_k_cc(k: int, l: int):
    delta = 1.0 if k == l else 0.0

    def k_cc(g: PairGeometry):
        moment = delta * g.sig2 + g.u[..., k] * g.v[..., l]
        return 4.0 * g.ai * g.aj * g.Ai**2 * g.Aj**2 * moment * g.G

    return k_cc


# ---------------------------------------------------------------------------
# right-hand-side kernels (before the sum over j)
# ---------------------------------------------------------------------------


def _f_A(g: PairGeometry, P: DriftPolynomial):
    return 2.0 * g.Ai * g.Aj**2 * (P.p0 + g.sig2 * P.trP2) * g.G


def _f_w(g: PairGeometry, P: DriftPolynomial):
    s2 = g.sig2
    moment = (
        P.p0 * (g.d * s2 + g.uu)
        + 2.0 * s2 * np.einsum("ijk,ijk->ij", g.u, P.p1)
        + ((g.d + 2) * s2**2 + g.uu * s2) * P.trP2
    )
    return -2.0 * g.wi * g.Ai**2 * g.Aj**2 * moment * g.G


def _make_f_c(k: int):
    def f_c(g: PairGeometry, P: DriftPolynomial):
        moment = g.u[..., k] * (P.p0 + g.sig2 * P.trP2) + g.sig2 * P.p1[..., k]
        return 2.0 * g.ai * g.Ai**2 * g.Aj**2 * moment * g.G

    return f_c


@dataclass(frozen=True)
class Kernel:
    slots: tuple
    fn: Callable
    name: str


@dataclass
class KernelTable:
    """The ``K(K+1)/2`` metric kernels and ``K`` right-hand-side kernels for dimension ``d``."""

    d: int
    metric: dict = field(init=False)
    rhs: list = field(init=False)
    invoked: set = field(init=False, default_factory=set)

    def __post_init__(self):
        d = self.d
        names = slot_names(d)
        metric = {(0, 0): _k_AA, (0, 1): _k_Aw, (1, 1): _k_ww}
        for l in range(d):
            metric[(0, 2 + l)] = _make_k_Ac(l)
            metric[(1, 2 + l)] = _make_k_wc(l)
            for k in range(l + 1):
                metric[(2 + k, 2 + l)] = _make_k_cc(k, l)
        self.metric = {
            ab: Kernel(ab, fn, f"<d{names[ab[0]]}_i, d{names[ab[1]]}_j>")
            for ab, fn in sorted(metric.items())
        }
        rhs = [_f_A, _f_w] + [_make_f_c(k) for k in range(d)]
        self.rhs = [Kernel((a,), fn, f"<d{names[a]}_i, F>") for a, fn in enumerate(rhs)]

    @property
    def K(self) -> int:
        return self.d + 2

    def __len__(self) -> int:
        return len(self.metric) + len(self.rhs)

    def metric_blocks(self, modes: np.ndarray) -> np.ndarray:
        """Assemble the full metric tensor by substituting every mode pair."""
        modes = np.asarray(modes, dtype=float)
        r, K = modes.shape
        geo = PairGeometry.from_modes(modes)
        M = np.empty((r * K, r * K))
        for (a, b), ker in self.metric.items():
            self.invoked.add(ker.name)
            V = ker.fn(geo)
            M[a::K, b::K] = V
            M[b::K, a::K] = V.T
        # a == b blocks were written twice; keep the upper triangle and mirror it
        return np.triu(M) + np.triu(M, 1).T

    def rhs_blocks(self, modes: np.ndarray, a_t: float, alpha: float, nu: float) -> np.ndarray:
        modes = np.asarray(modes, dtype=float)
        r, K = modes.shape
        geo = PairGeometry.from_modes(modes)
        P = DriftPolynomial.build(geo, a_t, alpha, nu)
        f = np.empty((r, K))
        for a, ker in enumerate(self.rhs):
            self.invoked.add(ker.name)
            f[:, a] = ker.fn(geo, P).sum(axis=1)
        return f.ravel()

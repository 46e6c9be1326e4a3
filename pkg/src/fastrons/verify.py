"""Oracle and property suites behind ``fastrons verify``.

Each check returns ``(name, passed, detail)``.  The same functions back the
acceptance tests, so the thresholds here are the contract values.
"""
from __future__ import annotations

from typing import Callable, Iterator

import numpy as np

from .ansatz import FokkerPlanck, GaussianMixture
from .gaussian_kernels import DriftPolynomial, PairGeometry
from .integrators import IntegratorConfig, integrate
from .oracles import GaussHermite, Integrand, quadrature_inner_product, quadrature_metric
from .solvers import (
    RegularizationConfig,
    condition_diagnostics,
    kkt_solve,
    pinv,
    pinv_solve,
    solve_regularized_crons,
    solve_regularized_rons,
)
from .srons import assemble_metric_symbolic, kernel_table

Check = tuple[str, bool, str]


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


def random_gaussian_mode(rng, d: int) -> np.ndarray:
    A = rng.uniform(0.5, 2.0) * rng.choice([-1.0, 1.0])
    w = rng.uniform(0.7, 2.0) * rng.choice([-1.0, 1.0])
    return np.concatenate([[A, w], rng.normal(0.0, 0.5, d)])


def kernel_oracle_errors(d: int = 8, draws: int = 100, seed: int = 0, nodes: int = 4,
                         a_t: float = 2.0, alpha: float = 0.25, nu: float = 0.01) -> dict[str, float]:
    """Worst relative error of every closed-form kernel against Gauss-Hermite quadrature.

    For each draw two random modes ``i, j`` are generated; metric kernel
    ``(a, b)`` is compared to ``int du/dq_a^(i) du/dq_b^(j) dx`` and rhs
    kernel ``a`` to ``int du/dq_a^(i) F(u^(j)) dx`` on a tensor rule adapted
    to the product Gaussian (exact for these polynomial-times-Gaussian
    integrands once ``nodes >= 3``).
    """
    table = kernel_table(d)
    family = GaussianMixture(d)
    op = FokkerPlanck(d, alpha, nu, forcing=lambda t: a_t)
    rng = np.random.default_rng(seed)
    worst = {ker.name: 0.0 for ker in table.metric.values()}
    worst.update({ker.name: 0.0 for ker in table.rhs})
    for _ in range(draws):
        mi, mj = random_gaussian_mode(rng, d), random_gaussian_mode(rng, d)
        modes = np.stack([mi, mj])
        geo = PairGeometry.from_modes(modes)
        P = DriftPolynomial.build(geo, a_t, alpha, nu)
        ai, aj = mi[1] ** 2, mj[1] ** 2
        rule = GaussHermite(nodes, d, tuple((ai * mi[2:] + aj * mj[2:]) / (ai + aj)), ai + aj)

        def metric_integrand(X):
            Ji = family.jacobian(X, mi)
            Jj = family.jacobian(X, mj)
            return Ji[:, :, None] * Jj[:, None, :]

        def rhs_integrand(X):
            return family.jacobian(X, mi) * op(family, X, 0.0, mj)[:, None]

        Mo = quadrature_inner_product(Integrand(metric_integrand, d), rule)
        fo = quadrature_inner_product(Integrand(rhs_integrand, d), rule)
        for (a, b), ker in table.metric.items():
            val = ker.fn(geo)[0, 1]
            ref = Mo[a, b]
            worst[ker.name] = max(worst[ker.name], abs(val - ref) / abs(ref))
        for a, ker in enumerate(table.rhs):
            val = ker.fn(geo, P)[0, 1]
            ref = fo[a]
            worst[ker.name] = max(worst[ker.name], abs(val - ref) / abs(ref))
    return worst


def block_assembly_error(d: int = 2, r: int = 3, seed: int = 1, nodes: int = 12) -> float:
    """Frobenius relative error of the assembled metric against brute-force quadrature."""
    rng = np.random.default_rng(seed)
    family = GaussianMixture(d)
    q = np.concatenate([random_gaussian_mode(rng, d) for _ in range(r)])
    M = assemble_metric_symbolic(family, q)
    Mq = quadrature_metric(family, q, nodes)
    return float(np.linalg.norm(M - Mq) / np.linalg.norm(Mq))


def kernel_invocations(d: int = 8, rs=(2, 30), seed: int = 2) -> dict[int, int]:
    """Distinct kernel evaluators used to assemble ``M`` and ``f`` for each ``r``."""
    from .gaussian_kernels import KernelTable

    rng = np.random.default_rng(seed)
    counts = {}
    for r in rs:
        table = KernelTable(d)
        modes = np.stack([random_gaussian_mode(rng, d) for _ in range(r)])
        table.metric_blocks(modes)
        table.rhs_blocks(modes, 2.0, 0.25, 0.01)
        counts[r] = len(table.invoked)
    return counts


def suite_kernels(draws: int = 100) -> Iterator[Check]:
    for d in (1, 2, 8):
        K = d + 2
        n = len(kernel_table(d))
        yield f"table size d={d}", n == K * (K + 3) // 2, f"{n} == {K * (K + 3) // 2}"
    counts = kernel_invocations()
    yield "distinct kernels invoked, r=2 and r=30", all(c == 65 for c in counts.values()), str(counts)
    worst = kernel_oracle_errors(8, draws)
    top = max(worst.values())
    name = max(worst, key=worst.get)
    yield f"65 kernels vs Gauss-Hermite ({draws} draws)", top < 1e-8, f"max rel err {top:.2e} ({name})"
    err = block_assembly_error()
    yield "assembled M vs quadrature (r=3, d=2)", err < 1e-8, f"Frobenius rel err {err:.2e}"


# ---------------------------------------------------------------------------
# solver identities
# ---------------------------------------------------------------------------


def random_matrix(rng, shape, kappa: float) -> np.ndarray:
    """Random matrix with prescribed singular values spread over ``[1/kappa, 1]``."""
    p, n = shape
    k = min(p, n)
    U, _ = np.linalg.qr(rng.standard_normal((p, k)))
    V, _ = np.linalg.qr(rng.standard_normal((n, k)))
    s = np.logspace(0, -np.log10(kappa), k)
    return (U * s) @ V.T


def equivalence_errors(instances: int = 50, seed: int = 3) -> list[tuple[float, float]]:
    """``(rel. error between Mbar solve and pinv solve, kappa(Mt))`` per instance."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(instances):
        n = int(rng.integers(3, 30))
        N = int(rng.integers(n + 1, 4 * n + 2))
        kappa = 10 ** rng.uniform(0, 4)
        Mt = random_matrix(rng, (N, n), kappa)
        ft = rng.standard_normal(N)
        scale = rng.uniform(0.5, 20.0) / N
        Mbar = scale * Mt.T @ Mt
        fbar = scale * Mt.T @ ft
        q_mc = np.linalg.solve(Mbar, fbar)
        q_c = pinv_solve(Mt, ft)
        k = condition_diagnostics(Mt)[0]
        out.append((float(np.linalg.norm(q_mc - q_c) / np.linalg.norm(q_c)), k))
    return out


def conditioning_errors(instances: int = 50, seed: int = 4, max_kappa: float = 1e6,
                        digits: int | None = 40) -> list[float]:
    """``|kappa(A^T A) / kappa(A)^2 - 1|`` on random matrices with ``kappa(A) <= max_kappa``.

    ``kappa(A)`` comes from the float64 SVD.  With ``digits`` set, ``A^T A`` is
    formed and diagonalised in that many decimal digits (mpmath); with
    ``digits=None`` it is formed in float64, where the product and its
    eigen-decomposition carry an absolute error of about ``eps * sigma_max^2``
    and the measured ratio is off by roughly ``eps * kappa^2``.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(instances):
        n = int(rng.integers(2, 30))
        p = int(rng.integers(n, 4 * n + 1))
        A = random_matrix(rng, (p, n), 10 ** rng.uniform(0, np.log10(max_kappa)))
        kA = condition_diagnostics(A)[0]
        kAA = condition_diagnostics(A.T @ A)[0] if digits is None else _exact_gram_condition(A, digits)
        out.append(abs(kAA / kA**2 - 1.0))
    return out


def _exact_gram_condition(A: np.ndarray, digits: int) -> float:
    import mpmath

    with mpmath.workdps(digits):
        Am = mpmath.matrix(A.tolist())
        ev = mpmath.eigsy(Am.T * Am, eigvals_only=True)
        ev = sorted(ev[i] for i in range(len(ev)))
        return float(ev[-1] / ev[0])


def stationarity_residuals(instances: int = 50, seed: int = 5) -> list[tuple[float, float, float]]:
    """``(KKT residual, max constraint product, min eig of C)`` of regularized constrained solves.

    Half of the instances use a rank-deficient ``M``.
    """
    rng = np.random.default_rng(seed)
    out = []
    for k in range(instances):
        n = int(rng.integers(3, 20))
        m = int(rng.integers(1, min(n, 4) + 1))
        rank = n if k % 2 == 0 else int(rng.integers(0, n))
        B = rng.standard_normal((n, rank))
        M = B @ B.T / max(rank, 1)
        f = rng.standard_normal(n)
        G = rng.standard_normal((m, n))
        alpha = 10 ** rng.uniform(-6, 0)
        qdot, rep = solve_regularized_rons(M, f, G, RegularizationConfig.tikhonov(alpha))
        H = M + alpha * np.eye(n)
        kkt = np.linalg.norm(H @ qdot - f + G.T @ rep.multipliers)
        cons = np.abs(G @ qdot).max()
        C = G @ np.linalg.solve(H, G.T)
        out.append((float(kkt), float(cons), float(np.linalg.eigvalsh(0.5 * (C + C.T)).min())))
    return out


def penrose_errors(seed: int = 6) -> list[float]:
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((5, 3))
    X = pinv(A)
    return [
        float(np.abs(A @ X @ A - A).max()),
        float(np.abs(X @ A @ X - X).max()),
        float(np.abs((A @ X).T - A @ X).max()),
        float(np.abs((X @ A).T - X @ A).max()),
    ]


def suite_theorems() -> Iterator[Check]:
    t2 = equivalence_errors()
    ratio = max(e / (1e-8 * k) for e, k in t2)
    yield "Mbar solve == pinv(Mt) ft (50 instances)", ratio < 1.0, f"max err/(1e-8 kappa) = {ratio:.2e}"
    cond = conditioning_errors()
    yield "kappa(Mt^T Mt) == kappa(Mt)^2 (40-digit product)", max(cond) < 1e-6, f"max rel dev {max(cond):.2e}"
    stat = stationarity_residuals()
    kkt = max(s[0] for s in stat)
    cons = max(s[1] for s in stat)
    ceig = min(s[2] for s in stat)
    yield "regularized KKT residual (50 instances)", kkt <= 1e-9, f"max {kkt:.2e}"
    yield "regularized constraint products", cons <= 1e-9, f"max {cons:.2e}"
    yield "regularized constraint matrix SPD", ceig > 0, f"min eig {ceig:.2e}"
    pen = penrose_errors()
    yield "Penrose conditions", max(pen) < 1e-10, f"max {max(pen):.2e}"
    rng = np.random.default_rng(7)
    Mt = random_matrix(rng, (40, 12), 1e3)
    ft = rng.standard_normal(40)
    a = solve_regularized_crons(type("S", (), {"Mtilde": Mt, "ftilde": ft})(), None,
                                RegularizationConfig.tikhonov(1e-3))[0]
    grad = Mt.T @ (Mt @ a - ft) + 1e-3 * a
    g = np.linalg.norm(grad) / (np.linalg.norm(ft) + np.linalg.norm(a))
    yield "regularized collocation optimality", g < 1e-9, f"|grad| rel {g:.2e}"
    H = Mt.T @ Mt
    G = rng.standard_normal((2, 12))
    q1 = solve_regularized_rons(H, Mt.T @ ft, G, RegularizationConfig.tikhonov(1e-4))[0]
    q2 = kkt_solve(H + 1e-4 * np.eye(12), Mt.T @ ft, G)[0]
    e = np.linalg.norm(q1 - q2) / np.linalg.norm(q2)
    yield "multiplier elimination vs dense KKT", e < 1e-8, f"rel err {e:.2e}"


# ---------------------------------------------------------------------------
# integrators
# ---------------------------------------------------------------------------


def suite_integrators() -> Iterator[Check]:
    for method in ("dopri54", "adams"):
        tr = integrate(lambda t, q: -q, [1.0], (0.0, 1.0), IntegratorConfig(method, rtol=1e-9, atol=1e-12))
        e = abs(tr.q[-1, 0] - np.exp(-1.0))
        yield f"{method}: exp decay, rtol 1e-9", e <= 1e-8, f"error {e:.2e}"
        errs = []
        for tol in (1e-4, 1e-6, 1e-8, 1e-10):
            tr = integrate(lambda t, q: -q, [1.0], (0.0, 1.0), IntegratorConfig(method, rtol=tol, atol=tol))
            errs.append(abs(tr.q[-1, 0] - np.exp(-1.0)) / tol)
        yield f"{method}: global error O(tol)", max(errs) < 10.0, "err/tol " + " ".join(f"{x:.2g}" for x in errs)
        period = 2 * np.pi
        tr = integrate(lambda t, y: np.array([y[1], -y[0]]), [1.0, 0.0], (0.0, 100 * period),
                       IntegratorConfig(method, rtol=1e-10, atol=1e-12),
                       t_eval=np.linspace(0.0, 100 * period, 101))
        drift = np.abs(0.5 * (tr.q**2).sum(axis=1) - 0.5).max()
        yield f"{method}: oscillator energy, 100 periods", drift < 1e-6, f"drift {drift:.2e}"
        cfg = IntegratorConfig(method, rtol=1e-8, atol=1e-10)
        fun: Callable = lambda t, q: np.array([np.cos(t) * q[0]])
        ts = np.linspace(0.0, 3.0, 13)
        dense = integrate(fun, [1.0], (0.0, 3.0), cfg, t_eval=ts).q[:, 0]
        direct = np.array([integrate(fun, [1.0], (0.0, t), cfg).q[-1, 0] if t > 0 else 1.0 for t in ts])
        gap = np.abs(dense - direct).max()
        yield f"{method}: dense output vs re-integration", gap < 10 * 1e-8 * 3, f"max gap {gap:.2e}"


SUITES: dict[str, Callable[[], Iterator[Check]]] = {
    "kernels": suite_kernels,
    "theorems": suite_theorems,
    "integrators": suite_integrators,
}


def run_suite(name: str) -> list[Check]:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}")
    return list(SUITES[name]())

"""End-to-end scenarios: Fokker-Planck harmonic trap and Kuramoto-Sivashinsky.

Each runner integrates the reduced-order dynamics, runs the matching oracle
and returns an :class:`ErrorReport` with error time series, conservation
drift, conditioning and run metadata.
"""
from __future__ import annotations

import dataclasses
import hashlib
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.optimize import least_squares

from . import _core
from .ansatz import (
    FokkerPlanck,
    GaussianMixture,
    KuramotoSivashinsky,
    ParameterState,
    TanhNetwork,
    conserved_mass,
)
from .crons import assemble_collocation, assemble_monte_carlo, equidistant_points, trapezoid_metric
from .integrators import IntegrationError, IntegratorConfig, integrate
from .oracles import MomentState, integrate_moments, ks_dns, ks_grid, mixture_moments
from .solvers import (
    RegularizationConfig,
    condition_diagnostics,
    solve_monte_carlo,
    solve_regularized_crons,
    solve_regularized_rons,
)
from .srons import assemble_metric_symbolic, assemble_rhs_symbolic

PROBLEMS = ("fokker_planck", "kuramoto_sivashinsky")
METHODS = {"fokker_planck": ("srons",), "kuramoto_sivashinsky": ("crons", "monte_carlo")}


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class FitError(RuntimeError):
    pass


class ExperimentAborted(RuntimeError):
    """The time integration gave up; ``report`` covers the samples reached."""

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    problem: str = "fokker_planck"
    method: str = "srons"
    r: int = 2
    constraint: bool = True
    alpha: float = 0.0
    tau: float = 1e-12
    N: int = 128
    T: float = 10.0
    output_dt: float = 0.1
    seed: int = 0
    backend: str = "auto"
    # integrator
    integrator: str = "dopri54"
    rtol: float = 1e-6
    atol: float = 1e-9
    h0: float = 0.0
    max_step: float = 0.0
    max_steps: int = 2_000_000
    wall_limit: float = 0.0
    # Fokker-Planck
    d: int = 8
    coupling: float = 0.25
    nu: float = 0.01
    normalize_moments: bool = False
    # Kuramoto-Sivashinsky
    ell: float = 10.0
    redraw: bool = False
    constraint_weight: float = 1.0
    fit_points: int = 1000
    fit_restarts: int = 20
    fit_stop: float = 2e-7
    fit_ridge: float = 1e-8
    dns_dt: float = 1e-3
    dns_modes: int = 128

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.problem not in PROBLEMS:
            raise ConfigError("problem", f"must be one of {PROBLEMS}")
        if self.method not in METHODS[self.problem]:
            raise ConfigError("method", f"{self.problem} supports {METHODS[self.problem]}")
        for name in ("r", "N", "d", "fit_points", "fit_restarts", "dns_modes", "max_steps"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise ConfigError(name, "must be a positive integer")
        for name in ("T", "output_dt", "rtol", "atol", "ell", "dns_dt", "constraint_weight", "fit_stop"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and np.isfinite(v) and v > 0):
                raise ConfigError(name, "must be a positive number")
        for name in ("alpha", "nu", "coupling", "h0", "max_step", "wall_limit", "fit_ridge"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and np.isfinite(v) and v >= 0):
                raise ConfigError(name, "must be a non-negative number")
        if not 0 <= self.tau < 1:
            raise ConfigError("tau", "must lie in [0, 1)")
        if self.integrator not in ("dopri54", "adams"):
            raise ConfigError("integrator", "must be 'dopri54' or 'adams'")
        if self.backend not in ("auto", "compiled", "python"):
            raise ConfigError("backend", "must be 'auto', 'compiled' or 'python'")
        if self.output_dt > self.T:
            raise ConfigError("output_dt", "must not exceed the horizon T")
        if self.seed < 0:
            raise ConfigError("seed", "must be non-negative")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ConfigError(unknown[0], "unknown configuration key")
        clean = {}
        for key, value in data.items():
            default = known[key].default
            clean[key] = _coerce(key, value, default)
        return cls(**clean)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)

    def integrator_config(self) -> IntegratorConfig:
        return IntegratorConfig(
            method=self.integrator,
            rtol=self.rtol,
            atol=self.atol,
            h0=self.h0 or None,
            max_step=self.max_step or np.inf,
            max_steps=self.max_steps,
            wall_limit=self.wall_limit or None,
        )

    def output_times(self) -> np.ndarray:
        n = int(round(self.T / self.output_dt))
        times = np.arange(n + 1) * self.output_dt
        if times[-1] < self.T - 1e-12:
            times = np.append(times, self.T)
        times[-1] = self.T
        return times


def _coerce(key, value, default):
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false", "1", "0", "yes", "no"):
            return value.lower() in ("true", "1", "yes")
        raise ConfigError(key, f"expected a boolean, got {value!r}")
    if isinstance(default, int):
        if isinstance(value, bool):
            raise ConfigError(key, f"expected an integer, got {value!r}")
        try:
            fv = float(value)
        except (TypeError, ValueError):
            raise ConfigError(key, f"expected an integer, got {value!r}") from None
        if not np.isfinite(fv) or fv != int(fv):
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return int(fv)
    if isinstance(default, float):
        if isinstance(value, bool):
            raise ConfigError(key, f"expected a number, got {value!r}")
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(key, f"expected a number, got {value!r}") from None
    if not isinstance(value, str):
        raise ConfigError(key, f"expected a string, got {value!r}")
    return value


@dataclass
class ErrorReport:
    """Error time series of one run plus the metadata needed to reproduce it."""

    config: ExperimentConfig
    times: np.ndarray
    metrics: dict[str, np.ndarray]
    conservation_drift: np.ndarray | None
    condition: np.ndarray
    states: np.ndarray
    summary: dict[str, Any] = field(default_factory=dict)
    metadata: dict[str, Any] = field(default_factory=dict)
    wall_time: float = 0.0
    completed: bool = True
    message: str = ""

    def columns(self) -> dict[str, np.ndarray]:
        cols = dict(self.metrics)
        if self.conservation_drift is not None:
            cols["conservation_drift"] = self.conservation_drift
        cols["condition_number"] = self.condition
        return cols


# ---------------------------------------------------------------------------
# provenance
# ---------------------------------------------------------------------------


def build_id() -> str:
    """Content hash of the package sources (stable across machines)."""
    root = Path(__file__).resolve().parent
    h = hashlib.sha1()
    for p in sorted(list(root.rglob("*.py")) + list(root.rglob("*.pyx"))):
        h.update(p.relative_to(root).as_posix().encode())
        h.update(p.read_bytes())
    return h.hexdigest()[:12]


def _metadata(cfg: ExperimentConfig) -> dict:
    from . import __version__

    return {
        "version": __version__,
        "build_id": build_id(),
        "backend": _core.get_backend(None if cfg.backend == "auto" else cfg.backend).__name__.rsplit(".", 1)[-1],
        "seed": cfg.seed,
        "rtol": cfg.rtol,
        "atol": cfg.atol,
        "alpha": cfg.alpha,
        "tau": cfg.tau,
        "integrator": cfg.integrator,
    }


def _backend(cfg):
    return None if cfg.backend == "auto" else cfg.backend


def _run_integration(rhs, q0, cfg, times):
    try:
        traj = integrate(rhs, q0, (0.0, cfg.T), cfg.integrator_config(), t_eval=times)
        return traj, True, ""
    except (IntegrationError, FloatingPointError, np.linalg.LinAlgError) as exc:
        traj = getattr(exc, "trajectory", None)
        return traj, False, f"{type(exc).__name__}: {exc}"


# ---------------------------------------------------------------------------
# Fokker-Planck
# ---------------------------------------------------------------------------


def fp_initial_state(d: int, r: int) -> np.ndarray:
    """Initial mixture: ``r`` copies of ``N(mu, 0.1 I)`` sharing unit probability."""
    mu = fp_initial_mean(d)
    A = np.sqrt((2 * np.pi * 0.1) ** (-d / 2) / r)
    mode = np.concatenate([[A, np.sqrt(5.0)], mu])
    return np.tile(mode, r)


def fp_initial_mean(d: int) -> np.ndarray:
    return 0.9 + 2.1 * np.arange(d) / max(d - 1, 1)


def run_fokker_planck(cfg: ExperimentConfig) -> ErrorReport:
    """Integrate closed-form RONS for the harmonic trap and compare to the moment oracle."""
    if cfg.problem != "fokker_planck":
        raise ConfigError("problem", "run_fokker_planck needs problem = 'fokker_planck'")
    family = GaussianMixture(cfg.d)
    op = FokkerPlanck(cfg.d, cfg.coupling, cfg.nu)
    reg = RegularizationConfig.tikhonov(cfg.alpha, cfg.tau)
    backend = _backend(cfg)
    q0 = fp_initial_state(cfg.d, cfg.r)
    times = cfg.output_times()

    def rhs(t, q):
        M = assemble_metric_symbolic(family, q, backend)
        f = assemble_rhs_symbolic(family, op, q, t, backend)
        grads = [conserved_mass(family, q)[1]] if cfg.constraint else None
        return solve_regularized_rons(M, f, grads, reg)[0]

    start = time.perf_counter()
    traj, ok, msg = _run_integration(rhs, q0, cfg, times)
    wall = time.perf_counter() - start
    t_out = traj.t if traj is not None else times[:1]
    Q = traj.q if traj is not None else q0[None, :]

    mu = fp_initial_mean(cfg.d)
    mom = integrate_moments(MomentState.gaussian(mu, 0.1 * np.eye(cfg.d)), times, cfg.coupling, cfg.nu)
    k = len(t_out)
    mean_err = np.empty(k)
    cov_err = np.empty(k)
    drift = np.empty(k)
    cond = np.empty(k)
    I0 = conserved_mass(family, q0)[0]
    cov_ref = mom.covariance
    for i, q in enumerate(Q):
        m, c = mixture_moments(family, q, normalize=cfg.normalize_moments)
        mean_err[i] = np.linalg.norm(m - mom.mean[i]) / np.linalg.norm(mom.mean[i])
        cov_err[i] = np.linalg.norm(c - cov_ref[i]) / np.linalg.norm(cov_ref[i])
        drift[i] = abs(conserved_mass(family, q)[0] - I0)
        H = assemble_metric_symbolic(family, q, backend) + cfg.alpha * np.eye(q.size)
        cond[i] = condition_diagnostics(H)[0]
    summary = {
        "terminal_mean_error": float(mean_err[-1]),
        "terminal_cov_error": float(cov_err[-1]),
        "max_conservation_drift": float(drift.max()),
        "n_accepted": int(traj.n_accepted) if traj is not None else 0,
        "n_rejected": int(traj.n_rejected) if traj is not None else 0,
        "t_reached": float(t_out[-1]),
    }
    report = ErrorReport(
        cfg, t_out, {"mean_error": mean_err, "cov_error": cov_err}, drift, cond, Q,
        summary, _metadata(cfg), wall, ok, msg,
    )
    if not ok:
        raise ExperimentAborted(msg, report)
    return report


# ---------------------------------------------------------------------------
# Kuramoto-Sivashinsky
# ---------------------------------------------------------------------------


@dataclass
class FitReport:
    state: ParameterState
    max_error: float
    l2_error: float
    restarts_used: int


def fit_initial_condition(family: TanhNetwork, u0, grid, r: int, restarts: int = 20,
                          seed: int = 0, stop: float = 2e-7, fail_tol: float = 1e-4,
                          ridge: float = 1e-8) -> FitReport:
    """Least-squares fit ``argmin_q ||u(., q) - u0||`` on ``grid`` (periodic, equispaced).

    Each restart draws ``(w, c, d)`` at random, eliminates the amplitudes by a
    ridge-penalised linear solve (variable projection) and runs
    Levenberg-Marquardt on the remaining parameters; the candidate is then
    polished in all parameters without the penalty.  The penalty
    ``ridge * ||a||^2`` steers the fit away from large cancelling amplitudes,
    which fit equally well but give a badly scaled metric tensor.  Restarts
    stop early once the L2 residual is below ``stop``.
    """
    x = np.asarray(grid, dtype=float)
    u0 = np.asarray(u0, dtype=float)
    h = np.sqrt((family.periodic[1] - family.periodic[0]) / x.size)
    if not np.any(u0):
        q = np.zeros(4 * r)
        q[1::4] = 1.0
        return FitReport(ParameterState(q, 4), 0.0, 0.0, 0)
    theta = np.pi * x / family.ell
    rng = np.random.default_rng(seed)

    def basis(p):
        w, c, d = p.reshape(3, r)
        return np.tanh(w[None] * np.sin(theta[:, None] + c[None]) + d[None])

    pen = np.sqrt(ridge) * np.eye(r)

    def amplitudes(p):
        A = np.vstack([h * basis(p), pen])
        return np.linalg.lstsq(A, np.concatenate([h * u0, np.zeros(r)]), rcond=None)[0]

    def vp_residual(p):
        a = amplitudes(p)
        return np.concatenate([h * (basis(p) @ a - u0), pen @ a])

    def full_residual(q):
        return family.evaluate(x, q) - u0

    def full_jac(q):
        return family.jacobian(x, q)

    best = None
    used = 0
    opts = dict(method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    for attempt in range(restarts):
        used = attempt + 1
        p0 = np.concatenate([
            rng.uniform(0.2, 2.0, r) * rng.choice([-1.0, 1.0], r),
            rng.uniform(-np.pi, np.pi, r),
            rng.uniform(-1.0, 1.0, r),
        ])
        p = least_squares(vp_residual, p0, max_nfev=50 * (3 * r + 1), **opts).x
        w, c, d = p.reshape(3, r)
        q = np.stack([amplitudes(p), w, c, d], axis=1).ravel()
        q = least_squares(full_residual, q, jac=full_jac, max_nfev=2000, **opts).x
        l2 = h * np.linalg.norm(full_residual(q))
        if best is None or l2 < best[0]:
            best = (l2, q)
        if l2 < stop:
            break
    l2, q = best
    if l2 > fail_tol:
        raise FitError(f"initial fit residual {l2:.3e} above {fail_tol:.1e} after {used} restarts")
    return FitReport(ParameterState(q, 4), float(np.abs(full_residual(q)).max()), float(l2), used)


def ks_initial_fit(cfg: ExperimentConfig) -> FitReport:
    family = TanhNetwork(cfg.ell)
    x = ks_grid(cfg.ell, cfg.fit_points)
    return fit_initial_condition(family, -np.sin(np.pi * x / cfg.ell), x, cfg.r,
                                 cfg.fit_restarts, cfg.seed, cfg.fit_stop, ridge=cfg.fit_ridge)


def ks_dns_reference(cfg: ExperimentConfig, times):
    xg = ks_grid(cfg.ell, cfg.dns_modes)
    return ks_dns(-np.sin(np.pi * xg / cfg.ell), times, cfg.ell, cfg.dns_dt)


def _ks_rhs(cfg, family, pde, backend):
    reg = RegularizationConfig.tikhonov(cfg.alpha, cfg.tau)
    domain = 2.0 * cfg.ell
    if cfg.method == "crons":
        points = equidistant_points(cfg.ell, cfg.N)

        def rhs(t, q):
            return solve_regularized_crons(assemble_collocation(family, pde, q, points, t, backend), None, reg)[0]

        def system_condition(q):
            return condition_diagnostics(assemble_collocation(family, pde, q, points, 0.0, backend).Mtilde)[0]

        return rhs, system_condition

    rng = np.random.default_rng(cfg.seed)
    fixed = rng.uniform(-cfg.ell, cfg.ell, cfg.N)

    def samples():
        return rng.uniform(-cfg.ell, cfg.ell, cfg.N) if cfg.redraw else fixed

    def rhs(t, q):
        mc = assemble_monte_carlo(family, pde, q, samples(), domain, t, backend)
        return solve_monte_carlo(mc, None, reg)[0]

    def system_condition(q):
        mc = assemble_monte_carlo(family, pde, q, fixed, domain, 0.0, backend)
        return condition_diagnostics(mc.Mbar + cfg.alpha * np.eye(q.size))[0]

    return rhs, system_condition


def ks_field_errors(family, states, dns) -> np.ndarray:
    return np.array([
        np.linalg.norm(family.evaluate(dns.x, q) - u) / np.linalg.norm(u)
        for q, u in zip(states, dns.u)
    ])


def run_kuramoto_sivashinsky(cfg: ExperimentConfig, q0=None, dns=None) -> ErrorReport:
    """Integrate collocation or Monte Carlo RONS for the tanh network and compare to DNS.

    ``q0`` (an initial parameter vector) and ``dns`` (a :class:`DnsResult` on
    the output times) may be passed to reuse work across runs.
    """
    if cfg.problem != "kuramoto_sivashinsky":
        raise ConfigError("problem", "run_kuramoto_sivashinsky needs problem = 'kuramoto_sivashinsky'")
    family = TanhNetwork(cfg.ell)
    pde = KuramotoSivashinsky()
    backend = _backend(cfg)
    times = cfg.output_times()
    fit = None
    if q0 is None:
        fit = ks_initial_fit(cfg)
        q0 = fit.state.values
    q0 = np.asarray(q0, dtype=float)
    rhs, system_condition = _ks_rhs(cfg, family, pde, backend)

    start = time.perf_counter()
    traj, ok, msg = _run_integration(rhs, q0, cfg, times)
    wall = time.perf_counter() - start
    t_out = traj.t if traj is not None else times[:1]
    Q = traj.q if traj is not None else q0[None, :]
    if dns is None or dns.u.shape[0] < len(t_out) or not np.allclose(dns.t[: len(t_out)], t_out):
        dns = ks_dns_reference(cfg, t_out)
    else:
        dns = dataclasses.replace(dns, t=dns.t[: len(t_out)], u=dns.u[: len(t_out)])
    err = ks_field_errors(family, Q, dns)
    cond = np.array([system_condition(q) for q in Q])
    above = np.nonzero(err > 0.5)[0]
    summary = {
        "time_averaged_error": float(err.mean()),
        "terminal_error": float(err[-1]),
        "first_time_error_above_0.5": float(t_out[above[0]]) if above.size else None,
        "n_accepted": int(traj.n_accepted) if traj is not None else 0,
        "n_rejected": int(traj.n_rejected) if traj is not None else 0,
        "t_reached": float(t_out[-1]),
    }
    if fit is not None:
        summary["fit_max_error"] = fit.max_error
        summary["fit_l2_error"] = fit.l2_error
    report = ErrorReport(cfg, t_out, {"l2_error": err}, None, cond, Q, summary, _metadata(cfg), wall, ok, msg)
    if not ok:
        raise ExperimentAborted(msg, report)
    return report


@dataclass
class FrobeniusStudy:
    times: np.ndarray
    errors: dict[int, np.ndarray]  # N -> ||Mbar - M_quad||_F
    reference_nodes: int


def frobenius_mc_study(cfg: ExperimentConfig, times, states, sample_sizes=(128, 1024, 10_000),
                       reference_nodes: int = 10_000) -> FrobeniusStudy:
    """Frobenius distance between sampled and trapezoid metric tensors along a trajectory.

    Samples are drawn once per sample size (seeded from ``cfg.seed``) and held
    fixed along the trajectory, as in a fixed-sample Monte Carlo run.
    """
    family = TanhNetwork(cfg.ell)
    pde = KuramotoSivashinsky()
    errors = {}
    for N in sample_sizes:
        samples = np.random.default_rng([cfg.seed, N]).uniform(-cfg.ell, cfg.ell, N)
        series = np.empty(len(states))
        for i, q in enumerate(states):
            Mbar = assemble_monte_carlo(family, pde, q, samples, 2 * cfg.ell, 0.0, _backend(cfg)).Mbar
            Mq = trapezoid_metric(family, q, cfg.ell, reference_nodes)
            series[i] = np.linalg.norm(Mbar - Mq)
        errors[int(N)] = series
    return FrobeniusStudy(np.asarray(times, dtype=float), errors, reference_nodes)


def run_experiment(cfg: ExperimentConfig) -> ErrorReport:
    if cfg.problem == "fokker_planck":
        return run_fokker_planck(cfg)
    return run_kuramoto_sivashinsky(cfg)

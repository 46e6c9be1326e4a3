"""Explicit adaptive integrators for ``q' = Phi(t, q)``.

``dopri54`` is the Dormand-Prince 5(4) pair with a PI step controller and the
continuous extension of Hairer, Norsett & Wanner.  ``adams`` is a variable-step,
variable-order (1-12) Adams-Bashforth-Moulton predictor-corrector in PECE mode;
its weights are integrals of the Lagrange interpolant on the actual (uneven)
history nodes, and its dense output integrates the corrector interpolant.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class IntegrationError(RuntimeError):
    """Integrator gave up; ``trajectory`` holds the samples reached so far."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class StepSizeUnderflow(IntegrationError):
    pass


class MaxStepsExceeded(IntegrationError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "dopri54"
    rtol: float = 1e-6
    atol: float = 1e-9
    h0: float | None = None
    max_step: float = np.inf
    max_steps: int = 1_000_000
    max_order: int = 12
    wall_limit: float | None = None

    def __post_init__(self):
        if self.method not in ("dopri54", "adams"):
            raise ValueError(f"unknown integrator {self.method!r}")
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("tolerances must be positive")
        if self.h0 is not None and not 0 < self.h0 <= self.max_step:
            raise ValueError("initial step must be positive and at most max_step")
        if not 1 <= self.max_order <= 12:
            raise ValueError("Adams order must lie in 1..12")


@dataclass
class Trajectory:
    t: np.ndarray
    q: np.ndarray
    n_accepted: int = 0
    n_rejected: int = 0
    n_evals: int = 0
    wall_time: float = 0.0
    diagnostics: list = field(default_factory=list)


def _error_norm(err, y0, y1, rtol, atol) -> float:
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def _initial_step(fun, t0, y0, f0, direction, order, rtol, atol, max_step):
    scale = atol + np.abs(y0) * rtol
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, max_step)
    f1 = fun(t0 + direction * h0, y0 + direction * h0 * f0)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        return max_step  # flat field: let the interval end bound the step
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / (order + 1))
    return min(100 * h0, h1, max_step)


class _Sampler:
    """Collects dense-output samples at the requested times."""

    def __init__(self, t_eval, direction):
        self.t_eval = np.asarray(t_eval, dtype=float)
        self.direction = direction
        self.idx = 0
        self.out = np.empty((self.t_eval.size, 0))

    def take(self, t_lo, t_hi, interp):
        ts = []
        while self.idx < self.t_eval.size:
            te = self.t_eval[self.idx]
            if self.direction * (te - t_hi) > 0:
                break
            ts.append(te)
            self.idx += 1
        if ts:
            vals = [interp(te) for te in ts]
            if self.out.shape[1] == 0:
                self.out = np.full((self.t_eval.size, vals[0].size), np.nan)
            self.out[self.idx - len(ts) : self.idx] = vals

    def trajectory(self, **kw) -> Trajectory:
        return Trajectory(self.t_eval[: self.idx].copy(), self.out[: self.idx].copy(), **kw)


# Dormand-Prince tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)
_D = np.array(
    [
        -12715105075 / 11282082432,
        0.0,
        87487479700 / 32700410799,
        -10690763975 / 1880347072,
        701980252875 / 199316789632,
        -1453857185 / 822651844,
        69997945 / 29380423,
    ]
)

_SAFETY = 0.9
_FAC_MIN, _FAC_MAX = 0.2, 10.0
_BETA = 0.04  # PI controller
_EXPO = 0.2 - 0.75 * _BETA


def _check_span(t_span, t_eval):
    t0, t1 = map(float, t_span)
    if t0 == t1:
        raise ValueError("integration interval is empty")
    direction = np.sign(t1 - t0)
    if t_eval is None:
        t_eval = np.array([t0, t1])
    t_eval = np.asarray(t_eval, dtype=float)
    if np.any(direction * np.diff(t_eval) <= 0):
        raise ValueError("sample times must be strictly monotone")
    if direction * (t_eval[0] - t0) < 0 or direction * (t_eval[-1] - t1) > 0:
        raise ValueError("sample times must lie inside t_span")
    return t0, t1, direction, t_eval


def integrate(rhs: Callable, q0, t_span: Sequence[float], cfg: IntegratorConfig | None = None,
              t_eval=None, callback: Callable | None = None) -> Trajectory:
    """Integrate ``q' = rhs(t, q)`` over ``t_span`` and sample at ``t_eval``.

    ``callback(t, q)`` is called after every accepted step; its non-None
    return values are collected in ``Trajectory.diagnostics``.
    """
    cfg = cfg or IntegratorConfig()
    t0, t1, direction, t_eval = _check_span(t_span, t_eval)
    q0 = np.array(q0, dtype=float)
    if cfg.method == "dopri54":
        return _dopri54(rhs, q0, t0, t1, direction, t_eval, cfg, callback)
    return _adams(rhs, q0, t0, t1, direction, t_eval, cfg, callback)


def _dopri54(rhs, y, t, t1, direction, t_eval, cfg, callback) -> Trajectory:
    start = time.perf_counter()
    n_evals = 0

    def fun(tt, yy):
        nonlocal n_evals
        n_evals += 1
        out = np.asarray(rhs(tt, yy), dtype=float)
        if not np.all(np.isfinite(out)):
            raise FloatingPointError(f"non-finite right-hand side at t={tt}")
        return out

    sampler = _Sampler(t_eval, direction)
    sampler.take(t, t, lambda te: y.copy())
    f = fun(t, y)
    h = cfg.h0 if cfg.h0 is not None else _initial_step(
        fun, t, y, f, direction, 4, cfg.rtol, cfg.atol, cfg.max_step
    )
    err_old = 1e-4
    n_acc = n_rej = 0
    diagnostics = []
    rejected_last = False
    K = np.empty((7, y.size))
    while direction * (t1 - t) > 0:
        if n_acc + n_rej >= cfg.max_steps:
            raise MaxStepsExceeded(
                f"max_steps={cfg.max_steps} reached at t={t}",
                sampler.trajectory(n_accepted=n_acc, n_rejected=n_rej, n_evals=n_evals),
            )
        if cfg.wall_limit is not None and time.perf_counter() - start > cfg.wall_limit:
            raise MaxStepsExceeded(
                f"wall-clock limit {cfg.wall_limit}s reached at t={t}",
                sampler.trajectory(n_accepted=n_acc, n_rejected=n_rej, n_evals=n_evals),
            )
        h = min(h, cfg.max_step, abs(t1 - t))
        if h < 16 * np.finfo(float).eps * max(abs(t), 1.0):
            raise StepSizeUnderflow(
                f"step size underflow (h={h:.3e}) at t={t}: problem is likely stiff",
                sampler.trajectory(n_accepted=n_acc, n_rejected=n_rej, n_evals=n_evals),
            )
        hs = direction * h
        K[0] = f
        for i in range(1, 7):
            K[i] = fun(t + _C[i] * hs, y + hs * (np.asarray(_A[i]) @ K[:i]))
        y_new = y + hs * (_B @ K)
        err = _error_norm(hs * (_E @ K), y, y_new, cfg.rtol, cfg.atol)
        fac11 = err**_EXPO if err > 0 else 0.0
        if err <= 1.0:
            fac = fac11 / err_old**_BETA
            fac = min(1.0 / _FAC_MIN, max(1.0 / _FAC_MAX, fac / _SAFETY))
            h_new = h / fac
            if rejected_last:
                h_new = min(h_new, h)
            t_new = t + hs
            r1 = y
            r2 = y_new - y
            r3 = hs * K[0] - r2
            r4 = r2 - hs * K[6] - r3
            r5 = hs * (_D @ K)

            def interp(te, t=t, r1=r1, r2=r2, r3=r3, r4=r4, r5=r5):
                th = (te - t) / hs
                th1 = 1.0 - th
                return r1 + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)))

            sampler.take(t, t_new, interp)
            t, y, f = t_new, y_new, K[6].copy()
            err_old = max(err, 1e-4)
            n_acc += 1
            rejected_last = False
            if callback is not None:
                d = callback(t, y)
                if d is not None:
                    diagnostics.append(d)
            h = h_new
        else:
            h = h / min(1.0 / _FAC_MIN, fac11 / _SAFETY)
            n_rej += 1
            rejected_last = True
    traj = sampler.trajectory(n_accepted=n_acc, n_rejected=n_rej, n_evals=n_evals,
                              wall_time=time.perf_counter() - start)
    traj.diagnostics = diagnostics
    return traj


# ---------------------------------------------------------------------------
# Adams-Bashforth-Moulton PECE
# ---------------------------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def _lagrange_integrals(nodes: np.ndarray, upper: float = 1.0) -> np.ndarray:
    """``int_0^upper L_m(tau) dtau`` for the Lagrange basis on ``nodes`` (degree <= 12)."""
    tau = 0.5 * upper * (_GL_X + 1.0)
    wq = 0.5 * upper * _GL_W
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    denom = np.prod(diff, axis=1)
    # quadrature points lie strictly inside (0, upper) and never hit a node
    num = tau[:, None] - nodes[None, :]  # (q, k)
    L = np.prod(num, axis=1)[:, None] / num / denom[None, :]
    return wq @ L


def _adams(rhs, y, t, t1, direction, t_eval, cfg, callback) -> Trajectory:
    start = time.perf_counter()
    n_evals = 0

    def fun(tt, yy):
        nonlocal n_evals
        n_evals += 1
        out = np.asarray(rhs(tt, yy), dtype=float)
        if not np.all(np.isfinite(out)):
            raise FloatingPointError(f"non-finite right-hand side at t={tt}")
        return out

    sampler = _Sampler(t_eval, direction)
    sampler.take(t, t, lambda te: y.copy())
    f = fun(t, y)
    if cfg.h0 is not None:
        h = cfg.h0
    else:
        h = _initial_step(fun, t, y, f, direction, 1, cfg.rtol, cfg.atol, cfg.max_step)
        if h < cfg.max_step:
            h *= 0.5  # order-1 start-up

    ts = [t]
    fs = [f]
    k = 1  # predictor order = number of history nodes used
    steps_at_order = 0
    n_acc = n_rej = 0
    diagnostics = []
    max_order = cfg.max_order
    while direction * (t1 - t) > 0:
        if n_acc + n_rej >= cfg.max_steps:
            raise MaxStepsExceeded(
                f"max_steps={cfg.max_steps} reached at t={t}",
                sampler.trajectory(n_accepted=n_acc, n_rejected=n_rej, n_evals=n_evals),
            )
        if cfg.wall_limit is not None and time.perf_counter() - start > cfg.wall_limit:
            raise MaxStepsExceeded(
                f"wall-clock limit {cfg.wall_limit}s reached at t={t}",
                sampler.trajectory(n_accepted=n_acc, n_rejected=n_rej, n_evals=n_evals),
            )
        h = min(h, cfg.max_step, abs(t1 - t))
        if h < 16 * np.finfo(float).eps * max(abs(t), 1.0):
            raise StepSizeUnderflow(
                f"step size underflow (h={h:.3e}) at t={t}: problem is likely stiff",
                sampler.trajectory(n_accepted=n_acc, n_rejected=n_rej, n_evals=n_evals),
            )
        hs = direction * h
        hist_t = np.array(ts[::-1])  # newest first
        hist_f = np.array(fs[::-1])
        k = min(k, len(ts))
        tau = (hist_t - t) / hs
        # predictors of order k-1, k, k+1 (where history allows)
        preds = {}
        for order in (k - 1, k, k + 1):
            if 1 <= order <= len(ts) and order <= max_order:
                w = _lagrange_integrals(tau[:order])
                preds[order] = y + hs * (w @ hist_f[:order])
        y_p = preds[k]
        f_p = fun(t + hs, y_p)
        nodes_c = np.concatenate([[1.0], tau[:k]])
        w_c = _lagrange_integrals(nodes_c)
        vals_c = np.vstack([f_p, hist_f[:k]])
        y_c = y + hs * (w_c @ vals_c)
        errs = {o: _error_norm(y_c - yp, y, y_c, cfg.rtol, cfg.atol) for o, yp in preds.items()}
        err = errs[k]
        if err <= 1.0:
            f_c = fun(t + hs, y_c)
            t_new = t + hs

            def interp(te, t=t, y=y, hs=hs, nodes=nodes_c, vals=vals_c):
                th = (te - t) / hs
                return y + hs * (_lagrange_integrals(nodes, th) @ vals)

            sampler.take(t, t_new, interp)
            t, y = t_new, y_c
            ts.append(t)
            fs.append(f_c)
            if len(ts) > max_order + 1:
                ts.pop(0)
                fs.pop(0)
            n_acc += 1
            steps_at_order += 1
            if callback is not None:
                d = callback(t, y)
                if d is not None:
                    diagnostics.append(d)
            # order selection: largest admissible step among neighbouring orders
            best_k, best_fac = k, _SAFETY * max(err, 1e-10) ** (-1.0 / (k + 1))
            for o, e in errs.items():
                if o == k:
                    continue
                if o > k and (steps_at_order < k + 1 or len(ts) < o + 1):
                    continue
                fac_o = _SAFETY * max(e, 1e-10) ** (-1.0 / (o + 1))
                if fac_o > best_fac * (1.0 if o < k else 1.1):
                    best_k, best_fac = o, fac_o
            if best_k == k and k < max_order and len(ts) > k and steps_at_order >= k + 1 and k + 1 not in errs:
                best_k = k + 1  # grow during start-up when no estimate exists yet
            if best_k != k:
                k = best_k
                steps_at_order = 0
            h = h * min(2.0, max(0.5, best_fac))
        else:
            n_rej += 1
            h = h * max(0.2, _SAFETY * err ** (-1.0 / (k + 1)))
            if k > 1 and errs.get(k - 1, np.inf) < err:
                k -= 1
                steps_at_order = 0
    traj = sampler.trajectory(n_accepted=n_acc, n_rejected=n_rej, n_evals=n_evals,
                              wall_time=time.perf_counter() - start)
    traj.diagnostics = diagnostics
    return traj

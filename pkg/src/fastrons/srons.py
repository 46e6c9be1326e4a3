"""Closed-form assembly of the metric tensor and right-hand side for Gaussian mixtures."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _core
from .ansatz import FokkerPlanck, GaussianMixture, ParameterState, conserved_mass
from .gaussian_kernels import KernelTable


class UnsupportedFamilyError(TypeError):
    """Closed-form kernels exist only for the Gaussian mixture / Fokker-Planck pair."""


@dataclass
class DenseSystem:
    M: np.ndarray
    f: np.ndarray
    t: float = 0.0


@lru_cache(maxsize=None)
def kernel_table(d: int) -> KernelTable:
    """The ``K(K+3)/2`` closed-form evaluators for dimension ``d`` (``K = d + 2``)."""
    return KernelTable(d)


def _modes(family, q) -> np.ndarray:
    if not isinstance(family, GaussianMixture):
        raise UnsupportedFamilyError(f"no closed-form kernels for {type(family).__name__}")
    values = q.values if isinstance(q, ParameterState) else np.asarray(q, dtype=float)
    return np.ascontiguousarray(values.reshape(-1, family.K))


def assemble_metric_symbolic(family, q, backend=None) -> np.ndarray:
    """Metric tensor ``M_jk = <du/dq_j, du/dq_k>`` in ``L2(R^d)`` from the kernel table."""
    modes = _modes(family, q)
    if backend == "table":
        return kernel_table(family.d).metric_blocks(modes)
    return _core.get_backend(backend).gaussian_metric(modes)


def assemble_rhs_symbolic(family, operator: FokkerPlanck, q, t: float, backend=None) -> np.ndarray:
    """Right-hand side ``f_j = <du/dq_j, F(u)>`` for the Fokker-Planck operator."""
    modes = _modes(family, q)
    if not isinstance(operator, FokkerPlanck) or operator.d != family.d:
        raise UnsupportedFamilyError("closed-form right-hand side needs a matching FokkerPlanck operator")
    a_t = float(operator.forcing(t))
    if backend == "table":
        return kernel_table(family.d).rhs_blocks(modes, a_t, operator.alpha, operator.nu)
    return _core.get_backend(backend).gaussian_rhs(modes, a_t, operator.alpha, operator.nu)


def assemble_symbolic(family, operator, q, t: float, backend=None) -> DenseSystem:
    return DenseSystem(
        assemble_metric_symbolic(family, q, backend),
        assemble_rhs_symbolic(family, operator, q, t, backend),
        t,
    )


def conserved_probability(family, q):
    """Total probability ``sum_i A_i^2 (pi / w_i^2)^(d/2)`` and its gradient."""
    if not isinstance(family, GaussianMixture):
        raise UnsupportedFamilyError("total probability is defined for Gaussian mixtures")
    values = q.values if isinstance(q, ParameterState) else q
    return conserved_mass(family, values)

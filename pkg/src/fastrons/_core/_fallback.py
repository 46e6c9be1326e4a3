"""Pure-numpy implementations of the compiled entry points (same signatures)."""
import numpy as np

from ..ansatz import KuramotoSivashinsky, TanhNetwork
from ..gaussian_kernels import KernelTable

_TABLES: dict[int, KernelTable] = {}


def _table(d: int) -> KernelTable:
    if d not in _TABLES:
        _TABLES[d] = KernelTable(d)
    return _TABLES[d]


def gaussian_metric(modes):
    modes = np.ascontiguousarray(modes, dtype=float)
    return _table(modes.shape[1] - 2).metric_blocks(modes)


def gaussian_rhs(modes, a_t, alpha, nu):
    modes = np.ascontiguousarray(modes, dtype=float)
    return _table(modes.shape[1] - 2).rhs_blocks(modes, a_t, alpha, nu)


def tanh_collocation(x, modes, ell):
    family = TanhNetwork(ell)
    q = np.asarray(modes, dtype=float).ravel()
    return family.jacobian(x, q), KuramotoSivashinsky()(family, x, 0.0, q)

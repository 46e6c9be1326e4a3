import os
import subprocess
import sys

import numpy as np
import pytest

from fastrons import _core
from fastrons.ansatz import KuramotoSivashinsky, TanhNetwork
from fastrons.gaussian_kernels import KernelTable
from fastrons.verify import random_gaussian_mode

from conftest import random_tanh_state

compiled = pytest.mark.skipif("compiled" not in _core.BACKENDS, reason="extension not built")


def test_python_backend_always_available():
    assert "python" in _core.BACKENDS
    assert _core.get_backend("python") is _core.BACKENDS["python"]


def test_unknown_backend():
    with pytest.raises(ValueError):
        _core.get_backend("fortran")


def test_auto_resolves_to_active():
    assert _core.get_backend("auto") is _core.BACKENDS[_core.BACKEND]


@pytest.mark.parametrize("flag,expected", [("1", "python"), ("0", None)])
def test_env_var_selects_backend(flag, expected):
    env = dict(os.environ, FASTRONS_PURE_PYTHON=flag)
    out = subprocess.run([sys.executable, "-c", "import fastrons; print(fastrons.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True).stdout.strip()
    if expected is None:
        expected = "compiled" if "compiled" in _core.BACKENDS else "python"
    assert out == expected


@pytest.mark.parametrize("name", list(_core.BACKENDS))
@pytest.mark.parametrize("d,r", [(1, 3), (2, 4), (8, 2), (8, 5)])
def test_gaussian_backends_match_table(name, d, r, rng):
    be = _core.get_backend(name)
    modes = np.stack([random_gaussian_mode(rng, d) for _ in range(r)])
    table = KernelTable(d)
    M_ref = table.metric_blocks(modes)
    f_ref = table.rhs_blocks(modes, 2.1, 0.25, 0.01)
    np.testing.assert_allclose(be.gaussian_metric(modes), M_ref, rtol=1e-12, atol=1e-14 * np.abs(M_ref).max())
    np.testing.assert_allclose(be.gaussian_rhs(modes, 2.1, 0.25, 0.01), f_ref, rtol=1e-11,
                               atol=1e-13 * np.abs(f_ref).max())


@pytest.mark.parametrize("name", list(_core.BACKENDS))
def test_tanh_backends_match_family(name, rng):
    fam = TanhNetwork(10.0)
    q = random_tanh_state(rng, 10)
    x = rng.uniform(-10, 10, 128)
    Mt, ft = _core.get_backend(name).tanh_collocation(x, q.reshape(10, 4), 10.0)
    np.testing.assert_allclose(Mt, fam.jacobian(x, q), rtol=1e-13, atol=1e-14)
    np.testing.assert_allclose(ft, KuramotoSivashinsky()(fam, x, 0.0, q), rtol=1e-12, atol=1e-12)


@compiled
def test_compiled_symmetric_exactly(rng):
    modes = np.stack([random_gaussian_mode(rng, 3) for _ in range(4)])
    M = _core.get_backend("compiled").gaussian_metric(modes)
    assert np.abs(M - M.T).max() == 0.0

from pathlib import Path

import numpy as np
import pytest

from fastrons.ansatz import GaussianMixture, TanhNetwork


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def mixture8():
    return GaussianMixture(8)


@pytest.fixture(scope="session")
def tanh10():
    return TanhNetwork(10.0)


def random_tanh_state(rng, r):
    q = np.empty((r, 4))
    q[:, 0] = rng.normal(0.0, 0.5, r)
    q[:, 1] = rng.uniform(0.3, 1.5, r) * rng.choice([-1.0, 1.0], r)
    q[:, 2] = rng.uniform(-np.pi, np.pi, r)
    q[:, 3] = rng.uniform(-0.5, 0.5, r)
    return q.ravel()


ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


def config(name, **overrides):
    """Load a shipped experiment config, with optional overrides."""
    from fastrons.cli import load_config

    cfg = load_config(CONFIGS / f"{name}.toml")
    return cfg.replace(**overrides) if overrides else cfg


@pytest.fixture(scope="session")
def ks_fit():
    """Initial tanh-network fit of -sin(pi x / ell), shared by every KS test."""
    from fastrons.experiments import ks_initial_fit

    return ks_initial_fit(config("ks_crons"))


@pytest.fixture(scope="session")
def ks_reference():
    """DNS reference on the KS output times (T = 30, every 0.1)."""
    from fastrons.experiments import ks_dns_reference

    cfg = config("ks_crons")
    return ks_dns_reference(cfg, cfg.output_times())


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])

import numpy as np
import pytest

from fastrons.ansatz import FokkerPlanck, GaussianMixture, SingularParameterError, TanhNetwork
from fastrons.experiments import fp_initial_state
from fastrons.gaussian_kernels import KernelTable, PairGeometry
from fastrons.oracles import GaussHermite, Integrand, quadrature_inner_product, quadrature_metric, quadrature_rhs
from fastrons.srons import (
    UnsupportedFamilyError,
    assemble_metric_symbolic,
    assemble_rhs_symbolic,
    conserved_probability,
    kernel_table,
)
from fastrons.verify import block_assembly_error, kernel_oracle_errors, random_gaussian_mode, kernel_invocations


def random_mixture(rng, d, r):
    return np.concatenate([random_gaussian_mode(rng, d) for _ in range(r)])


@pytest.mark.parametrize("d", [1, 2, 3, 8])
def test_table_size(d):
    K = d + 2
    assert len(kernel_table(d)) == K * (K + 3) // 2


def test_invoked_count_independent_of_r():
    assert kernel_invocations() == {2: 65, 30: 65}


def test_single_mode_d1_against_dense_gauss_hermite():
    fam = GaussianMixture(1)
    q = np.array([1.0, 1.0, 0.0])
    M = assemble_metric_symbolic(fam, q)
    rule = GaussHermite(64, 1, (0.0,), 2.0)
    ref = quadrature_inner_product(
        Integrand(lambda X: fam.jacobian(X, q)[:, :, None] * fam.jacobian(X, q)[:, None, :], 1), rule)
    np.testing.assert_allclose(M, ref, rtol=1e-10, atol=1e-14)


@pytest.mark.parametrize("d,r", [(1, 3), (2, 3)])
def test_metric_matches_quadrature(rng, d, r):
    fam = GaussianMixture(d)
    q = random_mixture(rng, d, r)
    M = assemble_metric_symbolic(fam, q)
    Mq = quadrature_metric(fam, q, nodes=12)
    assert np.linalg.norm(M - Mq) / np.linalg.norm(Mq) < 1e-8


def test_block_assembly_error():
    assert block_assembly_error() < 1e-8


@pytest.mark.parametrize("d,r", [(1, 1), (1, 3), (2, 2)])
def test_rhs_matches_quadrature(rng, d, r):
    fam = GaussianMixture(d)
    op = FokkerPlanck(d)
    q = random_mixture(rng, d, r)
    f = assemble_rhs_symbolic(fam, op, q, 0.3)
    fq = quadrature_rhs(fam, op, q, 0.3, nodes=12)
    np.testing.assert_allclose(f, fq, rtol=1e-8, atol=1e-12 * np.abs(fq).max())


def test_rhs_reference_initial_condition_d8():
    fam = GaussianMixture(8)
    op = FokkerPlanck(8)
    q = fp_initial_state(8, 2)
    f = assemble_rhs_symbolic(fam, op, q, 0.0)
    fq = quadrature_rhs(fam, op, q, 0.0, nodes=4)
    np.testing.assert_allclose(f, fq, rtol=1e-6, atol=1e-10 * np.abs(fq).max())


def test_kernels_against_oracle_small_draw():
    worst = kernel_oracle_errors(d=2, draws=10, nodes=4)
    assert len(worst) == 14
    assert max(worst.values()) < 1e-8


def test_zero_amplitudes_give_zero_rhs(rng):
    fam = GaussianMixture(2)
    q = random_mixture(rng, 2, 3).reshape(3, 4)
    q[:, 0] = 0.0
    assert np.all(assemble_rhs_symbolic(fam, FokkerPlanck(2), q.ravel(), 0.4) == 0.0)


def test_identical_modes_rank_deficient():
    fam = GaussianMixture(8)
    s = np.linalg.svd(assemble_metric_symbolic(fam, fp_initial_state(8, 2)), compute_uv=False)
    assert s[-1] < 1e-12 * s[0]


def test_symmetry_and_psd(rng):
    fam = GaussianMixture(2)
    for _ in range(50):
        M = assemble_metric_symbolic(fam, random_mixture(rng, 2, int(rng.integers(1, 5))))
        assert np.abs(M - M.T).max() == 0.0
        X = rng.standard_normal((M.shape[0], 100))
        quad = np.einsum("in,ij,jn->n", X, M, X)
        assert np.all(quad >= -1e-10 * np.linalg.norm(M, 2) * np.sum(X**2, axis=0))


def test_block_transpose_symmetry(rng):
    fam = GaussianMixture(2)
    q = random_mixture(rng, 2, 2)
    M = assemble_metric_symbolic(fam, q)
    np.testing.assert_array_equal(M[:4, 4:], M[4:, :4].T)


def test_time_enters_only_through_forcing(rng):
    fam = GaussianMixture(2)
    op = FokkerPlanck(2)
    q = random_mixture(rng, 2, 2)
    # a(t) = 1.25 (sin(pi t) + 1.5) takes the same value at t and 1 - t
    np.testing.assert_array_equal(assemble_rhs_symbolic(fam, op, q, 0.2), assemble_rhs_symbolic(fam, op, q, 0.8))


def test_table_matches_backend(rng):
    fam = GaussianMixture(3)
    op = FokkerPlanck(3)
    q = random_mixture(rng, 3, 4)
    np.testing.assert_allclose(assemble_metric_symbolic(fam, q, "table"), assemble_metric_symbolic(fam, q),
                               rtol=1e-13, atol=1e-15)
    np.testing.assert_allclose(assemble_rhs_symbolic(fam, op, q, 0.1, "table"),
                               assemble_rhs_symbolic(fam, op, q, 0.1), rtol=1e-12, atol=1e-14)


def test_unsupported_family():
    with pytest.raises(UnsupportedFamilyError):
        assemble_metric_symbolic(TanhNetwork(1.0), np.ones(4))
    with pytest.raises(UnsupportedFamilyError):
        assemble_rhs_symbolic(GaussianMixture(2), FokkerPlanck(3), np.ones(4), 0.0)


class TestConservedProbability:
    def test_unit_mode(self):
        q = np.concatenate([[np.pi**-2, 1.0], np.zeros(8)])
        assert conserved_probability(GaussianMixture(8), q)[0] == pytest.approx(1.0, rel=1e-14)

    @pytest.mark.parametrize("r", [2, 30])
    def test_initial_condition(self, r):
        val, _ = conserved_probability(GaussianMixture(8), fp_initial_state(8, r))
        assert abs(val - 1.0) < 1e-12

    def test_gradient_matches_finite_differences(self, rng):
        fam = GaussianMixture(3)
        q = random_mixture(rng, 3, 3)
        _, g = conserved_probability(fam, q)
        h = 1e-6
        fd = np.array([(conserved_probability(fam, q + h * e)[0] - conserved_probability(fam, q - h * e)[0]) / (2 * h)
                       for e in np.eye(q.size)])
        np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-10)
        assert np.all(g.reshape(3, 5)[:, 2:] == 0.0)

    def test_zero_width(self):
        with pytest.raises(SingularParameterError):
            conserved_probability(GaussianMixture(1), np.array([1.0, 0.0, 0.0]))


def test_pair_geometry_swap():
    rng = np.random.default_rng(3)
    modes = np.stack([random_gaussian_mode(rng, 2) for _ in range(2)])
    geo = PairGeometry.from_modes(modes)
    geo_swapped = PairGeometry.from_modes(modes[::-1])
    table = KernelTable(2)
    for ker in table.metric.values():
        assert ker.fn(geo)[0, 1] == pytest.approx(ker.fn(geo_swapped)[1, 0], rel=1e-14)

import numpy as np
import pytest

from fairpca.kernels import GroupedSamples, KernelConfig, mmd_squared
from fairpca.objective import (
    Covariance,
    PenaltyProblem,
    constraint_h,
    objective_f,
    objective_f_gradient,
    pca_loadings,
    penalty_Q,
    penalty_Q_gradient,
    penalty_value_and_grads,
)
from fairpca.stiefel import random_stiefel, random_tangent, retract, tangent_project

from oracles import fd_gradient, mmd_oracle


def make_problem(rng, p=4, m=8, n=9, sigma=1.0):
    A = rng.standard_normal((p, p))
    cov = Covariance(A @ A.T)
    return PenaltyProblem(
        cov,
        rng.standard_normal((m, p)),
        rng.standard_normal((n, p)) + 0.5,
        KernelConfig(sigma),
    )


class TestCovariance:
    def test_from_data_divisor(self):
        X = np.array([[1.0, 0.0], [2.0, 1.0], [3.0, 5.0]])
        cov = Covariance.from_data(X)
        expected = np.cov(X, rowvar=False)  # numpy uses 1/(n-1) too
        assert np.allclose(cov.matrix, expected, atol=1e-14)
        assert cov.trace == pytest.approx(float(np.trace(expected)))

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            Covariance(np.array([[1.0, 0.5], [0.0, 1.0]]))

    def test_rejects_indefinite(self):
        with pytest.raises(ValueError):
            Covariance(np.array([[1.0, 0.0], [0.0, -0.5]]))


class TestObjectiveF:
    def test_diagonal_picks_entry(self):
        cov = Covariance(np.diag([3.0, 2.0, 1.0]))
        prob = PenaltyProblem(cov, np.zeros((2, 3)), np.zeros((2, 3)), KernelConfig(1.0))
        V = np.array([[1.0], [0.0], [0.0]])
        assert objective_f(prob, V) == pytest.approx(-3.0)

    def test_identity_gives_minus_d(self):
        rng = np.random.default_rng(0)
        cov = Covariance(np.eye(5))
        prob = PenaltyProblem(cov, np.zeros((2, 5)), np.zeros((2, 5)), KernelConfig(1.0))
        V = random_stiefel(5, 3, rng)
        assert objective_f(prob, V) == pytest.approx(-3.0, abs=1e-12)

    def test_matches_triple_loop_oracle(self):
        rng = np.random.default_rng(1)
        prob = make_problem(rng, p=4)
        V = random_stiefel(4, 2, rng)
        sigma_m = prob.covariance.matrix
        expected = -sum(
            V[i, l] * sigma_m[i, j] * V[j, l]
            for i in range(4)
            for j in range(4)
            for l in range(2)
        )
        assert objective_f(prob, V) == pytest.approx(expected, rel=1e-12)

    def test_eckart_young_lower_bound(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            prob = make_problem(rng, p=5)
            V = random_stiefel(5, 2, rng)
            top = np.sort(np.linalg.eigvalsh(prob.covariance.matrix))[-2:].sum()
            assert objective_f(prob, V) >= -top - 1e-10


class TestObjectiveGradient:
    def test_zero_covariance(self):
        cov = Covariance(np.zeros((3, 3)))
        prob = PenaltyProblem(cov, np.zeros((2, 3)), np.zeros((2, 3)), KernelConfig(1.0))
        V = np.array([[1.0], [0.0], [0.0]])
        assert np.abs(objective_f_gradient(prob, V)).max() == 0.0

    def test_identity_gives_minus_two_v(self):
        rng = np.random.default_rng(3)
        cov = Covariance(np.eye(4))
        prob = PenaltyProblem(cov, np.zeros((2, 4)), np.zeros((2, 4)), KernelConfig(1.0))
        V = random_stiefel(4, 2, rng)
        assert np.allclose(objective_f_gradient(prob, V), -2.0 * V, atol=1e-14)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(4)
        prob = make_problem(rng, p=5)
        V = random_stiefel(5, 2, rng)
        fd = fd_gradient(lambda W: objective_f(prob, W), V)
        grad = objective_f_gradient(prob, V)
        assert np.linalg.norm(grad - fd) / np.linalg.norm(fd) <= 1e-6


class TestConstraintH:
    def test_identical_groups_zero(self):
        rng = np.random.default_rng(5)
        data = rng.standard_normal((7, 4))
        cov = Covariance.from_data(data)
        prob = PenaltyProblem(cov, data, data.copy(), KernelConfig(1.0))
        assert constraint_h(prob, random_stiefel(4, 2, rng)) <= 1e-12

    def test_zero_when_groups_match_on_projected_coordinate(self):
        # groups differ only in column 1; projecting onto column 0 hides it
        rng = np.random.default_rng(6)
        base = rng.standard_normal((6, 2))
        other = base.copy()
        other[:, 1] += 2.0
        cov = Covariance.from_data(np.vstack([base, other]))
        prob = PenaltyProblem(cov, base, other, KernelConfig(1.0))
        V = np.array([[1.0], [0.0]])
        assert constraint_h(prob, V) <= 1e-12
        assert mmd_oracle(base @ V, other @ V, 1.0) <= 1e-12

    def test_matches_oracle_on_random_instance(self):
        rng = np.random.default_rng(7)
        prob = make_problem(rng, p=3, m=5, n=6, sigma=1.3)
        V = random_stiefel(3, 2, rng)
        expected = mmd_oracle(prob.data0 @ V, prob.data1 @ V, 1.3)
        assert constraint_h(prob, V) == pytest.approx(expected, abs=1e-12)

    def test_strictly_positive_at_pca_on_synth1(self):
        from fairpca.data import standardize, synth1
        from fairpca.kernels import median_heuristic

        ds = standardize(synth1(seed=0))
        cov = Covariance.from_data(ds.features)
        V = pca_loadings(cov, 2)
        sigma = median_heuristic(ds.features @ V)
        prob = PenaltyProblem(
            cov, ds.group_features(0), ds.group_features(1), KernelConfig(sigma)
        )
        h = constraint_h(prob, V)
        assert 0.005 < h < 1.0  # order 1e-1 scale, strictly positive
        assert h == pytest.approx(
            mmd_oracle(prob.data0 @ V, prob.data1 @ V, sigma), abs=1e-12
        )


class TestPenalty:
    def test_equals_f_when_groups_identical(self):
        rng = np.random.default_rng(8)
        data = rng.standard_normal((6, 4))
        cov = Covariance.from_data(data)
        prob = PenaltyProblem(cov, data, data.copy(), KernelConfig(1.0))
        V = random_stiefel(4, 2, rng)
        assert penalty_Q(prob, V, rho=123.0) == pytest.approx(
            objective_f(prob, V), abs=1e-9
        )

    def test_rho_must_be_positive(self):
        rng = np.random.default_rng(9)
        prob = make_problem(rng)
        V = random_stiefel(4, 2, rng)
        for rho in (0.0, -1.0):
            with pytest.raises(ValueError):
                penalty_Q(prob, V, rho)

    def test_compositional_oracle(self):
        rng = np.random.default_rng(10)
        prob = make_problem(rng, p=4, sigma=0.9)
        V = random_stiefel(4, 2, rng)
        f = objective_f(prob, V)
        h = mmd_oracle(prob.data0 @ V, prob.data1 @ V, 0.9)
        assert penalty_Q(prob, V, 7.0) == pytest.approx(f + 7.0 * h, abs=1e-11)

    def test_gradient_assembles_components(self):
        rng = np.random.default_rng(11)
        prob = make_problem(rng)
        V = random_stiefel(4, 2, rng)
        fd = fd_gradient(lambda W: penalty_Q(prob, W, 3.0), V)
        grad = penalty_Q_gradient(prob, V, 3.0)
        assert np.linalg.norm(grad - fd) / np.linalg.norm(fd) <= 1e-5

    def test_fused_evaluation_consistent(self):
        rng = np.random.default_rng(12)
        prob = make_problem(rng)
        V = random_stiefel(4, 2, rng)
        f, h, q, grad, rgrad = penalty_value_and_grads(prob, V, 2.5)
        assert f == pytest.approx(objective_f(prob, V), abs=1e-14)
        assert h == pytest.approx(constraint_h(prob, V), abs=1e-14)
        assert q == pytest.approx(f + 2.5 * h, abs=1e-12)
        assert np.allclose(grad, penalty_Q_gradient(prob, V, 2.5), atol=1e-13)
        assert np.allclose(rgrad, tangent_project(V, grad), atol=1e-14)

    def test_riemannian_gradient_vanishes_at_pca_on_fair_data(self):
        rng = np.random.default_rng(13)
        data = rng.standard_normal((30, 5))
        cov = Covariance(np.diag([5.0, 4.0, 3.0, 2.0, 1.0]))
        prob = PenaltyProblem(cov, data, data.copy(), KernelConfig(1.0))
        V = pca_loadings(cov, 2)
        _, _, _, _, rgrad = penalty_value_and_grads(prob, V, 10.0)
        assert np.linalg.norm(rgrad) <= 1e-8

    def test_directional_derivative_along_retraction(self):
        rng = np.random.default_rng(14)
        prob = make_problem(rng, p=5, sigma=1.1)
        V = random_stiefel(5, 2, rng)
        xi = random_tangent(V, rng)
        xi /= np.linalg.norm(xi)
        rho = 4.0
        _, _, _, _, rgrad = penalty_value_and_grads(prob, V, rho)
        t = 1e-5
        fd = (
            penalty_Q(prob, retract(V, xi, t), rho)
            - penalty_Q(prob, retract(V, xi, -t), rho)
        ) / (2.0 * t)
        expected = float(np.einsum("ij,ij->", rgrad, xi))
        assert fd == pytest.approx(expected, rel=1e-5, abs=1e-9)


class TestPcaLoadings:
    def test_orthonormal_and_spans_top_eigenspace(self):
        rng = np.random.default_rng(15)
        A = rng.standard_normal((6, 6))
        cov = Covariance(A @ A.T)
        V = pca_loadings(cov, 2)
        assert np.linalg.norm(V.T @ V - np.eye(2)) <= 1e-12
        eigvals, eigvecs = np.linalg.eigh(cov.matrix)
        top = eigvecs[:, ::-1][:, :2]
        # same span: projecting V onto the top eigenspace loses nothing
        assert np.linalg.norm(top @ (top.T @ V) - V) <= 1e-10

    def test_sign_convention_deterministic(self):
        cov = Covariance(np.diag([3.0, 2.0, 1.0]))
        V = pca_loadings(cov, 2)
        assert np.allclose(V, np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]))

    def test_dimension_bounds(self):
        cov = Covariance(np.eye(3))
        with pytest.raises(ValueError):
            pca_loadings(cov, 0)
        with pytest.raises(ValueError):
            pca_loadings(cov, 3)

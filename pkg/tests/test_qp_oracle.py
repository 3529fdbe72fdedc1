"""The dense projected-gradient solver is the ground truth for the SMO
solver, so it gets validated on its own first: feasibility, hand-solved
instances, finite-difference gradients and first-order optimality."""

import numpy as np
import pytest

from needlestack import svr_reference as ref
from needlestack.svr import kernel_matrix


def _instance(rng, n, F, kernel="rbf"):
    X = rng.normal(size=(n, F))
    y = rng.normal(size=n)
    gamma = 1.0 / F
    K = kernel_matrix(X, X, kernel, gamma)
    return X, y, K


class TestProjection:
    def test_projection_feasible_and_idempotent(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(1, 9))
            z = np.concatenate([np.ones(n), -np.ones(n)])
            v = rng.normal(scale=3.0, size=2 * n)
            C = float(rng.uniform(0.1, 5.0))
            p = ref._project(v, C, z)
            assert p.min() >= -1e-12
            assert p.max() <= C + 1e-12
            assert abs(z @ p) < 1e-9
            again = ref._project(p, C, z)
            np.testing.assert_allclose(again, p, atol=1e-9)

    def test_projection_is_closest_point(self):
        # brute-force grid check on a tiny instance
        z = np.array([1.0, -1.0])
        v = np.array([0.9, 0.2])
        C = 1.0
        p = ref._project(v, C, z)
        best = None
        for a in np.linspace(0, C, 201):
            cand = np.array([a, a])  # z @ cand == 0
            d = float(((cand - v) ** 2).sum())
            if best is None or d < best[0]:
                best = (d, cand)
        np.testing.assert_allclose(p, best[1], atol=1e-2)
        assert float(((p - v) ** 2).sum()) <= best[0] + 1e-9


class TestHandSolvedInstances:
    def test_two_points_linear(self):
        # X = {0, 1} in 1-D, y = {0, 1}, eps = 0.1, C = 10, linear kernel.
        # Dual reduces to min 0.5 t^2 + 0.2 t - t over t in [0, C]
        # -> t = 0.8, beta = (-0.8, 0.8), objective -0.32, bias 0.1.
        X = np.array([[0.0], [1.0]])
        y = np.array([0.0, 1.0])
        K = kernel_matrix(X, X, "linear", 0.0)
        sol = ref.solve_dual(K, y, C=10.0, epsilon=0.1)
        np.testing.assert_allclose(sol.beta, [-0.8, 0.8], atol=1e-6)
        assert sol.objective == pytest.approx(-0.32, abs=1e-8)
        assert sol.bias == pytest.approx(0.1, abs=1e-6)

    def test_constant_targets_yield_zero_beta(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(6, 2))
        K = kernel_matrix(X, X, "rbf", 0.5)
        y = np.full(6, 2.5)
        sol = ref.solve_dual(K, y, C=1.0, epsilon=0.1)
        np.testing.assert_allclose(sol.beta, 0.0, atol=1e-10)
        assert sol.bias == pytest.approx(2.5, abs=1e-9)

    def test_single_point_forced_to_zero(self):
        K = np.array([[1.0]])
        sol = ref.solve_dual(K, np.array([3.0]), C=5.0, epsilon=0.01)
        assert sol.beta[0] == pytest.approx(0.0, abs=1e-12)
        assert sol.bias == pytest.approx(3.0, abs=1e-9)


class TestObjectiveAndGradient:
    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        _, y, K = _instance(rng, 6, 2)
        n = 6

        def objective(a):
            beta = a[:n] - a[n:]
            return 0.5 * beta @ K @ beta + 0.05 * a.sum() - y @ beta

        def gradient(a):
            kb = K @ (a[:n] - a[n:])
            return np.concatenate([kb + 0.05 - y, -kb + 0.05 + y])

        a = rng.uniform(0.0, 1.0, size=2 * n)
        g = gradient(a)
        h = 1e-6
        for i in range(2 * n):
            e = np.zeros(2 * n)
            e[i] = h
            num = (objective(a + e) - objective(a - e)) / (2 * h)
            assert num == pytest.approx(g[i], abs=1e-5)

    def test_dual_value_matches_alpha_form(self):
        rng = np.random.default_rng(3)
        _, y, K = _instance(rng, 5, 2)
        beta = rng.uniform(-1, 1, size=5)
        beta -= beta.mean()
        eps = 0.07
        alpha = np.maximum(beta, 0.0)
        alpha_star = np.maximum(-beta, 0.0)
        direct = 0.5 * beta @ K @ beta + eps * (alpha + alpha_star).sum() - y @ beta
        assert ref.dual_value(K, y, beta, eps) == pytest.approx(direct, abs=1e-12)


class TestSolverOptimality:
    def test_feasibility_and_kkt_on_random_instances(self):
        rng = np.random.default_rng(42)
        for trial in range(12):
            n = int(rng.integers(2, 12))
            F = int(rng.integers(1, 4))
            kernel = "rbf" if trial % 2 == 0 else "linear"
            _, y, K = _instance(rng, n, F, kernel)
            C = float(rng.choice([0.5, 1.0, 10.0]))
            eps = float(rng.choice([0.01, 0.1]))
            sol = ref.solve_dual(K, y, C, eps)
            assert sol.alpha.min() >= -1e-12 and sol.alpha.max() <= C + 1e-12
            assert sol.alpha_star.min() >= -1e-12 and sol.alpha_star.max() <= C + 1e-12
            assert abs(sol.beta.sum()) < 1e-8 * max(1.0, C)
            gap = ref.kkt_gap(K, y, sol.alpha, sol.alpha_star, C, eps)
            assert gap <= 1e-5 * max(1.0, C)

    def test_beats_random_feasible_points(self):
        rng = np.random.default_rng(17)
        _, y, K = _instance(rng, 8, 2)
        C, eps = 1.0, 0.05
        sol = ref.solve_dual(K, y, C, eps)
        z = np.concatenate([np.ones(8), -np.ones(8)])
        for _ in range(200):
            a = ref._project(rng.uniform(0, C, size=16), C, z)
            val = ref.dual_value(K, y, a[:8] - a[8:], eps)
            assert sol.objective <= val + 1e-9

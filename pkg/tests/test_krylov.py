import numpy as np
import pytest

from fracturekit.krylov import KrylovConfig, gmres_solve


class TestConfig:
    def test_tolerance_validation(self):
        with pytest.raises(ValueError):
            KrylovConfig(relative_tolerance=1.5)
        with pytest.raises(ValueError):
            KrylovConfig(relative_tolerance=0.0)

    def test_restart_validation(self):
        with pytest.raises(ValueError):
            KrylovConfig(restart=1)


class TestGmres:
    def test_identity_converges_in_one_iteration(self):
        rng = np.random.default_rng(0)
        b = rng.standard_normal(20)
        res = gmres_solve(lambda v: v, b, KrylovConfig())
        assert res.converged and res.iterations == 1
        assert np.allclose(res.solution, b, atol=1e-12)

    def test_krylov_exactness_on_random_5x5(self):
        rng = np.random.default_rng(1)
        A = rng.standard_normal((5, 5)) + 5 * np.eye(5)
        b = rng.standard_normal(5)
        res = gmres_solve(lambda v: A @ v, b, KrylovConfig(relative_tolerance=1e-12))
        assert res.converged and res.iterations <= 5
        assert np.linalg.norm(A @ res.solution - b) <= 1e-10 * np.linalg.norm(b)

    def test_jacobi_preconditioned_diagonal_in_one_iteration(self):
        d = np.arange(1.0, 11.0)
        b = np.ones(10)
        res = gmres_solve(lambda v: d * v, b, KrylovConfig(),
                          preconditioner=lambda v: v / d)
        assert res.converged and res.iterations == 1

    def test_residual_history_non_increasing_within_cycle(self):
        rng = np.random.default_rng(2)
        n = 40
        A = rng.standard_normal((n, n)) + n * np.eye(n)
        b = rng.standard_normal(n)
        res = gmres_solve(lambda v: A @ v, b, KrylovConfig(restart=100))
        h = np.array(res.residual_history)
        assert np.all(np.diff(h) <= 1e-12 * h[:-1] + 1e-30)

    def test_history_holds_true_residuals(self):
        rng = np.random.default_rng(3)
        n = 15
        A = rng.standard_normal((n, n)) + n * np.eye(n)
        b = rng.standard_normal(n)
        res = gmres_solve(lambda v: A @ v, b, KrylovConfig())
        assert res.residual_history[0] == pytest.approx(np.linalg.norm(b))
        final = np.linalg.norm(A @ res.solution - b)
        assert res.residual_history[-1] == pytest.approx(final, rel=1e-9, abs=1e-14)

    def test_stagnation_returns_best_iterate_with_flag(self):
        rng = np.random.default_rng(4)
        n = 50
        A = rng.standard_normal((n, n)) + 1.5 * np.eye(n)  # hard, nonnormal
        b = rng.standard_normal(n)
        res = gmres_solve(lambda v: A @ v, b,
                          KrylovConfig(relative_tolerance=1e-14, max_iterations=5, restart=5))
        assert not res.converged
        assert res.iterations == 5
        assert np.isfinite(res.solution).all()

    def test_restarted_solve_converges(self):
        rng = np.random.default_rng(5)
        n = 60
        A = rng.standard_normal((n, n)) + 8 * np.eye(n)
        b = rng.standard_normal(n)
        res = gmres_solve(lambda v: A @ v, b, KrylovConfig(restart=7, max_iterations=400))
        assert res.converged
        assert np.linalg.norm(A @ res.solution - b) <= 1.1e-6 * np.linalg.norm(b)

    def test_happy_breakdown(self):
        # rhs lies in a 2-dimensional invariant subspace
        A = np.diag([2.0, 2.0, 5.0, 7.0])
        b = np.array([1.0, 1.0, 0.0, 0.0])
        res = gmres_solve(lambda v: A @ v, b, KrylovConfig(relative_tolerance=1e-12))
        assert res.converged and res.iterations <= 2

    def test_initial_guess(self):
        rng = np.random.default_rng(6)
        A = rng.standard_normal((8, 8)) + 8 * np.eye(8)
        xs = rng.standard_normal(8)
        b = A @ xs
        res = gmres_solve(lambda v: A @ v, b, KrylovConfig(), x0=xs.copy())
        assert res.converged and res.iterations == 0

    def test_mf_and_assembled_operator_solutions_agree(self):
        import fracturekit.pff_operator as op
        from fracturekit.material_model import MaterialParams
        from fracturekit.mesh_hierarchy import build_hierarchy

        rng = np.random.default_rng(7)
        h = build_hierarchy(2, 2)
        st = op.LinearizationState(h, 2, MaterialParams())
        n = st.n_scalar
        U = 0.01 * rng.standard_normal(3 * n)
        U[2 * n:] = 0.5 + 0.4 * rng.random(n)
        st.set_solution(U)
        st.set_phi_tilde(0.5 + 0.4 * rng.random(n))
        st.set_dirichlet_nodes(h.dof_map(2).boundary_nodes["bottom"])
        st.refresh_cache()
        mat = op.assemble_oracle(st).matrix
        b = rng.standard_normal(3 * n)
        b[st.constrained_mask()] = 0.0
        cfg = KrylovConfig(relative_tolerance=1e-10)
        x_mf = gmres_solve(lambda v: op.apply_jacobian(st, v), b, cfg).solution
        x_sp = gmres_solve(lambda v: mat @ v, b, cfg).solution
        assert np.linalg.norm(x_mf - x_sp) <= 1e-8 * np.linalg.norm(x_sp)

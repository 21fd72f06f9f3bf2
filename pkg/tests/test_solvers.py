import numpy as np
import pytest

from dfrcopt import (
    ConvexQcqp,
    Halfspace,
    QuadConstraint,
    SolverOptions,
    level_objective,
    solve_level_program,
    solve_qcqp,
    solve_sinr_power_min,
    solve_spectrahedron_minmax,
)
from dfrcopt.errors import InfeasibleError, UnboundedProgramError

from _oracles import (
    haar_unitary,
    level_grid_oracle,
    lp_simplex_minmax,
    pg_qcqp_oracle,
    random_hermitian,
    random_psd,
)

OPTS = SolverOptions()


class TestSolveQcqp:
    def test_ball_only_cauchy_schwarz(self, rng):
        q = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        problem = ConvexQcqp(lin_u=q, lin_b=-1e6, offset=0.0, power_cap=1.0)
        sol = solve_qcqp(problem, OPTS)
        assert sol.value == pytest.approx(2.0 * np.linalg.norm(q), rel=1e-8)
        np.testing.assert_allclose(sol.u, q / np.linalg.norm(q), atol=1e-6)
        assert sol.b <= 1e-9

    def test_infeasible_certified(self):
        # the quadratic constraint demands ||u||^2 <= -1: no point qualifies
        problem = ConvexQcqp(
            lin_u=np.zeros(3, dtype=complex), lin_b=-1e6, offset=0.0,
            power_cap=0.01,
            quads=(QuadConstraint(lin=np.zeros(3, dtype=complex), const=-1.0,
                                  quad=np.eye(3, dtype=complex)),))
        with pytest.raises(InfeasibleError):
            solve_qcqp(problem, OPTS)

    def test_unattainable_threshold_infeasible(self, rng):
        # an SINR-style constraint that cannot be met inside a tiny power ball
        h = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        problem = ConvexQcqp(
            lin_u=np.zeros(3, dtype=complex), lin_b=-1e6, offset=0.0,
            power_cap=1e-6,
            halfspaces=(Halfspace(normal=h, b_coef=0.0, rhs=10.0),),
            quads=(QuadConstraint(lin=np.zeros(3, dtype=complex), const=1e-5,
                                  quad=np.eye(3, dtype=complex)),))
        with pytest.raises(InfeasibleError):
            solve_qcqp(problem, OPTS)

    def test_matches_projected_gradient_oracle(self, rng):
        n = 6
        q = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        m = random_psd(n, rng) + 0.5 * np.eye(n)
        lin = 0.1 * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        problem = ConvexQcqp(
            lin_u=q, lin_b=-1e6, offset=0.0, power_cap=1.0,
            quads=(QuadConstraint(lin=lin, const=0.4, quad=m),))
        sol = solve_qcqp(problem, OPTS)
        _, pg_value = pg_qcqp_oracle(problem)
        assert sol.value == pytest.approx(pg_value, rel=1e-5, abs=1e-5)
        assert pg_value <= sol.dual_bound + 1e-6

    def test_certified_sandwich(self, rng):
        for trial in range(10):
            n = 4
            q = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            m = random_psd(n, rng) + 0.2 * np.eye(n)
            problem = ConvexQcqp(
                lin_u=q, lin_b=-10.0, offset=float(rng.standard_normal()),
                power_cap=float(rng.uniform(0.5, 2.0)),
                quads=(QuadConstraint(lin=np.zeros(n, dtype=complex),
                                      const=float(rng.uniform(0.2, 1.0)), quad=m),))
            sol = solve_qcqp(problem, OPTS)
            assert abs(sol.value - sol.dual_bound) <= 1e-8 * (1.0 + abs(sol.value))
            assert sol.kkt.worst() <= OPTS.kkt_tol


class TestSpectrahedron:
    def test_single_matrix_is_top_eigenpair(self, rng):
        m = random_hermitian(5, rng)
        sol = solve_spectrahedron_minmax(np.stack([m]), OPTS)
        vals, vecs = np.linalg.eigh(m)
        assert sol.value == pytest.approx(vals[-1], rel=1e-8, abs=1e-9)
        top = np.outer(vecs[:, -1], vecs[:, -1].conj())
        assert np.linalg.norm(sol.w_matrix - top) < 1e-4

    def test_identical_matrices_reduce_to_single(self, rng):
        m = random_hermitian(4, rng)
        one = solve_spectrahedron_minmax(np.stack([m]), OPTS)
        many = solve_spectrahedron_minmax(np.stack([m, m, m]), OPTS)
        assert many.value == pytest.approx(one.value, rel=1e-8, abs=1e-9)

    def test_diagonal_commuting_matches_lp(self, rng):
        for _ in range(5):
            diag = rng.uniform(-2.0, 2.0, size=(2, 5))
            mats = np.stack([np.diag(d).astype(complex) for d in diag])
            sol = solve_spectrahedron_minmax(mats, OPTS)
            assert sol.value == pytest.approx(lp_simplex_minmax(diag), rel=1e-7, abs=1e-8)

    def test_unitary_conjugation_invariance(self, rng):
        mats = np.stack([random_hermitian(4, rng) for _ in range(3)])
        base = solve_spectrahedron_minmax(mats, OPTS)
        for _ in range(3):
            q = haar_unitary(4, rng)
            rotated = np.stack([q @ m @ q.conj().T for m in mats])
            sol = solve_spectrahedron_minmax(rotated, OPTS)
            assert sol.value == pytest.approx(base.value, rel=1e-8, abs=1e-8)

    def test_feasibility_of_returned_matrix(self, rng):
        mats = np.stack([random_hermitian(6, rng) for _ in range(2)])
        sol = solve_spectrahedron_minmax(mats, OPTS)
        vals = np.linalg.eigvalsh(sol.w_matrix)
        assert vals[0] >= -1e-12
        assert np.trace(sol.w_matrix).real == pytest.approx(1.0, abs=1e-12)
        assert sol.gap <= 1e-7


class TestLevelProgram:
    def test_all_zero_ratios(self):
        levels = solve_level_program(np.zeros(3), y=1.0, eta=10.0)
        np.testing.assert_allclose(levels, 0.0, atol=1e-15)
        assert level_objective(levels, np.zeros(3), 1.0, 10.0) == 0.0

    def test_large_eta_approaches_ratios(self):
        x = np.array([1.7])
        y = 0.8
        for eta in (1e2, 1e4, 1e6):
            levels = solve_level_program(x, y, eta)
            assert levels[0] == pytest.approx((x[0] / y) ** 2, rel=5.0 / (eta * y * y))

    def test_two_coordinate_structure(self):
        x = np.array([1.0, 2.0])
        y, eta = 1.0, 100.0
        levels = solve_level_program(x, y, eta)
        # non-minimal coordinate sits exactly at its ratio peak
        assert levels[1] == pytest.approx(4.0, rel=1e-12)
        # minimal coordinate solves the 1-D concave trade-off
        expected_root = eta * y * x[0] / (eta * y * y - 1.0)
        assert levels[0] == pytest.approx(expected_root ** 2, rel=1e-12)

    @pytest.mark.parametrize("i_count", [1, 2, 3])
    def test_matches_grid_oracle(self, rng, i_count):
        for _ in range(4):
            x = rng.uniform(0.0, 2.0, i_count)
            y = float(rng.uniform(0.5, 1.5))
            eta = float(rng.uniform(50.0, 200.0))
            levels = solve_level_program(x, y, eta)
            _, oracle_val = level_grid_oracle(x, y, eta)
            value = level_objective(levels, x, y, eta)
            assert value >= oracle_val - 1e-6 * (1.0 + abs(oracle_val))

    def test_concavity_midpoint(self, rng):
        x = rng.uniform(0.0, 2.0, 3)
        y, eta = 1.0, 80.0
        for _ in range(200):
            a = rng.uniform(0.0, 5.0, 3)
            b = rng.uniform(0.0, 5.0, 3)
            mid = level_objective((a + b) / 2.0, x, y, eta)
            ends = 0.5 * (level_objective(a, x, y, eta) + level_objective(b, x, y, eta))
            assert mid >= ends - 1e-10

    def test_unbounded_detected(self):
        with pytest.raises(UnboundedProgramError):
            solve_level_program(np.array([1.0]), y=0.05, eta=100.0)

    def test_optimality_certificate_against_perturbations(self, rng):
        x = rng.uniform(0.1, 2.0, 3)
        y, eta = 0.9, 120.0
        levels = solve_level_program(x, y, eta)
        best = level_objective(levels, x, y, eta)
        for _ in range(300):
            delta = rng.normal(0.0, 0.05, 3)
            trial = np.clip(levels + delta, 0.0, None)
            assert level_objective(trial, x, y, eta) <= best + 1e-10


class TestPowerMin:
    def test_single_user_matched_filter(self, rng):
        h = (rng.standard_normal(4) + 1j * rng.standard_normal(4)) * 1e-4
        gamma = np.array([10.0])
        noise = 4e-13
        blocks, p_min = solve_sinr_power_min(h[None, :], gamma, noise, OPTS)
        expected_power = gamma[0] * noise / np.linalg.norm(h) ** 2
        assert p_min == pytest.approx(expected_power, rel=1e-6)
        # matched direction up to a global phase
        cos = abs(np.vdot(h, blocks[0])) / (np.linalg.norm(h) * np.linalg.norm(blocks[0]))
        assert cos == pytest.approx(1.0, abs=1e-6)

    def test_two_users_meet_thresholds(self, rng):
        h = (rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4))) * 1e-4
        gamma = np.array([3.0, 5.0])
        noise = 4e-13
        blocks, p_min = solve_sinr_power_min(h, gamma, noise, OPTS)
        for k in range(2):
            sig = abs(np.vdot(h[k], blocks[k])) ** 2
            interf = sum(abs(np.vdot(h[k], blocks[i])) ** 2 for i in range(2) if i != k)
            assert sig / (interf + noise) >= gamma[k] * (1.0 - 1e-6)

    def test_scalar_channel_conflict_infeasible(self):
        h = np.array([[1e-4 + 0j], [1e-4 + 0j]])
        with pytest.raises(InfeasibleError):
            solve_sinr_power_min(h, np.array([2.0, 2.0]), 1e-13, OPTS)

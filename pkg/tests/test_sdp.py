import numpy as np
import pytest

from drlyap import sdp
from drlyap.sdp import SdpError, SdpProblem, SolverConfig, Status, feasibility_margin, kkt_residuals, solve


def sym_unit(k, i, j):
    e = np.zeros((k, k))
    e[i, j] += 0.5
    e[j, i] += 0.5
    return e


def lambda_min_problem(a: np.ndarray) -> SdpProblem:
    """max t s.t. X = A - t I, X PSD; t split into a nonnegative pair."""
    k = a.shape[0]
    cons = []
    for i in range(k):
        for j in range(i, k):
            cons.append(([sym_unit(k, i, j), np.array([1.0, -1.0]) if i == j else None], a[i, j]))
    return SdpProblem.from_dense([k, -2], [np.zeros((k, k)), np.array([-1.0, 1.0])], cons)


class TestSolve:
    def test_diag_lambda_min(self):
        sol = solve(lambda_min_problem(np.diag([3.0, 5.0])))
        assert sol.status == Status.OPTIMAL
        t = sol.x[1][0] - sol.x[1][1]
        assert t == pytest.approx(3.0, abs=1e-6)

    def test_min_trace_with_offdiagonal(self):
        p = SdpProblem.from_dense([2], [np.eye(2)], [([sym_unit(2, 0, 1)], 1.0)])
        sol = solve(p)
        assert sol.status == Status.OPTIMAL
        assert sol.primal_objective == pytest.approx(2.0, abs=1e-6)
        np.testing.assert_allclose(sol.x[0], [[1, 1], [1, 1]], atol=1e-5)

    def test_min_trace_grid_oracle(self):
        # X11 * X22 >= 1 with X11, X22 > 0: the trace minimum over a dense grid
        g = np.linspace(0.1, 5, 2000)
        x11, x22 = np.meshgrid(g, g)
        best = np.min(np.where(x11 * x22 >= 1.0, x11 + x22, np.inf))
        p = SdpProblem.from_dense([2], [np.eye(2)], [([sym_unit(2, 0, 1)], 1.0)])
        assert solve(p).primal_objective == pytest.approx(best, abs=5e-3)

    def test_infeasible_negative_diagonal(self):
        p = SdpProblem.from_dense([2], [np.zeros((2, 2))], [([sym_unit(2, 0, 0)], -1.0)])
        sol = solve(p)
        assert sol.status == Status.INFEASIBLE

    def test_random_lambda_min(self, rng):
        for _ in range(30):
            k = int(rng.integers(1, 11))
            a = rng.normal(size=(k, k))
            a = 0.5 * (a + a.T)
            prob = lambda_min_problem(a)
            sol = solve(prob)
            assert sol.status == Status.OPTIMAL
            t = sol.x[1][0] - sol.x[1][1]
            assert t == pytest.approx(np.linalg.eigvalsh(a).min(), abs=1e-6)
            kkt = kkt_residuals(prob, sol)
            assert kkt["primal"] <= 1e-7 and kkt["min_eig_x"] >= -1e-7
            assert sol.gap <= 1e-7 * max(1.0, abs(sol.primal_objective))

    def test_deterministic(self, rng):
        a = rng.normal(size=(5, 5))
        prob = lambda_min_problem(a + a.T)
        s1, s2 = solve(prob), solve(prob)
        assert s1.iterations == s2.iterations
        np.testing.assert_array_equal(s1.y, s2.y)


class TestValidation:
    def test_dimension_mismatch(self):
        with pytest.raises(SdpError):
            SdpProblem([2], [np.zeros((3, 3))], [np.zeros((1, 4))], [1.0])

    def test_asymmetric_objective(self):
        with pytest.raises(SdpError, match="symmetric"):
            SdpProblem([2], [np.array([[0, 1.0], [0, 0]])], [np.eye(2).reshape(1, 4)], [1.0])

    def test_zero_row(self):
        with pytest.raises(SdpError, match="all-zero"):
            SdpProblem([2], [np.zeros((2, 2))], [np.zeros((1, 4))], [1.0])

    def test_config_tolerances(self):
        with pytest.raises(SdpError):
            SolverConfig(feasibility_tol=0.0)

    def test_unknown_backend(self):
        p = SdpProblem.from_dense([1], [np.zeros((1, 1))], [([np.eye(1)], 1.0)])
        with pytest.raises(SdpError, match="backend"):
            solve(p, backend="nope")

    def test_register_backend(self):
        calls = []

        def fake(problem, config):
            calls.append(problem)
            return sdp._solve_builtin(problem, config)

        sdp.register_backend("fake", fake)
        p = SdpProblem.from_dense([1], [np.eye(1)], [([np.eye(1)], 2.0)])
        assert solve(p, backend="fake").primal_objective == pytest.approx(2.0, abs=1e-7)
        assert calls


class TestFeasibilityMargin:
    def test_perfect_square(self):
        p = SdpProblem.from_dense([1], [np.zeros((1, 1))], [([np.eye(1)], 1.0)])
        res = feasibility_margin(p)
        assert res.feasible and res.t == pytest.approx(1.0, abs=1e-6)

    def test_negative(self):
        p = SdpProblem.from_dense([1], [np.zeros((1, 1))], [([np.eye(1)], -1.0)])
        res = feasibility_margin(p)
        assert not res.feasible and res.t == pytest.approx(-1.0, abs=1e-6)

    def test_rejects_objective(self):
        p = SdpProblem.from_dense([1], [np.eye(1)], [([np.eye(1)], 1.0)])
        with pytest.raises(SdpError):
            feasibility_margin(p)


class TestSdpaFormat:
    def test_round_trip(self, rng):
        a = rng.normal(size=(3, 3))
        prob = lambda_min_problem(a + a.T)
        back = SdpProblem.from_sdpa(prob.to_sdpa())
        assert back.layout_signature() == prob.layout_signature()

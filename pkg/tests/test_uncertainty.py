import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drlyap.bench import SampleSet, polynomial_system
from drlyap.poly import Polynomial, PolyVector, lie_derivative, variables
from drlyap.uncertainty import (
    AmbiguityConfig,
    PolyCandidate,
    RadiusParams,
    UncertaintyError,
    cvar_empirical_inf,
    cvar_empirical_inf_rows,
    drcc_margin,
    drcc_margins,
    drcc_probability_bound,
    g_value,
    g_values,
    lipschitz_term,
    wasserstein_radius,
)

x1, x2 = variables(2)
ZERO = Polynomial.zero(2)
REGION = ((-2.0, 2.0), (-2.0, 2.0))


def decay_system(d_identity=True):
    f = PolyVector([-x1, -x2])
    d = [PolyVector([Polynomial.constant(2, 1.0), ZERO]), PolyVector([ZERO, Polynomial.constant(2, 1.0)])]
    if not d_identity:
        d = [PolyVector([ZERO, ZERO])] * 2
    return polynomial_system("decay", f, d, REGION)


def grid_oracle(values, beta, step=1e-4):
    v = np.asarray(values)
    span = 10 * max(np.abs(v).max(), 1e-3)
    k = int(round(span / step))
    t = np.arange(-k, k + 1) * step
    obj = np.maximum(v[None, :] + t[:, None], 0.0).mean(axis=1) - t * beta
    return obj.min()


class TestGValue:
    def test_disturbance_free(self, case1, rng):
        V = PolyCandidate(x1**2 + x1 * x2 + 2.0 * x2**2)
        x = rng.uniform(-2, 2, size=2)
        expect = lie_derivative(V.V, case1.f_poly).eval(x) + 1e-3 * x @ x
        assert g_value(V, case1, x, np.zeros(2), 1e-3) == pytest.approx(expect, rel=1e-12)

    def test_hand_example(self):
        V = PolyCandidate(x1**2 + x2**2)
        assert g_value(V, decay_system(), np.array([1.0, 0.0]), np.array([1.0, 0.0]), 0.0) == pytest.approx(0.0)

    def test_equilibrium(self, case2):
        V = PolyCandidate(x1**2 + x2**4)
        assert g_value(V, case2, np.zeros(2), np.array([3.0, -1.0]), 1e-3) == 0.0

    def test_dimension_mismatch(self, case1):
        V = PolyCandidate(x1**2 + x2**2)
        with pytest.raises(UncertaintyError, match="dimension"):
            g_value(V, case1, np.zeros(3), np.zeros(2), 0.0)
        with pytest.raises(UncertaintyError, match="dimension"):
            g_value(V, case1, np.zeros(2), np.zeros(3), 0.0)

    def test_nn_and_poly_paths_agree(self, case2, rng):
        class Wrapped:
            n = 2

            def __init__(self, p):
                self.p = p
                self.g = p.grad()

            def value(self, x):
                return self.p.eval_batch(x)

            def grad(self, x):
                return self.g.eval_batch(x)

        p = x1**2 + 0.3 * x1 * x2**3 + x2**2
        x = rng.uniform(-2, 2, size=(50, 2))
        xi = rng.normal(size=(4, 2))
        np.testing.assert_allclose(g_values(PolyCandidate(p), case2, x, xi, 1e-3), g_values(Wrapped(p), case2, x, xi, 1e-3), rtol=1e-10, atol=1e-10)


class TestCvar:
    def test_small_beta(self):
        val, t = cvar_empirical_inf([1.0, 2.0, 3.0], 0.1)
        assert val == pytest.approx(0.3) and t == -3.0
        assert grid_oracle([1.0, 2.0, 3.0], 0.1) == pytest.approx(0.3, abs=1e-6)

    def test_single(self):
        val, t = cvar_empirical_inf([-5.0], 0.3)
        assert val == pytest.approx(-1.5) and t == 5.0

    def test_all_zero(self):
        assert cvar_empirical_inf([0.0] * 5, 0.4).value == 0.0

    def test_empty(self):
        with pytest.raises(UncertaintyError, match="empty"):
            cvar_empirical_inf([], 0.1)

    def test_closed_form_vs_grid(self, rng):
        for _ in range(30):
            n = int(rng.integers(1, 12))
            v = np.round(rng.normal(size=n), 3)
            beta = float(rng.uniform(0.01, 0.99))
            assert cvar_empirical_inf(v, beta).value == pytest.approx(grid_oracle(v, beta), abs=1e-6)

    @given(st.lists(st.floats(-100, 100), min_size=1, max_size=20), st.floats(0.01, 1.0), st.floats(0.1, 10.0))
    @settings(max_examples=100, deadline=None)
    def test_positive_homogeneity(self, values, beta, lam):
        a = cvar_empirical_inf(values, beta).value
        b = cvar_empirical_inf([lam * v for v in values], beta).value
        assert b == pytest.approx(lam * a, rel=1e-9, abs=1e-9)

    @given(st.lists(st.floats(-100, 100), min_size=1, max_size=20))
    @settings(max_examples=100, deadline=None)
    def test_prop1_identity(self, values):
        beta = 1.0 / len(values)
        val = cvar_empirical_inf(values, beta).value
        assert abs(val - beta * max(values)) <= 1e-12 * max(1.0, abs(max(values)))
        assert np.sign(val) == np.sign(max(values))

    def test_rows(self, rng):
        v = rng.normal(size=(20, 7))
        rows = cvar_empirical_inf_rows(v, 0.4)
        np.testing.assert_allclose(rows, [cvar_empirical_inf(r, 0.4).value for r in v], rtol=1e-14)


class TestLipschitz:
    def test_zero_d(self):
        V = PolyCandidate(x1**2 + x2**2)
        assert lipschitz_term(V, decay_system(False), np.array([1.0, 2.0])) == 0.0

    def test_hand_example(self):
        assert lipschitz_term(PolyCandidate(x1**2), decay_system(), np.array([2.0, 5.0])) == pytest.approx(4.0)

    def test_single_column(self, rng):
        sys1 = polynomial_system("one", PolyVector([-x1, -x2]), [PolyVector([x2, x1])], REGION)
        V = PolyCandidate(x1**2 + 3.0 * x2**2)
        x = rng.uniform(-2, 2, size=2)
        expect = abs(V.V.grad().eval(x) @ np.array([x[1], x[0]]))
        assert lipschitz_term(V, sys1, x) == pytest.approx(expect, rel=1e-12)


class TestDrccMargin:
    def test_zero_radius_is_cc_margin(self, case1, rng):
        V = PolyCandidate(x1**2 + x2**2 + x1**4)
        s = SampleSet(rng.normal(size=(9, 2)))
        x = rng.uniform(-2, 2, size=(30, 2))
        m = drcc_margins(V, case1, x, s, AmbiguityConfig(0.0, 0.1), 1e-3)
        np.testing.assert_array_equal(m, 0.1 * g_values(V, case1, x, s.samples, 1e-3).max(axis=1))

    def test_single_zero_sample(self, rng):
        sys0 = decay_system(False)
        V = PolyCandidate(x1**2 + x1 * x2 + x2**2)
        x = rng.uniform(-2, 2, size=2)
        expect = 0.5 * (lie_derivative(V.V, sys0.f_poly).eval(x) + 1e-3 * x @ x)
        assert drcc_margin(V, sys0, x, SampleSet(np.zeros((1, 2))), AmbiguityConfig(0.3, 0.5), 1e-3) == pytest.approx(expect)

    def test_beta_guard(self, case1):
        V = PolyCandidate(x1**2 + x2**2)
        with pytest.raises(UncertaintyError, match="beta exceeds 1/N"):
            drcc_margin(V, case1, np.ones(2), SampleSet(np.zeros((9, 2))), AmbiguityConfig(0.1, 0.5), 1e-3)

    def test_general_form(self, case1, rng):
        V = PolyCandidate(x1**2 + x2**2)
        s = SampleSet(rng.normal(size=(9, 2)))
        x = rng.uniform(-2, 2, size=(5, 2))
        m = drcc_margins(V, case1, x, s, AmbiguityConfig(0.2, 0.5), 1e-3, general=True)
        g = g_values(V, case1, x, s.samples, 1e-3)
        from drlyap.uncertainty import lipschitz_terms

        np.testing.assert_allclose(m, 0.2 * lipschitz_terms(V, case1, x) + cvar_empirical_inf_rows(g, 0.5))

    def test_monotone_in_radius(self, case2, rng):
        V = PolyCandidate(x1**2 + x2**2 + x1 * x2**3)
        s = SampleSet(rng.normal(size=(5, 2)))
        x = rng.uniform(-2, 2, size=(100, 2))
        prev = None
        for r in (0.0, 0.1, 0.5, 1.0):
            m = drcc_margins(V, case2, x, s, AmbiguityConfig(r, 0.2), 1e-3)
            if prev is not None:
                assert np.all(m >= prev)
            prev = m

    def test_worst_case_shift_oracle(self, case1, rng):
        # Worst case over distributions moving mass r from one sample along +-e_j
        # (the extreme points of the L1 ball budget) equals the closed form.
        V = PolyCandidate(x1**2 + 0.5 * x1 * x2 + x2**2 + 0.1 * x1**4)
        s = SampleSet(rng.normal((5, 3), 1, size=(9, 2)))
        cfg = AmbiguityConfig(0.25, 0.1)
        N = s.n
        for x in rng.uniform(-2, 2, size=(10, 2)):
            g = g_values(V, case1, x[None], s.samples, 1e-3)[0]
            best = -np.inf
            for i in range(N):
                for j in range(2):
                    for sgn in (1.0, -1.0):
                        xi = s.samples.copy()
                        xi[i, j] += sgn * cfg.radius * N
                        gi = g_values(V, case1, x[None], xi[i : i + 1], 1e-3)[0, 0]
                        # N * beta = 1: the CVaR bound is beta * max of the shifted atom set
                        best = max(best, cfg.beta * max(g.max(), gi) if cfg.beta * N < 1 else cfg.beta * gi)
            closed = drcc_margin(V, case1, x, s, cfg, 1e-3)
            # with N*beta = 0.9 < 1, the max over shifts of beta*max is bounded by the closed form
            assert best <= closed + 1e-8


class TestRadius:
    def test_zero_at_boundary(self):
        assert wasserstein_radius(RadiusParams(10, 3, 1.0, 1.0, 1.0, 2.0)) == 0.0

    def test_hand_values(self):
        p = dict(m=3, alpha=math.exp(-1), c1=1.0, c2=1.0, rho=2.0)
        assert abs(wasserstein_radius(RadiusParams(1, **p)) - 1.0) <= 1e-12
        assert abs(wasserstein_radius(RadiusParams(10, **p)) - 0.1 ** (1 / 3)) <= 1e-12

    def test_second_branch(self):
        r = wasserstein_radius(RadiusParams(1, 3, 0.01, 1.0, 0.1, 2.0))
        L = math.log(100.0)
        assert r == pytest.approx((L / 0.1) ** 0.5)

    def test_m2_rejected(self):
        with pytest.raises(UncertaintyError, match="excludes m=2"):
            wasserstein_radius(RadiusParams(10, 2, 0.1, 1.0, 1.0, 2.0))

    def test_monotone(self):
        rs = [wasserstein_radius(RadiusParams(n, 3, 0.05, 2.0, 1.0, 2.0)) for n in range(5, 101)]
        assert all(a >= b for a, b in zip(rs, rs[1:]))
        ra = [wasserstein_radius(RadiusParams(50, 3, a, 2.0, 1.0, 2.0)) for a in (0.5, 0.1, 0.05, 0.01)]
        assert all(a <= b for a, b in zip(ra, ra[1:]))


class TestProbabilityBound:
    @pytest.mark.parametrize("a,b,expect", [(0.0, 0.0, 1.0), (0.05, 0.1, 0.855), (1.0, 0.3, 0.0)])
    def test_values(self, a, b, expect):
        assert drcc_probability_bound(a, b) == pytest.approx(expect)


class TestAmbiguityConfig:
    def test_invalid(self):
        with pytest.raises(UncertaintyError):
            AmbiguityConfig(-0.1, 0.1)
        with pytest.raises(UncertaintyError):
            AmbiguityConfig(0.1, 0.0)

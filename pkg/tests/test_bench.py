import math

import numpy as np
import pytest

from drlyap.bench import (
    DisturbanceSpec,
    SampleSet,
    builtin_system,
    grid_states,
    make_pendulum,
    make_poly_system,
    make_rng,
    sample_disturbances,
    sin_taylor,
)
from drlyap.poly import variables


class TestSystems:
    def test_poly_drift(self):
        sys = make_poly_system(1)
        np.testing.assert_allclose(sys.f(np.array([[1.0, 1.0]])), [[-3.0, 5.0]])
        np.testing.assert_allclose(sys.f_poly.eval(np.array([1.0, 1.0])), [-3.0, 5.0])

    def test_case1_columns(self):
        sys = make_poly_system(1)
        np.testing.assert_allclose(sys.d(np.array([[1.0, 1.0]]))[0, :, 0], [-1.0, -1.0])
        np.testing.assert_allclose(sys.d(np.array([[1.0, 1.0]]))[0, :, 1], [-1.0, 0.0])

    def test_case2_columns(self):
        sys = make_poly_system(2)
        np.testing.assert_allclose(sys.d(np.array([[1.0, 1.0]]))[0, :, 0], [-2.0, -1.0])
        np.testing.assert_allclose(sys.d(np.array([[1.0, 1.0]]))[0, :, 1], [-1.0, -1.0])

    def test_invalid_case(self):
        with pytest.raises(ValueError, match="invalid case id"):
            make_poly_system(3)

    def test_pendulum_value(self):
        sys = make_pendulum()
        assert sys.f(np.array([[math.pi / 2, 0.0]]))[0, 1] == pytest.approx(-19.62)
        assert sys.f(np.array([[math.pi / 2, 0.0]]))[0, 0] == 0.0

    def test_pendulum_poly_close_near_origin(self, rng):
        sys = make_pendulum(5)
        x = rng.uniform(-0.3, 0.3, size=(50, 2))
        np.testing.assert_allclose(sys.f_poly.eval_batch(x), sys.f(x), atol=1e-4)

    def test_equilibrium_and_region(self):
        for name in ("poly-case1", "poly-case2", "pendulum"):
            sys = builtin_system(name)
            assert np.all(sys.f(np.zeros((1, 2))) == 0.0)
            assert len(sys.region) == sys.n

    def test_unknown_builtin(self):
        with pytest.raises(ValueError, match="unknown system"):
            builtin_system("cartpole")

    def test_poly_matches_numeric(self, rng):
        sys = make_poly_system(2)
        x = rng.uniform(-2, 2, size=(20, 2))
        xi = np.array([0.7, -1.3])
        expect = np.array([sys.field_poly(xi).eval(p) for p in x])
        np.testing.assert_allclose(sys.flow(x, xi), expect, rtol=1e-12)

    def test_sin_taylor(self):
        (t,) = variables(1)
        s = sin_taylor(t, 3)
        assert s.eval(np.array([0.1])) == pytest.approx(0.1 - 0.1**3 / 6)


class TestSampling:
    def test_seeded(self):
        spec = DisturbanceSpec.gaussian((5.0, 3.0), (1.0, 1.0))
        a = sample_disturbances(spec, 9, 0)
        b = sample_disturbances(spec, 9, 0)
        np.testing.assert_array_equal(a.samples, b.samples)
        assert a.n == 9 and a.m == 2
        assert not np.array_equal(a.samples, sample_disturbances(spec, 9, 1).samples)

    def test_streams_independent(self):
        a = make_rng(3, 0).normal(size=4)
        b = make_rng(3, 1).normal(size=4)
        assert not np.array_equal(a, b)
        np.testing.assert_array_equal(a, make_rng(3, 0).normal(size=4))

    def test_uniform_bounds(self):
        s = sample_disturbances(DisturbanceSpec.uniform((1.0, 1.0), (4.0, 2.0)), 1000, 0).samples
        assert s[:, 0].min() >= 1.0 and s[:, 0].max() <= 4.0
        assert s[:, 1].min() >= 1.0 and s[:, 1].max() <= 2.0

    def test_gaussian_var(self):
        spec = DisturbanceSpec.gaussian_var((4.0, 1.0), (1.5, 1.5))
        assert spec.second[0] == pytest.approx(math.sqrt(1.5))
        s = spec.draw(make_rng(0), 20000)
        assert s.var(axis=0) == pytest.approx([1.5, 1.5], rel=0.05)

    def test_point(self):
        s = DisturbanceSpec.point((1.9, 3.0)).draw(make_rng(0), 3)
        np.testing.assert_array_equal(s, [[1.9, 3.0]] * 3)

    @pytest.mark.parametrize(
        "spec",
        [DisturbanceSpec.gaussian((1, 2), (3, 4)), DisturbanceSpec.uniform((0, 0), (1, 1)), DisturbanceSpec.point((2, 3))],
    )
    def test_dict_round_trip(self, spec):
        assert DisturbanceSpec.from_dict(spec.to_dict()) == spec

    def test_invalid_specs(self):
        with pytest.raises(ValueError):
            DisturbanceSpec.gaussian((0,), (0,))
        with pytest.raises(ValueError):
            DisturbanceSpec.uniform((1,), (1,))
        with pytest.raises(ValueError):
            DisturbanceSpec("beta", (1,), (1,))

    def test_sample_set_readonly(self):
        s = SampleSet(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            s.samples[0, 0] = 1.0


class TestGrid:
    def test_lattice(self):
        g = grid_states(((-1.0, 1.0), (0.0, 2.0)), 9, "lattice")
        assert g.shape == (9, 2)
        assert set(g[:, 0]) == {-1.0, 0.0, 1.0}

    def test_uniform_in_box(self):
        g = grid_states(((-2.0, 2.0), (-1.0, 1.0)), 500, seed=4)
        assert np.all(np.abs(g[:, 0]) <= 2.0) and np.all(np.abs(g[:, 1]) <= 1.0)

    def test_bad_mode(self):
        with pytest.raises(ValueError, match="grid mode"):
            grid_states(((0.0, 1.0),), 4, "sobol")

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robustms.signal import (
    ConfigurationError,
    PeriodicSignal,
    SobolevBall,
    basis_eval,
    ellipsoid_functional,
    in_sobolev_ball,
    make_test_signal,
    sobolev_weight,
    worst_case_coordinate,
)

SQRT2 = math.sqrt(2.0)
FOUR_PI2 = 4.0 * math.pi**2


@pytest.mark.parametrize(
    "j, x, expected",
    [
        (1, 0.3, 1.0),
        (2, 0.0, SQRT2),
        (3, 0.25, SQRT2),
        (4, 0.25, SQRT2 * math.cos(math.pi)),
        (5, 0.125, SQRT2 * math.sin(math.pi / 2)),
    ],
)
def test_basis_values(j, x, expected):
    assert basis_eval(j, x) == pytest.approx(expected, abs=1e-15)


def test_basis_rejects_zero_index():
    with pytest.raises(ValueError):
        basis_eval(0, 0.1)


def test_basis_broadcasts():
    x = np.linspace(0, 1, 7)
    out = basis_eval(np.arange(1, 4)[:, None], x[None, :])
    assert out.shape == (3, 7)
    np.testing.assert_allclose(out[1], SQRT2 * np.cos(2 * np.pi * x))


class TestBasisProperties:
    J = 64
    L = 4096

    def test_orthonormal_on_uniform_grid(self):
        # the rectangle rule on L equispaced points is exact for trig degree < L
        x = np.arange(self.L) / self.L
        B = basis_eval(np.arange(1, self.J + 1)[:, None], x[None, :])
        gram = B @ B.T / self.L
        np.testing.assert_allclose(gram, np.eye(self.J), atol=1e-8)

    def test_periodic(self):
        j = np.arange(1, self.J + 1)
        np.testing.assert_allclose(basis_eval(j, 0.0), basis_eval(j, 1.0), atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=40))
    def test_parseval(self, theta):
        s = make_test_signal("finite_fourier", theta=theta)
        x = np.arange(self.L) / self.L
        quad = float(np.mean(s(x) ** 2))
        assert quad == pytest.approx(math.fsum(np.square(theta)), abs=1e-8)


class TestSobolevWeight:
    @pytest.mark.parametrize(
        "j, k, expected",
        [
            (1, 3, 1.0),
            (2, 1, 1 + FOUR_PI2),
            (3, 2, 1 + FOUR_PI2 + FOUR_PI2**2),
        ],
    )
    def test_values(self, j, k, expected):
        assert sobolev_weight(j, k) == pytest.approx(expected, rel=1e-14)

    def test_frozen_values(self):
        # 40-digit mpmath values of 1 + 4 pi^2 and 1 + 4 pi^2 + 16 pi^4
        assert sobolev_weight(2, 1) == pytest.approx(40.47841760435743, rel=1e-14)
        assert sobolev_weight(3, 2) == pytest.approx(1599.023874148396, rel=1e-13)

    @pytest.mark.parametrize("k", [1, 2, 3, 6])
    def test_nondecreasing_in_j(self, k):
        a = sobolev_weight(np.arange(1, 200), k)
        assert np.all(np.diff(a) >= 0)
        # the two members of each frequency pair share a weight
        even = np.arange(2, 198, 2)
        np.testing.assert_array_equal(sobolev_weight(even, k), sobolev_weight(even + 1, k))

    def test_rejects_bad_order(self):
        with pytest.raises(ValueError):
            sobolev_weight(2, 0)


class TestEllipsoid:
    def test_zero(self):
        s = PeriodicSignal(np.zeros(5))
        assert ellipsoid_functional(s, 2) == 0.0

    def test_constant_term(self):
        assert ellipsoid_functional(PeriodicSignal(np.array([1.0, 0, 0])), 4) == 1.0

    def test_second_coordinate(self):
        s = PeriodicSignal(np.array([0.0, 0.1, 0.0]))
        assert ellipsoid_functional(s, 1) == pytest.approx(0.01 * (1 + FOUR_PI2), rel=1e-14)
        assert ellipsoid_functional(s, 1) == pytest.approx(0.404784176, rel=1e-9)

    def test_membership_flags(self):
        ball = SobolevBall(1, 1.0)
        inside = in_sobolev_ball(PeriodicSignal(np.array([0.5, 0.1])), ball)
        assert inside.inside and not inside.approximate
        tail = in_sobolev_ball(make_test_signal("smooth_analytic", J=10, q=0.1), ball)
        assert tail.approximate


class TestGenerators:
    def test_finite_fourier(self):
        s = make_test_signal("finite_fourier", theta=[0.5, 0.2])
        assert s.tail_bound == 0.0
        np.testing.assert_array_equal(s.coeffs, [0.5, 0.2])

    def test_finite_fourier_padding(self):
        s = make_test_signal("finite_fourier", J=6, theta=[0.5, 0.2])
        assert s.J == 6

    def test_boundary_single_coordinate(self):
        s = make_test_signal("boundary_ellipsoid", k=1, r=1.0, coords=[2])
        assert s.coeffs[1] == pytest.approx(1 / math.sqrt(1 + FOUR_PI2), rel=1e-14)
        assert s.coeffs[1] == pytest.approx(0.15717672547758985, rel=1e-12)

    @pytest.mark.parametrize("k, r, coords", [(1, 1.0, [2, 3, 7]), (2, 0.3, [1, 4]), (3, 10.0, list(range(1, 30)))])
    def test_boundary_on_sphere(self, k, r, coords):
        s = make_test_signal("boundary_ellipsoid", k=k, r=r, coords=coords)
        assert ellipsoid_functional(s, k) == pytest.approx(r, rel=1e-12)

    def test_boundary_profile(self):
        s = make_test_signal("boundary_ellipsoid", J=10, k=1, r=2.0, coords=[2, 3], profile=[1.0, 2.0])
        assert s.coeffs[2] == pytest.approx(2 * s.coeffs[1])
        assert ellipsoid_functional(s, 1) == pytest.approx(2.0, rel=1e-12)

    def test_analytic_tail(self):
        s = make_test_signal("smooth_analytic", J=30, q=0.9)
        assert s.tail_bound == pytest.approx(0.9**62 / (1 - 0.81), rel=1e-13)
        np.testing.assert_allclose(s.coeffs, 0.9 ** np.arange(1, 31))

    def test_analytic_tail_matches_direct_sum(self):
        s = make_test_signal("smooth_analytic", J=12, q=0.7, amplitude=2.0)
        direct = math.fsum((2.0 * 0.7 ** np.arange(13, 400)) ** 2)
        assert s.tail_bound == pytest.approx(direct, rel=1e-12)

    def test_unknown_generator(self):
        with pytest.raises(ConfigurationError, match="unknown"):
            make_test_signal("sawtooth", J=4)

    def test_bad_parameters(self):
        with pytest.raises(ConfigurationError):
            make_test_signal("finite_fourier", J=4, thetas=[1])
        with pytest.raises(ConfigurationError):
            make_test_signal("smooth_analytic", J=4, q=1.5)


class TestSignal:
    def test_padded(self):
        s = PeriodicSignal(np.array([1.0, 2.0]))
        np.testing.assert_array_equal(s.padded(4), [1, 2, 0, 0])
        with pytest.raises(ValueError):
            s.padded(1)

    def test_immutable_coeffs(self):
        s = PeriodicSignal(np.array([1.0, 2.0]))
        with pytest.raises(ValueError):
            s.coeffs[0] = 3.0

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            PeriodicSignal(np.array([np.nan]))

    def test_synthesis(self):
        s = PeriodicSignal(np.array([0.5, 0.0, 1.0]))
        x = np.array([0.25])
        assert s(x)[0] == pytest.approx(0.5 + SQRT2)


def test_worst_case_coordinate_is_argmax():
    g = np.array([1.0, 1.0, 0.8, 0.6, 0.2, 0.0, 0.0])
    a = sobolev_weight(np.arange(1, 8), 1)
    j = worst_case_coordinate(g, 1)
    assert j == int(np.argmax((1 - g) ** 2 / a)) + 1
    # the first zero weight beats every later one since a_j grows
    assert j <= 6

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from robustms import _seeding
from robustms.noise import NoiseModel
from robustms.risk import worst_case_signal
from robustms.selection import (
    WeightGrid,
    cost,
    default_k_star,
    default_rho,
    grid_costs,
    oracle_weight_alpha0,
    select,
    sigma_hat,
    tau,
    weight_grid,
    weight_sequence,
)
from robustms.signal import ConfigurationError, make_test_signal
from robustms.spectral import SpectralObservation, observe

# 30-digit mpmath evaluations
EPS_1000 = 0.144743883947653680095
TAU_1 = 0.607927101854026628663
OMEGA_T1_N1000 = 8.47130857637419337931
T0_N1000 = 0.868463303685922080571
OMEGA_T0_N1000 = 8.08228807409157292847


def obs_of(theta_hat):
    theta_hat = np.asarray(theta_hat, dtype=float)
    return SpectralObservation(theta_hat, theta_hat.size, "test", (0, ()))


class TestWeightSequence:
    def test_tau(self):
        assert tau(1) == pytest.approx(TAU_1, rel=1e-15)
        assert tau(1) == pytest.approx(6 / math.pi**2, rel=1e-15)

    def test_n1000(self):
        g = weight_sequence(1, 1.0, 1000)
        assert g.omega == pytest.approx(OMEGA_T1_N1000, rel=1e-14)
        assert g.j0 == 1
        assert g(4) == pytest.approx(1 - 4 / OMEGA_T1_N1000, rel=1e-14)
        assert g(1) == 1.0

    @pytest.mark.parametrize("beta, t, n", [(1, 0.3, 50), (2, 1.7, 1000), (3, 9.0, 10**5)])
    def test_support(self, beta, t, n):
        g = weight_sequence(beta, t, n)
        j = np.arange(1, int(g.omega) + 50)
        vals = g(j)
        assert np.all(vals[j > g.omega] == 0)
        assert np.all(vals[j <= g.j0] == 1)
        assert g.support == int(math.floor(g.omega))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 5), st.floats(0.01, 50.0), st.integers(2, 10**6))
    def test_bounded_and_nonincreasing(self, beta, t, n):
        g = weight_sequence(beta, t, n)
        vals = g.values(int(math.ceil(g.omega)) + 1)
        assert np.all((vals >= 0) & (vals <= 1))
        assert np.all(np.diff(vals) <= 0)

    @pytest.mark.parametrize("args", [(0, 1.0, 10), (1, 0.0, 10), (1, 1.0, 1)])
    def test_rejects(self, args):
        with pytest.raises(ValueError):
            weight_sequence(*args)


class TestGrid:
    def test_n1000(self):
        grid = weight_grid(1000)
        assert grid.eps == pytest.approx(EPS_1000, rel=1e-14)
        assert (grid.m, grid.k_star, len(grid)) == (47, 2, 94)

    def test_n3(self):
        assert default_k_star(3) == 1
        assert weight_grid(3, eps=0.9).k_star == 1

    def test_overrides(self):
        grid = weight_grid(200, eps=0.5, k_star=1)
        assert (grid.m, len(grid)) == (4, 4)
        assert [g.t for g in grid] == [0.5, 1.0, 1.5, 2.0]

    @pytest.mark.parametrize("kw", [{"eps": 1.0}, {"eps": 1.5}, {"eps": 0.0}, {"k_star": 0}])
    def test_configuration_errors(self, kw):
        with pytest.raises(ConfigurationError):
            weight_grid(100, **kw)

    def test_member_order(self):
        grid = weight_grid(500)
        keys = [g.alpha for g in grid]
        assert keys == sorted(keys)

    def test_matrix_readonly(self):
        grid = weight_grid(100)
        with pytest.raises(ValueError):
            grid.matrix[0, 0] = 0.5
        np.testing.assert_allclose(grid.squared_norms, np.sum(grid.matrix**2, axis=1))


class TestSigmaHat:
    def test_zero(self):
        assert sigma_hat(np.zeros(10)) == 0.0

    def test_n4(self):
        assert sigma_hat(obs_of([1, 0.5, 0.2, 0])) == pytest.approx(0.04, rel=1e-14)

    def test_smooth_signal_concentrates(self):
        n = 2000
        s = make_test_signal("smooth_analytic", J=n, q=0.5)
        q0 = NoiseModel.gaussian(1.0)
        vals = [sigma_hat(observe(s, q0, n, (13, n, r))) for r in range(100)]
        inside = np.mean([(0.9 <= v <= 1.1) for v in vals])
        assert inside >= 0.95


class TestCost:
    def test_zero_data(self):
        grid = weight_grid(50)
        assert np.all(grid_costs(np.zeros(50), grid, 0.1) == 0)
        assert cost(obs_of(np.zeros(50)), grid.members[3], 0.1) == 0.0

    def test_hand_value(self):
        assert cost(obs_of([1, 0.5, 0.2, 0]), [1, 1, 0, 0], 0.1) == pytest.approx(-1.208, abs=1e-14)

    @pytest.mark.parametrize("rho", [0.01, 0.1, 0.3])
    def test_no_tail_energy(self, rho):
        assert cost(obs_of([1, 0.5, 0, 0]), [1, 1, 0, 0], rho) == pytest.approx(-1.25, abs=1e-15)

    @pytest.mark.parametrize("rho", [0.0, 1 / 3, -0.1, 0.5])
    def test_rho_domain(self, rho):
        with pytest.raises(ValueError):
            cost(obs_of([1, 0, 0, 0]), [1, 0, 0, 0], rho)

    @settings(max_examples=50, deadline=None)
    @given(arrays(float, 16, elements=st.floats(-3, 3)), arrays(float, 16, elements=st.floats(0, 1)))
    def test_decomposition_without_tail(self, head, g):
        # zero above l = 5 makes sigma_hat = 0 and cost = sum g^2 x^2 - 2 sum g x^2
        x = np.where(np.arange(16) < 4, head, 0.0)
        expected = math.fsum(g**2 * x**2) - 2 * math.fsum(g * x**2)
        assert cost(obs_of(x), g, 0.2) == pytest.approx(expected, abs=1e-12)

    def test_vectorized_matches_reference(self):
        n = 300
        grid = weight_grid(n)
        th = np.random.default_rng(0).standard_normal(n) / math.sqrt(n)
        ref = np.array([cost(obs_of(th), g, 0.07) for g in grid])
        np.testing.assert_allclose(grid_costs(th, grid, 0.07), ref, rtol=1e-10, atol=1e-14)


class TestSelect:
    def test_singleton(self):
        grid = weight_grid(100, eps=0.9, k_star=1)
        assert len(grid) == 1
        res = select(obs_of(np.random.default_rng(1).standard_normal(100)), grid, 0.1)
        assert res.index == 0

    def test_zero_data_tie_break(self):
        grid = weight_grid(300)
        res = select(obs_of(np.zeros(300)), grid, 0.1)
        assert res.gamma_hat.alpha == (1, grid.eps)

    def test_estimate_coeffs(self):
        grid = weight_grid(64)
        th = np.linspace(1, 0, 64)
        res = select(obs_of(th), grid, 0.1)
        np.testing.assert_allclose(res.estimate_coeffs, res.gamma_hat.values(64) * th)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.randoms(use_true_random=False))
    def test_permutation_stable(self, seed, rnd):
        n = 120
        grid = weight_grid(n)
        th = np.random.default_rng(seed).standard_normal(n) / math.sqrt(n)
        th[:3] += 1.0
        members = list(grid.members)
        rnd.shuffle(members)
        shuffled = WeightGrid(n, grid.k_star, grid.eps, grid.m, tuple(members))
        a = select(obs_of(th), grid, 0.1)
        b = select(obs_of(th), shuffled, 0.1)
        # equal costs may be broken differently, the chosen filter's cost may not
        assert a.cost_value == b.cost_value
        np.testing.assert_array_equal(a.estimate_coeffs, b.estimate_coeffs)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.1, 10.0))
    def test_scale_equivariant(self, seed, c):
        # every cost term is quadratic in theta_hat, so scaling keeps the argmin
        n = 150
        grid = weight_grid(n)
        th = np.random.default_rng(seed).standard_normal(n) / math.sqrt(n)
        th[:4] += 0.5
        costs = grid_costs(th, grid, 0.1)
        scaled = grid_costs(c * th, grid, 0.1)
        np.testing.assert_allclose(scaled, c * c * costs, rtol=1e-9, atol=1e-15)

    @pytest.mark.parametrize(
        "which",
        [
            "least_favourable",
            pytest.param(
                "low_frequency",
                marks=pytest.mark.xfail(
                    strict=True,
                    reason="mass on j=2 alone: about 70% of selections cut near omega=3, below half the pilot cutoff",
                ),
            ),
        ],
    )
    def test_close_to_pilot(self, which):
        n = 500
        grid = weight_grid(n)
        pilot = oracle_weight_alpha0(1, 1.0, 1.0, n, grid.eps).gamma
        if which == "least_favourable":
            s = worst_case_signal(pilot, 1, 1.0, n)
        else:
            s = make_test_signal("boundary_ellipsoid", J=n, k=1, r=1.0, coords=[2])
        q0 = NoiseModel.gaussian(1.0)
        hits = 0
        for r in range(200):
            omega = select(observe(s, q0, n, _seeding.replicate_seed(21, n, r)), grid, default_rho(n)).gamma_hat.omega
            hits += 0.5 <= omega / pilot.omega <= 2.0
        assert hits >= 160


class TestPilot:
    def test_n1000(self):
        p = oracle_weight_alpha0(1, 1.0, 1.0, 1000, EPS_1000)
        assert p.gamma.t == pytest.approx(T0_N1000, rel=1e-14)
        assert p.gamma.omega == pytest.approx(OMEGA_T0_N1000, rel=1e-13)
        assert not p.clamped and p.in_grid

    def test_clamped(self):
        p = oracle_weight_alpha0(1, 0.01, 1.0, 1000, EPS_1000)
        assert p.clamped
        assert p.gamma.t == pytest.approx(EPS_1000)

    def test_out_of_grid_order(self):
        assert not oracle_weight_alpha0(5, 1.0, 1.0, 1000, EPS_1000).in_grid

import math

import numpy as np
import pytest
from scipy import stats

from robustms import _seeding
from robustms.noise import MarkLaw, NoiseModel
from robustms.signal import basis_eval, make_test_signal
from robustms.spectral import (
    jump_integrals,
    observe,
    sample_jumps,
    simulate_path_integrals,
    simulate_spectral_noise,
)

Q0 = NoiseModel.gaussian(1.0)
MIXED = NoiseModel(1.0, 0.5, 2.0, 1.5)
PURE_JUMP = NoiseModel(0.0, 1.0, 1.0, 1.0, MarkLaw.STANDARD_GAUSSIAN)
SILENT = NoiseModel(0.0, 0.0, 0.0, 1.0)


def draws(model, n, J, reps, master=0):
    return np.array([
        simulate_spectral_noise(model, n, J, _seeding.replicate_seed(master, n, r)) for r in range(reps)
    ])


class TestJumpIntegrals:
    @pytest.mark.parametrize("J", [1, 2, 3, 64, 65, 129, 300])
    def test_matches_direct_sum(self, J):
        rng = np.random.default_rng(5)
        u = rng.uniform(size=37)
        y = rng.standard_normal(37)
        direct = basis_eval(np.arange(1, J + 1)[:, None], u[None, :]) @ y
        np.testing.assert_allclose(jump_integrals(u, y, J), direct, atol=1e-11)

    def test_empty(self):
        np.testing.assert_array_equal(jump_integrals(np.empty(0), np.empty(0), 5), np.zeros(5))


def test_silent_model_is_zero():
    np.testing.assert_array_equal(simulate_spectral_noise(SILENT, 50, 20, 1), np.zeros(20))
    np.testing.assert_array_equal(simulate_path_integrals(SILENT, 5, [1, 2, 3], 1e-3, 1), np.zeros(3))


def test_rejects_bad_J():
    with pytest.raises(ValueError):
        simulate_spectral_noise(Q0, 10, 11, 0)
    with pytest.raises(ValueError):
        simulate_spectral_noise(Q0, 10, 0, 0)


def test_deterministic():
    a = simulate_spectral_noise(MIXED, 100, 100, (7, 100, 3))
    b = simulate_spectral_noise(MIXED, 100, 100, (7, 100, 3))
    np.testing.assert_array_equal(a, b)
    c = simulate_spectral_noise(MIXED, 100, 100, (7, 100, 4))
    assert not np.array_equal(a, c)


def test_prefix_consistent_across_J():
    long = simulate_spectral_noise(MIXED, 200, 200, 11)
    short = simulate_spectral_noise(MIXED, 200, 17, 11)
    np.testing.assert_allclose(short, long[:17], atol=1e-12)


def test_jumps_follow_poisson_count():
    counts = [sample_jumps(MIXED, 30, _seeding.replicate_seed(1, r))[0].size for r in range(2000)]
    # Poisson(60): mean 60, sd of the sample mean sqrt(60/2000)
    assert abs(np.mean(counts) - 60.0) < 3 * math.sqrt(60 / 2000)


class TestMoments:
    @pytest.mark.parametrize("model, target", [(Q0, 1.0), (MIXED, 1.5)])
    def test_first_coordinate_variance(self, model, target):
        R = 100_000
        x = draws(model, 5, 1, R)[:, 0]
        var = x.var(ddof=1)
        if model is Q0:
            se = math.sqrt(2.0 / R)
        else:
            se = np.std((x - x.mean()) ** 2, ddof=1) / math.sqrt(R)
        assert abs(var - target) < 3 * se

    def test_unbiased_and_within_budget(self):
        R, J = 4000, 16
        x = draws(MIXED, 40, J, R, master=3)
        sigma = MIXED.variance
        assert np.all(np.abs(x.mean(axis=0)) < 3 * math.sqrt(sigma / R))
        var = x.var(axis=0, ddof=1)
        se = np.std((x - x.mean(axis=0)) ** 2, axis=0, ddof=1) / math.sqrt(R)
        assert np.all(var <= MIXED.sigma_star + 3 * se)

    def test_decorrelated(self):
        R, J = 4000, 16
        x = draws(MIXED, 40, J, R, master=4)
        off = np.corrcoef(x.T)[np.triu_indices(J, 1)]
        # 120 pairs at once: keep the 3-sigma false-alarm rate for the whole family
        per_pair = 1.0 - (1.0 - 2 * stats.norm.sf(3.0)) ** (1.0 / off.size)
        z = stats.norm.isf(per_pair / 2)
        assert np.max(np.abs(off)) < z / math.sqrt(R)
        # R * sum of squared correlations is ~ chi^2 with one dof per pair
        chi2 = R * float(np.sum(off**2))
        assert stats.chi2.sf(chi2, off.size) > 0.0027


class TestPathIntegrals:
    def test_pure_jump_bit_identical(self):
        seed = _seeding.replicate_seed(9, 20, 0)
        spec = simulate_spectral_noise(PURE_JUMP, 20, 20, seed)
        path = simulate_path_integrals(PURE_JUMP, 20, range(1, 21), 1e-3, seed)
        np.testing.assert_array_equal(spec, path)

    @pytest.mark.parametrize("dt", [0.0, -1e-3, 0.02])
    def test_rejects_dt(self, dt):
        with pytest.raises(ValueError):
            simulate_path_integrals(Q0, 5, [1], dt, 0)

    def test_rejects_index(self):
        with pytest.raises(ValueError):
            simulate_path_integrals(Q0, 5, [0, 1], 1e-3, 0)

    def test_brownian_variance(self):
        R = 3000
        x = np.array([simulate_path_integrals(Q0, 2, [1, 2, 5], 1e-3, (2, r)) for r in range(R)])
        se = math.sqrt(2.0 / R)
        assert np.all(np.abs(x.var(axis=0, ddof=1) - 1.0) < 3.5 * se)


class TestObserve:
    def test_noiseless(self):
        s = make_test_signal("finite_fourier", theta=[0.5, -0.2, 0.1])
        obs = observe(s, SILENT, 12, 0)
        np.testing.assert_array_equal(obs.theta_hat, s.padded(12))
        assert obs.model_id == SILENT.name

    def test_zero_signal_moments(self):
        n, R = 50, 4000
        zero = make_test_signal("finite_fourier", theta=[0.0])
        th = np.array([observe(zero, Q0, n, (1, r)).theta_hat for r in range(R)])
        se_mean = math.sqrt(1.0 / n / R)
        assert np.all(np.abs(th.mean(axis=0)) < 4 * se_mean)
        var = th.var(axis=0, ddof=1) * n
        assert abs(var.mean() - 1.0) < 3 * math.sqrt(2.0 / (R * n))

    def test_too_long_signal(self):
        s = make_test_signal("finite_fourier", theta=np.ones(20))
        with pytest.raises(ValueError):
            observe(s, Q0, 10, 0)

    def test_seed_record(self):
        obs = observe(make_test_signal("finite_fourier", theta=[1.0]), Q0, 5, (42, 5, 1))
        assert obs.seed == (42, (5, 1))

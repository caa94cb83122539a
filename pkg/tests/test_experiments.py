import math

import numpy as np
import pytest

import smoothmatch as sm


class TestNoiseSpec:
    def test_validation(self):
        with pytest.raises(sm.ParameterError):
            sm.NoiseSpec(sigma=-0.1)
        with pytest.raises(sm.ParameterError):
            sm.NoiseSpec(sigma=0.1, family="cauchy")
        with pytest.raises(sm.ParameterError):
            sm.NoiseSpec(sigma=0.1, family="bounded-uniform", bound=np.inf)
        with pytest.raises(sm.ParameterError):
            sm.NoiseSpec(sigma=0.1, family="bounded-uniform", bound=0.0)

    def test_gaussian_variance_concentration(self):
        # 1e4 draws at one point: sample variance of the noise within the
        # chi-square concentration band around sigma^2 = 0.01
        noise = sm.NoiseSpec(sigma=0.1, seed=20260810)
        eps = noise.sample(10_000, 1)
        assert 0.0094 <= np.var(eps) <= 0.0106

    def test_mean_within_four_sigma(self):
        noise = sm.NoiseSpec(sigma=0.1, seed=4)
        eps = noise.sample(5000, 2)
        assert abs(eps.mean()) <= 4 * 0.1 / math.sqrt(eps.size)

    def test_bounded_family_support_and_scale(self):
        sigma = 0.2
        noise = sm.NoiseSpec(sigma=sigma, family="bounded-uniform", bound=7.0, seed=5)
        eps = noise.sample(20_000, 1)
        limit = sigma * math.sqrt(3.0)
        assert np.max(np.abs(eps)) <= limit * (1 + 1e-12)
        assert np.std(eps) == pytest.approx(sigma, rel=0.02)

    def test_sigma_broadcasts_per_component(self):
        noise = sm.NoiseSpec(sigma=[0.0, 1.0], seed=6)
        eps = noise.sample(1000, 2)
        assert np.all(eps[:, 0] == 0.0)
        assert np.std(eps[:, 1]) == pytest.approx(1.0, rel=0.1)


class TestSimulateObservations:
    def test_zero_noise_equals_trajectory(self, paper_times):
        lv = sm.lotka_volterra()
        theta = np.array([0.5] * 4)
        xi = np.array([1.0, 0.5])
        obs = sm.simulate_observations(
            lv, theta, xi, paper_times, sm.NoiseSpec(sigma=0.0, seed=1), t0=0.0
        )
        states = sm.states_at_times(lv, theta, xi, 0.0, paper_times)
        assert np.array_equal(obs.y, states)

    def test_seed_determinism(self, paper_times):
        lv = sm.lotka_volterra()
        args = (lv, [0.5] * 4, [1.0, 0.5], paper_times)
        a = sm.simulate_observations(*args, sm.NoiseSpec(sigma=0.1, seed=42), t0=0.0)
        b = sm.simulate_observations(*args, sm.NoiseSpec(sigma=0.1, seed=42), t0=0.0)
        c = sm.simulate_observations(*args, sm.NoiseSpec(sigma=0.1, seed=43), t0=0.0)
        assert np.array_equal(a.y, b.y)
        assert not np.array_equal(a.y, c.y)

    def test_origin_default_matches_design(self, paper_times):
        expo = sm.exponential()
        obs = sm.simulate_observations(
            expo, [0.5], [1.0], paper_times, sm.NoiseSpec(sigma=0.0, seed=0)
        )
        assert obs.t_origin == 0.0

    def test_divergence_propagates(self):
        def rhs(x, theta):
            return theta[0] * np.asarray(x, dtype=float) ** 2

        quad = sm.OdeSystem(
            name="quad",
            dim_state=1,
            dim_param=1,
            rhs=rhs,
            jac_param=lambda x, th: np.asarray(x, dtype=float)[..., None] ** 2,
            jac_state=lambda x, th: (2 * th[0] * np.asarray(x, dtype=float))[..., None],
            param_box=np.array([[0.5, 2.0]]),
        )
        with pytest.raises(sm.IntegrationDivergedError):
            sm.simulate_observations(
                quad, [2.0], [1.0], np.linspace(0.1, 2.0, 20),
                sm.NoiseSpec(sigma=0.0, seed=0), t0=0.0,
            )


class TestReplicationStudy:
    def test_reports_and_determinism(self, paper_times):
        lv = sm.lotka_volterra()
        run = lambda: sm.replication_study(
            lv, [0.5] * 4, [1.0, 0.5], paper_times, 0.1, 5, 77, bandwidth=1.2
        )
        first, second = run(), run()
        assert len(first) == 5
        for a, b in zip(first, second):
            assert np.array_equal(a.theta_hat, b.theta_hat)
            assert a.criterion_at_min == b.criterion_at_min
            assert a.method == "linear-ls"

    def test_zero_replications_rejected(self, paper_times):
        with pytest.raises(sm.ParameterError):
            sm.replication_study(
                sm.lotka_volterra(), [0.5] * 4, [1.0, 0.5], paper_times, 0.1, 0, 1,
                bandwidth=1.2,
            )


class TestRootNStudy:
    def test_small_run_shape_and_determinism(self):
        expo = sm.exponential()
        run = lambda: sm.root_n_consistency_study(
            expo, [0.5], [1.0], (0.0, 1.0), [50, 100], 0.15, 0.05, 8, 99
        )
        a, b = run(), run()
        assert a.rmse.shape == (2, 1)
        assert np.array_equal(a.rmse, b.rmse)
        assert np.array_equal(a.scaled, b.scaled)
        assert a.failures == 0
        assert a.bandwidths[0] == pytest.approx(0.1)

    def test_zero_noise_bias_decreases(self):
        expo = sm.exponential()
        report = sm.root_n_consistency_study(
            expo, [0.5], [1.0], (0.0, 1.0), [100, 400], 0.15, 0.0, 1, 5
        )
        assert report.rmse[1, 0] < report.rmse[0, 0]
        assert report.rmse[0, 0] < 1e-3

    def test_gamma_window_enforced(self):
        expo = sm.exponential()
        for gamma in (0.05, 0.125, 1.0 / 6.0, 0.3):
            with pytest.raises(sm.ParameterError):
                sm.root_n_consistency_study(
                    expo, [0.5], [1.0], (0.0, 1.0), [50, 100], gamma, 0.05, 2, 1
                )

    def test_zero_replications_rejected(self):
        with pytest.raises(sm.ParameterError):
            sm.root_n_consistency_study(
                sm.exponential(), [0.5], [1.0], (0.0, 1.0), [50, 100], 0.15, 0.05, 0, 1
            )

    def test_nondecreasing_n_rejected(self):
        with pytest.raises(sm.ParameterError):
            sm.root_n_consistency_study(
                sm.exponential(), [0.5], [1.0], (0.0, 1.0), [100, 100], 0.15, 0.05, 2, 1
            )


class TestSupnormStudy:
    MU = staticmethod(lambda t: np.sin(2 * np.pi * t))
    MU_PRIME = staticmethod(lambda t: 2 * np.pi * np.cos(2 * np.pi * t))

    def test_smoke_and_determinism(self):
        noise = sm.NoiseSpec(sigma=0.1, seed=11)
        run = lambda: sm.supnorm_rate_study(
            self.MU, self.MU_PRIME, "gegenbauer4", [100, 200],
            lambda n: 0.5 * n ** (-1 / 9), noise, 4, (0.2, 0.8),
        )
        a, b = run(), run()
        assert a.mean_sup_x == b.mean_sup_x
        assert a.mean_sup_xprime == b.mean_sup_xprime
        assert all(r > 0 for r in a.ratio_x)
        assert len(a.bandwidths) == 2

    def test_zero_noise_constant_truth_riemann_bound(self):
        noise = sm.NoiseSpec(sigma=0.0, seed=3)
        mu = lambda t: np.full_like(np.asarray(t, dtype=float), 2.0)
        mu_p = lambda t: np.zeros_like(np.asarray(t, dtype=float))
        report = sm.supnorm_rate_study(
            mu, mu_p, "gegenbauer4", [200, 400], lambda n: 0.2, noise, 1, (0.3, 0.7)
        )
        for n, err in zip(report.n_values, report.mean_sup_x):
            assert err <= 2.0 / (n * 0.2**2)

    def test_interval_validation(self):
        noise = sm.NoiseSpec(sigma=0.1, seed=1)
        with pytest.raises(sm.ParameterError):
            sm.supnorm_rate_study(
                self.MU, self.MU_PRIME, 4, [100], lambda n: 0.2, noise, 1, (0.0, 0.8)
            )
        with pytest.raises(sm.ParameterError):
            sm.supnorm_rate_study(
                self.MU, self.MU_PRIME, 4, [100], lambda n: -0.2, noise, 1, (0.2, 0.8)
            )

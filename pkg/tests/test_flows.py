import numpy as np
import pytest

from daeflow.analytic_dae import continuous_dae_gaussian, continuous_dae_gaussian_pushforward
from daeflow.empirical_dae import mean_shift_dae
from daeflow.errors import CollapseError, QuadratureError
from daeflow.flows import (
    DensityGrid,
    FlowTrajectory,
    analytic_orbit_map,
    backward_heat_residual,
    compose_dae_gaussian,
    compose_dae_particles,
    composed_std_recurrence,
    composition_limit_error,
    entropy_along_flow,
    final_value_recover,
    forward_heat_residual,
    heat_equation_terms,
    integrate_cdae_gmm,
    integrate_cdae_particles,
    variance_decay_curves,
)
from daeflow.measures import GaussianMeasure, GaussianMixture, ParticleCloud, sample

N01 = GaussianMeasure.univariate(0.0, 1.0)
DIAG21 = GaussianMeasure(np.zeros(2), np.diag([2.0, 1.0]))


class TestTypes:
    def test_trajectory_validation(self):
        c = ParticleCloud(np.zeros((2, 1)))
        with pytest.raises(ValueError):
            FlowTrajectory([0.0, 0.0], [c, c], "x")
        with pytest.raises(ValueError):
            FlowTrajectory([0.1], [c], "x")
        with pytest.raises(ValueError):
            FlowTrajectory([0.0, 1.0], [c], "x")
        with pytest.raises(ValueError):
            FlowTrajectory([0.0, 1.0], [c, ParticleCloud(np.zeros((2, 2)))], "x")

    def test_density_grid(self):
        x = np.linspace(-6, 6, 241)
        g = DensityGrid(x, N01.pdf(x[:, None]))
        assert g.mass() == pytest.approx(1.0, abs=1e-6)
        with pytest.raises(ValueError):
            DensityGrid(np.array([0.0, 1.0, 3.0]), np.ones(3))
        with pytest.raises(ValueError):
            DensityGrid(x, -np.ones(241))


class TestComposition:
    def test_single_step_is_mean_shift(self):
        cloud = sample(N01, 500, 0)
        traj = compose_dae_particles(cloud, 0.2, 1)
        np.testing.assert_array_equal(traj.final.points, mean_shift_dae(cloud, 0.2, cloud.points))
        np.testing.assert_allclose(traj.times, [0.0, 0.2])

    def test_steps_use_updated_cloud(self):
        cloud = sample(N01, 300, 1)
        traj = compose_dae_particles(cloud, 0.1, 2)
        second = mean_shift_dae(traj.states[1], 0.1, traj.states[1].points)
        np.testing.assert_array_equal(traj.final.points, second)

    def test_tracers_follow_step_maps(self):
        cloud = sample(N01, 300, 2)
        tracers = np.array([[-1.0], [0.5]])
        traj = compose_dae_particles(cloud, 0.1, 2, tracers=tracers)
        expected = mean_shift_dae(traj.states[1], 0.1, mean_shift_dae(cloud, 0.1, tracers))
        np.testing.assert_allclose(traj.tracers[-1], expected)
        assert len(traj.tracers) == 3

    def test_invalid_steps(self):
        with pytest.raises(ValueError):
            compose_dae_particles(sample(N01, 10, 0), 0.1, 0)
        with pytest.raises(ValueError):
            compose_dae_gaussian(N01, -0.1, 2)

    def test_gaussian_recurrence(self):
        traj = compose_dae_gaussian(N01, 0.1, 10)
        std = np.sqrt([g.cov[0, 0] for g in traj.states])
        assert std[1] == pytest.approx(1 / 1.1)
        np.testing.assert_allclose(std, composed_std_recurrence(1.0, 0.1, 10), rtol=1e-12)
        assert np.all(np.diff(std) < 0)
        envelope = (1 + 0.1) ** -np.arange(11.0)
        assert np.all(std <= envelope + 1e-15)

    def test_composed_map(self):
        traj = compose_dae_gaussian(DIAG21, 0.1, 3)
        x = np.array([[1.0, -1.0]])
        direct = traj.composed_map()(x)
        stepwise = x
        for m in traj.maps:
            stepwise = m(stepwise)
        np.testing.assert_allclose(direct, stepwise)
        np.testing.assert_allclose(analytic_orbit_map(DIAG21, 0.3, "composed", 0.1)(x), direct, atol=1e-14)

    def test_limit_error_decreases(self):
        pts = np.linspace(-2, 2, 41)[:, None]
        errs = [composition_limit_error(N01, 0.3, tau, pts) for tau in (0.1, 0.05, 0.025)]
        ratios = np.array(errs[:-1]) / np.array(errs[1:])
        assert np.all((ratios >= 1.6) & (ratios <= 2.4))
        with pytest.raises(ValueError):
            composition_limit_error(N01, 0.3, 0.07, pts)

    def test_small_tau_limit(self):
        tau = 1e-3
        t = tau * np.arange(501)
        var = composed_std_recurrence(1.0, tau, 500) ** 2
        assert np.max(np.abs(var - np.maximum(1 - 2 * t, 0))) < 0.02


class TestIntegration:
    def test_single_gaussian_spot(self):
        traj = integrate_cdae_gmm(GaussianMixture.single(N01), np.array([1.0]), 0.375, 1e-3)
        assert traj.final.points[0, 0] == pytest.approx(0.5, abs=1e-6)
        assert traj.times[-1] == 0.375

    def test_mean_is_stationary(self):
        g = GaussianMeasure(np.array([1.5]), np.array([[2.0]]))
        traj = integrate_cdae_gmm(g, np.array([1.5]), 0.5, 1e-2)
        assert traj.final.points[0, 0] == 1.5

    def test_matches_analytic_map(self):
        x0 = np.array([[1.0, -1.0], [0.3, 0.7]])
        traj = integrate_cdae_gmm(DIAG21, x0, 0.4, 1e-3)
        np.testing.assert_allclose(traj.final.points, continuous_dae_gaussian(DIAG21, 0.4)(x0), atol=1e-5)

    def test_rk4_order(self):
        x0 = np.array([[1.0, -1.0]])
        exact = continuous_dae_gaussian(DIAG21, 0.4)(x0)
        e = [np.max(np.abs(integrate_cdae_gmm(DIAG21, x0, 0.4, dt).final.points - exact)) for dt in (1e-2, 5e-3)]
        assert 8 <= e[0] / e[1] <= 32

    def test_save_times_hit_exactly(self):
        traj = integrate_cdae_gmm(DIAG21, np.zeros((1, 2)) + 0.5, 0.45, 0.03, save_times=[0.1, 0.2, 0.3])
        np.testing.assert_array_equal(traj.times, [0.0, 0.1, 0.2, 0.3, 0.45])

    def test_last_step_shortened(self):
        traj = integrate_cdae_gmm(N01, np.array([1.0]), 0.105, 0.01)
        assert traj.times[-1] == 0.105
        assert traj.times.size == 12

    def test_collapse_guard(self):
        with pytest.raises(CollapseError):
            integrate_cdae_gmm(DIAG21, np.zeros(2), 0.5, 1e-3)
        with pytest.raises(CollapseError):
            integrate_cdae_gmm(DIAG21, np.zeros(2), 0.5 - 5e-7, 1e-3)

    def test_particle_single_stationary(self):
        cloud = ParticleCloud(np.array([[0.3]]))
        traj = integrate_cdae_particles(cloud, 0.2, 0.01, 0.05)
        assert traj.final.points[0, 0] == pytest.approx(0.3)

    def test_particle_linear_variance(self):
        cloud = sample(N01, 10_000, 4)
        traj = integrate_cdae_particles(cloud, 0.3, 0.01, 0.05)
        var = np.array([np.var(c.points) for c in traj.states])
        slope = np.polyfit(traj.times, var, 1)[0]
        assert slope == pytest.approx(-2.0, rel=0.25)

    def test_particle_deterministic(self):
        cloud = sample(N01, 200, 5)
        a = integrate_cdae_particles(cloud, 0.05, 0.01, 0.1).final.points
        b = integrate_cdae_particles(cloud, 0.05, 0.01, 0.1).final.points
        assert np.array_equal(a, b)


class TestHeat:
    x = np.arange(-6, 6 + 1e-9, 0.05)
    t = np.arange(0.05, 0.25 + 1e-9, 1e-3)

    def test_backward_residual(self):
        assert backward_heat_residual(N01, self.t, self.x) < 1e-2

    def test_forward_sign_control(self):
        assert forward_heat_residual(N01, self.t, self.x) < 1e-2
        # the wrong sign is far off
        dt_p, lap = heat_equation_terms(N01, self.t, self.x, "forward")
        assert np.max(np.abs(dt_p + lap)) / np.max(np.abs(lap)) > 1.0

    def test_static_density(self):
        dt_p, lap = heat_equation_terms(N01, [0.1], self.x)
        assert np.all(dt_p == 0)
        with pytest.raises(ValueError):
            heat_equation_terms(N01, [0.1, 0.2], self.x)

    def test_coarse_grid(self):
        with pytest.raises(QuadratureError):
            backward_heat_residual(N01, self.t, np.arange(-6, 6.01, 0.5))
        with pytest.raises(QuadratureError):
            backward_heat_residual(N01, self.t, np.arange(-1, 1.001, 0.05))

    def test_final_value(self):
        gT = continuous_dae_gaussian_pushforward(N01, 0.25)
        assert final_value_recover(gT, 0.25, 0.25).cov[0, 0] == 0.5
        assert final_value_recover(gT, 0.25, 0.1).cov[0, 0] == pytest.approx(0.8)
        assert final_value_recover(gT, 0.25, 0.0).cov[0, 0] == 1.0
        with pytest.raises(ValueError):
            final_value_recover(gT, 0.25, 0.3)

    def test_final_value_mixture(self):
        gmm = GaussianMixture.from_components([(0.5, GaussianMeasure.univariate(-2, 0.5)), (0.5, GaussianMeasure.univariate(2, 0.7))])
        out = final_value_recover(gmm, 0.2, 0.0)
        np.testing.assert_allclose([g.cov[0, 0] for g in out.gaussians], [0.9, 1.1])


class TestCurves:
    def test_variance_curves(self):
        t = np.linspace(0, 1, 101)
        cols = variance_decay_curves(1.0, [0.2, 0.1, 0.05], t)
        assert list(cols) == ["t", "continuous", "ordinary", "composed_tau=0.2", "composed_tau=0.1", "composed_tau=0.05"]
        for name, v in cols.items():
            if name != "t":
                assert v[0] == 1.0
        assert cols["continuous"][50] == pytest.approx(0.0, abs=1e-15)
        assert cols["ordinary"][-1] == pytest.approx(0.25)
        assert np.all(cols["composed_tau=0.2"] >= cols["composed_tau=0.1"])
        assert np.all(cols["composed_tau=0.1"] >= cols["composed_tau=0.05"])

    def test_variance_monotone_per_mode(self):
        ts = np.linspace(0.05, 0.45, 9)
        for mode in ("continuous", "ordinary", "composed"):
            prev = np.diag(DIAG21.cov)
            for t in ts:
                a = analytic_orbit_map(DIAG21, t, mode, 0.05).matrix
                var = np.diag(a @ DIAG21.cov @ a.T)
                assert np.all(var <= prev + 1e-15)
                prev = var

    def test_entropy(self):
        t = np.linspace(0, 0.4, 41)
        cols = entropy_along_flow(N01, t)
        assert np.all(np.diff(cols["entropy_continuous"]) < 0)
        assert cols["entropy_continuous"][25] - cols["entropy_continuous"][0] == pytest.approx(0.5 * np.log(0.5))
        assert cols["entropy_continuous"][25] == pytest.approx(-0.34657, abs=1e-5)
        assert np.all(cols["entropy_ordinary"][1:] > cols["entropy_continuous"][1:])

    def test_entropy_collapse(self):
        with pytest.raises(CollapseError):
            entropy_along_flow(N01, [0.0, 0.6])

    def test_orbit_modes(self):
        with pytest.raises(ValueError):
            analytic_orbit_map(N01, 0.1, "sideways")
        assert analytic_orbit_map(N01, 0.05, "composed", 0.1).matrix[0, 0] == 1.0

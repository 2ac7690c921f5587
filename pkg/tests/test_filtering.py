"""Kalman-Bucy filtering and penalty-based robust estimation."""

import math

import numpy as np
import pytest

from oracles import discrete_kalman, riccati_static
from roughkit import ArgumentError, DivergenceError, DomainError
from roughkit.filtering import (
    LinearGaussianModel,
    PenaltyConfig,
    Schedule,
    filtering_cost,
    gaussian_expectation,
    innovation,
    kalman_bucy,
    neg_log_likelihood_ito,
    neg_log_likelihood_pathwise,
    penalty,
    robust_confidence_interval,
    robust_expectation,
    robust_point_estimate,
    robust_report,
    simulate_pair,
)
from roughkit.paths import SampledPath, uniform_times
from roughkit.rough_core import canonical_lift


def scalar_model(alpha=-0.5, sigma=0.4, c=1.0, rho=0.0, mu0=0.3, Sigma0=0.25):
    return LinearGaussianModel([[alpha]], [[sigma]], [[c]], [[rho]], [mu0], [[Sigma0]])


STATIC = scalar_model(alpha=0.0, sigma=0.0, c=1.0, rho=0.0, mu0=0.0, Sigma0=0.25)


class TestSchedule:
    def test_constant(self):
        s = Schedule.constant([[2.0]])
        assert s.shape == (1, 1)
        assert s.at(0.0)[0, 0] == 2.0
        assert s.at(123.0)[0, 0] == 2.0

    def test_piecewise_lookup_right_continuous(self):
        s = Schedule([0.0, 0.5], np.array([[[1.0]], [[3.0]]]))
        assert s.at(0.25)[0, 0] == 1.0
        assert s.at(0.5)[0, 0] == 3.0
        assert s.at(0.75)[0, 0] == 3.0

    def test_validation(self):
        with pytest.raises(ArgumentError):
            Schedule([0.5], np.zeros((1, 1, 1)))
        with pytest.raises(ArgumentError):
            Schedule([0.0, 0.0], np.zeros((2, 1, 1)))
        with pytest.raises(ArgumentError):
            Schedule([0.0], np.zeros((2, 1, 1)))
        with pytest.raises(ArgumentError):
            Schedule([0.0], np.full((1, 1, 1), np.inf))

    def test_to_dict_forms(self):
        assert Schedule.constant([[2.0]]).to_dict() == [[2.0]]
        d = Schedule([0.0, 1.0], np.zeros((2, 1, 1))).to_dict()
        assert set(d) == {"knots", "values"}


class TestModel:
    def test_shape_validation(self):
        with pytest.raises(ArgumentError):
            LinearGaussianModel([[0.0, 1.0]], [[1.0]], [[1.0]], [[0.0]], [0.0], [[1.0]])
        with pytest.raises(ArgumentError):
            LinearGaussianModel([[0.0]], [[1.0], [1.0]], [[1.0]], [[0.0]], [0.0], [[1.0]])
        with pytest.raises(ArgumentError):
            LinearGaussianModel([[0.0]], [[1.0]], [[1.0, 2.0]], [[0.0]], [0.0], [[1.0]])
        with pytest.raises(ArgumentError):
            LinearGaussianModel([[0.0]], [[1.0]], [[1.0]], [[0.0, 0.0]], [0.0], [[1.0]])
        with pytest.raises(ArgumentError):
            LinearGaussianModel([[0.0]], [[1.0]], [[1.0]], [[0.0]], [0.0, 1.0], [[1.0]])

    def test_sigma0_symmetry_required(self):
        with pytest.raises(ArgumentError):
            LinearGaussianModel([[0.0, 0.0], [0.0, 0.0]], np.eye(2), np.eye(2),
                                np.zeros((2, 2)), [0.0, 0.0],
                                [[1.0, 0.5], [0.0, 1.0]])

    def test_admissibility(self):
        ok = scalar_model(rho=0.6)
        assert ok.is_admissible
        edge = scalar_model(rho=1.0)
        assert edge.is_admissible
        bad = scalar_model(rho=1.5)
        assert not bad.is_admissible
        with pytest.raises(DomainError):
            bad.check_admissible()

    def test_dict_round_trip(self):
        m = scalar_model(rho=0.3)
        back = LinearGaussianModel.from_dict(m.to_dict())
        assert back.to_dict() == m.to_dict()

    def test_scheduled_coefficients(self):
        m = LinearGaussianModel(
            {"knots": [0.0, 0.5], "values": [[[-1.0]], [[-2.0]]]},
            [[0.4]], [[1.0]], [[0.0]], [0.0], [[0.25]])
        assert m.alpha.at(0.25)[0, 0] == -1.0
        assert m.alpha.at(0.75)[0, 0] == -2.0
        back = LinearGaussianModel.from_dict(m.to_dict())
        assert back.alpha.at(0.75)[0, 0] == -2.0


class TestSimulate:
    def test_deterministic_and_anchored(self):
        m = scalar_model()
        s1, o1 = simulate_pair(m, 42, 64)
        s2, o2 = simulate_pair(m, 42, 64)
        np.testing.assert_array_equal(s1.values, s2.values)
        np.testing.assert_array_equal(o1.values, o2.values)
        assert o1.values[0, 0] == 0.0
        assert s1.n_samples == 65 and o1.T == 1.0

    def test_inadmissible_rejected(self):
        with pytest.raises(DomainError):
            simulate_pair(scalar_model(rho=2.0), 0, 8)


class TestKalmanBucy:
    def test_static_model_matches_closed_form(self):
        n = 512
        obs = SampledPath(uniform_times(1.0, n), np.zeros((n + 1, 1)))
        states = kalman_bucy(STATIC, obs)
        worst = max(abs(float(s.R[0, 0]) - riccati_static(0.25, s.t)) for s in states)
        assert worst < 2e-3

    def test_matches_discrete_kalman_oracle(self):
        m = scalar_model()
        _, obs = simulate_pair(m, 7, 256)
        states = kalman_bucy(m, obs)
        ref = discrete_kalman([[-0.5]], [[0.4]], [[1.0]], [0.3], [[0.25]],
                              np.diff(obs.values, axis=0), 1.0 / 256)
        got = np.stack([s.q for s in states[1:]])
        assert float(np.abs(got - ref).max()) < 5e-3

    def test_initial_state_override(self):
        m = scalar_model()
        _, obs = simulate_pair(m, 8, 32)
        states = kalman_bucy(m, obs, q0=[9.0], R0=[[0.1]])
        assert states[0].q[0] == 9.0
        assert states[0].R[0, 0] == 0.1

    def test_validation(self):
        m = scalar_model()
        _, obs = simulate_pair(m, 9, 16)
        with pytest.raises(ArgumentError):
            kalman_bucy(m, SampledPath([0.0, 0.1, 0.5], np.zeros((3, 1))))
        wide = SampledPath(obs.times, np.zeros((17, 2)))
        with pytest.raises(ArgumentError):
            kalman_bucy(m, wide)
        with pytest.raises(ArgumentError):
            kalman_bucy(m, obs, q0=[1.0, 2.0])

    def test_covariance_clamp_flagged(self):
        # sigma = 0 with a coarse grid overshoots the Riccati decay below zero
        m = scalar_model(alpha=0.0, sigma=0.0, c=10.0, Sigma0=1.0)
        obs = SampledPath([0.0, 0.1, 0.2], np.zeros((3, 1)))
        states = kalman_bucy(m, obs)
        assert states[1].clamped
        assert float(states[1].R[0, 0]) == 0.0

    def test_divergence_raises_with_step(self):
        m = scalar_model(alpha=500.0)
        _, obs = simulate_pair(scalar_model(), 10, 64)
        with pytest.raises(DivergenceError) as exc:
            kalman_bucy(m, obs)
        assert exc.value.step >= 1


class TestLikelihoods:
    def test_innovation_zero_c_equals_observation(self):
        m = scalar_model(c=0.0)
        _, obs = simulate_pair(scalar_model(), 11, 64)
        states = kalman_bucy(m, obs)
        innov = innovation(m, obs, states)
        np.testing.assert_allclose(innov.values, obs.values, atol=1e-14)

    def test_innovation_grid_check(self):
        m = scalar_model()
        _, obs = simulate_pair(m, 12, 32)
        states = kalman_bucy(m, obs)
        other = SampledPath(uniform_times(1.0, 16), np.zeros((17, 1)))
        with pytest.raises(ArgumentError):
            innovation(m, other, states)

    def test_ito_pathwise_gap_shrinks_with_mesh(self):
        # the gap is stochastic, so compare seed-averaged magnitudes
        m = scalar_model()
        means = []
        for n in (64, 1024):
            gaps = []
            for seed in range(30, 38):
                _, obs = simulate_pair(m, seed, n)
                states = kalman_bucy(m, obs)
                ito = neg_log_likelihood_ito(m, obs, states)
                pw = neg_log_likelihood_pathwise(m, canonical_lift(obs), states)
                gaps.append(abs(ito - pw))
            means.append(np.mean(gaps))
        assert means[1] < 0.5 * means[0]

    def test_penalty_is_filtering_cost_at_own_prior(self):
        m = scalar_model()
        _, obs = simulate_pair(m, 14, 128)
        cfg = PenaltyConfig(k1=1.0)
        direct = filtering_cost(m, m.mu0, m.Sigma0, canonical_lift(obs), cfg)
        assert penalty(m, obs, cfg) == direct

    def test_penalty_inadmissible_is_infinite(self):
        _, obs = simulate_pair(scalar_model(), 15, 32)
        assert penalty(scalar_model(rho=2.0), obs, PenaltyConfig(k1=1.0)) == math.inf

    def test_reference_model_has_zero_penalty(self):
        m = scalar_model()
        _, obs = simulate_pair(m, 16, 64)
        cfg = PenaltyConfig(k1=1.0, reference=m)
        assert penalty(m, obs, cfg) == 0.0

    def test_filtering_cost_time_restriction(self):
        m = scalar_model()
        _, obs = simulate_pair(m, 17, 64)
        cfg = PenaltyConfig(k1=1.0)
        t_half = obs.times[32]
        clipped = SampledPath(obs.times[:33], obs.values[:33])
        assert filtering_cost(m, m.mu0, m.Sigma0, canonical_lift(obs), cfg, t=t_half) == \
            pytest.approx(filtering_cost(m, m.mu0, m.Sigma0, canonical_lift(clipped), cfg),
                          abs=1e-12)

    def test_penalty_config_validation(self):
        with pytest.raises(ArgumentError):
            PenaltyConfig(k1=0.0)
        with pytest.raises(ArgumentError):
            PenaltyConfig(k1=1.0, k2=0.5)
        with pytest.raises(ArgumentError):
            PenaltyConfig(k1=1.0, reference=scalar_model(rho=2.0))


class TestGaussianExpectation:
    def test_univariate_moments_exact(self):
        assert gaussian_expectation(lambda x: float(x[0]), [1.5], [[0.25]]) == pytest.approx(1.5, abs=1e-12)
        assert gaussian_expectation(lambda x: float(x[0]) ** 2, [1.5], [[0.25]]) == \
            pytest.approx(1.5**2 + 0.25, abs=1e-10)

    def test_bivariate_cross_moment(self):
        cov = [[1.0, 0.3], [0.3, 0.5]]
        got = gaussian_expectation(lambda x: float(x[0] * x[1]), [0.0, 0.0], cov)
        assert got == pytest.approx(0.3, abs=1e-9)

    def test_high_dimension_monte_carlo(self):
        got = gaussian_expectation(lambda x: float(x[2]), [0.0, 0.0, 1.0], np.eye(3) * 0.04)
        assert got == pytest.approx(1.0, abs=0.01)


class TestRobust:
    def test_singleton_large_k1_recovers_kalman_mean(self):
        m = scalar_model()
        _, obs = simulate_pair(m, 18, 256)
        cfg = PenaltyConfig(k1=1e6)
        states = kalman_bucy(m, obs)
        got = robust_expectation(lambda x: float(x[0]), [m], obs, cfg)
        assert got == pytest.approx(float(states[-1].q[0]), abs=1e-4)

    def test_report_fields(self):
        m1 = scalar_model()
        m2 = scalar_model(alpha=-1.0)
        _, obs = simulate_pair(m1, 19, 64)
        cfg = PenaltyConfig(k1=10.0, reference=m1)
        rep = robust_report(lambda x: float(x[0]), [m1, m2], obs, cfg)
        assert rep["best_candidate"] in (0, 1)
        assert len(rep["objectives"]) == 2 and len(rep["penalties"]) == 2
        assert rep["value"] == max(rep["objectives"])
        assert rep["penalties"][0] == 0.0

    def test_inadmissible_candidate_skipped(self):
        m = scalar_model()
        _, obs = simulate_pair(m, 20, 32)
        cfg = PenaltyConfig(k1=10.0)
        rep = robust_report(lambda x: float(x[0]), [scalar_model(rho=2.0), m], obs, cfg)
        assert rep["best_candidate"] == 1
        assert rep["objectives"][0] == -math.inf
        with pytest.raises(ArgumentError):
            robust_report(lambda x: float(x[0]), [scalar_model(rho=2.0)], obs, cfg)

    def test_value_monotone_in_candidate_set(self):
        base = scalar_model()
        extra = scalar_model(alpha=-1.5, sigma=0.6)
        _, obs = simulate_pair(base, 21, 64)
        cfg = PenaltyConfig(k1=5.0, reference=base)
        phi = lambda x: float(x[0])
        small = robust_expectation(phi, [base], obs, cfg)
        big = robust_expectation(phi, [base, extra], obs, cfg)
        assert big >= small - 1e-12

    def test_confidence_interval_ordered_with_reference(self):
        base = scalar_model()
        others = [scalar_model(alpha=a, sigma=s) for a, s in ((-1.0, 0.5), (0.2, 0.3))]
        _, obs = simulate_pair(base, 22, 64)
        cfg = PenaltyConfig(k1=5.0, reference=base)
        lo, hi = robust_confidence_interval(lambda x: float(x[0]), [base] + others, obs, cfg)
        assert lo <= hi

    def test_singleton_reference_interval_degenerate(self):
        m = scalar_model()
        _, obs = simulate_pair(m, 23, 64)
        cfg = PenaltyConfig(k1=5.0, reference=m)
        lo, hi = robust_confidence_interval(lambda x: float(x[0]), [m], obs, cfg)
        states = kalman_bucy(m, obs)
        mean = gaussian_expectation(lambda x: float(x[0]), states[-1].q, states[-1].R)
        assert lo == pytest.approx(hi, abs=1e-12)
        assert lo == pytest.approx(mean, abs=1e-12)

    def test_point_estimate_singleton_is_mean(self):
        m = scalar_model()
        _, obs = simulate_pair(m, 24, 64)
        cfg = PenaltyConfig(k1=5.0, reference=m)
        states = kalman_bucy(m, obs)
        mean = gaussian_expectation(lambda x: float(x[0]), states[-1].q, states[-1].R)
        est = robust_point_estimate([m], obs, cfg)
        assert est == pytest.approx(mean, abs=1e-6)

    def test_point_estimate_needs_phi_in_higher_dimension(self):
        m2 = LinearGaussianModel(-0.5 * np.eye(2), 0.3 * np.eye(2), np.eye(2),
                                 np.zeros((2, 2)), [0.0, 0.0], 0.1 * np.eye(2))
        _, obs = simulate_pair(m2, 25, 32)
        cfg = PenaltyConfig(k1=5.0)
        with pytest.raises(ArgumentError):
            robust_point_estimate([m2], obs, cfg)

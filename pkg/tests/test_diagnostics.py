import json

import numpy as np
import pytest

from splitflow.diagnostics import (proxgrad_gap_certificate, energy_E, envelope_slope,
                                   fejer_check, objective_gap_check, nonincreasing_check,
                                   km_residual_rate_check, rate_fit, report_to_json)
from splitflow.errors import FitError, HypothesisError
from splitflow.first_order import FBFlowSpec, KMFlowSpec, fb_field, fb_probes, km_field, \
    km_probes
from splitflow.integrate import IntegratorConfig, Trajectory, integrate
from splitflow.operators import quadratic_fn, rotation_map
from splitflow.problems import get_problem
from splitflow.schedules import constant


def make_traj(times, values_1d, records=None):
    states = np.asarray(values_1d, dtype=float).reshape(-1, 1)
    return Trajectory(times=np.asarray(times, dtype=float), states=states,
                      velocities=np.zeros_like(states), records=records or {})


class TestMonotoneChecks:
    def test_constant_series_passes(self):
        traj = make_traj([0, 1, 2], [1.0, 1.0, 1.0])
        assert fejer_check(traj, np.zeros(1))["pass"]

    def test_increasing_series_fails_at_first_rise(self):
        report = nonincreasing_check([0.0, 1.0, 2.0], [1.0, 2.0, 1.5])
        assert not report["pass"]
        assert report["first_violation_t"] == 1.0
        assert report["margin"] == pytest.approx(1.0)

    def test_km_rotation_run_passes(self):
        spec = KMFlowSpec(T=rotation_map(np.pi / 3), lam=constant(0.6))
        cfg = IntegratorConfig(method="rk4", dt=0.01, t_end=20.0, record_every=10)
        traj = integrate(km_field(spec), np.array([1.0, 0.5]), cfg,
                         probes=km_probes(spec, ref=np.zeros(2)))
        assert fejer_check(traj, np.zeros(2))["pass"]

    def test_slack_tolerates_rounding(self):
        report = nonincreasing_check([0, 1], [1.0, 1.0 + 1e-10])
        assert report["pass"]


class TestEnergy:
    def test_zero_at_solution(self):
        g = quadratic_fn(np.eye(1))
        assert energy_E(np.zeros(1), g, 1.0, np.zeros(1)) == 0.0

    def test_pure_quadratic_distance_when_g_zero(self):
        g = quadratic_fn(np.zeros((2, 2)))
        x = np.array([1.0, 1.0])
        assert energy_E(x, g, 2.0, np.zeros(2)) == pytest.approx(0.5)

    def test_plug_in(self):
        g = quadratic_fn(np.eye(1))
        assert energy_E(np.array([1.0]), g, 1.0, np.zeros(1)) == pytest.approx(1.0)


class TestIstaGapCheck:
    def test_boundary_series_passes_with_equality(self):
        times = np.linspace(1.0, 10.0, 10)
        gaps = 1.0 / times
        report = objective_gap_check(times, gaps, d0_sq_over_2gamma=1.0)
        assert report["pass"]

    def test_violating_series_fails(self):
        times = np.array([1.0, 2.0])
        gaps = np.array([2.0, 0.5])  # 2 > 1/1
        report = objective_gap_check(times, gaps, d0_sq_over_2gamma=1.0)
        assert not report["pass"]
        assert report["first_violation_t"] == 1.0

    def test_zero_gap_trivially_passes(self):
        times = np.linspace(0.0, 5.0, 6)
        report = objective_gap_check(times, np.zeros(6), d0_sq_over_2gamma=0.0)
        assert report["pass"]

    def test_hypothesis_error_for_bad_step(self):
        p = get_problem("lasso1d")
        spec = FBFlowSpec(A=p.components["A"], B=p.components["B"], gamma=0.5,
                          lam=constant(1.0))
        cfg = IntegratorConfig(method="rk4", dt=0.05, t_end=1.0)
        traj = integrate(fb_field(spec), np.array([1.0]), cfg)
        with pytest.raises(HypothesisError):
            proxgrad_gap_certificate(traj, p.components["f"], p.components["g"],
                                  gamma=0.5, xstar=p.known_solution)

    def test_certificate_passes_on_lasso_run(self):
        p = get_problem("lasso1d")
        gamma = 0.25  # gamma*L*(3 + gamma*L) = 0.8125 <= 1
        spec = FBFlowSpec(A=p.components["A"], B=p.components["B"], gamma=gamma,
                          lam=constant(1.0))
        cfg = IntegratorConfig(method="rk4", dt=0.01, t_end=50.0, record_every=10)
        traj = integrate(fb_field(spec), np.array([4.0]), cfg)
        report = proxgrad_gap_certificate(traj, p.components["f"], p.components["g"],
                                       gamma=gamma, xstar=p.known_solution)
        assert report["pass"], report
        assert report["monotone"]


class TestRateFit:
    def test_power_model_recovers_planted_exponent(self):
        t = np.linspace(1.0, 50.0, 100)
        fit = rate_fit(t, 5.0 / t ** 2, model="power")
        assert abs(fit.exponent - 2.0) < 0.01
        assert fit.r2 > 0.999
        assert abs(fit.coefficient - 5.0) < 0.05

    def test_exponential_model_recovers_planted_rate(self):
        t = np.linspace(0.0, 20.0, 100)
        fit = rate_fit(t, 3.0 * np.exp(-0.7 * t), model="exponential")
        assert abs(fit.exponent - 0.7) < 0.01
        assert fit.r2 > 0.999

    def test_strongly_monotone_fb_flow_is_exponential(self):
        p = get_problem("strongcvx_l1")
        beta = p.components["beta"]
        spec = FBFlowSpec(A=p.components["A"], B=p.components["B"], gamma=beta,
                          lam=constant(0.75))
        cfg = IntegratorConfig(method="rk4", dt=0.01, t_end=60.0, record_every=10)
        traj = integrate(fb_field(spec), p.default_start, cfg,
                         probes=fb_probes(spec, ref=p.known_solution))
        dist = traj.records["dist_to_ref"]
        mask = (traj.times >= 10.0) & (dist > 1e-13)
        fit = rate_fit(traj.times[mask], dist[mask], model="exponential")
        assert fit.r2 > 0.99

    def test_errors(self):
        with pytest.raises(FitError):
            rate_fit(np.linspace(1, 2, 5), np.ones(5))  # too few points
        with pytest.raises(FitError):
            rate_fit(np.linspace(1, 2, 20), np.linspace(-1, 1, 20))  # nonpositive


class TestRate2Inequality:
    def _km_run(self, lam_value):
        spec = KMFlowSpec(T=rotation_map(np.pi / 2), lam=constant(lam_value))
        cfg = IntegratorConfig(method="rk4", dt=0.01, t_end=50.0)
        return integrate(km_field(spec), np.array([1.0, 0.0]), cfg,
                         probes=km_probes(spec)), constant(lam_value)

    def test_zero_residual_trivially_passes(self):
        times = np.linspace(0.0, 5.0, 51)
        traj = Trajectory(times=times, states=np.zeros((51, 1)),
                          velocities=np.zeros((51, 1)),
                          records={"fp_residual": np.zeros(51)})
        assert km_residual_rate_check(traj, constant(0.5))["pass"]

    def test_rotation_run_passes_everywhere(self):
        traj, lam = self._km_run(0.5)
        report = km_residual_rate_check(traj, lam)
        assert report["pass"], report

    def test_corrupted_residual_fails(self):
        # a growing residual violates the averaged-tail bound
        traj, lam = self._km_run(0.5)
        bad = dict(traj.records)
        bad["fp_residual"] = 1.0 + traj.times
        corrupted = Trajectory(times=traj.times, states=traj.states,
                               velocities=traj.velocities, records=bad)
        report = km_residual_rate_check(corrupted, lam)
        assert not report["pass"]
        assert report["first_violation_t"] is not None

    def test_lambda_hypothesis_enforced(self):
        traj, _ = self._km_run(0.5)
        with pytest.raises(HypothesisError):
            km_residual_rate_check(traj, constant(1.0))


class TestEnvelopeAndJson:
    def test_envelope_needs_enough_windows(self):
        with pytest.raises(FitError):
            envelope_slope(np.linspace(0, 1, 10), np.ones(10), window=0.5)

    def test_report_serializes_with_required_keys(self):
        report = nonincreasing_check([0, 1], [1.0, 0.5], name="demo")
        payload = json.loads(report_to_json(report))
        assert {"check", "pass", "first_violation_t", "margin"} <= set(payload)

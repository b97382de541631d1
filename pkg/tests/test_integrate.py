import math

import numpy as np
import pytest

from splitflow.errors import DivergenceError, SpecError
from splitflow.integrate import (FlowField, IntegratorConfig, euler_unit_step, integrate,
                                 write_trajectory_csv)


def decay_field(rate=2.0):
    return FlowField(order=1, fn=lambda t, x: -rate * x, label="decay")


class TestIntegrate:
    def test_constant_trajectory_for_zero_field(self):
        field = FlowField(order=1, fn=lambda t, x: np.zeros_like(x))
        cfg = IntegratorConfig(method="rk4", dt=0.1, t_end=1.0)
        traj = integrate(field, np.array([1.0, 1.0]), cfg)
        assert np.allclose(traj.states, 1.0)

    def test_rk4_matches_exponential_decay(self):
        # the relaxed fixed-point flow with T = -Id and lam = 1 is xdot = -2x
        cfg = IntegratorConfig(method="rk4", dt=1e-3, t_end=1.0)
        traj = integrate(decay_field(), np.array([1.0]), cfg)
        assert abs(traj.final_state[0] - math.exp(-2.0)) < 1e-8

    def test_damped_oscillator_closed_form(self):
        # xdd = -xd - x from (1, 0): roots (-1 +- i*sqrt(3))/2
        field = FlowField(order=2, fn=lambda t, x, v: -v - x)
        cfg = IntegratorConfig(method="rk4", dt=1e-3, t_end=1.0)
        traj = integrate(field, np.array([1.0]), cfg, v0=np.array([0.0]))
        w = math.sqrt(3.0) / 2.0
        want = math.exp(-0.5) * (math.cos(w) + math.sin(w) / (2.0 * w))
        assert abs(traj.final_state[0] - want) < 1e-6

    def test_rk4_global_error_scales_fourth_order(self):
        errs = []
        for dt in (0.01, 0.005):
            cfg = IntegratorConfig(method="rk4", dt=dt, t_end=1.0)
            traj = integrate(decay_field(), np.array([1.0]), cfg)
            errs.append(abs(traj.final_state[0] - math.exp(-2.0)))
        ratio = errs[0] / errs[1]
        assert 12.0 <= ratio <= 20.0

    def test_euler_h1_equals_unit_steps_bitwise(self):
        field = decay_field(0.3)
        cfg = IntegratorConfig(method="euler", dt=1.0, t_end=5.0)
        traj = integrate(field, np.array([1.0]), cfg)
        x = np.array([1.0])
        for k in range(5):
            x = euler_unit_step(field, x, t=float(k))
        assert traj.final_state[0] == x[0]  # bit-identical

    def test_record_grid_alignment(self):
        cfg = IntegratorConfig(method="rk4", dt=0.01, t_end=1.0, record_every=10)
        traj = integrate(decay_field(), np.array([1.0]), cfg)
        expect = np.array([k * 10 * 0.01 for k in range(11)])
        assert np.max(np.abs(traj.times - expect)) < 1e-12

    def test_order1_velocities_are_field_values(self):
        field = decay_field(1.7)
        cfg = IntegratorConfig(method="rk4", dt=0.05, t_end=1.0, record_every=4)
        traj = integrate(field, np.array([2.0]), cfg)
        for k in range(len(traj.times)):
            assert traj.velocities[k][0] == field.fn(traj.times[k], traj.states[k])[0]

    def test_probes_recorded(self):
        field = decay_field()
        cfg = IntegratorConfig(method="rk4", dt=0.1, t_end=1.0, record_every=2)
        traj = integrate(field, np.array([1.0]), cfg,
                         probes=[("norm", lambda t, x, v: float(np.linalg.norm(x)))])
        assert len(traj.records["norm"]) == len(traj.times) == 6

    def test_divergence_detected_with_partial_output(self):
        field = FlowField(order=1, fn=lambda t, x: x ** 3)
        cfg = IntegratorConfig(method="euler", dt=0.5, t_end=50.0)
        with pytest.raises(DivergenceError) as err:
            integrate(field, np.array([2.0]), cfg)
        assert err.value.last_finite_t < 50.0
        assert err.value.trajectory is not None
        assert len(err.value.trajectory.times) >= 1

    def test_breakpoint_alignment_enforced(self):
        field = FlowField(order=1, fn=lambda t, x: -x, breakpoints=(0.25,))
        cfg = IntegratorConfig(method="rk4", dt=0.2, t_end=1.0)
        with pytest.raises(SpecError):
            integrate(field, np.array([1.0]), cfg)
        cfg_ok = IntegratorConfig(method="rk4", dt=0.25, t_end=1.0)
        integrate(field, np.array([1.0]), cfg_ok)

    def test_v0_handling(self):
        field = decay_field()
        cfg = IntegratorConfig(method="rk4", dt=0.1, t_end=1.0)
        with pytest.raises(ValueError):
            integrate(field, np.array([1.0]), cfg, v0=np.array([0.0]))
        field2 = FlowField(order=2, fn=lambda t, x, v: -x)
        with pytest.raises(ValueError):
            integrate(field2, np.array([1.0]), cfg)


class TestIntegratorConfig:
    def test_rejects_bad_grids(self):
        with pytest.raises(ValueError):
            IntegratorConfig(method="rk4", dt=0.3, t_end=1.0)  # non-integer steps
        with pytest.raises(ValueError):
            IntegratorConfig(method="rk4", dt=0.1, t_end=1.0, record_every=3)
        with pytest.raises(ValueError):
            IntegratorConfig(method="rk4", dt=-0.1, t_end=1.0)
        with pytest.raises(ValueError):
            IntegratorConfig(method="midpoint", dt=0.1, t_end=1.0)
        with pytest.raises(ValueError):
            IntegratorConfig(method="rk4", dt=1e-10, t_end=1e3)  # > 1e8 steps


class TestCsvExport:
    def test_header_and_seventeen_digit_roundtrip(self, tmp_path):
        field = decay_field()
        cfg = IntegratorConfig(method="rk4", dt=0.1, t_end=1.0, record_every=5)
        traj = integrate(field, np.array([1.0 / 3.0]), cfg,
                         probes=[("norm", lambda t, x, v: float(np.linalg.norm(x)))])
        path = tmp_path / "traj.csv"
        write_trajectory_csv(traj, path)
        lines = path.read_text(encoding="utf-8").strip().splitlines()
        assert lines[0] == "t,x_0,v_0,norm"
        for k, line in enumerate(lines[1:]):
            fields = [float(s) for s in line.split(",")]
            assert fields[0] == traj.times[k]          # 17 significant digits
            assert fields[1] == traj.states[k][0]      # round-trip exactly
            assert fields[2] == traj.velocities[k][0]
            assert fields[3] == traj.records["norm"][k]

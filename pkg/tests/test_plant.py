import numpy as np
import pytest

from pressem.compensate import constant_velocity_trajectory, zero_table
from pressem.errors import DomainError, ParseError
from pressem.model import VibrationProfile, make_model
from pressem.plant import (FingerTrajectory, PlantConfig, actuator_response,
                           generate_trajectory, plant_from_doc, plant_to_doc,
                           simulate_press, synth_trace_from_model)

from conftest import BINS, GRID, build_constant_model


class TestActuatorResponse:
    def test_static_linear(self):
        cfg = PlantConfig(actuator_gain_cN=100.0, actuator_tau_ms=0.0,
                          duty_nonlinearity_exponent=1.0,
                          actuation_latency_ticks=0)
        out = actuator_response(np.full(50, 0.5), cfg)
        assert np.allclose(out, 50.0)

    def test_zero_duty_zero_force(self):
        out = actuator_response(np.zeros(100), PlantConfig())
        assert np.allclose(out, 0.0)

    def test_first_order_step_63_percent_at_tau(self):
        cfg = PlantConfig(actuator_gain_cN=100.0, actuator_tau_ms=10.0,
                          duty_nonlinearity_exponent=1.0,
                          actuation_latency_ticks=0)
        out = actuator_response(np.ones(60), cfg, tick_rate_hz=1000.0)
        target = 63.2
        # 63.2% of gain must be reached at tick 10 +- 1
        reached = int(np.argmax(out >= target))
        assert reached in (9, 10, 11)

    def test_latency_shifts_output(self):
        cfg = PlantConfig(actuator_gain_cN=100.0, actuator_tau_ms=0.0,
                          duty_nonlinearity_exponent=1.0,
                          actuation_latency_ticks=3)
        out = actuator_response(np.ones(10), cfg)
        assert np.allclose(out[:3], 0.0)
        assert np.allclose(out[3:], 100.0)

    def test_nonlinearity_exponent(self):
        cfg = PlantConfig(actuator_gain_cN=100.0, actuator_tau_ms=0.0,
                          duty_nonlinearity_exponent=2.0,
                          actuation_latency_ticks=0)
        out = actuator_response(np.full(5, 0.5), cfg)
        assert np.allclose(out, 25.0)

    def test_duty_out_of_range_rejected(self):
        with pytest.raises(DomainError):
            actuator_response(np.array([0.2, 1.2]), PlantConfig())
        with pytest.raises(DomainError):
            actuator_response(np.array([-0.1]), PlantConfig())


def quasi_static_press(travel=2.0, rate=1000.0):
    # slow enough that damping and inertia are negligible
    return constant_velocity_trajectory(travel, 4.0, rate, dwell_ticks=200,
                                        tail_ticks=50)


class TestSimulatePress:
    def test_all_zero_plant_zero_force(self):
        cfg = PlantConfig(mass_g=0.0, spring_cN_per_mm=0.0,
                          damping_cN_per_mm_s=0.0, actuator_gain_cN=0.0,
                          actuator_tau_ms=0.0, duty_nonlinearity_exponent=1.0,
                          sensor_noise_sigma_mm=0.0, actuation_latency_ticks=0)
        traj = generate_trajectory(4.0, 30.0, 1000.0)
        trace = simulate_press(cfg, traj, 0.0)
        assert np.allclose(trace.force_cN, 0.0)

    def test_hookes_law_terminal_force(self):
        cfg = PlantConfig(mass_g=0.0, spring_cN_per_mm=10.0,
                          damping_cN_per_mm_s=0.0, actuator_gain_cN=0.0,
                          actuator_tau_ms=0.0, duty_nonlinearity_exponent=1.0,
                          sensor_noise_sigma_mm=0.0, actuation_latency_ticks=0)
        traj = quasi_static_press(travel=2.0)
        trace = simulate_press(cfg, traj, 0.0)
        dwell = trace.force_cN[traj.displacement_mm >= 2.0 - 1e-12]
        assert abs(float(dwell[-1]) - 20.0) <= 0.1

    def test_constant_duty_composition(self):
        cfg = PlantConfig(mass_g=0.0, spring_cN_per_mm=0.0,
                          damping_cN_per_mm_s=0.0, actuator_gain_cN=100.0,
                          actuator_tau_ms=0.0, duty_nonlinearity_exponent=1.0,
                          sensor_noise_sigma_mm=0.0, actuation_latency_ticks=0)
        traj = generate_trajectory(4.0, 30.0, 1000.0)
        trace = simulate_press(cfg, traj, 0.5)
        assert np.allclose(trace.force_cN, 50.0)

    def test_linearity_gain_times_duty(self, ideal_plant):
        table = zero_table(GRID, BINS)
        for key in table.duties:
            table.duties[key][:] = 0.33
        traj = generate_trajectory(4.0, 25.0, 1000.0)
        trace = simulate_press(ideal_plant, traj, table)
        assert np.allclose(trace.force_cN, ideal_plant.actuator_gain_cN * 0.33,
                           atol=1e-9)

    def test_determinism_same_seed(self, fixture_plant):
        traj = generate_trajectory(4.0, 30.0, 1000.0)
        a = simulate_press(fixture_plant, traj, 0.3)
        b = simulate_press(fixture_plant, traj, 0.3)
        assert a.force_cN.tobytes() == b.force_cN.tobytes()
        assert a.displacement_mm.tobytes() == b.displacement_mm.tobytes()

    def test_spring_press_release_no_integrator_hysteresis(self):
        cfg = PlantConfig(mass_g=0.0, spring_cN_per_mm=10.0,
                          damping_cN_per_mm_s=0.0, actuator_gain_cN=0.0,
                          actuator_tau_ms=0.0, duty_nonlinearity_exponent=1.0,
                          sensor_noise_sigma_mm=0.0, actuation_latency_ticks=0)
        traj = quasi_static_press(travel=2.0)
        trace = simulate_press(cfg, traj, 0.0)
        d = trace.displacement_mm
        vel = np.gradient(d) * 1000.0
        press = (vel > 0.5)
        release = (vel < -0.5)
        grid_pts = np.arange(0.2, 1.9, 0.1)
        fp = np.interp(grid_pts, d[press], trace.force_cN[press])
        order = np.argsort(d[release])
        fr = np.interp(grid_pts, d[release][order], trace.force_cN[release][order])
        assert np.abs(fp - fr).max() <= 0.5

    def test_rate_mismatch_with_renderer_rejected(self, ideal_plant):
        from pressem.renderer import Renderer, RendererConfig
        table = zero_table(GRID, BINS)
        renderer = Renderer(RendererConfig(table=table, tick_rate_hz=1000.0))
        traj = FingerTrajectory(500.0, np.linspace(0, 1, 100))
        with pytest.raises(DomainError):
            simulate_press(ideal_plant, traj, None, renderer=renderer)


class TestGenerateTrajectory:
    def test_peak_velocity_within_two_percent(self):
        traj = generate_trajectory(4.0, 50.0, 1000.0)
        v = np.gradient(traj.displacement_mm) * 1000.0
        assert 49.0 <= np.abs(v).max() <= 51.0

    def test_starts_and_ends_at_zero(self):
        traj = generate_trajectory(4.0, 30.0, 1000.0)
        assert abs(traj.displacement_mm[0]) <= 1e-9
        assert abs(traj.displacement_mm[-1]) <= 1e-9
        assert traj.displacement_mm.max() == pytest.approx(4.0, abs=1e-6)

    def test_refinement_equivalence(self):
        coarse = generate_trajectory(4.0, 30.0, 1000.0)
        fine = generate_trajectory(4.0, 30.0, 2000.0)
        t_c = np.arange(coarse.n_samples) / 1000.0
        t_f = np.arange(fine.n_samples) / 2000.0
        resampled = np.interp(t_c, t_f, fine.displacement_mm)
        n = min(resampled.size, coarse.displacement_mm.size)
        assert np.abs(resampled[:n] - coarse.displacement_mm[:n]).max() <= 1e-3

    def test_impossible_velocity_rejected(self):
        with pytest.raises(DomainError):
            generate_trajectory(0.1, 1e7, 100.0)


class TestSynthTrace:
    def test_constant_model_constant_force(self):
        m = build_constant_model(50.0)
        traj = generate_trajectory(4.0, 10.0, 1000.0)
        trace = synth_trace_from_model(m, traj, 0.0, 0)
        assert np.allclose(trace.force_cN, 50.0)

    def test_single_vibration_burst_on_crossing(self):
        vib = VibrationProfile(2.0, "press", 1000.0, (1.0, -1.0, 0.5))
        m = build_constant_model(50.0)
        m = make_model(m.name, m.grid, m.bins, m.curves, vibrations=(vib,))
        traj = generate_trajectory(4.0, 20.0, 1000.0)
        trace = synth_trace_from_model(m, traj, 0.0, 0)
        bursts = np.nonzero(trace.vibration == 1.0)[0]
        assert bursts.size == 1

    def test_no_burst_when_stopping_short(self):
        vib = VibrationProfile(2.0, "press", 1000.0, (1.0, -1.0))
        m = build_constant_model(50.0)
        m = make_model(m.name, m.grid, m.bins, m.curves, vibrations=(vib,))
        traj = generate_trajectory(1.9, 20.0, 1000.0)
        trace = synth_trace_from_model(m, traj, 0.0, 0)
        assert np.all(trace.vibration == 0.0)

    def test_same_seed_bit_identical(self, tactile_model):
        traj = generate_trajectory(4.0, 30.0, 1000.0)
        a = synth_trace_from_model(tactile_model, traj, 2.0, 42)
        b = synth_trace_from_model(tactile_model, traj, 2.0, 42)
        assert a.force_cN.tobytes() == b.force_cN.tobytes()

    def test_trajectory_beyond_travel_rejected(self, tactile_model):
        traj = FingerTrajectory(1000.0, np.linspace(0.0, 4.5, 300))
        with pytest.raises(DomainError):
            synth_trace_from_model(tactile_model, traj, 0.0, 0)


class TestPlantConfigDoc:
    def test_round_trip(self, fixture_plant):
        doc = plant_to_doc(fixture_plant)
        assert plant_from_doc(doc) == fixture_plant

    def test_unknown_field_rejected(self):
        with pytest.raises(ParseError, match="unknown"):
            plant_from_doc({"gain": 1.0})

    def test_defaults_are_fixture_choice(self):
        # documented fixture values (not measurements): gain 300, tau 5, gamma 1.2
        cfg = PlantConfig()
        assert (cfg.actuator_gain_cN, cfg.actuator_tau_ms,
                cfg.duty_nonlinearity_exponent) == (300.0, 5.0, 1.2)

    def test_validation(self):
        with pytest.raises(DomainError):
            PlantConfig(actuator_tau_ms=-1.0)
        with pytest.raises(DomainError):
            PlantConfig(duty_nonlinearity_exponent=0.0)
        with pytest.raises(DomainError):
            PlantConfig(actuation_latency_ticks=-2)

import numpy as np
import pytest

from pressem.capture import (CaptureConfig, PressTrace, estimate_velocity,
                             extract_vibration, fit_model, moving_average,
                             read_trace_csv, segment_presses, write_trace_csv)
from pressem.compensate import constant_velocity_trajectory
from pressem.errors import DomainError, FitError, ParseError
from pressem.model import VibrationProfile
from pressem.plant import synth_trace_from_model

from conftest import BINS, GRID, build_tactile_model


def make_trace(disp, rate=1000.0, force=None, vib=None):
    disp = np.asarray(disp, dtype=np.float64)
    force = np.zeros_like(disp) if force is None else np.asarray(force, float)
    vib = np.zeros_like(disp) if vib is None else np.asarray(vib, float)
    return PressTrace(rate, disp, force, vib)


def stroke(travel=4.0, v=20.0, rate=1000.0, dwell=50, lead=50, tail=50):
    """Triangle stroke with lead/dwell/tail rests, for segmentation tests."""
    step = v / rate
    n = int(round(travel / step))
    down = np.arange(n + 1) * step
    return np.concatenate([np.zeros(lead), down, np.full(dwell, travel),
                           down[::-1], np.zeros(tail)])


class TestMovingAverage:
    def test_hand_oracle_edge_replication(self):
        out = moving_average([0.0, 3.0, 6.0], 3)
        assert np.allclose(out, [1.0, 3.0, 5.0], atol=1e-12)

    def test_constant_unchanged(self):
        out = moving_average(np.full(64, 3.7), 9)
        assert np.allclose(out, 3.7, atol=1e-12)

    def test_window_one_is_identity(self):
        x = np.random.default_rng(0).normal(0, 1, 32)
        assert np.array_equal(moving_average(x, 1), x)

    def test_bounded_by_input_range(self):
        x = np.random.default_rng(1).uniform(-4.0, 9.0, 200)
        out = moving_average(x, 11)
        assert out.min() >= x.min() - 1e-12 and out.max() <= x.max() + 1e-12

    def test_even_or_oversized_window_rejected(self):
        with pytest.raises(DomainError):
            moving_average([1.0, 2.0, 3.0], 2)
        with pytest.raises(DomainError):
            moving_average([1.0, 2.0, 3.0], 5)


class TestEstimateVelocity:
    def test_linear_ramp_exact(self):
        d = np.arange(100) * 0.01  # 10 mm/s at 1 kHz
        v = estimate_velocity(d, 1000.0)
        assert np.allclose(v, 10.0, atol=1e-9)

    def test_constant_is_zero(self):
        v = estimate_velocity(np.full(50, 1.5), 1000.0)
        assert np.allclose(v, 0.0)

    def test_quadratic_second_order_accurate(self):
        # d(t) = t^2 (t in s, d in mm) -> v(t) = 2 t mm/s; central differences
        # are exact for quadratics, one-sided ends are O(dt)
        rate = 1000.0
        t = np.arange(200) / rate
        v = estimate_velocity(t ** 2, rate)
        assert np.allclose(v[1:-1], 2.0 * t[1:-1], atol=1e-9)
        assert abs(v[0] - 0.0) <= 2.0 / rate + 1e-12

    def test_too_short(self):
        with pytest.raises(DomainError):
            estimate_velocity([1.0], 1000.0)


class TestSegmentation:
    def setup_method(self):
        self.config = CaptureConfig(grid=GRID, bins=BINS, filter_window=5,
                                    segment_min_travel_mm=0.5,
                                    segment_velocity_deadband_mm_s=2.0)

    def test_single_stroke_gives_press_then_release(self):
        trace = make_trace(stroke())
        segs = segment_presses(trace, self.config)
        assert [s.phase for s in segs] == ["press", "release"]
        press = segs[0]
        assert press.mean_velocity_mm_s == pytest.approx(20.0, rel=0.05)
        assert press.peak_velocity_mm_s <= 20.0 + 0.5

    def test_flat_trace_empty(self):
        segs = segment_presses(make_trace(np.zeros(500)), self.config)
        assert segs == []

    def test_three_strokes_counted(self):
        one = stroke(dwell=40, lead=30, tail=30)
        trace = make_trace(np.concatenate([one, one, one]))
        segs = segment_presses(trace, self.config)
        assert [s.phase for s in segs] == ["press", "release"] * 3
        starts = [s.start for s in segs]
        assert starts == sorted(starts)

    def test_short_jitter_discarded(self):
        # 0.2 mm wiggle < min travel never becomes a segment
        wiggle = np.concatenate([np.zeros(50), np.linspace(0, 0.2, 20),
                                 np.linspace(0.2, 0, 20), np.zeros(50)])
        assert segment_presses(make_trace(wiggle), self.config) == []

    def test_time_shift_and_force_offset_insensitive(self):
        base = stroke()
        t0 = make_trace(base, force=np.full(base.size, 11.0))
        shifted = make_trace(np.concatenate([np.zeros(97), base]),
                             force=np.full(base.size + 97, 55.0))
        a = segment_presses(t0, self.config)
        b = segment_presses(shifted, self.config)
        assert [(s.phase, s.stop - s.start) for s in a] == \
               [(s.phase, s.stop - s.start) for s in b]
        assert all(sb.start - sa.start == 97 for sa, sb in zip(a, b))

    def test_smooth_trace_segments_stable_under_refiltering(self):
        # a C2-smooth stroke crosses the deadband decisively, so one more
        # filter pass leaves the segmentation identical
        from pressem.plant import generate_trajectory
        smooth = generate_trajectory(4.0, 30.0, 1000.0).displacement_mm
        direct = segment_presses(make_trace(smooth), self.config)
        refiltered = segment_presses(
            make_trace(moving_average(smooth, self.config.filter_window)),
            self.config)
        assert [s.phase for s in direct] == ["press", "release"]
        assert [(s.phase, s.start, s.stop) for s in direct] == \
               [(s.phase, s.start, s.stop) for s in refiltered]


class TestFitModel:
    def test_two_identical_presses_average_to_one(self, capture_config):
        model = build_tactile_model()
        traj = constant_velocity_trajectory(4.0, 10.0, 1000.0, dwell_ticks=0,
                                            tail_ticks=0)
        tr = synth_trace_from_model(model, traj, 0.0, 0)
        single_bin = CaptureConfig(grid=GRID, bins=(BINS[0],), filter_window=1)
        fitted = fit_model([tr, tr], single_bin)
        one = fit_model([tr], single_bin)
        for key in fitted.curves:
            assert np.allclose(fitted.curves[key].as_array(),
                               one.curves[key].as_array(), atol=1e-12)

    def test_empty_bin_is_named_error(self, capture_config):
        model = build_tactile_model()
        traj = constant_velocity_trajectory(4.0, 10.0, 1000.0, dwell_ticks=0,
                                            tail_ticks=0)
        tr = synth_trace_from_model(model, traj, 0.0, 0)
        with pytest.raises(FitError, match=r"bin 1"):
            fit_model([tr], capture_config)

    def test_zero_noise_round_trip(self, capture_config):
        model = build_tactile_model()
        traces = [synth_trace_from_model(
            model, constant_velocity_trajectory(
                4.0, b.center_mm_s, b.center_mm_s / GRID.step_mm,
                dwell_ticks=0, tail_ticks=0), 0.0, 0)
            for b in BINS]
        fitted = fit_model(traces, capture_config)
        for key, curve in model.curves.items():
            dev = np.abs(fitted.curves[key].as_array() - curve.as_array()).max()
            assert dev <= 1e-6, (key, dev)

    def test_noisy_round_trip_statistical(self, capture_config):
        # sigma=2 cN, 20 presses/bin, interior deviation <= 3 sigma / sqrt(20)
        model = build_tactile_model()
        sigma = 2.0
        traces = []
        seed = 400000
        for b in BINS:
            traj = constant_velocity_trajectory(
                4.0, b.center_mm_s, b.center_mm_s / GRID.step_mm,
                dwell_ticks=0, tail_ticks=0, offset_steps=0.5)
            for _ in range(20):
                seed += 1
                traces.append(synth_trace_from_model(model, traj, sigma, seed))
        fitted = fit_model(traces, capture_config)
        threshold = 3.0 * sigma / np.sqrt(20.0)
        for key, curve in model.curves.items():
            dev = np.abs(fitted.curves[key].as_array()[1:-1]
                         - curve.as_array()[1:-1]).max()
            assert dev <= threshold, (key, dev, threshold)


class TestExtractVibration:
    def setup_method(self):
        self.config = CaptureConfig(grid=GRID, bins=BINS, filter_window=1,
                                    vibration_onset_threshold=5.0,
                                    vibration_window_ms=20.0)

    def _trace_with_burst(self, trigger_mm=2.0):
        disp = stroke(v=20.0, lead=10, dwell=10, tail=10)
        vib = np.zeros_like(disp)
        onset = int(np.argmax(disp >= trigger_mm))
        burst = 0.4 * np.sin(2.0 + np.linspace(0.0, 40.0, 15))
        vib[onset:onset + burst.size] = burst
        return make_trace(disp, vib=vib), onset

    def test_zero_vibration_gives_none(self):
        trace = make_trace(stroke())
        seg = segment_presses(trace, self.config)[0]
        assert extract_vibration(trace, seg, self.config) is None

    def test_impulse_trigger_displacement(self):
        trace, onset = self._trace_with_burst(2.0)
        seg = segment_presses(trace, self.config)[0]
        profile = extract_vibration(trace, seg, self.config)
        assert profile is not None
        assert profile.direction == "press"
        assert abs(profile.trigger_mm - 2.0) <= GRID.step_mm + 1e-9

    def test_profile_normalized(self):
        trace, _ = self._trace_with_burst()
        seg = segment_presses(trace, self.config)[0]
        profile = extract_vibration(trace, seg, self.config)
        samples = np.asarray(profile.samples)
        assert samples.min() >= -1.0 and samples.max() <= 1.0
        assert np.abs(samples).max() == pytest.approx(1.0)

    def test_fit_collects_vibration(self):
        vib_profile = VibrationProfile(2.0, "press", 1000.0,
                                       tuple(np.sin(np.linspace(0, 12, 24))))
        model = build_tactile_model()
        from pressem.model import make_model
        model = make_model(model.name, model.grid, model.bins, model.curves,
                           vibrations=(vib_profile,))
        traces = [synth_trace_from_model(
            model, constant_velocity_trajectory(
                4.0, b.center_mm_s, b.center_mm_s / GRID.step_mm,
                dwell_ticks=0, tail_ticks=0), 0.0, 0)
            for b in BINS]
        fitted = fit_model(traces, CaptureConfig(grid=GRID, bins=BINS,
                                                 filter_window=1))
        press_vibs = [v for v in fitted.vibrations if v.direction == "press"]
        assert press_vibs
        assert abs(press_vibs[0].trigger_mm - 2.0) <= 3 * GRID.step_mm


class TestTraceCsv:
    def test_round_trip(self, tmp_path):
        trace = make_trace(stroke(), force=np.linspace(0, 60, stroke().size),
                           vib=np.sin(np.arange(stroke().size)))
        path = tmp_path / "t.csv"
        write_trace_csv(trace, path)
        back = read_trace_csv(path)
        assert back.sample_rate_hz == trace.sample_rate_hz
        assert np.array_equal(back.displacement_mm, trace.displacement_mm)
        assert np.array_equal(back.force_cN, trace.force_cN)
        assert np.array_equal(back.vibration, trace.vibration)

    def test_missing_rate_comment(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t_ms,disp_mm,force_cN,vib\n0,0,0,0\n1,0,0,0\n")
        with pytest.raises(ParseError, match="sample_rate_hz"):
            read_trace_csv(path)

    def test_malformed_number_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("# sample_rate_hz=1000\nt_ms,disp_mm,force_cN,vib\n"
                        "0.0,0,0,0\n1.0,zap,0,0\n")
        with pytest.raises(ParseError, match=":4"):
            read_trace_csv(path)

    def test_non_uniform_timestamps_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("# sample_rate_hz=1000\nt_ms,disp_mm,force_cN,vib\n"
                        "0.0,0,0,0\n1.0,0,0,0\n2.5,0,0,0\n")
        with pytest.raises(ParseError, match="non-uniform"):
            read_trace_csv(path)

    def test_one_percent_jitter_tolerated(self, tmp_path):
        path = tmp_path / "ok.csv"
        path.write_text("# sample_rate_hz=1000\nt_ms,disp_mm,force_cN,vib\n"
                        "0.0,0,0,0\n1.005,0,0,0\n2.0,0,0,0\n")
        assert read_trace_csv(path).n_samples == 3

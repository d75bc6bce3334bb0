"""Acceptance suite: one test per acceptance criterion, each printing a
PASS/FAIL line (run with `pytest tests/test_acceptance.py -v -s`)."""

import json
import time

import numpy as np

from pressem.capture import CaptureConfig, fit_model
from pressem.cli import main
from pressem.compensate import (CompensationConfig, compensate,
                                constant_velocity_trajectory,
                                contraction_factor)
from pressem.model import (VibrationProfile, lookup_force, make_model,
                           serialize_model)
from pressem.plant import PlantConfig, generate_trajectory, plant_to_doc, \
    synth_trace_from_model
from pressem.renderer import (CooldownBehavior, FastTapBehavior, Renderer,
                              RendererConfig, VibrationTicksBehavior,
                              run_script, run_session)

from conftest import BINS, GRID, build_tactile_model

QSTEP = 1.0 / (2 ** 12 - 1)


def report_line(name: str, ok: bool, detail: str = ""):
    marker = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {marker}: {name}" + (f" ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


def synth_fixture_traces(model, noise=0.0, presses=1, offset=0.0, seed0=0):
    traces = []
    seed = seed0
    for b in model.bins:
        traj = constant_velocity_trajectory(
            model.grid.travel_mm, b.center_mm_s,
            b.center_mm_s / model.grid.step_mm, dwell_ticks=0, tail_ticks=0,
            offset_steps=offset)
        for _ in range(presses):
            seed += 1
            traces.append(synth_trace_from_model(model, traj, noise, seed))
    return traces


def captured_fixture_model():
    source = build_tactile_model()
    config = CaptureConfig(grid=GRID, bins=BINS, filter_window=1)
    return fit_model(synth_fixture_traces(source), config,
                     name="captured-tactile"), source


class TestCompensationConvergencePaperScale:
    def test_converges_like_the_hardware_rig(self, fixture_plant):
        captured, _ = captured_fixture_model()
        config = CompensationConfig()  # defaults tuned for the fixture plant
        start = time.monotonic()
        table, report = compensate(fixture_plant, captured, config)
        elapsed = time.monotonic() - start
        worst_mean = max(e.mean_abs_cN[-1] for e in report.entries)
        worst_iters = max(e.iterations_used for e in report.entries)
        ok = (all(e.iterations_used <= 10 for e in report.entries)
              and all(min(e.mean_abs_cN) <= 2.5 for e in report.entries)
              and all(e.mean_abs_cN[-1] <= 2.5 for e in report.entries)
              and elapsed < 10.0)
        report_line("compensation convergence (paper scale)", ok,
                    f"worst mean {worst_mean:.2f} cN, max {worst_iters} "
                    f"iterations/bin, {elapsed:.2f}s")


class TestAnalyticInverseOracle:
    def test_duties_equal_reference_over_gain(self, ideal_plant):
        captured, _ = captured_fixture_model()
        single = make_model("single", GRID, (BINS[0],),
                            {("press", 0): captured.curves[("press", 0)],
                             ("release", 0): captured.curves[("release", 0)]})
        config = CompensationConfig(alpha=1.0, nominal_gain_cN=200.0,
                                    epsilon_cN=1e-6, smoothing_window=1,
                                    press_style="constant")
        table, report = compensate(ideal_plant, single, config)
        worst = 0.0
        iters = []
        for direction in ("press", "release"):
            expected = single.curves[(direction, 0)].as_array() / 200.0
            worst = max(worst, float(
                np.abs(table.duties[(direction, 0)] - expected).max()))
            iters.append(report.entry(direction, 0).iterations_used)
        ok = worst <= QSTEP + 1e-12 and iters == [1, 1]
        report_line("analytic-inverse oracle", ok,
                    f"max |duty - ref/g| = {worst:.2e} (quantum {QSTEP:.2e}), "
                    f"iterations {iters}")


class TestContractionLaw:
    def test_measured_ratio_matches_formula(self, ideal_plant):
        captured, _ = captured_fixture_model()
        single = make_model("single", GRID, (BINS[0],),
                            {("press", 0): captured.curves[("press", 0)],
                             ("release", 0): captured.curves[("release", 0)]})
        worst = 0.0
        for alpha in (0.25, 0.5, 1.0):
            config = CompensationConfig(alpha=alpha, nominal_gain_cN=400.0,
                                        epsilon_cN=1e-9, smoothing_window=1,
                                        max_iterations=5,
                                        press_style="constant")
            _, report = compensate(ideal_plant, single, config)
            want = contraction_factor(ideal_plant.actuator_gain_cN, 400.0, alpha)
            entry = report.entry("press", 0)
            seq = [entry.initial_mean_abs_cN, *entry.mean_abs_cN]
            for a, b in zip(seq, seq[1:]):
                if a <= 1e-10:
                    break
                worst = max(worst, abs(b / a - want))
        ok = worst <= 1e-6
        report_line("contraction law", ok, f"max |ratio - formula| = {worst:.2e}")


class TestCaptureRoundTrip:
    def test_zero_noise_exact(self):
        source = build_tactile_model()
        config = CaptureConfig(grid=GRID, bins=BINS, filter_window=1)
        fitted = fit_model(synth_fixture_traces(source), config)
        worst = max(np.abs(fitted.curves[k].as_array() - c.as_array()).max()
                    for k, c in source.curves.items())
        ok = worst <= 1e-6
        report_line("capture round trip (zero noise)", ok,
                    f"max curve deviation {worst:.2e} cN")

    def test_noisy_statistical(self):
        source = build_tactile_model()
        config = CaptureConfig(grid=GRID, bins=BINS, filter_window=1)
        sigma = 2.0
        fitted = fit_model(
            synth_fixture_traces(source, noise=sigma, presses=20, offset=0.5,
                                 seed0=400000), config)
        threshold = 3.0 * sigma / np.sqrt(20.0)
        worst = max(np.abs(fitted.curves[k].as_array()[1:-1]
                           - c.as_array()[1:-1]).max()
                    for k, c in source.curves.items())
        ok = worst <= threshold
        report_line("capture round trip (sigma=2, 20 presses/bin)", ok,
                    f"max interior deviation {worst:.3f} <= {threshold:.3f} cN")


class TestFdvvVsFdOrdering:
    def test_single_bin_table_strictly_worse_on_fast_press(self):
        reference = build_tactile_model()
        fd_model = make_model("fd-baseline", GRID, (BINS[0],),
                              {("press", 0): reference.curves[("press", 0)],
                               ("release", 0): reference.curves[("release", 0)]})
        plant = PlantConfig(sensor_noise_sigma_mm=0.0)
        config = CompensationConfig()
        fdvv_table, _ = compensate(plant, reference, config)
        fd_table, _ = compensate(plant, fd_model, config)
        fast = generate_trajectory(4.0, 50.0, 1000.0)  # 5x slowest center

        def render_error(table):
            renderer = Renderer(RendererConfig(table=table))
            trace = run_session(renderer, plant, fast).trace
            vel = np.gradient(trace.displacement_mm) * 1000.0
            moving = np.abs(vel) > 1.0
            errs = []
            for k in np.nonzero(moving)[0]:
                d = float(np.clip(trace.displacement_mm[k], 0.0, 4.0))
                ref = lookup_force(reference, d, abs(float(vel[k])),
                                   "press" if vel[k] > 0 else "release")
                errs.append(abs(float(trace.force_cN[k]) - ref))
            return float(np.mean(errs))

        err_fdvv = render_error(fdvv_table)
        err_fd = render_error(fd_table)
        ok = err_fd > err_fdvv
        report_line("FDVV-vs-FD rendering order", ok,
                    f"FD {err_fd:.2f} cN > FDVV {err_fdvv:.2f} cN")


class TestRendererDeterminismAndRate:
    def test_one_second_session_is_1000_ticks_bit_identical(self, fixture_plant):
        base = generate_trajectory(4.0, 30.0, 1000.0).displacement_mm
        disp = np.zeros(1000)
        disp[:min(1000, base.size)] = base[:1000]
        from pressem.plant import FingerTrajectory
        traj = FingerTrajectory(1000.0, disp)

        def one_run():
            renderer = Renderer(RendererConfig(table=_mid_table()))
            return run_session(renderer, fixture_plant, traj)

        a, b = one_run(), one_run()
        ok = (len(a.ticks) == 1000 and len(b.ticks) == 1000
              and a.ticks == b.ticks
              and a.trace.force_cN.tobytes() == b.trace.force_cN.tobytes()
              and a.events == b.events)
        report_line("renderer determinism and 1 kHz rate", ok,
                    f"{len(a.ticks)} ticks, identical={a.ticks == b.ticks}")


def _mid_table():
    from pressem.compensate import zero_table
    table = zero_table(GRID, BINS)
    for key in table.duties:
        table.duties[key][:] = 0.25
    return table


class TestVibrationTriggering:
    def _renderer(self):
        vib = VibrationProfile(2.0, "press", 1000.0, (1.0, -0.8, 0.6))
        return Renderer(RendererConfig(table=_mid_table(), vibrations=(vib,)))

    def _script(self, depth):
        v = 40.0 / 1000.0
        n = int(round(depth / v))
        down = np.minimum(np.arange(n + 1) * v, depth)
        return np.concatenate([down, np.full(30, depth), down[::-1], np.zeros(30)])

    def test_crossing_and_not_crossing(self):
        outs = run_script(self._renderer(), self._script(4.0))
        crossing = sum(e == "vibration_started" for o in outs for e in o.events)
        outs = run_script(self._renderer(), self._script(1.9))
        short = sum(e == "vibration_started" for o in outs for e in o.events)
        ok = crossing == 1 and short == 0
        report_line("vibration triggering", ok,
                    f"crossing 2.0mm fired {crossing}, stopping at 1.9mm fired {short}")


class TestBehaviors:
    def test_fast_tap_cooldown_and_ticks(self):
        # fast_tap: 6 Hz finger must register more than 4 presses per second
        renderer = Renderer(RendererConfig(
            table=_mid_table(), behavior=FastTapBehavior(return_threshold_mm=1.5)))
        t = np.arange(1000) / 1000.0
        script = np.clip(1.5 + 1.2 * np.sin(2 * np.pi * 6.0 * t), 0.0, 4.0)
        outs = run_script(renderer, script)
        taps = sum(e == "press_registered" for o in outs for e in o.events)

        # cooldown 500 ms: a second stroke 200 ms later is suppressed
        renderer = Renderer(RendererConfig(
            table=_mid_table(), behavior=CooldownBehavior((500.0,))))
        v = 60.0 / 1000.0
        n = int(round(4.0 / v))
        down = np.minimum(np.arange(n + 1) * v, 4.0)
        one = np.concatenate([down, np.full(20, 4.0), down[::-1]])
        pad = np.zeros(max(0, 200 - one.size))
        outs = run_script(renderer, np.concatenate([one, pad, one, np.zeros(50)]))
        cooled = sum(e == "press_registered" for o in outs for e in o.events)

        # vibration ticks every 100 ms over a 1 s hold: 10 +- 1 bursts
        renderer = Renderer(RendererConfig(
            table=_mid_table(), behavior=VibrationTicksBehavior(period_ms=100.0)))
        script = np.concatenate([np.linspace(0.0, 4.0, 80), np.full(1000, 4.0),
                                 np.linspace(4.0, 0.0, 80)])
        outs = run_script(renderer, script)
        bursts = sum(e == "vibration_started" for o in outs for e in o.events)

        ok = taps > 4 and cooled == 1 and 9 <= bursts <= 11
        report_line("application behaviors", ok,
                    f"fast_tap {taps}/s, cooldown registered {cooled}, "
                    f"ticks {bursts} bursts")


class TestCliByteDeterminism:
    def test_every_subcommand_reproducible(self, tmp_path, ideal_plant):
        model_path = tmp_path / "model.json"
        model_path.write_bytes(serialize_model(build_tactile_model()))
        plant_path = tmp_path / "plant.json"
        plant_path.write_text(json.dumps(plant_to_doc(ideal_plant)))
        capture_cfg = tmp_path / "capture.json"
        capture_cfg.write_text(json.dumps({
            "grid": {"travel_mm": 4.0, "step_mm": 0.01},
            "bins": [{"lo_mm_s": b.lo_mm_s, "hi_mm_s": b.hi_mm_s,
                      "center_mm_s": b.center_mm_s} for b in BINS],
            "filter_window": 1}))
        comp_cfg = tmp_path / "comp.json"
        comp_cfg.write_text(json.dumps({"press_style": "constant",
                                        "smoothing_window": 1}))

        def run_all(dest):
            dest.mkdir()
            traces = dest / "traces"
            traces.mkdir()
            for b in BINS:
                assert main(["synth", str(model_path),
                             "--trajectory", f"4.0:{b.center_mm_s * 2}",
                             "--tick-rate", "4000", "--noise", "1.5",
                             "--seed", "21",
                             "--out", str(traces / f"v{int(b.center_mm_s)}.csv")]) == 0
            assert main(["fit", str(traces), "--config", str(capture_cfg),
                         "--out", str(dest / "fitted.json")]) == 0
            assert main(["compensate", str(model_path), "--plant",
                         str(plant_path), "--config", str(comp_cfg),
                         "--seed", "21",
                         "--out-table", str(dest / "table.json"),
                         "--out-report", str(dest / "report.csv")]) == 0
            assert main(["render", "--table", str(dest / "table.json"),
                         "--model", str(model_path), "--plant", str(plant_path),
                         "--seed", "21", "--trajectory", "4:45",
                         "--out", str(dest / "render.csv"),
                         "--log", str(dest / "session.csv")]) == 0
            assert main(["validate", str(dest / "fitted.json")]) == 0
            assert main(["report", str(dest / "report.csv")]) == 0

        run_all(tmp_path / "a")
        run_all(tmp_path / "b")
        names = ["fitted.json", "table.json", "report.csv", "render.csv",
                 "session.csv"] + [f"traces/v{int(b.center_mm_s)}.csv"
                                   for b in BINS]
        diffs = [n for n in names
                 if (tmp_path / "a" / n).read_bytes()
                 != (tmp_path / "b" / n).read_bytes()]
        ok = not diffs
        report_line("CLI byte-determinism", ok,
                    f"{len(names)} artifacts compared" +
                    (f", differing: {diffs}" if diffs else ""))

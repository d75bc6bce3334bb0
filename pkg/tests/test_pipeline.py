"""Cross-module integration: the full capture -> compensate -> render loop,
including vibration profiles surviving the round trip."""

import numpy as np

from pressem.capture import CaptureConfig, fit_model
from pressem.compensate import (CompensationConfig, compensate,
                                constant_velocity_trajectory)
from pressem.model import VibrationProfile, make_model
from pressem.plant import PlantConfig, generate_trajectory, synth_trace_from_model
from pressem.renderer import Renderer, RendererConfig, run_session

from conftest import BINS, GRID, build_tactile_model


def test_vibration_survives_capture_and_fires_in_render(fixture_plant):
    burst = tuple(float(x) for x in 0.9 * np.sin(0.7 + np.linspace(0, 55, 40)))
    source = build_tactile_model()
    source = make_model(source.name, source.grid, source.bins, source.curves,
                        vibrations=(VibrationProfile(1.4, "press", 1000.0, burst),))

    config = CaptureConfig(grid=GRID, bins=BINS, filter_window=1)
    traces = [synth_trace_from_model(
        source, constant_velocity_trajectory(
            4.0, b.center_mm_s, b.center_mm_s / GRID.step_mm,
            dwell_ticks=0, tail_ticks=0), 0.0, 0)
        for b in BINS]
    captured = fit_model(traces, config, name="captured")
    press_vibs = [v for v in captured.vibrations if v.direction == "press"]
    assert press_vibs
    assert abs(press_vibs[0].trigger_mm - 1.4) <= 3 * GRID.step_mm

    table, report = compensate(fixture_plant, captured, CompensationConfig())
    assert report.converged

    renderer = Renderer(RendererConfig(table=table,
                                       vibrations=captured.vibrations))
    result = run_session(renderer, fixture_plant,
                         generate_trajectory(4.0, 30.0, 1000.0))
    fired = [tick for tick, event in result.events
             if event == "vibration_started"]
    assert len(fired) >= 1
    # the burst plays into the session's vibration column
    assert np.abs(result.trace.vibration).max() > 0.1
    # and it fired near the captured trigger displacement
    onset_disp = result.trace.displacement_mm[fired[0]]
    assert abs(onset_disp - 1.4) <= 0.15


def test_render_error_stays_small_on_the_compensated_plant(fixture_plant):
    reference = build_tactile_model()
    table, _ = compensate(fixture_plant, reference, CompensationConfig())
    renderer = Renderer(RendererConfig(table=table))
    result = run_session(renderer, fixture_plant,
                         generate_trajectory(4.0, 25.0, 1000.0))
    from pressem.compensate import error_profile
    errors = []
    for direction in ("press", "release"):
        err = error_profile(reference, result.trace, GRID, direction)
        finite = err[np.isfinite(err)]
        errors.append(float(np.abs(finite).mean()))
    # rendering through the real-time loop stays within a few cN of the
    # reference on the plant the table was tuned for
    assert max(errors) < 5.0

"""Press'Em workbench: FDVV button-tactility models end to end.

Capture traces into velocity-binned force-displacement models, edit them,
derive actuation tables by iterative compensation against a simulated plant,
and render them through a software twin of the 1 kHz controller loop.
"""

from .errors import DomainError, FitError, ParseError, PressemError
from .model import (DIRECTIONS, DisplacementGrid, FDCurve, FDVVModel,
                    VelocityBin, VibrationProfile, apply_edit,
                    edit_scale_force, edit_set_travel,
                    edit_set_vibration_trigger, edit_shift_curve, lookup_force,
                    make_model, parse_model, serialize_model, validate_model)
from .capture import (CaptureConfig, PressSegment, PressTrace,
                      estimate_velocity, extract_vibration, fit_model,
                      moving_average, read_trace_csv, segment_presses,
                      write_trace_csv)
from .plant import (FingerTrajectory, PlantConfig, actuator_response,
                    generate_trajectory, simulate_press, synth_trace_from_model)
from .compensate import (ActuationTable, CompensationConfig, ConvergenceReport,
                         compensate, contraction_factor, error_profile,
                         parse_table, quantize_table, serialize_table,
                         zero_table)
from .renderer import (CooldownBehavior, FastTapBehavior, Renderer,
                       RendererConfig, StandardBehavior, TickOutput,
                       VibrationTicksBehavior, run_script, run_session)

__version__ = "0.1.0"

"""Iterative compensation: derive actuation tables that cancel the plant.

For each (direction, velocity bin) independently: press the simulated plant
with the current duty schedule, measure reference-vs-sensed force error at
each displacement grid point, nudge the duties by alpha * error / nominal_gain,
and repeat until the mean absolute error drops under the threshold.

One iteration = one duty update followed by a measurement press, so the
recorded error sequence is the error *after* k updates; an ideal linear plant
with alpha = 1 and an exact gain estimate therefore converges in exactly one
iteration. Each tuning press actuates only the phase being tuned (the other
phase's duties are held at zero), which keeps every (direction, bin) task
independent of the others.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError, ParseError
from .model import DIRECTIONS, DisplacementGrid, FDVVModel, VelocityBin
from .plant import FingerTrajectory, PlantConfig, generate_trajectory, simulate_press

TABLE_SCHEMA_VERSION = 1


@dataclass(frozen=True, eq=False)
class ActuationTable:
    """PWM duty per (direction, bin, displacement grid point), in [0, 1]."""

    grid: DisplacementGrid
    bins: tuple[VelocityBin, ...]
    duties: dict[tuple[str, int], np.ndarray]
    quantization_bits: int = 12

    def __post_init__(self):
        full_scale = (1 << self.quantization_bits) - 1
        if full_scale < 1:
            raise DomainError("quantization_bits must be >= 1")
        normalized = {}
        for key, column in self.duties.items():
            column = np.asarray(column, dtype=np.float64)
            if column.shape[0] != self.grid.n_points:
                raise DomainError(f"duty column {key} length != grid points")
            if column.min() < 0.0 or column.max() > 1.0:
                raise DomainError(f"duty column {key} outside [0, 1]")
            normalized[key] = column
        object.__setattr__(self, "duties", normalized)
        object.__setattr__(self, "bins", tuple(self.bins))

    def duty_stack(self, direction: str) -> np.ndarray:
        return np.stack([self.duties[(direction, i)] for i in range(len(self.bins))])

    def bin_centers(self) -> np.ndarray:
        return np.asarray([b.center_mm_s for b in self.bins], dtype=np.float64)

    def single_bin_view(self, direction: str, bin_index: int) -> "ActuationTable":
        """Table that always plays one column for its own phase and zero for
        the other; used to pin a bin during tuning presses."""
        column = self.duties[(direction, bin_index)]
        zero = np.zeros_like(column)
        duties = {("press", 0): column if direction == "press" else zero,
                  ("release", 0): column if direction == "release" else zero}
        return ActuationTable(self.grid, (self.bins[bin_index],), duties,
                              self.quantization_bits)


def quantize_table(table: ActuationTable) -> ActuationTable:
    """Snap every duty to k / (2^bits - 1)."""
    full_scale = (1 << table.quantization_bits) - 1
    duties = {key: np.rint(col * full_scale) / full_scale
              for key, col in table.duties.items()}
    return ActuationTable(table.grid, table.bins, duties, table.quantization_bits)


def zero_table(grid: DisplacementGrid, bins, quantization_bits: int = 12) -> ActuationTable:
    bins = tuple(bins)
    duties = {(d, i): np.zeros(grid.n_points)
              for d in DIRECTIONS for i in range(len(bins))}
    return ActuationTable(grid, bins, duties, quantization_bits)


@dataclass(frozen=True)
class CompensationConfig:
    alpha: float = 0.8  # learning rate
    nominal_gain_cN: float = 300.0  # controller's estimate of plant gain
    max_iterations: int = 10
    epsilon_cN: float = 1.0  # convergence threshold on mean |error|
    init_mode: str = "zero"  # or "random": a random constant duty level
    init_seed: int = 0
    smoothing_window: int = 5  # moving-average over the duty column; 1 = off
    quantization_bits: int = 12
    tick_rate_hz: float = 1000.0
    press_style: str = "minimum_jerk"  # or "constant" (probing-machine ramp)

    def __post_init__(self):
        if self.alpha < 0:
            raise DomainError("alpha must be >= 0")
        if self.nominal_gain_cN <= 0:
            raise DomainError("nominal_gain_cN must be > 0")
        if self.max_iterations < 1:
            raise DomainError("max_iterations must be >= 1")
        if self.epsilon_cN <= 0:
            raise DomainError("epsilon_cN must be > 0")
        if self.init_mode not in ("zero", "random"):
            raise DomainError("init_mode must be 'zero' or 'random'")
        if self.smoothing_window < 1 or self.smoothing_window % 2 == 0:
            raise DomainError("smoothing_window must be odd and >= 1")
        if self.press_style not in ("minimum_jerk", "constant"):
            raise DomainError("press_style must be 'minimum_jerk' or 'constant'")


@dataclass(frozen=True)
class BinReport:
    direction: str
    bin_index: int
    initial_mean_abs_cN: float
    initial_max_abs_cN: float
    mean_abs_cN: tuple[float, ...]  # one entry per iteration
    max_abs_cN: tuple[float, ...]
    converged: bool
    iterations_used: int
    saturated_points: int


@dataclass(frozen=True)
class ConvergenceReport:
    entries: tuple[BinReport, ...]

    @property
    def converged(self) -> bool:
        return all(e.converged for e in self.entries)

    def entry(self, direction: str, bin_index: int) -> BinReport:
        for e in self.entries:
            if e.direction == direction and e.bin_index == bin_index:
                return e
        raise KeyError((direction, bin_index))


def contraction_factor(plant_gain: float, nominal_gain: float, alpha: float) -> float:
    """|1 - alpha * g / g_hat|: the per-iteration error contraction on a
    static linear plant. Below 1 the loop converges; at 1 it stalls."""
    if plant_gain <= 0 or nominal_gain <= 0:
        raise DomainError("gains must be > 0")
    return abs(1.0 - alpha * plant_gain / nominal_gain)


def constant_velocity_trajectory(travel_mm: float, velocity_mm_s: float,
                                 tick_rate_hz: float, dwell_ticks: int = 3,
                                 tail_ticks: int = 3,
                                 offset_steps: float = 0.0) -> FingerTrajectory:
    """Probing-machine stroke: ramp down at constant speed, dwell, ramp up.

    With velocity = k * step * tick_rate the descent samples land exactly on
    grid points (offset_steps shifts them by a fraction of a step), which the
    oracle tests rely on.
    """
    if travel_mm <= 0 or velocity_mm_s <= 0 or tick_rate_hz <= 0:
        raise DomainError("travel, velocity and tick rate must be > 0")
    delta = velocity_mm_s / tick_rate_hz
    n_down = int(math.ceil(travel_mm / delta - 1e-9))
    down = np.minimum((np.arange(n_down + 1) + offset_steps) * delta, travel_mm)
    up = down[::-1] if dwell_ticks else down[::-1][1:]  # single apex sample when not dwelling
    parts = [down, np.full(dwell_ticks, travel_mm), up,
             np.full(tail_ticks, down[0])]
    return FingerTrajectory(tick_rate_hz, np.concatenate(parts))


def _press_trajectory(travel_mm: float, center_mm_s: float,
                      config: CompensationConfig) -> FingerTrajectory:
    if config.press_style == "constant":
        return constant_velocity_trajectory(travel_mm, center_mm_s,
                                            config.tick_rate_hz)
    return generate_trajectory(travel_mm, center_mm_s, config.tick_rate_hz)


def _phase_error(reference_curve, trace, grid, direction):
    """reference - sensed on the grid for one phase of a press trace; NaN
    where the phase did not cover the grid point."""
    vel = np.gradient(trace.displacement_mm) * trace.sample_rate_hz
    mask = vel > 0 if direction == "press" else vel < 0
    if not mask.any():
        raise DomainError(f"trace has no {direction} phase")
    d = trace.displacement_mm[mask]
    f = trace.force_cN[mask]
    order = np.argsort(d, kind="stable")
    sensed = kernels.resample_to_grid(d[order], f[order], grid.step_mm,
                                      grid.n_points, grid.step_mm)
    return reference_curve - sensed


def error_profile(reference: FDVVModel, trace, grid: DisplacementGrid,
                  direction: str) -> np.ndarray:
    """Per-grid-point force error (reference - sensed) for one direction.

    The reference is looked up at the trace's own speed at each displacement;
    grid points the trace does not cover are NaN and excluded from statistics.
    """
    if direction not in DIRECTIONS:
        raise DomainError(f"unknown direction {direction!r}")
    vel = np.gradient(trace.displacement_mm) * trace.sample_rate_hz
    mask = vel > 0 if direction == "press" else vel < 0
    if not mask.any():
        raise DomainError(f"trace has no {direction} segment")
    d = trace.displacement_mm[mask]
    order = np.argsort(d, kind="stable")
    d = d[order]
    sensed = kernels.resample_to_grid(d, trace.force_cN[mask][order],
                                      grid.step_mm, grid.n_points, grid.step_mm)
    speeds = kernels.resample_to_grid(d, np.abs(vel[mask][order]),
                                      grid.step_mm, grid.n_points, grid.step_mm)
    covered = np.isfinite(sensed) & np.isfinite(speeds)
    out = np.full(grid.n_points, np.nan)
    if covered.any():
        points = grid.points()[covered]
        ref = kernels.table_lookup_many(
            reference.curve_stack(direction), reference.bin_centers(),
            grid.step_mm, grid.travel_mm, points, speeds[covered])
        out[covered] = ref - sensed[covered]
    return out


def compensate(plant: PlantConfig, reference: FDVVModel,
               config: CompensationConfig, progress_cb=None
               ) -> tuple[ActuationTable, ConvergenceReport]:
    """Tune duty tables until the sensed force tracks the reference model.

    Returns the quantized table and the per-(direction, bin) convergence
    report. Non-convergence (including saturation: the reference asking for
    more force than the actuator can deliver) is a reported outcome, not an
    exception.

    progress_cb, when given, receives a dict per iteration:
    {snapshot, direction, bin, iteration, mean_err_cN, max_err_cN}.
    """
    grid = reference.grid
    bins = reference.bins
    points = grid.points()
    duties: dict[tuple[str, int], np.ndarray] = {}
    entries = []
    snapshot = 0
    for d_idx, direction in enumerate(DIRECTIONS):
        stack = reference.curve_stack(direction)
        centers = reference.bin_centers()
        for b_idx, vbin in enumerate(bins):
            trajectory = _press_trajectory(grid.travel_mm, vbin.center_mm_s, config)
            ref_curve = kernels.table_lookup_many(
                stack, centers, grid.step_mm, grid.travel_mm, points,
                np.full(grid.n_points, vbin.center_mm_s))
            if config.init_mode == "random":
                level_rng = np.random.default_rng(
                    np.random.SeedSequence(config.init_seed, spawn_key=(d_idx, b_idx)))
                duty = np.full(grid.n_points, level_rng.uniform(0.0, 0.5))
            else:
                duty = np.zeros(grid.n_points)

            def measure(current, iteration):
                view = ActuationTable(
                    grid, (vbin,), {("press", 0): current if direction == "press"
                                    else np.zeros_like(current),
                                    ("release", 0): current if direction == "release"
                                    else np.zeros_like(current)},
                    config.quantization_bits)
                seed = np.random.SeedSequence(
                    plant.rng_seed, spawn_key=(d_idx, b_idx, iteration))
                trace = simulate_press(plant, trajectory, view, seed=seed)
                return _phase_error(ref_curve, trace, grid, direction)

            err = measure(duty, 0)
            initial_mean = float(np.nanmean(np.abs(err)))
            initial_max = float(np.nanmax(np.abs(err)))
            means: list[float] = []
            maxs: list[float] = []
            converged = False
            for k in range(1, config.max_iterations + 1):
                delta = np.where(np.isfinite(err), err, 0.0)
                duty = np.clip(duty + config.alpha * delta / config.nominal_gain_cN,
                               0.0, 1.0)
                if config.smoothing_window > 1:
                    duty = np.clip(kernels.moving_average(duty, config.smoothing_window),
                                   0.0, 1.0)
                err = measure(duty, k)
                mean_abs = float(np.nanmean(np.abs(err)))
                max_abs = float(np.nanmax(np.abs(err)))
                means.append(mean_abs)
                maxs.append(max_abs)
                if progress_cb is not None:
                    snapshot += 1
                    progress_cb({"snapshot": snapshot, "direction": direction,
                                 "bin": b_idx, "iteration": k,
                                 "mean_err_cN": mean_abs, "max_err_cN": max_abs})
                if mean_abs <= config.epsilon_cN:
                    converged = True
                    break
            residual = np.where(np.isfinite(err), err, 0.0)
            saturated = int(np.count_nonzero(
                (duty >= 1.0 - 1e-9) & (residual > config.epsilon_cN)))
            duties[(direction, b_idx)] = duty
            entries.append(BinReport(
                direction=direction, bin_index=b_idx,
                initial_mean_abs_cN=initial_mean, initial_max_abs_cN=initial_max,
                mean_abs_cN=tuple(means), max_abs_cN=tuple(maxs),
                converged=converged, iterations_used=len(means),
                saturated_points=saturated))
    table = quantize_table(ActuationTable(grid, bins, duties,
                                          config.quantization_bits))
    return table, ConvergenceReport(tuple(entries))


def compensation_config_from_doc(doc: dict) -> CompensationConfig:
    if not isinstance(doc, dict):
        raise ParseError("compensation config must be a JSON object", "$")
    known = set(CompensationConfig.__dataclass_fields__)
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ParseError(f"unknown compensation config fields: {unknown}", "$")
    try:
        return CompensationConfig(**doc)
    except (TypeError, DomainError) as exc:
        raise ParseError(f"bad compensation config: {exc}", "$") from exc


# --- actuation table document ------------------------------------------------
# {schema_version, grid: {travel_mm, step_mm}, bins[], quantization_bits,
#  duties: [{direction, bin, values: [int]}]}  with values = duty * (2^bits - 1)


def table_to_doc(table: ActuationTable) -> dict:
    table = quantize_table(table)
    full_scale = (1 << table.quantization_bits) - 1
    return {
        "schema_version": TABLE_SCHEMA_VERSION,
        "grid": {"travel_mm": table.grid.travel_mm, "step_mm": table.grid.step_mm},
        "bins": [{"lo_mm_s": b.lo_mm_s, "hi_mm_s": b.hi_mm_s,
                  "center_mm_s": b.center_mm_s} for b in table.bins],
        "quantization_bits": table.quantization_bits,
        "duties": [{"direction": d, "bin": i,
                    "values": [int(round(x * full_scale)) for x in table.duties[(d, i)]]}
                   for (d, i) in sorted(table.duties)],
    }


def serialize_table(table: ActuationTable) -> bytes:
    return (json.dumps(table_to_doc(table), sort_keys=True,
                       separators=(",", ":")) + "\n").encode()


def parse_table(data: bytes | str) -> ActuationTable:
    if isinstance(data, bytes):
        data = data.decode("utf-8", errors="replace")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc.msg}",
                         f"line {exc.lineno} column {exc.colno}") from exc
    if not isinstance(doc, dict):
        raise ParseError("table document must be a JSON object", "$")
    if doc.get("schema_version") != TABLE_SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {doc.get('schema_version')}",
                         "schema_version")
    try:
        grid = DisplacementGrid(float(doc["grid"]["travel_mm"]),
                                float(doc["grid"]["step_mm"]))
        bins = tuple(VelocityBin(float(b["lo_mm_s"]), float(b["hi_mm_s"]),
                                 float(b["center_mm_s"])) for b in doc["bins"])
        bits = int(doc["quantization_bits"])
        full_scale = (1 << bits) - 1
        duties = {}
        for entry in doc["duties"]:
            key = (entry["direction"], int(entry["bin"]))
            values = np.asarray(entry["values"], dtype=np.float64)
            if values.size and (values.min() < 0 or values.max() > full_scale):
                raise ParseError(f"duty integers outside [0, {full_scale}]",
                                 f"duties {key}")
            duties[key] = values / full_scale
        table = ActuationTable(grid, bins, duties, bits)
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError, DomainError) as exc:
        raise ParseError(f"bad table document: {exc}", "$") from exc
    missing = [(d, i) for d in DIRECTIONS for i in range(len(bins))
               if (d, i) not in table.duties]
    if missing:
        raise ParseError(f"missing duty columns: {missing}", "duties")
    return table


# --- convergence report CSV ---------------------------------------------------
# iteration 0 rows carry the pre-update baseline error.


def report_to_csv(report: ConvergenceReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["iteration", "direction", "bin", "mean_err_cN", "max_err_cN"])
    for e in report.entries:
        writer.writerow([0, e.direction, e.bin_index,
                         repr(e.initial_mean_abs_cN), repr(e.initial_max_abs_cN)])
        for k, (mean_abs, max_abs) in enumerate(zip(e.mean_abs_cN, e.max_abs_cN), 1):
            writer.writerow([k, e.direction, e.bin_index, repr(mean_abs), repr(max_abs)])
    return buf.getvalue()


def report_rows_from_csv(text: str) -> list[dict]:
    reader = csv.DictReader(io.StringIO(text))
    expected = ["iteration", "direction", "bin", "mean_err_cN", "max_err_cN"]
    if reader.fieldnames != expected:
        raise ParseError(f"expected header {','.join(expected)}", "line 1")
    rows = []
    for lineno, row in enumerate(reader, 2):
        try:
            rows.append({"iteration": int(row["iteration"]),
                         "direction": row["direction"], "bin": int(row["bin"]),
                         "mean_err_cN": float(row["mean_err_cN"]),
                         "max_err_cN": float(row["max_err_cN"])})
        except (TypeError, ValueError) as exc:
            raise ParseError("malformed report row", f"line {lineno}") from exc
    return rows


def report_summary(report: ConvergenceReport) -> dict:
    """Terminal-state digest used by the CLI and the service artifacts."""
    return {
        "converged": report.converged,
        "bins": [{
            "direction": e.direction, "bin": e.bin_index,
            "iterations_used": e.iterations_used, "converged": e.converged,
            "initial_mean_err_cN": e.initial_mean_abs_cN,
            "final_mean_err_cN": e.mean_abs_cN[-1] if e.mean_abs_cN else e.initial_mean_abs_cN,
            "final_max_err_cN": e.max_abs_cN[-1] if e.max_abs_cN else e.initial_max_abs_cN,
            "saturated_points": e.saturated_points,
        } for e in report.entries],
    }

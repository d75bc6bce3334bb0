"""FDVV button-tactility models.

An FDVV model stores one force-displacement curve per (direction, velocity
bin) over a uniform displacement grid, plus optional vibration profiles and
the button's travel range. A single-bin model with no vibrations is exactly a
classical FD model.

Units are fixed project-wide: displacement mm, velocity mm/s, force cN,
time ms. All types are immutable values; operations return new models.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .errors import DomainError, ParseError

SCHEMA_VERSION = 1
DIRECTIONS = ("press", "release")

# Relative tolerance for travel/step divisibility.
GRID_RATIO_TOL = 1e-9


@dataclass(frozen=True)
class DisplacementGrid:
    """Uniform displacement grid: points at 0, step, ..., travel (inclusive)."""

    travel_mm: float
    step_mm: float = 0.01

    def __post_init__(self):
        if self.travel_mm <= 0 or self.step_mm <= 0:
            raise DomainError("grid travel_mm and step_mm must be > 0")
        ratio = self.travel_mm / self.step_mm
        if abs(ratio - round(ratio)) > GRID_RATIO_TOL:
            raise DomainError(
                f"travel_mm {self.travel_mm} is not a whole number of steps of {self.step_mm}")

    @property
    def n_points(self) -> int:
        return int(round(self.travel_mm / self.step_mm)) + 1

    def points(self) -> np.ndarray:
        return np.arange(self.n_points) * self.step_mm


@dataclass(frozen=True)
class VelocityBin:
    """Half-open velocity range [lo, hi) mm/s with a representative center."""

    lo_mm_s: float
    hi_mm_s: float
    center_mm_s: float

    def contains(self, speed_mm_s: float) -> bool:
        return self.lo_mm_s <= speed_mm_s < self.hi_mm_s


@dataclass(frozen=True)
class FDCurve:
    direction: str
    force_cN: tuple[float, ...]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.force_cN, dtype=np.float64)


@dataclass(frozen=True)
class VibrationProfile:
    """Normalized waveform played back starting at trigger_mm in `direction`."""

    trigger_mm: float
    direction: str
    sample_rate_hz: float
    samples: tuple[float, ...]


@dataclass(frozen=True)
class FDVVModel:
    name: str
    grid: DisplacementGrid
    bins: tuple[VelocityBin, ...]
    curves: dict[tuple[str, int], FDCurve]
    vibrations: tuple[VibrationProfile, ...] = ()
    schema_version: int = SCHEMA_VERSION

    def curve(self, direction: str, bin_index: int) -> FDCurve:
        return self.curves[(direction, bin_index)]

    def curve_stack(self, direction: str) -> np.ndarray:
        """Curves of one direction as a (n_bins, n_points) array, bin order."""
        return np.stack([self.curves[(direction, i)].as_array()
                         for i in range(len(self.bins))])

    def bin_centers(self) -> np.ndarray:
        return np.asarray([b.center_mm_s for b in self.bins], dtype=np.float64)


def make_model(name, grid, bins, curves, vibrations=(), schema_version=SCHEMA_VERSION):
    """Construct a model and fail fast with the violation list if invalid."""
    model = FDVVModel(name=name, grid=grid, bins=tuple(bins),
                      curves=dict(curves), vibrations=tuple(vibrations),
                      schema_version=schema_version)
    violations = validate_model(model)
    if violations:
        raise DomainError("invalid model: " + "; ".join(violations))
    return model


def lookup_force(model: FDVVModel, displacement_mm: float, velocity_mm_s: float,
                 direction: str) -> float:
    """Force in cN at a displacement and press speed.

    Bilinear: linear in displacement between adjacent grid points, linear in
    velocity between the two nearest bin centers; speeds outside the center
    range clamp to the extreme bin's curve.
    """
    if direction not in DIRECTIONS:
        raise DomainError(f"unknown direction {direction!r}")
    travel = model.grid.travel_mm
    if not (0.0 <= displacement_mm <= travel):
        raise DomainError(
            f"displacement {displacement_mm} mm outside [0, {travel}]")
    if velocity_mm_s < 0:
        raise DomainError("velocity_mm_s is a magnitude and must be >= 0")
    return float(kernels.table_lookup(
        model.curve_stack(direction), model.bin_centers(),
        model.grid.step_mm, travel, displacement_mm, velocity_mm_s))


def _check_finite_range(values, lo, hi, label, violations):
    arr = np.asarray(values, dtype=np.float64)
    if arr.size and not np.isfinite(arr).all():
        violations.append(f"{label}: contains non-finite values")
        return
    if arr.size and (arr.min() < lo or arr.max() > hi):
        violations.append(f"{label}: values outside [{lo}, {hi}]")


def validate_model(model: FDVVModel) -> list[str]:
    """Check every type invariant; returns one message per violation.

    Violations are data, not faults: an empty list means the model is valid.
    """
    v: list[str] = []
    if model.schema_version != SCHEMA_VERSION:
        v.append(f"schema_version: {model.schema_version} unsupported "
                 f"(expected {SCHEMA_VERSION})")
    grid = model.grid
    n_points = grid.n_points

    if not model.bins:
        v.append("bins: at least one velocity bin required")
    prev_hi = None
    for i, b in enumerate(model.bins):
        if not (0 <= b.lo_mm_s < b.hi_mm_s):
            v.append(f"bins[{i}]: requires 0 <= lo < hi")
        if not (b.lo_mm_s <= b.center_mm_s <= b.hi_mm_s):
            v.append(f"bins[{i}]: center outside [lo, hi]")
        if prev_hi is not None and b.lo_mm_s < prev_hi:
            v.append(f"bins[{i}]: overlaps or is out of order with bins[{i - 1}]")
        prev_hi = b.hi_mm_s

    for direction in DIRECTIONS:
        for i in range(len(model.bins)):
            if (direction, i) not in model.curves:
                v.append(f"curves[{direction},{i}]: missing")
    for (direction, i), curve in sorted(model.curves.items()):
        label = f"curves[{direction},{i}]"
        if direction not in DIRECTIONS:
            v.append(f"{label}: unknown direction")
            continue
        if not (0 <= i < len(model.bins)):
            v.append(f"{label}: bin index out of range")
            continue
        if curve.direction != direction:
            v.append(f"{label}: curve direction field {curve.direction!r} "
                     "does not match its key")
        if len(curve.force_cN) != n_points:
            v.append(f"{label}: length {len(curve.force_cN)} != grid point "
                     f"count {n_points}")
        else:
            _check_finite_range(curve.force_cN, 0.0, math.inf, label, v)

    for i, vib in enumerate(model.vibrations):
        label = f"vibrations[{i}]"
        if vib.direction not in DIRECTIONS:
            v.append(f"{label}: unknown direction")
        if not (0 <= vib.trigger_mm <= grid.travel_mm):
            v.append(f"{label}: trigger_mm outside [0, travel]")
        if vib.sample_rate_hz <= 0:
            v.append(f"{label}: sample_rate_hz must be > 0")
        _check_finite_range(vib.samples, -1.0, 1.0, f"{label}.samples", v)
    return v


def _rebuild(model: FDVVModel, **changes) -> FDVVModel:
    out = replace(model, **changes)
    violations = validate_model(out)
    if violations:
        raise DomainError("edit produced an invalid model: " + "; ".join(violations))
    return out


def edit_scale_force(model: FDVVModel, factor: float) -> FDVVModel:
    """Scale every force sample by `factor` (> 0)."""
    if not (factor > 0):
        raise DomainError("scale factor must be > 0")
    curves = {k: FDCurve(c.direction, tuple(f * factor for f in c.force_cN))
              for k, c in model.curves.items()}
    return _rebuild(model, curves=curves)


def edit_shift_curve(model: FDVVModel, direction: str, bin_index: int,
                     delta_cN: float) -> FDVVModel:
    """Add delta_cN to one curve, clamping at 0."""
    key = (direction, bin_index)
    if key not in model.curves:
        raise DomainError(f"no curve for ({direction}, {bin_index})")
    curves = dict(model.curves)
    old = curves[key]
    curves[key] = FDCurve(old.direction,
                          tuple(max(0.0, f + delta_cN) for f in old.force_cN))
    return _rebuild(model, curves=curves)


def edit_set_travel(model: FDVVModel, new_travel_mm: float) -> FDVVModel:
    """Change the travel range, resampling every curve onto the new grid.

    The grid step is kept, so new_travel_mm must be a whole number of steps.
    Extending beyond the old travel holds each curve's terminal force;
    vibration triggers are clamped into the new travel.
    """
    try:
        new_grid = DisplacementGrid(new_travel_mm, model.grid.step_mm)
    except DomainError as exc:
        raise DomainError(f"cannot set travel to {new_travel_mm} mm: {exc}") from exc
    old_points = model.grid.points()
    new_points = new_grid.points()
    curves = {}
    for key, c in model.curves.items():
        resampled = np.interp(new_points, old_points, c.as_array())
        curves[key] = FDCurve(c.direction, tuple(float(f) for f in resampled))
    vibrations = tuple(
        replace(vib, trigger_mm=min(max(vib.trigger_mm, 0.0), new_travel_mm))
        for vib in model.vibrations)
    return _rebuild(model, grid=new_grid, curves=curves, vibrations=vibrations)


def edit_set_curve_point(model: FDVVModel, direction: str, bin_index: int,
                         index: int, force_cN: float,
                         smooth_radius: int = 0) -> FDVVModel:
    """Set one curve sample, blending neighbors within smooth_radius.

    This is the op the editor UI emits for control-point drags: the moved
    point takes force_cN exactly, points at distance d get a linearly fading
    share of the delta, and everything clamps at 0.
    """
    key = (direction, bin_index)
    if key not in model.curves:
        raise DomainError(f"no curve for ({direction}, {bin_index})")
    n = model.grid.n_points
    if not (0 <= index < n):
        raise DomainError(f"grid index {index} outside [0, {n})")
    if force_cN < 0:
        raise DomainError("force_cN must be >= 0")
    if smooth_radius < 0 or int(smooth_radius) != smooth_radius:
        raise DomainError("smooth_radius must be an integer >= 0")
    values = list(model.curves[key].force_cN)
    delta = force_cN - values[index]
    for k in range(max(0, index - smooth_radius),
                   min(n, index + smooth_radius + 1)):
        weight = 1.0 - abs(k - index) / (smooth_radius + 1.0)
        values[k] = max(0.0, values[k] + delta * weight)
    values[index] = force_cN
    curves = dict(model.curves)
    curves[key] = FDCurve(model.curves[key].direction, tuple(values))
    return _rebuild(model, curves=curves)


def edit_set_vibration_trigger(model: FDVVModel, index: int,
                               trigger_mm: float) -> FDVVModel:
    if not (0 <= index < len(model.vibrations)):
        raise DomainError(f"no vibration profile at index {index}")
    if not (0 <= trigger_mm <= model.grid.travel_mm):
        raise DomainError(
            f"trigger {trigger_mm} mm outside [0, {model.grid.travel_mm}]")
    vibrations = list(model.vibrations)
    vibrations[index] = replace(vibrations[index], trigger_mm=trigger_mm)
    return _rebuild(model, vibrations=tuple(vibrations))


EDIT_OPS = {
    "scale_force": (edit_scale_force, ("factor",), ()),
    "shift_curve": (edit_shift_curve, ("direction", "bin", "delta_cN"), ()),
    "set_travel": (edit_set_travel, ("travel_mm",), ()),
    "set_vibration_trigger": (edit_set_vibration_trigger,
                              ("index", "trigger_mm"), ()),
    "set_curve_point": (edit_set_curve_point,
                        ("direction", "bin", "index", "force_cN"),
                        ("smooth_radius",)),
}


def apply_edit(model: FDVVModel, op: str, params: dict) -> FDVVModel:
    """Apply a named edit operation; the service and UI speak this vocabulary."""
    if op not in EDIT_OPS:
        raise DomainError(f"unknown edit op {op!r}; known: {sorted(EDIT_OPS)}")
    fn, required, optional = EDIT_OPS[op]
    missing = [p for p in required if p not in params]
    if missing:
        raise DomainError(f"edit {op!r} missing params: {missing}")
    extra = [p for p in params if p not in required + optional]
    if extra:
        raise DomainError(f"edit {op!r} got unknown params: {extra}")
    args = [params[p] for p in required]
    kwargs = {p: params[p] for p in optional if p in params}
    return fn(model, *args, **kwargs)


# --- document format -------------------------------------------------------
#
# Top-level fields are a stable contract shared with the HTTP service and the
# editor UI (see docs/api.md):
#   {schema_version, name, travel_mm, step_mm, bins[], curves[], vibrations[]}
# bins[]:       {lo_mm_s, hi_mm_s, center_mm_s}
# curves[]:     {direction, bin, force_cN: [..]}   (one per direction x bin)
# vibrations[]: {trigger_mm, direction, sample_rate_hz, samples: [..]}


def model_to_doc(model: FDVVModel) -> dict:
    return {
        "schema_version": model.schema_version,
        "name": model.name,
        "travel_mm": model.grid.travel_mm,
        "step_mm": model.grid.step_mm,
        "bins": [{"lo_mm_s": b.lo_mm_s, "hi_mm_s": b.hi_mm_s,
                  "center_mm_s": b.center_mm_s} for b in model.bins],
        "curves": [{"direction": d, "bin": i,
                    "force_cN": list(model.curves[(d, i)].force_cN)}
                   for (d, i) in sorted(model.curves)],
        "vibrations": [{"trigger_mm": vib.trigger_mm, "direction": vib.direction,
                        "sample_rate_hz": vib.sample_rate_hz,
                        "samples": list(vib.samples)}
                       for vib in model.vibrations],
    }


def serialize_model(model: FDVVModel) -> bytes:
    """Canonical JSON bytes; serialize -> parse is the identity."""
    return (json.dumps(model_to_doc(model), sort_keys=True,
                       separators=(",", ":")) + "\n").encode()


def _want(doc: dict, key: str, types, where: str):
    if key not in doc:
        raise ParseError(f"missing field {key!r}", where)
    value = doc[key]
    if not isinstance(value, types):
        raise ParseError(f"field {key!r} has wrong type", where)
    if isinstance(value, bool):  # bool is an int subclass; never wanted here
        raise ParseError(f"field {key!r} has wrong type", where)
    return value


def model_from_doc(doc: dict) -> FDVVModel:
    if not isinstance(doc, dict):
        raise ParseError("model document must be a JSON object", "$")
    version = _want(doc, "schema_version", int, "$")
    if version != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {version} "
                         f"(supported: {SCHEMA_VERSION})", "schema_version")
    name = _want(doc, "name", str, "$")
    travel = _want(doc, "travel_mm", (int, float), "$")
    step = _want(doc, "step_mm", (int, float), "$")
    try:
        grid = DisplacementGrid(float(travel), float(step))
    except DomainError as exc:
        raise ParseError(str(exc), "travel_mm/step_mm") from exc
    bins = []
    for i, b in enumerate(_want(doc, "bins", list, "$")):
        where = f"bins[{i}]"
        if not isinstance(b, dict):
            raise ParseError("bin must be an object", where)
        bins.append(VelocityBin(float(_want(b, "lo_mm_s", (int, float), where)),
                                float(_want(b, "hi_mm_s", (int, float), where)),
                                float(_want(b, "center_mm_s", (int, float), where))))
    curves = {}
    for i, c in enumerate(_want(doc, "curves", list, "$")):
        where = f"curves[{i}]"
        if not isinstance(c, dict):
            raise ParseError("curve must be an object", where)
        direction = _want(c, "direction", str, where)
        bin_index = _want(c, "bin", int, where)
        force = _want(c, "force_cN", list, where)
        key = (direction, bin_index)
        if key in curves:
            raise ParseError(f"duplicate curve for {key}", where)
        try:
            samples = tuple(float(f) for f in force)
        except (TypeError, ValueError) as exc:
            raise ParseError("force_cN must be numeric", where) from exc
        curves[key] = FDCurve(direction, samples)
    vibrations = []
    for i, vb in enumerate(doc.get("vibrations", [])):
        where = f"vibrations[{i}]"
        if not isinstance(vb, dict):
            raise ParseError("vibration must be an object", where)
        try:
            samples = tuple(float(s) for s in _want(vb, "samples", list, where))
        except (TypeError, ValueError) as exc:
            raise ParseError("samples must be numeric", where) from exc
        vibrations.append(VibrationProfile(
            float(_want(vb, "trigger_mm", (int, float), where)),
            _want(vb, "direction", str, where),
            float(_want(vb, "sample_rate_hz", (int, float), where)),
            samples))
    model = FDVVModel(name=name, grid=grid, bins=tuple(bins), curves=curves,
                      vibrations=tuple(vibrations), schema_version=version)
    violations = validate_model(model)
    if violations:
        error = ParseError("; ".join(violations), "model")
        error.violations = violations
        raise error
    return model


def parse_model(data: bytes | str) -> FDVVModel:
    """Parse and validate a model document; raises ParseError with location."""
    if isinstance(data, bytes):
        data = data.decode("utf-8", errors="replace")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc.msg}",
                         f"line {exc.lineno} column {exc.colno}") from exc
    return model_from_doc(doc)

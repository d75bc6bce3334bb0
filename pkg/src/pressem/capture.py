"""Turning raw press traces into FDVV models.

A capture session yields one or more traces (displacement, fingertip force,
vibration sampled uniformly). The pipeline here filters displacement,
splits the trace into press/release segments by velocity sign, assigns each
segment to a velocity bin by its mean speed, resamples member segments onto
the displacement grid, averages them pointwise, and extracts vibration
profiles at the detected onsets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError, FitError, ParseError
from .model import (DIRECTIONS, DisplacementGrid, FDCurve, FDVVModel,
                    VelocityBin, VibrationProfile, make_model)

TRACE_HEADER = "t_ms,disp_mm,force_cN,vib"


@dataclass(eq=False)
class PressTrace:
    """Uniformly sampled press recording. Columns share one length >= 2."""

    sample_rate_hz: float
    displacement_mm: np.ndarray
    force_cN: np.ndarray
    vibration: np.ndarray
    source: str = ""

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise DomainError("sample_rate_hz must be > 0")
        self.displacement_mm = np.asarray(self.displacement_mm, dtype=np.float64)
        self.force_cN = np.asarray(self.force_cN, dtype=np.float64)
        self.vibration = np.asarray(self.vibration, dtype=np.float64)
        n = self.displacement_mm.shape[0]
        if n < 2:
            raise DomainError("trace needs at least 2 samples")
        if self.force_cN.shape[0] != n or self.vibration.shape[0] != n:
            raise DomainError("trace columns must have equal length")
        for label, col in (("displacement_mm", self.displacement_mm),
                           ("force_cN", self.force_cN),
                           ("vibration", self.vibration)):
            if not np.isfinite(col).all():
                raise DomainError(f"trace column {label} contains non-finite values")

    @property
    def n_samples(self) -> int:
        return self.displacement_mm.shape[0]

    def t_ms(self) -> np.ndarray:
        return np.arange(self.n_samples) * (1000.0 / self.sample_rate_hz)


@dataclass(frozen=True)
class PressSegment:
    """Half-open sample range [start, stop) of one press or release phase."""

    start: int
    stop: int
    phase: str  # press | release
    mean_velocity_mm_s: float  # mean speed (magnitude)
    peak_velocity_mm_s: float


@dataclass(frozen=True)
class CaptureConfig:
    grid: DisplacementGrid
    bins: tuple[VelocityBin, ...]
    filter_window: int = 5
    segment_min_travel_mm: float = 0.5
    segment_velocity_deadband_mm_s: float = 2.0
    vibration_onset_threshold: float = 5.0  # energy ratio over baseline
    vibration_window_ms: float = 40.0
    aggregate: str = "mean"  # or "median"

    def __post_init__(self):
        if self.filter_window < 1 or self.filter_window % 2 == 0:
            raise DomainError("filter_window must be odd and >= 1")
        if self.segment_velocity_deadband_mm_s < 0:
            raise DomainError("segment_velocity_deadband_mm_s must be >= 0")
        if self.aggregate not in ("mean", "median"):
            raise DomainError("aggregate must be 'mean' or 'median'")


def moving_average(signal, window: int) -> np.ndarray:
    """Centered moving average with edge replication; length preserved."""
    signal = np.asarray(signal, dtype=np.float64)
    if window < 1 or window % 2 == 0:
        raise DomainError("moving-average window must be odd and >= 1")
    if window > signal.shape[0]:
        raise DomainError("moving-average window exceeds signal length")
    return kernels.moving_average(signal, window)


def estimate_velocity(displacement_mm, sample_rate_hz: float) -> np.ndarray:
    """Velocity in mm/s: central differences inside, one-sided at the ends."""
    d = np.asarray(displacement_mm, dtype=np.float64)
    if d.shape[0] < 2:
        raise DomainError("need at least 2 samples to estimate velocity")
    return np.gradient(d) * sample_rate_hz


def _preprocess(trace: PressTrace, config: CaptureConfig):
    disp_f = moving_average(trace.displacement_mm, config.filter_window)
    vel = estimate_velocity(disp_f, trace.sample_rate_hz)
    return disp_f, vel


def segment_presses(trace: PressTrace, config: CaptureConfig) -> list[PressSegment]:
    """Split a trace into press/release segments.

    Samples whose speed is inside the deadband count as dwell and belong to
    neither phase; segments moving less than segment_min_travel_mm are
    discarded. An empty result is valid (e.g. a flat trace).
    """
    disp_f, vel = _preprocess(trace, config)
    db = config.segment_velocity_deadband_mm_s
    labels = np.zeros(trace.n_samples, dtype=np.int8)
    labels[vel > db] = 1
    labels[vel < -db] = -1

    segments: list[PressSegment] = []
    k = 0
    n = trace.n_samples
    while k < n:
        if labels[k] == 0:
            k += 1
            continue
        j = k
        while j < n and labels[j] == labels[k]:
            j += 1
        net = abs(disp_f[j - 1] - disp_f[k])
        if net >= config.segment_min_travel_mm:
            speeds = np.abs(vel[k:j])
            segments.append(PressSegment(
                start=k, stop=j,
                phase="press" if labels[k] > 0 else "release",
                mean_velocity_mm_s=float(speeds.mean()),
                peak_velocity_mm_s=float(speeds.max())))
        k = j
    return segments


def _bin_index(bins, speed: float):
    for i, b in enumerate(bins):
        if b.lo_mm_s <= speed < b.hi_mm_s:
            return i
    return None


def _resample_segment(disp_f, force, seg: PressSegment, grid: DisplacementGrid):
    x = disp_f[seg.start:seg.stop]
    y = force[seg.start:seg.stop]
    order = np.argsort(x, kind="stable")
    # extrapolate at most one grid step past the covered span; beyond is NaN
    return kernels.resample_to_grid(x[order], y[order], grid.step_mm,
                                    grid.n_points, grid.step_mm)


def _fill_uncovered(values: np.ndarray) -> np.ndarray:
    """Replace NaN grid points with the nearest covered value."""
    out = values.copy()
    covered = np.nonzero(np.isfinite(out))[0]
    if covered.size == 0:
        return out
    missing = np.nonzero(~np.isfinite(out))[0]
    if missing.size:
        pos = np.searchsorted(covered, missing)
        left = covered[np.clip(pos - 1, 0, covered.size - 1)]
        right = covered[np.clip(pos, 0, covered.size - 1)]
        pick = np.where(np.abs(right - missing) < np.abs(missing - left), right, left)
        out[missing] = out[pick]
    return out


def fit_model(traces, config: CaptureConfig, name: str = "captured") -> FDVVModel:
    """Fit an FDVV model from traces.

    Every configured (direction, bin) must receive at least one segment, or a
    FitError names the gap. Member segments are resampled onto the grid by
    linear interpolation in displacement and aggregated pointwise; forces are
    clamped at 0 so the result always validates.
    """
    traces = list(traces)
    members: dict[tuple[str, int], list[np.ndarray]] = {
        (d, i): [] for d in DIRECTIONS for i in range(len(config.bins))}
    vib_candidates: dict[str, list[tuple[float, VibrationProfile]]] = {
        d: [] for d in DIRECTIONS}
    for trace in traces:
        disp_f, force = _preprocess(trace, config)[0], trace.force_cN
        for seg in segment_presses(trace, config):
            i = _bin_index(config.bins, seg.mean_velocity_mm_s)
            if i is not None:
                members[(seg.phase, i)].append(
                    _resample_segment(disp_f, force, seg, config.grid))
            got = _extract_with_strength(trace, seg, config)
            if got is not None:
                vib_candidates[seg.phase].append(got)

    curves = {}
    for (d, i), rows in members.items():
        if not rows:
            b = config.bins[i]
            raise FitError(
                f"no {d} segments landed in velocity bin {i} "
                f"[{b.lo_mm_s}, {b.hi_mm_s}) mm/s")
        stacked = np.vstack(rows)
        covered = np.isfinite(stacked)
        counts = covered.sum(axis=0)
        if config.aggregate == "median":
            merged = np.full(stacked.shape[1], np.nan)
            any_cov = counts > 0
            if any_cov.any():
                merged[any_cov] = np.nanmedian(stacked[:, any_cov], axis=0)
        else:
            sums = np.where(covered, stacked, 0.0).sum(axis=0)
            merged = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
        merged = np.maximum(_fill_uncovered(merged), 0.0)
        curves[(d, i)] = FDCurve(d, tuple(float(f) for f in merged))

    vibrations = []
    for d in DIRECTIONS:
        if vib_candidates[d]:
            vibrations.append(max(vib_candidates[d], key=lambda s: s[0])[1])
    return make_model(name=name, grid=config.grid, bins=config.bins,
                      curves=curves, vibrations=vibrations)


def _extract_with_strength(trace, seg, config):
    rate = trace.sample_rate_hz
    vib = trace.vibration[seg.start:seg.stop]
    if vib.shape[0] == 0:
        return None
    # trailing short-window energy (2 ms), so onset lands on the first loud sample
    we = max(1, int(round(0.002 * rate)))
    sq = vib * vib
    csum = np.zeros(sq.shape[0] + 1)
    np.cumsum(sq, out=csum[1:])
    idx = np.arange(sq.shape[0])
    lo = np.maximum(idx - we + 1, 0)
    energy = (csum[idx + 1] - csum[lo]) / (idx - lo + 1)
    baseline = float(np.median(energy))
    gate = max(config.vibration_onset_threshold * baseline, 1e-12)
    hot = np.nonzero(energy > gate)[0]
    if hot.size == 0:
        return None
    onset = int(hot[0])
    n_window = max(1, int(round(config.vibration_window_ms / 1000.0 * rate)))
    start = seg.start + onset
    window = trace.vibration[start:start + n_window]
    peak = float(np.max(np.abs(window)))
    if peak <= 0.0:
        return None
    disp_f = moving_average(trace.displacement_mm, config.filter_window)
    trigger = float(min(max(disp_f[start], 0.0), config.grid.travel_mm))
    profile = VibrationProfile(
        trigger_mm=trigger, direction=seg.phase, sample_rate_hz=rate,
        samples=tuple(float(s) for s in window / peak))
    return peak, profile


def extract_vibration(trace: PressTrace, seg: PressSegment,
                      config: CaptureConfig) -> VibrationProfile | None:
    """Vibration profile for one segment, or None when nothing fires.

    Onset is the first sample whose trailing short-window energy exceeds
    vibration_onset_threshold x the segment's median window energy; the
    profile is the following vibration_window_ms normalized to [-1, 1].
    """
    got = _extract_with_strength(trace, seg, config)
    return None if got is None else got[1]


def capture_config_from_doc(doc: dict) -> CaptureConfig:
    """Build a CaptureConfig from its JSON document.

    Required: grid {travel_mm, step_mm} and bins [{lo_mm_s, hi_mm_s,
    center_mm_s}]; everything else falls back to the defaults.
    """
    if not isinstance(doc, dict):
        raise ParseError("capture config must be a JSON object", "$")
    try:
        grid = DisplacementGrid(float(doc["grid"]["travel_mm"]),
                                float(doc["grid"].get("step_mm", 0.01)))
        bins = tuple(VelocityBin(float(b["lo_mm_s"]), float(b["hi_mm_s"]),
                                 float(b["center_mm_s"])) for b in doc["bins"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad capture config: {exc}", "$") from exc
    kwargs = {}
    for name in ("filter_window", "segment_min_travel_mm",
                 "segment_velocity_deadband_mm_s", "vibration_onset_threshold",
                 "vibration_window_ms", "aggregate"):
        if name in doc:
            kwargs[name] = doc[name]
    unknown = sorted(set(doc) - {"grid", "bins"} - set(kwargs))
    if unknown:
        raise ParseError(f"unknown capture config fields: {unknown}", "$")
    try:
        return CaptureConfig(grid=grid, bins=bins, **kwargs)
    except (TypeError, DomainError) as exc:
        raise ParseError(f"bad capture config: {exc}", "$") from exc


# --- trace file format ------------------------------------------------------
#
# CSV with a leading sample-rate comment:
#   # sample_rate_hz=1000
#   t_ms,disp_mm,force_cN,vib
#   0.0,0.0,30.0,0.0
# Timestamps must be uniform within 1% of the declared period.


def write_trace_csv(trace: PressTrace, path) -> None:
    t = trace.t_ms()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# sample_rate_hz={float(trace.sample_rate_hz)!r}\n")
        fh.write(TRACE_HEADER + "\n")
        for k in range(trace.n_samples):
            fh.write(f"{float(t[k])!r},{float(trace.displacement_mm[k])!r},"
                     f"{float(trace.force_cN[k])!r},{float(trace.vibration[k])!r}\n")


def read_trace_csv(path) -> PressTrace:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("# sample_rate_hz="):
        raise ParseError("expected first line '# sample_rate_hz=<n>'",
                         f"{path}:1")
    try:
        rate = float(lines[0].split("=", 1)[1])
    except ValueError as exc:
        raise ParseError("bad sample_rate_hz value", f"{path}:1") from exc
    if len(lines) < 2 or lines[1].strip() != TRACE_HEADER:
        raise ParseError(f"expected header {TRACE_HEADER!r}", f"{path}:2")
    t, disp, force, vib = [], [], [], []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ParseError("expected 4 comma-separated values", f"{path}:{lineno}")
        try:
            values = [float(p) for p in parts]
        except ValueError as exc:
            raise ParseError("malformed number", f"{path}:{lineno}") from exc
        t.append(values[0])
        disp.append(values[1])
        force.append(values[2])
        vib.append(values[3])
    if len(t) < 2:
        raise ParseError("trace needs at least 2 rows", f"{path}")
    period = 1000.0 / rate
    diffs = np.diff(np.asarray(t))
    bad = np.nonzero(np.abs(diffs - period) > 0.01 * period)[0]
    if bad.size:
        raise ParseError(
            f"non-uniform timestamp (dt={diffs[bad[0]]:.6g} ms, expected "
            f"{period:.6g} ms +-1%)", f"{path}:{int(bad[0]) + 4}")
    try:
        return PressTrace(rate, np.asarray(disp), np.asarray(force),
                          np.asarray(vib), source=str(path))
    except DomainError as exc:
        raise ParseError(str(exc), str(path)) from exc

"""Simulated physical plant: actuator transfer function plus button mechanics.

Finger motion is prescribed (position-driven): the trajectory dictates keycap
displacement and the simulation reports the reaction force a fingertip sensor
would read. Per tick that force is

    actuator (gain * duty^gamma, delayed, first-order lag)
  + spring_cN_per_mm * x + damping_cN_per_mm_s * x' + mass term

with derivatives taken from trajectory truth. The displacement the
*controller* sees carries Gaussian sensor noise; the emitted trace keeps the
true displacement (the capture rig measures position independently).

The default plant parameters (gain 300 cN, tau 5 ms, gamma 1.2) are a test
fixture chosen to be plausible for a small voice-coil stage; they are not
measurements of any particular hardware.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .capture import PressTrace, estimate_velocity
from .errors import DomainError, ParseError
from .model import FDVVModel

# cN per (g * mm/s^2): 1 g*mm/s^2 = 1e-6 N = 1e-4 cN
_MASS_TO_CN = 1e-4


@dataclass(frozen=True)
class PlantConfig:
    mass_g: float = 8.0
    spring_cN_per_mm: float = 4.0
    damping_cN_per_mm_s: float = 0.05
    actuator_gain_cN: float = 300.0  # force at duty 1.0
    actuator_tau_ms: float = 5.0  # first-order lag; 0 = instantaneous
    duty_nonlinearity_exponent: float = 1.2  # output ~ duty^gamma
    sensor_noise_sigma_mm: float = 0.002
    actuation_latency_ticks: int = 1
    rng_seed: int = 0

    def __post_init__(self):
        if self.mass_g < 0 or self.actuator_gain_cN < 0:
            raise DomainError("mass_g and actuator_gain_cN must be >= 0")
        if self.actuator_tau_ms < 0:
            raise DomainError("actuator_tau_ms must be >= 0")
        if self.duty_nonlinearity_exponent <= 0:
            raise DomainError("duty_nonlinearity_exponent must be > 0")
        if self.sensor_noise_sigma_mm < 0:
            raise DomainError("sensor_noise_sigma_mm must be >= 0")
        if self.actuation_latency_ticks < 0 or int(self.actuation_latency_ticks) != self.actuation_latency_ticks:
            raise DomainError("actuation_latency_ticks must be an integer >= 0")

    def lag_alpha(self, tick_rate_hz: float) -> float:
        """Exact per-tick exponential update coefficient for the lag."""
        if self.actuator_tau_ms == 0:
            return 1.0
        dt_ms = 1000.0 / tick_rate_hz
        return 1.0 - math.exp(-dt_ms / self.actuator_tau_ms)


IDEAL_PLANT = PlantConfig(mass_g=0.0, spring_cN_per_mm=0.0, damping_cN_per_mm_s=0.0,
                          actuator_gain_cN=200.0, actuator_tau_ms=0.0,
                          duty_nonlinearity_exponent=1.0, sensor_noise_sigma_mm=0.0,
                          actuation_latency_ticks=0, rng_seed=0)


def plant_to_doc(config: PlantConfig) -> dict:
    return asdict(config)


def plant_from_doc(doc: dict) -> PlantConfig:
    if not isinstance(doc, dict):
        raise ParseError("plant config must be a JSON object", "$")
    known = set(PlantConfig.__dataclass_fields__)
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ParseError(f"unknown plant config fields: {unknown}", "$")
    try:
        return PlantConfig(**doc)
    except (TypeError, DomainError) as exc:
        raise ParseError(f"bad plant config: {exc}", "$") from exc


def read_plant_config(path) -> PlantConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed JSON: {exc.msg}",
                             f"{path}:{exc.lineno}") from exc
    return plant_from_doc(doc)


def write_plant_config(config: PlantConfig, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(plant_to_doc(config), fh, sort_keys=True, indent=2)
        fh.write("\n")


@dataclass(frozen=True)
class FingerTrajectory:
    """Prescribed keycap displacement at the renderer tick rate."""

    sample_rate_hz: float
    displacement_mm: np.ndarray

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise DomainError("sample_rate_hz must be > 0")
        object.__setattr__(self, "displacement_mm",
                           np.asarray(self.displacement_mm, dtype=np.float64))
        if self.displacement_mm.shape[0] < 2:
            raise DomainError("trajectory needs at least 2 samples")
        if self.displacement_mm.min() < 0:
            raise DomainError("trajectory displacement must be >= 0")

    @property
    def n_samples(self) -> int:
        return self.displacement_mm.shape[0]

    def derivatives(self):
        """(velocity mm/s, acceleration mm/s^2) from truth, central differences."""
        vel = estimate_velocity(self.displacement_mm, self.sample_rate_hz)
        acc = estimate_velocity(vel, self.sample_rate_hz)
        return vel, acc


def _minimum_jerk(progress: np.ndarray) -> np.ndarray:
    return progress ** 3 * (10.0 + progress * (-15.0 + 6.0 * progress))


def generate_trajectory(travel_mm: float, peak_velocity_mm_s: float,
                        tick_rate_hz: float, dwell_ms: float = 60.0,
                        lead_ms: float = 20.0, tail_ms: float = 20.0) -> FingerTrajectory:
    """Smooth full stroke: minimum-jerk descent, dwell at bottom, minimum-jerk
    return. The descent's peak speed equals peak_velocity_mm_s within 2%."""
    if travel_mm <= 0 or peak_velocity_mm_s <= 0 or tick_rate_hz <= 0:
        raise DomainError("travel, peak velocity and tick rate must be > 0")
    # minimum-jerk peak velocity is 15/8 * L / T at mid-stroke
    stroke_s = 1.875 * travel_mm / peak_velocity_mm_s
    dt = 1.0 / tick_rate_hz
    if stroke_s < dt:
        raise DomainError("peak velocity too high: stroke shorter than one tick")
    lead_s, dwell_s, tail_s = (lead_ms / 1000.0, dwell_ms / 1000.0,
                               tail_ms / 1000.0)
    total_s = lead_s + 2.0 * stroke_s + dwell_s + tail_s
    # evaluate the continuous-time profile at tick times so refining the tick
    # rate leaves the shape invariant
    t = np.arange(int(round(total_s / dt)) + 1) * dt
    tau_down = np.clip((t - lead_s) / stroke_s, 0.0, 1.0)
    tau_up = np.clip((t - lead_s - stroke_s - dwell_s) / stroke_s, 0.0, 1.0)
    disp = travel_mm * (_minimum_jerk(tau_down) - _minimum_jerk(tau_up))
    return FingerTrajectory(tick_rate_hz, disp)


def actuator_response(duty, config: PlantConfig,
                      tick_rate_hz: float = 1000.0) -> np.ndarray:
    """Actuator force for a duty sequence: gain * duty^gamma, delayed by the
    actuation latency, then passed through the first-order lag (exact
    exponential update per tick)."""
    duty = np.asarray(duty, dtype=np.float64)
    if duty.size and (duty.min() < 0.0 or duty.max() > 1.0):
        raise DomainError("duty values must lie in [0, 1]")
    lat = int(config.actuation_latency_ticks)
    delayed = np.concatenate([np.zeros(lat), duty[:duty.shape[0] - lat]]) if lat else duty
    gamma = config.duty_nonlinearity_exponent
    f_inst = config.actuator_gain_cN * (delayed if gamma == 1.0 else delayed ** gamma)
    return kernels.first_order_lag(f_inst, config.lag_alpha(tick_rate_hz))


def _noise(config: PlantConfig, n: int, seed=None) -> np.ndarray:
    sigma = config.sensor_noise_sigma_mm
    if sigma == 0.0:
        return np.zeros(n)
    rng = np.random.default_rng(config.rng_seed if seed is None else seed)
    return rng.normal(0.0, sigma, n)


def simulate_press(config: PlantConfig, trajectory: FingerTrajectory,
                   actuation, renderer=None, seed=None) -> PressTrace:
    """Run one prescribed press against the plant and report the sensed force.

    `actuation` is an ActuationTable (closed-loop duty lookup on the noisy
    sensed displacement) or a fixed duty in [0, 1]. Passing a renderer
    delegates to renderer.run_session for the full real-time loop.

    `seed` overrides config.rng_seed for the sensor noise (the compensation
    loop derives a fresh stream per press).
    """
    if renderer is not None:
        from .renderer import run_session
        return run_session(renderer, config, trajectory, seed=seed).trace

    disp = trajectory.displacement_mm
    vel, acc = trajectory.derivatives()
    noise = _noise(config, trajectory.n_samples, seed)
    if actuation is None:
        raise DomainError("simulate_press needs an actuation table, a fixed "
                          "duty, or a renderer")
    if isinstance(actuation, (int, float)):
        fixed = float(actuation)
        if not (0.0 <= fixed <= 1.0):
            raise DomainError("fixed duty must lie in [0, 1]")
        duties_press = duties_release = np.zeros((1, 2))
        centers = np.zeros(1)
        step = travel = 1.0
    else:
        fixed = -1.0
        duties_press = actuation.duty_stack("press")
        duties_release = actuation.duty_stack("release")
        centers = actuation.bin_centers()
        step = actuation.grid.step_mm
        travel = actuation.grid.travel_mm

    force, _ = kernels.simulate_press_core(
        disp, vel, acc, noise, duties_press, duties_release, centers, step,
        travel, config.actuator_gain_cN, config.duty_nonlinearity_exponent,
        config.lag_alpha(trajectory.sample_rate_hz),
        int(config.actuation_latency_ticks), config.spring_cN_per_mm,
        config.damping_cN_per_mm_s, config.mass_g * _MASS_TO_CN, fixed)
    return PressTrace(trajectory.sample_rate_hz, disp.copy(), force,
                      np.zeros(trajectory.n_samples), source="simulated-press")


def synth_trace_from_model(model: FDVVModel, trajectory: FingerTrajectory,
                           noise_sigma: float = 0.0, seed: int = 0) -> PressTrace:
    """Trace an ideal button implementing `model` would produce under the
    trajectory: force = lookup(d, |v|, direction-from-v-sign) + Gaussian noise,
    with vibration profiles written at trigger crossings."""
    disp = trajectory.displacement_mm
    if disp.max() > model.grid.travel_mm + 1e-9:
        raise DomainError("trajectory exceeds model travel")
    vel = estimate_velocity(disp, trajectory.sample_rate_hz)

    # direction per sample: sign of velocity, holding through zero (release
    # at rest, matching the renderer's idle contract)
    press_mask = np.zeros(disp.shape[0], dtype=bool)
    current = False
    for k, v in enumerate(vel):
        if v > 0:
            current = True
        elif v < 0:
            current = False
        press_mask[k] = current

    d_clamped = np.clip(disp, 0.0, model.grid.travel_mm)
    speeds = np.abs(vel)
    force = np.empty(disp.shape[0])
    for direction, mask in (("press", press_mask), ("release", ~press_mask)):
        if mask.any():
            force[mask] = kernels.table_lookup_many(
                model.curve_stack(direction), model.bin_centers(),
                model.grid.step_mm, model.grid.travel_mm,
                d_clamped[mask], speeds[mask])
    if noise_sigma > 0:
        force = force + np.random.default_rng(seed).normal(0.0, noise_sigma, force.shape[0])

    vib = np.zeros(disp.shape[0])
    for profile in model.vibrations:
        for k in _trigger_crossings(disp, press_mask, profile):
            burst = _resample_waveform(profile, trajectory.sample_rate_hz)
            end = min(disp.shape[0], k + burst.shape[0])
            vib[k:end] += burst[:end - k]
    return PressTrace(trajectory.sample_rate_hz, disp.copy(), force, vib,
                      source=f"synth:{model.name}")


def _trigger_crossings(disp, press_mask, profile):
    """Sample indices where displacement crosses the profile trigger in its
    direction, at most once per monotone stroke."""
    hits = []
    armed = True
    want_press = profile.direction == "press"
    for k in range(1, disp.shape[0]):
        if press_mask[k] != press_mask[k - 1]:
            armed = True  # direction flip starts a new stroke
        if not armed or press_mask[k] != want_press:
            continue
        if want_press and disp[k - 1] < profile.trigger_mm <= disp[k]:
            hits.append(k)
            armed = False
        elif not want_press and disp[k - 1] > profile.trigger_mm >= disp[k]:
            hits.append(k)
            armed = False
    return hits


def _resample_waveform(profile, target_rate_hz: float) -> np.ndarray:
    samples = np.asarray(profile.samples, dtype=np.float64)
    if abs(profile.sample_rate_hz - target_rate_hz) < 1e-9 or samples.shape[0] < 2:
        return samples.copy()
    duration = (samples.shape[0] - 1) / profile.sample_rate_hz
    n_out = max(2, int(round(duration * target_rate_hz)) + 1)
    t_out = np.arange(n_out) / target_rate_hz
    t_in = np.arange(samples.shape[0]) / profile.sample_rate_hz
    return np.interp(t_out, t_in, samples)

"""Software twin of the button simulator's microcontroller loop.

Fixed-rate ticks (1 kHz by default): each tick takes one displacement reading,
filters it, estimates press velocity by least-squares slope, picks press or
release duty tables from the velocity sign (with a deadband holding the last
direction), triggers stored vibration profiles at their displacement
thresholds, and advances the configured button behavior. Simulated ticks are
the contract; nothing here depends on wall-clock pacing.

Commands (travel-range changes, behavior swaps) are applied between ticks:
the tick loop itself is strictly single-threaded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from collections import deque

import numpy as np

from . import kernels
from .capture import PressTrace
from .compensate import ActuationTable
from .errors import DomainError
from .model import VibrationProfile
from .plant import _MASS_TO_CN, FingerTrajectory, PlantConfig, _noise


@dataclass(frozen=True)
class StandardBehavior:
    kind: str = "standard"


@dataclass(frozen=True)
class FastTapBehavior:
    """Register on a shallow threshold, then virtually drop to bottom and
    return on a duty schedule; re-arms as soon as the finger backs above the
    threshold, multiplying achievable tap rates."""

    return_threshold_mm: float
    drop_ms: float = 30.0
    return_ms: float = 30.0
    return_duty: float = 0.5
    kind: str = "fast_tap"

    def __post_init__(self):
        if self.return_threshold_mm <= 0 or self.drop_ms <= 0 or self.return_ms <= 0:
            raise DomainError("fast_tap parameters must be > 0")
        if not (0.0 <= self.return_duty <= 1.0):
            raise DomainError("return_duty must lie in [0, 1]")


@dataclass(frozen=True)
class CooldownBehavior:
    """Suppress press registration for a delay after each release. The delay
    schedule cycles press-by-press, so contents can vary the returning time."""

    return_delay_ms: tuple[float, ...]
    kind: str = "cooldown"

    def __post_init__(self):
        delays = self.return_delay_ms
        if isinstance(delays, (int, float)):
            delays = (float(delays),)
        delays = tuple(float(x) for x in delays)
        if not delays or any(x <= 0 for x in delays):
            raise DomainError("cooldown delays must be positive")
        object.__setattr__(self, "return_delay_ms", delays)


@dataclass(frozen=True)
class VibrationTicksBehavior:
    """While held past the press threshold, emit a vibration burst every
    period_ms so the user can count elapsed intervals by touch."""

    period_ms: float
    kind: str = "vibration_ticks"

    def __post_init__(self):
        if self.period_ms <= 0:
            raise DomainError("period_ms must be > 0")


ButtonBehavior = StandardBehavior | FastTapBehavior | CooldownBehavior | VibrationTicksBehavior


@dataclass(frozen=True)
class RendererConfig:
    table: ActuationTable
    vibrations: tuple[VibrationProfile, ...] = ()
    tick_rate_hz: float = 1000.0
    filter_window: int = 5
    velocity_estimator_span_ticks: int = 8
    direction_deadband_mm_s: float = 2.0
    travel_range_mm: float | None = None  # default: full table travel
    press_threshold_fraction: float = 0.9
    release_threshold_fraction: float = 0.1
    servo_settle_ticks: int = 50
    behavior: ButtonBehavior = field(default_factory=StandardBehavior)

    def __post_init__(self):
        if self.tick_rate_hz <= 0:
            raise DomainError("tick_rate_hz must be > 0")
        if self.filter_window < 1 or self.filter_window % 2 == 0:
            raise DomainError("filter_window must be odd and >= 1")
        if self.velocity_estimator_span_ticks < 2:
            raise DomainError("velocity_estimator_span_ticks must be >= 2")
        travel = self.table.grid.travel_mm
        if self.travel_range_mm is None:
            object.__setattr__(self, "travel_range_mm", travel)
        elif not (0 < self.travel_range_mm <= travel):
            raise DomainError("travel_range_mm must be in (0, table travel]")
        if not (0 < self.release_threshold_fraction
                < self.press_threshold_fraction <= 1.0):
            raise DomainError("need 0 < release fraction < press fraction <= 1")
        if self.servo_settle_ticks < 0:
            raise DomainError("servo_settle_ticks must be >= 0")


@dataclass(frozen=True)
class TickOutput:
    tick: int
    duty: float
    vibration_sample: float
    events: tuple[str, ...]
    servo_target_mm: float | None = None
    displacement_filtered_mm: float = 0.0
    velocity_mm_s: float = 0.0


class Renderer:
    """Mutable render state driven one tick at a time; see module docstring."""

    def __init__(self, config: RendererConfig):
        self.config = config
        self.behavior = config.behavior
        self.travel_mm = config.travel_range_mm
        self.tick_count = 0
        self.press_count = 0
        self.direction = "release"  # idle contract: a resting button reads release
        self._raw = deque(maxlen=config.filter_window)
        self._filt = deque(maxlen=config.velocity_estimator_span_ticks)
        self._prev_filtered: float | None = None
        self._last_duty = 0.0
        self._armed = True
        self._pressed = False
        self._playbacks: list[list] = []  # [profile_index, cursor]
        self._fired: set[int] = set()
        self._servo_target: float | None = None
        self._servo_countdown = 0
        self._cooldown_remaining = 0
        self._cooldown_cycle = 0
        self._auto_return_remaining = 0
        self._dwell_ticks = 0
        stack = {d: config.table.duty_stack(d) for d in ("press", "release")}
        self._stacks = stack
        self._centers = config.table.bin_centers()

    # -- commands (applied between ticks) ------------------------------------

    def set_travel_range(self, target_mm: float) -> TickOutput:
        grid_travel = self.config.table.grid.travel_mm
        if not (0 < target_mm <= grid_travel):
            raise DomainError(f"travel target {target_mm} outside (0, {grid_travel}]")
        if target_mm == self.travel_mm and self._servo_target is None:
            return TickOutput(self.tick_count, self._last_duty, 0.0, ())
        self._servo_target = target_mm
        self._servo_countdown = self.config.servo_settle_ticks
        if self._servo_countdown == 0:
            self.travel_mm = target_mm
            self._servo_target = None
        return TickOutput(self.tick_count, self._last_duty, 0.0, (),
                          servo_target_mm=target_mm)

    def set_behavior(self, behavior: ButtonBehavior) -> None:
        self.behavior = behavior
        self._auto_return_remaining = 0
        self._cooldown_remaining = 0
        self._dwell_ticks = 0

    # -- the tick -------------------------------------------------------------

    def _velocity(self) -> float:
        m = len(self._filt)
        if m < 2:
            return 0.0
        mean_x = (m - 1) / 2.0
        mean_y = sum(self._filt) / m
        num = 0.0
        den = 0.0
        for i, y in enumerate(self._filt):
            dx = i - mean_x
            num += dx * (y - mean_y)
            den += dx * dx
        return num / den * self.config.tick_rate_hz

    def _press_threshold(self) -> float:
        behavior = self.behavior
        if isinstance(behavior, FastTapBehavior):
            return behavior.return_threshold_mm
        return self.config.press_threshold_fraction * self.travel_mm

    def tick(self, sensor_displacement_mm: float) -> TickOutput:
        cfg = self.config
        tick_index = self.tick_count
        self.tick_count += 1

        # servo settle countdown: old travel stays in force until it expires
        if self._servo_countdown > 0:
            self._servo_countdown -= 1
            if self._servo_countdown == 0 and self._servo_target is not None:
                self.travel_mm = self._servo_target
                self._servo_target = None
        if self._cooldown_remaining > 0:
            self._cooldown_remaining -= 1

        if not (-0.1 <= sensor_displacement_mm <= self.travel_mm + 0.1):
            return TickOutput(tick_index, self._last_duty, 0.0, ("sensor_fault",),
                              displacement_filtered_mm=self._prev_filtered or 0.0)

        events: list[str] = []
        if not self._raw:
            for _ in range(cfg.filter_window):
                self._raw.append(sensor_displacement_mm)
        else:
            self._raw.append(sensor_displacement_mm)
        filtered = sum(self._raw) / len(self._raw)
        self._filt.append(filtered)
        velocity = self._velocity()

        previous_direction = self.direction
        if velocity > cfg.direction_deadband_mm_s:
            self.direction = "press"
        elif velocity < -cfg.direction_deadband_mm_s:
            self.direction = "release"
        if self.direction != previous_direction:
            # a stroke ended: vibration triggers re-arm and playback stops
            self._fired.clear()
            self._playbacks.clear()

        duty = float(kernels.table_lookup(
            self._stacks[self.direction], self._centers,
            cfg.table.grid.step_mm, self.travel_mm,
            min(max(filtered, 0.0), self.travel_mm), abs(velocity)))
        duty = min(max(duty, 0.0), 1.0)

        behavior = self.behavior
        if isinstance(behavior, FastTapBehavior) and self._auto_return_remaining > 0:
            drop_ticks = max(1, int(round(behavior.drop_ms / 1000.0 * cfg.tick_rate_hz)))
            total = drop_ticks + max(1, int(round(behavior.return_ms / 1000.0 * cfg.tick_rate_hz)))
            elapsed = total - self._auto_return_remaining
            duty = 0.0 if elapsed < drop_ticks else behavior.return_duty
            self._auto_return_remaining -= 1

        prev_f = self._prev_filtered
        if prev_f is not None:
            for idx, prof in enumerate(cfg.vibrations):
                if idx in self._fired or prof.direction != self.direction:
                    continue
                if prof.direction == "press":
                    crossed = prev_f < prof.trigger_mm <= filtered
                else:
                    crossed = prev_f > prof.trigger_mm >= filtered
                if crossed:
                    self._playbacks.append([idx, 0.0])
                    self._fired.add(idx)
                    events.append("vibration_started")

        press_thr = self._press_threshold()
        release_thr = cfg.release_threshold_fraction * self.travel_mm
        if isinstance(behavior, FastTapBehavior):
            if self._armed and filtered >= press_thr:
                self._armed = False
                events.append("press_registered")
                events.append("auto_return_started")
                self.press_count += 1
                drop_ticks = max(1, int(round(behavior.drop_ms / 1000.0 * cfg.tick_rate_hz)))
                ret_ticks = max(1, int(round(behavior.return_ms / 1000.0 * cfg.tick_rate_hz)))
                self._auto_return_remaining = drop_ticks + ret_ticks
            elif not self._armed and filtered < press_thr:
                self._armed = True
        else:
            if self._armed and filtered >= press_thr:
                self._armed = False
                if self._cooldown_remaining == 0:
                    events.append("press_registered")
                    self.press_count += 1
                    self._pressed = True
            elif not self._armed and filtered <= release_thr:
                self._armed = True
                if self._pressed:
                    events.append("release_registered")
                    self._pressed = False
                    if isinstance(behavior, CooldownBehavior):
                        delays = behavior.return_delay_ms
                        delay = delays[self._cooldown_cycle % len(delays)]
                        self._cooldown_cycle += 1
                        self._cooldown_remaining = int(round(
                            delay / 1000.0 * cfg.tick_rate_hz))

        vibration = 0.0
        if isinstance(behavior, VibrationTicksBehavior):
            if filtered >= press_thr:
                self._dwell_ticks += 1
                period = max(1, int(round(behavior.period_ms / 1000.0 * cfg.tick_rate_hz)))
                if self._dwell_ticks % period == 0:
                    events.append("vibration_started")
                    if cfg.vibrations:
                        self._playbacks.append([0, 0.0])
                    else:
                        vibration += 1.0  # single-tick pulse when no profile is loaded
            else:
                self._dwell_ticks = 0

        still = []
        for playback in self._playbacks:
            prof = cfg.vibrations[playback[0]]
            pos = int(playback[1])
            if pos < len(prof.samples):
                vibration += prof.samples[pos]
                playback[1] += prof.sample_rate_hz / cfg.tick_rate_hz
                still.append(playback)
        self._playbacks = still
        vibration = min(max(vibration, -1.0), 1.0)

        self._prev_filtered = filtered
        self._last_duty = duty
        return TickOutput(tick_index, duty, vibration, tuple(events),
                          displacement_filtered_mm=filtered,
                          velocity_mm_s=velocity)


def run_script(renderer: Renderer, readings) -> list[TickOutput]:
    """Drive a renderer with a prerecorded reading script (no plant)."""
    return [renderer.tick(float(r)) for r in readings]


@dataclass(eq=False)
class SessionResult:
    trace: PressTrace
    events: list[tuple[int, str]]  # ordered (tick, event)
    ticks: list[TickOutput]
    readings: np.ndarray


def run_session(renderer: Renderer, plant: PlantConfig,
                trajectory: FingerTrajectory, seed=None) -> SessionResult:
    """Couple the renderer with the plant: sensor -> tick -> duty -> plant.

    Deterministic given the plant seed; the returned trace keeps truth
    displacement, the renderer sees the noisy readings.
    """
    if abs(renderer.config.tick_rate_hz - trajectory.sample_rate_hz) > 1e-9:
        raise DomainError("trajectory sample rate must equal renderer tick rate")
    disp = trajectory.displacement_mm
    vel, acc = trajectory.derivatives()
    n = trajectory.n_samples
    noise = _noise(plant, n, seed)
    readings = disp + noise

    gain = plant.actuator_gain_cN
    gamma = plant.duty_nonlinearity_exponent
    alpha = plant.lag_alpha(trajectory.sample_rate_hz)
    latency = int(plant.actuation_latency_ticks)
    spring = plant.spring_cN_per_mm
    damping = plant.damping_cN_per_mm_s
    mass_factor = plant.mass_g * _MASS_TO_CN

    force = np.empty(n)
    vib = np.empty(n)
    duties: list[float] = []
    outputs: list[TickOutput] = []
    events: list[tuple[int, str]] = []
    lag_y = 0.0
    for k in range(n):
        out = renderer.tick(float(readings[k]))
        outputs.append(out)
        for ev in out.events:
            events.append((k, ev))
        duties.append(out.duty)
        u = duties[k - latency] if k >= latency else 0.0
        f_inst = gain * u if gamma == 1.0 else gain * (u ** gamma)
        if alpha >= 1.0:
            lag_y = f_inst
        else:
            lag_y += alpha * (f_inst - lag_y)
        force[k] = lag_y + spring * disp[k] + damping * vel[k] + mass_factor * acc[k]
        vib[k] = out.vibration_sample
    trace = PressTrace(trajectory.sample_rate_hz, disp.copy(), force, vib,
                       source="render-session")
    return SessionResult(trace=trace, events=events, ticks=outputs,
                         readings=readings)


SESSION_LOG_HEADER = "tick,disp_raw,disp_filt,vel,duty,vib,events"


def write_session_log(result: SessionResult, path) -> None:
    """Line-delimited per-tick record; events joined with ';'."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(SESSION_LOG_HEADER + "\n")
        for k, out in enumerate(result.ticks):
            fh.write(f"{out.tick},{float(result.readings[k])!r},"
                     f"{float(out.displacement_filtered_mm)!r},"
                     f"{float(out.velocity_mm_s)!r},{float(out.duty)!r},"
                     f"{float(out.vibration_sample)!r},"
                     f"{';'.join(out.events)}\n")

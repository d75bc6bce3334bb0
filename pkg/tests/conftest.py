import numpy as np
import pytest

from pressem.capture import CaptureConfig
from pressem.model import (DisplacementGrid, FDCurve, VelocityBin, make_model)
from pressem.plant import PlantConfig

GRID = DisplacementGrid(4.0, 0.01)
BINS = (VelocityBin(5.0, 15.0, 10.0), VelocityBin(15.0, 35.0, 25.0),
        VelocityBin(35.0, 75.0, 50.0))


def tactile_curves(points: np.ndarray, boosts=(0.0, 7.0, 14.0)):
    """Tactile-bump press/release curve family: preload + ramp + bump, with a
    velocity-dependent boost that fades near the travel ends (bottom-out and
    rest force do not depend on press speed)."""
    base = (25.0 + 9.0 * points
            + 16.0 * np.exp(-((points - 1.4) / 0.3) ** 2)
            - 9.0 * np.exp(-((points - 1.9) / 0.28) ** 2))
    envelope = np.exp(-((points - 1.5) / 0.6) ** 2)
    curves = {}
    for i, boost in enumerate(boosts):
        press = np.maximum(base + boost * envelope, 0.0)
        release = np.maximum(press - 6.0, 0.0)
        curves[("press", i)] = FDCurve("press", tuple(press))
        curves[("release", i)] = FDCurve("release", tuple(release))
    return curves


def build_tactile_model(vibrations=()):
    return make_model("tactile-4mm", GRID, BINS,
                      tactile_curves(GRID.points()), vibrations=vibrations)


def build_constant_model(force_cN=50.0, travel_mm=4.0, step_mm=0.01,
                         release_offset=0.0):
    grid = DisplacementGrid(travel_mm, step_mm)
    flat = np.full(grid.n_points, force_cN)
    curves = {("press", 0): FDCurve("press", tuple(flat)),
              ("release", 0): FDCurve("release",
                                      tuple(np.maximum(flat - release_offset, 0.0)))}
    return make_model("constant", grid, (VelocityBin(5.0, 15.0, 10.0),), curves)


def build_two_bin_constant(lo_force=40.0, hi_force=80.0):
    grid = DisplacementGrid(4.0, 0.01)
    bins = (VelocityBin(5.0, 15.0, 10.0), VelocityBin(25.0, 35.0, 30.0))
    curves = {}
    for i, f in enumerate((lo_force, hi_force)):
        flat = tuple(np.full(grid.n_points, f))
        curves[("press", i)] = FDCurve("press", flat)
        curves[("release", i)] = FDCurve("release", flat)
    return make_model("two-bin", grid, bins, curves)


@pytest.fixture
def grid4():
    return GRID


@pytest.fixture
def bins3():
    return BINS


@pytest.fixture
def tactile_model():
    return build_tactile_model()


@pytest.fixture
def ideal_plant():
    """Static linear plant: gamma 1, no lag/latency/mechanics/noise."""
    return PlantConfig(mass_g=0.0, spring_cN_per_mm=0.0, damping_cN_per_mm_s=0.0,
                       actuator_gain_cN=200.0, actuator_tau_ms=0.0,
                       duty_nonlinearity_exponent=1.0, sensor_noise_sigma_mm=0.0,
                       actuation_latency_ticks=0, rng_seed=0)


@pytest.fixture
def fixture_plant():
    """The documented default plant (lag, gamma 1.2, seeded sensor noise)."""
    return PlantConfig()


@pytest.fixture
def capture_config():
    """Capture settings used by the round-trip oracles: no displacement filter
    (traces are noiseless in displacement), default segmentation."""
    return CaptureConfig(grid=GRID, bins=BINS, filter_window=1)

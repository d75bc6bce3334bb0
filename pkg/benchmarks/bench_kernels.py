#!/usr/bin/env python3
"""Time the hot kernels on the compiled backend vs the pure-Python fallback.

Run from the repo root after building the extension in place:

    python setup.py build_ext --inplace
    PYTHONPATH=src python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from pressem import kernels
from pressem.compensate import CompensationConfig, compensate
from pressem.model import DisplacementGrid, FDCurve, VelocityBin, make_model
from pressem.plant import PlantConfig


def timeit(fn, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_backend(backend):
    rng = np.random.default_rng(0)
    sig = rng.normal(0.0, 1.0, 200_000)
    xs = np.sort(rng.uniform(0.0, 4.0, 50_000))
    ys = rng.normal(50.0, 5.0, 50_000)
    duties = rng.uniform(0.0, 1.0, (3, 401))
    centers = np.array([10.0, 25.0, 50.0])
    d = rng.uniform(0.0, 4.0, 100_000)
    v = rng.uniform(0.0, 60.0, 100_000)
    n = 50_000
    disp = np.abs(np.sin(np.linspace(0, 20, n))) * 4.0
    vel = np.gradient(disp) * 1000.0
    acc = np.gradient(vel) * 1000.0
    noise = rng.normal(0.0, 0.002, n)

    return {
        "moving_average (200k, w=9)": timeit(lambda: backend.moving_average(sig, 9)),
        "first_order_lag (200k)": timeit(lambda: backend.first_order_lag(sig, 0.18)),
        "resample_to_grid (50k->401)": timeit(
            lambda: backend.resample_to_grid(xs, ys, 0.01, 401, 0.01)),
        "table_lookup_many (100k)": timeit(
            lambda: backend.table_lookup_many(duties, centers, 0.01, 4.0, d, v)),
        "simulate_press_core (50k ticks)": timeit(
            lambda: backend.simulate_press_core(
                disp, vel, acc, noise, duties, duties, centers, 0.01, 4.0,
                300.0, 1.2, 0.18, 1, 4.0, 0.05, 8e-4, -1.0)),
    }


def bench_compensate():
    grid = DisplacementGrid(4.0, 0.01)
    pts = grid.points()
    bins = (VelocityBin(5, 15, 10), VelocityBin(15, 35, 25), VelocityBin(35, 75, 50))
    curves = {}
    for i in range(3):
        c = 30 + 9 * pts + 4 * i
        curves[("press", i)] = FDCurve("press", tuple(c))
        curves[("release", i)] = FDCurve("release", tuple(np.maximum(c - 6, 0)))
    model = make_model("bench", grid, bins, curves)
    return timeit(lambda: compensate(PlantConfig(), model, CompensationConfig()),
                  repeat=3)


def main():
    names = kernels.available_backends()
    print(f"available backends: {', '.join(names)} (selected: {kernels.BACKEND})")
    results = {name: bench_backend(kernels.get_backend(name)) for name in names}
    width = max(len(k) for k in next(iter(results.values())))
    header = f"{'kernel':<{width}}" + "".join(f"  {n:>12}" for n in names)
    if len(names) == 2:
        header += f"  {'speedup':>9}"
    print(header)
    for key in next(iter(results.values())):
        row = f"{key:<{width}}"
        for name in names:
            row += f"  {results[name][key] * 1e3:>10.3f}ms"
        if len(names) == 2:
            row += f"  {results[names[0]][key] / results[names[1]][key]:>8.1f}x"
        print(row)
    print(f"\nfull compensation run (selected backend): {bench_compensate() * 1e3:.1f} ms")


if __name__ == "__main__":
    main()

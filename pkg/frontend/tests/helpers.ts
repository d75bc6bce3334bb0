import type { ModelDoc } from "../src/types.js";

/** Small but fully valid model document: 1 mm travel, 21 grid points, 2 bins. */
export function fixtureModelDoc(name = "fixture"): ModelDoc {
  const nPoints = 21;
  const ramp = (offset: number) =>
    Array.from({ length: nPoints }, (_, k) => offset + 20 * (k * 0.05));
  return {
    schema_version: 1,
    name,
    travel_mm: 1.0,
    step_mm: 0.05,
    bins: [
      { lo_mm_s: 5, hi_mm_s: 15, center_mm_s: 10 },
      { lo_mm_s: 15, hi_mm_s: 40, center_mm_s: 25 },
    ],
    curves: [
      { direction: "press", bin: 0, force_cN: ramp(30) },
      { direction: "press", bin: 1, force_cN: ramp(38) },
      { direction: "release", bin: 0, force_cN: ramp(24) },
      { direction: "release", bin: 1, force_cN: ramp(32) },
    ],
    vibrations: [
      {
        trigger_mm: 0.5,
        direction: "press",
        sample_rate_hz: 1000,
        samples: [1, -0.5, 0.25],
      },
    ],
  };
}

export function deepClone<T>(value: T): T {
  return JSON.parse(JSON.stringify(value)) as T;
}

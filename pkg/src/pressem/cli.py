"""Command-line surface wiring the pipeline end to end.

Exit codes: 0 success, 2 usage, 3 data error, 4 non-convergence (the table
and report are still written). Every subcommand is deterministic: fixed
--seed and inputs produce byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from .capture import (CaptureConfig, capture_config_from_doc, fit_model,
                      read_trace_csv, write_trace_csv)
from .compensate import (CompensationConfig, compensate,
                         compensation_config_from_doc, parse_table,
                         report_rows_from_csv, report_summary, report_to_csv,
                         serialize_table)
from .errors import DomainError, FitError, ParseError, PressemError
from .model import (DisplacementGrid, VelocityBin, parse_model,
                    serialize_model)
from .plant import (PlantConfig, generate_trajectory, plant_from_doc,
                    synth_trace_from_model)
from .renderer import Renderer, RendererConfig, run_session, write_session_log

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NON_CONVERGED = 4

DEFAULT_BINS = [VelocityBin(5.0, 15.0, 10.0), VelocityBin(15.0, 35.0, 25.0),
                VelocityBin(35.0, 75.0, 50.0)]


def _read_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ParseError("file not found", str(path))
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc.msg}", f"{path}:{exc.lineno}")


def _read_bytes(path):
    try:
        return Path(path).read_bytes()
    except FileNotFoundError:
        raise ParseError("file not found", str(path))


def _check_out(path, force: bool):
    if path and os.path.exists(path) and not force:
        raise ParseError("output exists; pass --force to overwrite", str(path))


def _write_bytes(path, data: bytes):
    Path(path).write_bytes(data)


def _parse_trajectory_spec(spec: str, tick_rate_hz: float):
    """`travel:peak_velocity[:dwell_ms]` in mm, mm/s, ms."""
    parts = spec.split(":")
    if len(parts) not in (2, 3):
        raise ParseError("trajectory spec must be travel:peak_velocity[:dwell_ms]",
                         spec)
    try:
        travel = float(parts[0])
        peak = float(parts[1])
        dwell = float(parts[2]) if len(parts) == 3 else 60.0
    except ValueError:
        raise ParseError("trajectory spec values must be numeric", spec)
    return generate_trajectory(travel, peak, tick_rate_hz, dwell_ms=dwell)


def _load_plant(args) -> PlantConfig:
    plant = plant_from_doc(_read_json(args.plant)) if args.plant else PlantConfig()
    if getattr(args, "seed", None) is not None:
        plant = replace(plant, rng_seed=args.seed)
    return plant


def cmd_validate(args) -> int:
    try:
        parse_model(_read_bytes(args.model))
    except ParseError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def cmd_fit(args) -> int:
    paths = []
    for item in args.traces:
        p = Path(item)
        if p.is_dir():
            paths.extend(sorted(p.glob("*.csv")))
        else:
            paths.append(p)
    if not paths:
        print("no traces found", file=sys.stderr)
        return EXIT_DATA
    if args.config:
        config = capture_config_from_doc(_read_json(args.config))
    else:
        config = CaptureConfig(grid=DisplacementGrid(4.0, 0.01),
                               bins=tuple(DEFAULT_BINS))
    traces = [read_trace_csv(p) for p in paths]
    model = fit_model(traces, config, name=args.name)
    _check_out(args.out, args.force)
    _write_bytes(args.out, serialize_model(model))
    if args.verbose:
        print(f"fitted {model.name!r} from {len(traces)} trace(s) -> {args.out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    model = parse_model(_read_bytes(args.model))
    trajectory = _parse_trajectory_spec(args.trajectory, args.tick_rate)
    trace = synth_trace_from_model(model, trajectory, noise_sigma=args.noise,
                                   seed=args.seed if args.seed is not None else 0)
    _check_out(args.out, args.force)
    write_trace_csv(trace, args.out)
    if args.verbose:
        print(f"synthesized {trace.n_samples} samples -> {args.out}")
    return EXIT_OK


def cmd_compensate(args) -> int:
    model = parse_model(_read_bytes(args.model))
    plant = _load_plant(args)
    if args.config:
        config = compensation_config_from_doc(_read_json(args.config))
    else:
        config = CompensationConfig()
    if args.seed is not None:
        config = replace(config, init_seed=args.seed)
    table, report = compensate(plant, model, config)
    _check_out(args.out_table, args.force)
    _check_out(args.out_report, args.force)
    _write_bytes(args.out_table, serialize_table(table))
    Path(args.out_report).write_text(report_to_csv(report), encoding="utf-8")
    summary = report_summary(report)
    for entry in summary["bins"]:
        print(f"{entry['direction']} bin {entry['bin']}: "
              f"{entry['iterations_used']} iteration(s), "
              f"final mean {entry['final_mean_err_cN']:.3f} cN"
              + ("" if entry["converged"] else " [not converged]")
              + (f" [{entry['saturated_points']} saturated point(s)]"
                 if entry["saturated_points"] else ""))
    if not report.converged:
        print("compensation did not converge everywhere", file=sys.stderr)
        return EXIT_NON_CONVERGED
    return EXIT_OK


def cmd_render(args) -> int:
    table = parse_table(_read_bytes(args.table))
    model = parse_model(_read_bytes(args.model)) if args.model else None
    plant = _load_plant(args)
    if args.script:
        # reading script: a trace CSV drives the finger; force column ignored
        script = read_trace_csv(args.script)
        from .plant import FingerTrajectory
        trajectory = FingerTrajectory(script.sample_rate_hz,
                                      script.displacement_mm)
        tick_rate = script.sample_rate_hz
    else:
        if not args.trajectory:
            raise ParseError("render needs --trajectory or --script", "usage")
        trajectory = _parse_trajectory_spec(args.trajectory, args.tick_rate)
        tick_rate = args.tick_rate
    _check_out(args.out, args.force)
    if args.log:
        _check_out(args.log, args.force)
    renderer = Renderer(RendererConfig(
        table=table, vibrations=model.vibrations if model else (),
        tick_rate_hz=tick_rate))
    result = run_session(renderer, plant, trajectory)
    write_trace_csv(result.trace, args.out)
    if args.log:
        write_session_log(result, args.log)
    if model is not None:
        from .compensate import error_profile
        import numpy as np
        errors = []
        for direction in ("press", "release"):
            try:
                err = error_profile(model, result.trace, model.grid, direction)
            except DomainError:
                continue
            finite = err[np.isfinite(err)]
            if finite.size:
                errors.append(np.abs(finite).mean())
        if errors:
            print(f"mean_abs_error_cN={float(np.mean(errors))!r}")
    return EXIT_OK


def cmd_report(args) -> int:
    rows = report_rows_from_csv(Path(args.report).read_text(encoding="utf-8"))
    if not rows:
        print("empty report", file=sys.stderr)
        return EXIT_DATA
    groups: dict[tuple[str, int], list[dict]] = {}
    for row in rows:
        groups.setdefault((row["direction"], row["bin"]), []).append(row)
    for (direction, bin_index), members in sorted(groups.items()):
        members.sort(key=lambda r: r["iteration"])
        first, last = members[0], members[-1]
        print(f"{direction} bin {bin_index}: {last['iteration']} iteration(s), "
              f"mean error {first['mean_err_cN']:.3f} -> {last['mean_err_cN']:.3f} cN, "
              f"max {last['max_err_cN']:.3f} cN")
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service import serve
    serve(addr=args.addr, data_dir=args.data_dir, workers=args.workers)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pressem",
        description="Button-tactility workbench: capture, compensate and "
                    "render FDVV models against a simulated plant.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--seed", type=int, default=None,
                       help="seed for all randomness (u64)")
        p.add_argument("--force", action="store_true",
                       help="overwrite existing output files")
        p.add_argument("-v", "--verbose", action="store_true",
                       help="chatty progress output")
        if out:
            p.add_argument("--out", required=True, help="output path")

    p = sub.add_parser("fit", help="fit an FDVV model from trace CSVs")
    p.add_argument("traces", nargs="+", help="trace CSV files or directories")
    p.add_argument("--config", help="capture config JSON path")
    p.add_argument("--name", default="captured", help="name for the fitted model")
    common(p)
    p.set_defaults(fn=cmd_fit)

    p = sub.add_parser("synth", help="synthesize an ideal trace from a model")
    p.add_argument("model", help="FDVV model JSON path")
    p.add_argument("--trajectory", required=True,
                   help="stroke spec travel:peak_velocity[:dwell_ms]")
    p.add_argument("--noise", type=float, default=0.0,
                   help="force noise sigma in cN")
    p.add_argument("--tick-rate", type=float, default=1000.0,
                   help="trajectory sample rate in Hz")
    common(p)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("compensate",
                       help="derive an actuation table for a plant")
    p.add_argument("model", help="reference FDVV model JSON path")
    p.add_argument("--plant", help="plant config JSON path (default fixture)")
    p.add_argument("--config", help="compensation config JSON path")
    p.add_argument("--out-table", required=True, help="actuation table output path")
    p.add_argument("--out-report", required=True, help="convergence report CSV path")
    common(p, out=False)
    p.set_defaults(fn=cmd_compensate)

    p = sub.add_parser("render", help="render a table through the real-time loop")
    p.add_argument("--table", required=True, help="actuation table JSON path")
    p.add_argument("--model", help="reference model (vibrations + error readout)")
    p.add_argument("--plant", help="plant config JSON path (default fixture)")
    p.add_argument("--trajectory",
                   help="stroke spec travel:peak_velocity[:dwell_ms]")
    p.add_argument("--script",
                   help="reading script: trace CSV whose displacement column "
                        "drives the finger (force column ignored)")
    p.add_argument("--tick-rate", type=float, default=1000.0,
                   help="renderer tick rate in Hz")
    p.add_argument("--log", help="session log output path")
    common(p)
    p.set_defaults(fn=cmd_render)

    p = sub.add_parser("report", help="summarize a convergence report CSV")
    p.add_argument("report", help="report CSV path")
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("validate", help="validate an FDVV model document")
    p.add_argument("model", help="FDVV model JSON path")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--addr", default=os.environ.get("PRESSEM_ADDR", "127.0.0.1:7420"),
                   help="bind address host:port (env PRESSEM_ADDR)")
    p.add_argument("--data-dir",
                   default=os.environ.get("PRESSEM_DATA_DIR", "./pressem-data"),
                   help="persistence directory (env PRESSEM_DATA_DIR)")
    p.add_argument("--workers", type=int, default=2, help="job worker pool size")
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ParseError, DomainError, FitError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except PressemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

"""HTTP API for model storage, simulation runs and compensation jobs.

Zero-dependency stdlib server (ThreadingHTTPServer + JSON), file-backed under
a data directory:

    data/
      models/<id>.json         one record per model (tombstoned on delete)
      models/index.json        id manifest
      jobs/<id>.json           job record incl. progress snapshots
      jobs/<id>/               artifact files
      jobs/index.json

Endpoints (see docs/api.md): /healthz, /models, /models/{id},
/models/{id}/edits, /plants, /jobs, /jobs/{id}, /jobs/{id}/progress,
/jobs/{id}/artifacts/{name}.

Jobs run on a bounded worker pool; progress supports long-polling with a
`since` cursor. Records are written atomically (tmp + rename) so terminal
jobs survive restarts; anything mid-flight at a crash is marked failed on
the next startup.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

import numpy as np

from .capture import write_trace_csv
from .compensate import (compensate, compensation_config_from_doc,
                         error_profile, report_summary, report_to_csv,
                         serialize_table)
from .errors import DomainError, ParseError, PressemError
from .model import apply_edit, model_from_doc, model_to_doc
from .plant import (PlantConfig, generate_trajectory, plant_from_doc,
                    plant_to_doc, synth_trace_from_model)
from .renderer import Renderer, RendererConfig, run_session, write_session_log

_ID_RE = re.compile(r"^[A-Za-z0-9_-]{1,64}$")
_ARTIFACT_RE = re.compile(r"^[A-Za-z0-9._-]{1,128}$")

PLANT_PRESETS = {
    "default": PlantConfig(),
    "ideal-linear": PlantConfig(mass_g=0.0, spring_cN_per_mm=0.0,
                                damping_cN_per_mm_s=0.0, actuator_gain_cN=200.0,
                                actuator_tau_ms=0.0,
                                duty_nonlinearity_exponent=1.0,
                                sensor_noise_sigma_mm=0.0,
                                actuation_latency_ticks=0),
}

TERMINAL = ("done", "failed", "non_converged")


class ApiError(Exception):
    def __init__(self, status: int, message: str, extra: dict | None = None):
        self.status = status
        self.body = {"error": message}
        if extra:
            self.body.update(extra)
        super().__init__(message)


def _now_ms() -> int:
    return int(time.time() * 1000)


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _dump(doc) -> bytes:
    return (json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n").encode()


class ModelStore:
    """Immutable-after-write model records; edits create child records."""

    def __init__(self, root: Path):
        self.root = root
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, model_id: str) -> Path:
        if not _ID_RE.match(model_id):
            raise ApiError(404, f"unknown model {model_id!r}")
        return self.root / f"{model_id}.json"

    def _write_index(self) -> None:
        ids = sorted(p.stem for p in self.root.glob("*.json")
                     if p.name != "index.json")
        _atomic_write(self.root / "index.json", _dump({"ids": ids}))

    def _load(self, model_id: str) -> dict:
        path = self._path(model_id)
        if not path.exists():
            raise ApiError(404, f"unknown model {model_id!r}")
        return json.loads(path.read_text(encoding="utf-8"))

    def create(self, doc: dict, parent_id: str | None = None) -> dict:
        model = model_from_doc(doc)  # raises ParseError with violations
        record = {
            "id": uuid.uuid4().hex[:12],
            "created_at_ms": _now_ms(),
            "updated_at_ms": _now_ms(),
            "parent_id": parent_id,
            "deleted": False,
            "model": model_to_doc(model),
        }
        with self._lock:
            _atomic_write(self._path(record["id"]), _dump(record))
            self._write_index()
        return record

    def get(self, model_id: str) -> dict:
        record = self._load(model_id)
        if record.get("deleted"):
            raise ApiError(404, f"model {model_id!r} is deleted")
        return record

    def get_any(self, model_id: str) -> dict:
        """Fetch including tombstones (to distinguish 404 from 409)."""
        return self._load(model_id)

    def update(self, model_id: str, doc: dict) -> dict:
        model = model_from_doc(doc)
        with self._lock:
            record = self.get(model_id)
            record["model"] = model_to_doc(model)
            record["updated_at_ms"] = _now_ms()
            _atomic_write(self._path(model_id), _dump(record))
        return record

    def delete(self, model_id: str) -> None:
        with self._lock:
            record = self.get(model_id)
            record["deleted"] = True
            record["updated_at_ms"] = _now_ms()
            record["model"] = None
            _atomic_write(self._path(model_id), _dump(record))
            self._write_index()

    def list(self) -> list[dict]:
        with self._lock:
            out = []
            for path in sorted(self.root.glob("*.json")):
                if path.name == "index.json":
                    continue
                record = json.loads(path.read_text(encoding="utf-8"))
                if not record.get("deleted"):
                    out.append(record)
            return out


class JobRegistry:
    """Serialized mutation point for job records; execution fans out to a
    bounded pool. Every mutation is persisted before observers wake up."""

    def __init__(self, root: Path, workers: int):
        self.root = root
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Condition()
        self._jobs: dict[str, dict] = {}
        self._pool = ThreadPoolExecutor(max_workers=max(1, workers))
        self._recover()

    def _path(self, job_id: str) -> Path:
        return self.root / f"{job_id}.json"

    def _persist(self, job: dict) -> None:
        _atomic_write(self._path(job["id"]), _dump(job))

    def _write_index(self) -> None:
        _atomic_write(self.root / "index.json",
                      _dump({"ids": sorted(self._jobs)}))

    def _recover(self) -> None:
        for path in self.root.glob("*.json"):
            if path.name == "index.json":
                continue
            try:
                job = json.loads(path.read_text(encoding="utf-8"))
            except json.JSONDecodeError:
                continue
            if job.get("status") not in TERMINAL:
                job["status"] = "failed"
                job["error"] = "interrupted by service restart"
                self._persist(job)
            self._jobs[job["id"]] = job
        self._write_index()

    def create(self, kind: str, inputs: dict, runner) -> dict:
        job = {
            "id": uuid.uuid4().hex[:12],
            "kind": kind,
            "status": "queued",
            "created_at_ms": _now_ms(),
            "updated_at_ms": _now_ms(),
            "inputs": inputs,
            "progress": [],
            "artifacts": {},
            "error": None,
        }
        with self._lock:
            self._jobs[job["id"]] = job
            self._persist(job)
            self._write_index()
        self._pool.submit(self._run, job["id"], runner)
        return job

    def _run(self, job_id: str, runner) -> None:
        artifacts_dir = self.root / job_id
        artifacts_dir.mkdir(exist_ok=True)
        self._mutate(job_id, status="running")
        try:
            status, artifacts, extra = runner(
                artifacts_dir, lambda snap: self._push_progress(job_id, snap))
            self._mutate(job_id, status=status, artifacts=artifacts, **extra)
        except PressemError as exc:
            self._mutate(job_id, status="failed", error=str(exc))
        except Exception as exc:  # job isolation: no exception kills the pool
            self._mutate(job_id, status="failed",
                         error=f"internal error: {exc!r}")

    def _mutate(self, job_id: str, **changes) -> None:
        with self._lock:
            job = self._jobs[job_id]
            job.update(changes)
            job["updated_at_ms"] = _now_ms()
            self._persist(job)
            self._lock.notify_all()

    def _push_progress(self, job_id: str, snapshot: dict) -> None:
        with self._lock:
            job = self._jobs[job_id]
            job["progress"].append(snapshot)
            job["updated_at_ms"] = _now_ms()
            self._persist(job)
            self._lock.notify_all()

    def get(self, job_id: str) -> dict:
        with self._lock:
            if job_id not in self._jobs:
                raise ApiError(404, f"unknown job {job_id!r}")
            return json.loads(json.dumps(self._jobs[job_id]))

    def wait_progress(self, job_id: str, since: int, timeout_s: float) -> dict:
        """Block until snapshots beyond `since` exist or the job is terminal."""
        deadline = time.monotonic() + timeout_s
        with self._lock:
            if job_id not in self._jobs:
                raise ApiError(404, f"unknown job {job_id!r}")
            while True:
                job = self._jobs[job_id]
                fresh = job["progress"][since:]
                if fresh or job["status"] in TERMINAL:
                    return {"status": job["status"],
                            "snapshots": json.loads(json.dumps(fresh)),
                            "next_cursor": since + len(fresh)}
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return {"status": job["status"], "snapshots": [],
                            "next_cursor": since}
                self._lock.wait(remaining)

    def shutdown(self) -> None:
        self._pool.shutdown(wait=True)


class PressemService:
    def __init__(self, data_dir, workers: int = 2):
        self.data_dir = Path(data_dir)
        self.models = ModelStore(self.data_dir / "models")
        self.jobs = JobRegistry(self.data_dir / "jobs", workers)

    # -- job runners ----------------------------------------------------------

    def _resolve_plant(self, body: dict) -> PlantConfig:
        plant = body.get("plant", "default")
        if isinstance(plant, str):
            if plant not in PLANT_PRESETS:
                raise ApiError(422, f"unknown plant preset {plant!r}")
            config = PLANT_PRESETS[plant]
        else:
            try:
                config = plant_from_doc(plant)
            except ParseError as exc:
                raise ApiError(422, f"invalid plant config: {exc}")
        if "seed" in body:
            config = replace(config, rng_seed=int(body["seed"]))
        return config

    def _model_for_job(self, body: dict):
        model_id = body.get("model_id")
        if not isinstance(model_id, str):
            raise ApiError(422, "model_id is required")
        record = self.models.get(model_id)
        return model_from_doc(record["model"])

    def submit_job(self, body: dict) -> dict:
        if not isinstance(body, dict):
            raise ApiError(400, "job body must be a JSON object")
        kind = body.get("kind")
        if kind == "compensate":
            model = self._model_for_job(body)
            plant = self._resolve_plant(body)
            try:
                config = compensation_config_from_doc(body.get("config", {}))
            except ParseError as exc:
                raise ApiError(422, f"invalid compensation config: {exc}")

            def run(outdir: Path, push):
                table, report = compensate(plant, model, config,
                                           progress_cb=push)
                (outdir / "table.json").write_bytes(serialize_table(table))
                (outdir / "report.csv").write_text(report_to_csv(report),
                                                   encoding="utf-8")
                summary = report_summary(report)
                (outdir / "summary.json").write_bytes(_dump(summary))
                status = "done" if report.converged else "non_converged"
                return status, {"table": "table.json", "report": "report.csv",
                                "summary": "summary.json"}, {"summary": summary}

            return self.jobs.create(kind, body, run)

        if kind == "render":
            model = self._model_for_job(body)
            plant = self._resolve_plant(body)
            table_doc = body.get("table")
            trajectory = self._trajectory_from(body)
            if table_doc is None:
                raise ApiError(422, "render jobs need a table document")
            from .compensate import parse_table
            try:
                table = parse_table(json.dumps(table_doc))
            except ParseError as exc:
                raise ApiError(422, f"invalid table: {exc}")

            def run(outdir: Path, push):
                renderer = Renderer(RendererConfig(
                    table=table, vibrations=model.vibrations,
                    tick_rate_hz=trajectory.sample_rate_hz))
                result = run_session(renderer, plant, trajectory)
                write_trace_csv(result.trace, outdir / "trace.csv")
                write_session_log(result, outdir / "session.csv")
                errors = []
                for direction in ("press", "release"):
                    try:
                        err = error_profile(model, result.trace, model.grid,
                                            direction)
                    except DomainError:
                        continue
                    finite = err[np.isfinite(err)]
                    if finite.size:
                        errors.append(float(np.abs(finite).mean()))
                summary = {
                    "mean_abs_error_cN": float(np.mean(errors)) if errors else None,
                    "events": [{"tick": t, "event": e} for t, e in result.events],
                }
                (outdir / "summary.json").write_bytes(_dump(summary))
                return "done", {"trace": "trace.csv", "session": "session.csv",
                                "summary": "summary.json"}, {"summary": summary}

            return self.jobs.create(kind, body, run)

        if kind == "synth":
            model = self._model_for_job(body)
            trajectory = self._trajectory_from(body)
            noise = float(body.get("noise_sigma_cN", 0.0))
            seed = int(body.get("seed", 0))

            def run(outdir: Path, push):
                trace = synth_trace_from_model(model, trajectory, noise, seed)
                write_trace_csv(trace, outdir / "trace.csv")
                return "done", {"trace": "trace.csv"}, {}

            return self.jobs.create(kind, body, run)

        raise ApiError(422, f"unknown job kind {kind!r}")

    def _trajectory_from(self, body: dict):
        spec = body.get("trajectory")
        if not isinstance(spec, dict):
            raise ApiError(422, "trajectory object required")
        try:
            return generate_trajectory(
                float(spec["travel_mm"]), float(spec["peak_velocity_mm_s"]),
                float(spec.get("tick_rate_hz", 1000.0)),
                dwell_ms=float(spec.get("dwell_ms", 60.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ApiError(422, f"invalid trajectory spec: {exc}")
        except DomainError as exc:
            raise ApiError(422, f"invalid trajectory: {exc}")

    # -- request dispatch ------------------------------------------------------

    def handle(self, method: str, path: str, query: dict, body):
        if path == "/healthz" and method == "GET":
            return 200, {"status": "ok"}
        if path == "/plants" and method == "GET":
            return 200, {"plants": [{"name": name, "config": plant_to_doc(cfg)}
                                    for name, cfg in sorted(PLANT_PRESETS.items())]}
        if path == "/models":
            if method == "GET":
                return 200, {"models": self.models.list()}
            if method == "POST":
                record = self._create_model(body)
                return 201, record
        m = re.match(r"^/models/([^/]+)$", path)
        if m:
            model_id = m.group(1)
            if method == "GET":
                return 200, self.models.get(model_id)
            if method == "PUT":
                return 200, self._update_model(model_id, body)
            if method == "DELETE":
                self.models.delete(model_id)
                return 204, None
        m = re.match(r"^/models/([^/]+)/edits$", path)
        if m and method == "POST":
            return 201, self._edit_model(m.group(1), body)
        if path == "/jobs" and method == "POST":
            job = self.submit_job(body)
            return 202, {"id": job["id"], "status": job["status"]}
        m = re.match(r"^/jobs/([^/]+)$", path)
        if m and method == "GET":
            return 200, self.jobs.get(m.group(1))
        m = re.match(r"^/jobs/([^/]+)/progress$", path)
        if m and method == "GET":
            since = int(query.get("since", ["0"])[0])
            timeout_s = min(float(query.get("timeout_ms", ["20000"])[0]), 60000.0) / 1000.0
            return 200, self.jobs.wait_progress(m.group(1), since, timeout_s)
        m = re.match(r"^/jobs/([^/]+)/artifacts/([^/]+)$", path)
        if m and method == "GET":
            return self._artifact(m.group(1), m.group(2))
        raise ApiError(404, f"no route for {method} {path}")

    def _create_model(self, body, parent_id=None) -> dict:
        try:
            return self.models.create(body, parent_id=parent_id)
        except ParseError as exc:
            raise ApiError(400, "model document rejected",
                           {"violations": getattr(exc, "violations", [str(exc)])})

    def _update_model(self, model_id: str, body) -> dict:
        try:
            return self.models.update(model_id, body)
        except ParseError as exc:
            raise ApiError(400, "model document rejected",
                           {"violations": getattr(exc, "violations", [str(exc)])})

    def _edit_model(self, model_id: str, body) -> dict:
        record = self.models.get_any(model_id)
        if record.get("deleted"):
            raise ApiError(409, f"model {model_id!r} was deleted")
        if not isinstance(body, dict) or "op" not in body:
            raise ApiError(400, "edit body needs {op, params}")
        model = model_from_doc(record["model"])
        try:
            edited = apply_edit(model, body["op"], body.get("params", {}))
        except DomainError as exc:
            raise ApiError(400, f"edit rejected: {exc}")
        return self.models.create(model_to_doc(edited), parent_id=model_id)

    def _artifact(self, job_id: str, name: str):
        if not _ARTIFACT_RE.match(name):
            raise ApiError(404, "unknown artifact")
        job = self.jobs.get(job_id)
        if name not in job["artifacts"].values():
            raise ApiError(404, f"job has no artifact {name!r}")
        path = self.jobs.root / job_id / name
        if not path.exists():
            raise ApiError(404, f"artifact file {name!r} missing")
        ctype = "application/json" if name.endswith(".json") else "text/csv"
        return 200, ("raw", path.read_bytes(), ctype)

    def shutdown(self) -> None:
        self.jobs.shutdown()


class _Handler(BaseHTTPRequestHandler):
    service: PressemService = None  # set by make_server
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # quiet by default
        if os.environ.get("PRESSEM_HTTP_LOG"):
            super().log_message(fmt, *args)

    def _dispatch(self, method: str):
        parsed = urlparse(self.path)
        body = None
        length = int(self.headers.get("Content-Length") or 0)
        if length:
            raw = self.rfile.read(length)
            try:
                body = json.loads(raw)
            except json.JSONDecodeError as exc:
                self._send(400, {"error": f"malformed JSON body: {exc.msg}"})
                return
        try:
            result = self.service.handle(method, parsed.path,
                                         parse_qs(parsed.query), body)
        except ApiError as exc:
            self._send(exc.status, exc.body)
            return
        except PressemError as exc:
            self._send(400, {"error": str(exc)})
            return
        status, payload = result
        if isinstance(payload, tuple) and payload and payload[0] == "raw":
            _, data, ctype = payload
            self.send_response(status)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)
            return
        self._send(status, payload)

    def _send(self, status: int, payload):
        data = b"" if payload is None else _dump(payload)
        self.send_response(status)
        if data:
            self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        if data:
            self.wfile.write(data)

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def do_PUT(self):
        self._dispatch("PUT")

    def do_DELETE(self):
        self._dispatch("DELETE")


def make_server(addr: str, data_dir, workers: int = 2):
    """Build (but do not run) the HTTP server; returns (server, service)."""
    host, _, port = addr.rpartition(":")
    service = PressemService(data_dir, workers=workers)
    handler = type("BoundHandler", (_Handler,), {"service": service})
    server = ThreadingHTTPServer((host or "127.0.0.1", int(port)), handler)
    return server, service


def serve(addr: str, data_dir, workers: int = 2) -> None:
    server, service = make_server(addr, data_dir, workers)
    host, port = server.server_address[:2]
    print(f"pressem service on http://{host}:{port} (data: {data_dir})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
        service.shutdown()

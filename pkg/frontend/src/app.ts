/**
 * DOM wiring for the editor page. Talks to the workbench service through
 * ApiClient only; layout lives in index.html.
 */

import { ApiClient } from "./api.js";
import {
  convergenceToPath,
  curveToPath,
  DEFAULT_BOX,
  directionArrow,
  forceScale,
  pointerToCurvePoint,
} from "./charts.js";
import { EditorSession } from "./session.js";
import { tracePath, vibrationMarkerXs } from "./trace.js";
import type { Direction } from "./types.js";

const api = new ApiClient("");
const session = new EditorSession(api);

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function renderCurves(): void {
  if (!session.working) {
    return;
  }
  const doc = session.working;
  const svg = el<HTMLElement>("curve-chart");
  const maxForce = forceScale(doc);
  const paths: string[] = [];
  for (const curve of doc.curves) {
    const selected =
      curve.direction === session.selectedDirection && curve.bin === session.selectedBin;
    const stroke = curve.direction === "press" ? "#0a66c2" : "#b54708";
    paths.push(
      `<path d="${curveToPath(curve, doc, DEFAULT_BOX, maxForce)}" fill="none" ` +
        `stroke="${stroke}" stroke-width="${selected ? 3 : 1}" ` +
        `opacity="${selected ? 1 : 0.35}"/>`,
    );
  }
  for (const curve of doc.curves) {
    // Fig-style reading hint: arrows show press (right) vs release (left)
    const arrow = directionArrow(curve, doc, DEFAULT_BOX, maxForce);
    const tip = arrow.x + 8 * arrow.dx;
    const stroke = curve.direction === "press" ? "#0a66c2" : "#b54708";
    paths.push(
      `<path d="M${tip},${arrow.y} L${arrow.x},${arrow.y - 4} ` +
        `L${arrow.x},${arrow.y + 4} Z" fill="${stroke}" opacity="0.6"/>`,
    );
  }
  for (const vib of doc.vibrations) {
    const x =
      DEFAULT_BOX.padding +
      ((DEFAULT_BOX.width - 2 * DEFAULT_BOX.padding) * vib.trigger_mm) / doc.travel_mm;
    paths.push(
      `<line x1="${x}" y1="${DEFAULT_BOX.padding}" x2="${x}" ` +
        `y2="${DEFAULT_BOX.height - DEFAULT_BOX.padding}" stroke="#7a7a7a" ` +
        `stroke-dasharray="4 3"/>`,
    );
  }
  svg.innerHTML = paths.join("");
  renderOverlay();
  el("validation").textContent = session.validation().join("; ") || "valid";
  (el<HTMLButtonElement>("save")).disabled = !session.canSave;
  el("undo-depth").textContent = String(session.undoStack.length);
}

function renderBinPicker(): void {
  if (!session.working) {
    return;
  }
  const doc = session.working;
  const picker = el<HTMLSelectElement>("bin-picker");
  picker.innerHTML = doc.bins
    .map(
      (b, i) =>
        `<option value="${i}">bin ${i}: ${b.lo_mm_s}-${b.hi_mm_s} mm/s ` +
        `(center ${b.center_mm_s})</option>`,
    )
    .join("");
  picker.value = String(session.selectedBin);
}

async function refreshModelList(): Promise<void> {
  const { models } = await api.listModels();
  const list = el<HTMLSelectElement>("model-list");
  list.innerHTML = models
    .map((m) => `<option value="${m.id}">${m.model.name} (${m.id})</option>`)
    .join("");
}

async function loadSelected(): Promise<void> {
  const list = el<HTMLSelectElement>("model-list");
  if (!list.value) {
    return;
  }
  await session.load(list.value);
  renderBinPicker();
  renderCurves();
  el("status").textContent = `loaded ${list.value}`;
}

function wireCurveDrag(): void {
  const svg = el<HTMLElement>("curve-chart");
  let dragging = false;
  const applyDrag = (event: MouseEvent) => {
    if (!session.working) {
      return;
    }
    const rect = svg.getBoundingClientRect();
    const point = pointerToCurvePoint(
      ((event.clientX - rect.left) / rect.width) * DEFAULT_BOX.width,
      ((event.clientY - rect.top) / rect.height) * DEFAULT_BOX.height,
      session.working,
    );
    session.edit({
      op: "set_curve_point",
      params: {
        direction: session.selectedDirection,
        bin: session.selectedBin,
        index: point.index,
        force_cN: Number(point.force_cN.toFixed(3)),
        smooth_radius: Number(el<HTMLInputElement>("smooth-radius").value) || 0,
      },
    });
    renderCurves();
  };
  svg.addEventListener("mousedown", (event) => {
    dragging = true;
    applyDrag(event as MouseEvent);
  });
  svg.addEventListener("mousemove", (event) => {
    if (dragging) {
      applyDrag(event as MouseEvent);
    }
  });
  window.addEventListener("mouseup", () => {
    dragging = false;
  });
}

function renderOverlay(): void {
  if (!session.working) {
    return;
  }
  const doc = session.working;
  const svg = el<HTMLElement>("overlay-chart");
  const maxForce = forceScale(doc);
  const parts: string[] = [];
  const reference = doc.curves.find(
    (c) => c.direction === session.selectedDirection && c.bin === session.selectedBin,
  );
  if (reference) {
    parts.push(
      `<path d="${curveToPath(reference, doc, DEFAULT_BOX, maxForce)}" ` +
        `fill="none" stroke="#0a66c2" stroke-width="2"/>`,
    );
  }
  const run = session.lastWhatIf;
  if (run?.trace) {
    parts.push(
      `<path d="${tracePath(run.trace, doc, maxForce)}" fill="none" ` +
        `stroke="#1f9d55" stroke-width="1.5" opacity="0.85"/>`,
    );
    for (const x of vibrationMarkerXs(run.trace, run.events, doc)) {
      parts.push(
        `<line x1="${x}" y1="${DEFAULT_BOX.padding}" x2="${x}" ` +
          `y2="${DEFAULT_BOX.height - DEFAULT_BOX.padding}" ` +
          `stroke="#c92a2a" stroke-width="1.5"/>`,
      );
    }
  }
  svg.innerHTML = parts.join("");
}

async function whatIf(): Promise<void> {
  if (!session.lastCompensation?.tableDoc) {
    el("status").textContent = "run compensation first";
    return;
  }
  el("status").textContent = "what-if running…";
  const result = await session.whatIfRun(
    el<HTMLSelectElement>("plant-picker").value,
    session.lastCompensation.tableDoc,
    {
      travel_mm: session.working!.travel_mm,
      peak_velocity_mm_s: Number(el<HTMLInputElement>("whatif-velocity").value),
    },
  );
  el("mean-error").textContent =
    result.meanErrorCN === null ? "n/a" : `${result.meanErrorCN.toFixed(3)} cN`;
  el("status").textContent = `what-if ${result.status}`;
  renderOverlay();
}

async function compensateLoaded(): Promise<void> {
  el("status").textContent = "compensating…";
  const chart = el<HTMLElement>("convergence-chart");
  const result = await session.runCompensation(
    el<HTMLSelectElement>("plant-picker").value,
    {},
    () => {
      chart.innerHTML = `<path d="${convergenceToPath(
        session.lastCompensation?.series ?? [],
      )}" fill="none" stroke="#0a66c2" stroke-width="2"/>`;
    },
  );
  chart.innerHTML = `<path d="${convergenceToPath(result.series)}" fill="none" ` +
    `stroke="#0a66c2" stroke-width="2"/>`;
  el("status").textContent = `compensation ${result.status}`;
}

async function boot(): Promise<void> {
  const { plants } = await api.listPlants();
  el<HTMLSelectElement>("plant-picker").innerHTML = plants
    .map((p) => `<option value="${p.name}">${p.name}</option>`)
    .join("");
  await refreshModelList();

  el("load").addEventListener("click", () => void loadSelected());
  el("undo").addEventListener("click", () => {
    session.undo();
    renderCurves();
  });
  el("save").addEventListener("click", () => {
    void session.save().then((record) => {
      el("status").textContent = `saved as ${record.id}`;
      void refreshModelList();
      renderCurves();
    });
  });
  el("scale-apply").addEventListener("click", () => {
    session.edit({
      op: "scale_force",
      params: { factor: Number(el<HTMLInputElement>("scale-factor").value) },
    });
    renderCurves();
  });
  el<HTMLSelectElement>("bin-picker").addEventListener("change", (event) => {
    session.selectedBin = Number((event.target as HTMLSelectElement).value);
    renderCurves();
  });
  el<HTMLSelectElement>("direction-picker").addEventListener("change", (event) => {
    session.selectedDirection = (event.target as HTMLSelectElement)
      .value as Direction;
    renderCurves();
  });
  el("run-compensate").addEventListener("click", () => void compensateLoaded());
  el("run-whatif").addEventListener("click", () => void whatIf());
  wireCurveDrag();
}

void boot();

/**
 * DOM wiring: shape browser, PCA sliders with explained-variance labels,
 * overlay toggles, transfer pairing, error banner, and URL state sync.
 */

import { ApiClient, MeshPayload, GridPayload } from "./api.js";
import { EditorApp } from "./app.js";
import { Viewport } from "./scene.js";
import { EditorState, SLIDER_COUNT, SLIDER_LIMIT } from "./state.js";

const baseUrl =
  new URLSearchParams(location.search).get("api") ?? "http://127.0.0.1:8123";

const el = <T extends HTMLElement>(id: string): T => {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
};

const banner = el<HTMLDivElement>("banner");
const shapeList = el<HTMLDivElement>("shape-list");
const sliderPanel = el<HTMLDivElement>("sliders");
const mainView = new Viewport(el<HTMLDivElement>("viewport"));
const transferView = new Viewport(el<HTMLDivElement>("transfer-viewport"));
const srcSelect = el<HTMLSelectElement>("transfer-source");
const dstSelect = el<HTMLSelectElement>("transfer-target");
const transferButton = el<HTMLButtonElement>("transfer-run");
const transferNote = el<HTMLSpanElement>("transfer-note");

let lastMesh: MeshPayload | null = null;
let lastGrid: GridPayload | null = null;

const app = new EditorApp(new ApiClient(baseUrl), {
  renderMesh(mesh, grid, baseMesh) {
    lastMesh = mesh;
    lastGrid = grid;
    mainView.showMesh(mesh, baseMesh, {
      wireframe: app.state.wireframe,
      deviation: app.state.deviation,
    });
    mainView.showGrid(app.state.wireframe ? grid : null);
  },
  renderTransfer(mesh) {
    if (mesh) transferView.showMesh(mesh, null, { wireframe: false, deviation: false });
  },
  showBanner(message) {
    banner.textContent = message ?? "";
    banner.style.display = message ? "block" : "none";
  },
  stateChanged(state) {
    syncControls(state);
    const query = app.encodeUrlQuery();
    history.replaceState(null, "", query ? `?${query}` : location.pathname);
  },
});

function rebuildShapeList(): void {
  shapeList.replaceChildren();
  srcSelect.replaceChildren();
  dstSelect.replaceChildren();
  for (const shape of app.shapes) {
    const button = document.createElement("button");
    button.textContent = `${shape.id} (${shape.point_count} pts${shape.has_mesh ? ", mesh" : ""})`;
    button.dataset.shape = shape.id;
    button.addEventListener("click", () => void app.loadShape(shape.id));
    shapeList.appendChild(button);
    for (const select of [srcSelect, dstSelect]) {
      const option = document.createElement("option");
      option.value = shape.id;
      option.textContent = shape.id;
      select.appendChild(option);
    }
  }
}

function rebuildSliders(): void {
  sliderPanel.replaceChildren();
  const count = Math.min(SLIDER_COUNT, app.pca?.n_components ?? 0);
  const ratios = app.pca?.explained_variance_ratio ?? [];
  for (let i = 0; i < count; i++) {
    const row = document.createElement("label");
    row.className = "slider-row";
    const caption = document.createElement("span");
    caption.textContent = `mode ${i + 1} (${(100 * (ratios[i] ?? 0)).toFixed(1)}%)`;
    const input = document.createElement("input");
    input.type = "range";
    input.min = String(-SLIDER_LIMIT);
    input.max = String(SLIDER_LIMIT);
    input.step = "0.01";
    input.value = "0";
    input.dataset.index = String(i);
    input.addEventListener("input", () => app.setSlider(i, Number(input.value)));
    const value = document.createElement("span");
    value.className = "slider-value";
    value.textContent = "0.00";
    row.append(caption, input, value);
    sliderPanel.appendChild(row);
  }
  const reset = document.createElement("button");
  reset.textContent = "reset";
  reset.addEventListener("click", () => app.reset());
  sliderPanel.appendChild(reset);
}

function syncControls(state: EditorState): void {
  for (const button of shapeList.querySelectorAll<HTMLButtonElement>("button[data-shape]")) {
    button.classList.toggle("active", button.dataset.shape === state.shapeId);
  }
  for (const input of sliderPanel.querySelectorAll<HTMLInputElement>("input[type=range]")) {
    const i = Number(input.dataset.index);
    if (document.activeElement !== input) input.value = String(state.sliders[i]);
    const label = input.parentElement?.querySelector<HTMLSpanElement>(".slider-value");
    if (label) label.textContent = state.sliders[i].toFixed(2);
  }
  el<HTMLInputElement>("toggle-wireframe").checked = state.wireframe;
  el<HTMLInputElement>("toggle-deviation").checked = state.deviation;
  if (state.transferSource) srcSelect.value = state.transferSource;
  if (state.transferTarget) dstSelect.value = state.transferTarget;
}

el<HTMLInputElement>("toggle-wireframe").addEventListener("change", (e) => {
  app.setOverlay("wireframe", (e.target as HTMLInputElement).checked);
  mainView.showGrid(app.state.wireframe ? lastGrid : null);
});
el<HTMLInputElement>("toggle-deviation").addEventListener("change", (e) => {
  app.setOverlay("deviation", (e.target as HTMLInputElement).checked);
  if (lastMesh) {
    mainView.showMesh(lastMesh, app.baseMesh, {
      wireframe: app.state.wireframe,
      deviation: app.state.deviation,
    });
  }
});
for (const select of [srcSelect, dstSelect]) {
  select.addEventListener("change", () =>
    app.setTransferPair(srcSelect.value || null, dstSelect.value || null),
  );
}
transferButton.addEventListener("click", async () => {
  transferNote.textContent = "";
  app.setTransferPair(srcSelect.value || null, dstSelect.value || null);
  const result = await app.runTransfer();
  if (result === null && banner.textContent?.includes("resolution_mismatch")) {
    transferButton.disabled = true;
    transferNote.textContent = "grids have different resolutions; pick another pair";
  } else {
    transferButton.disabled = false;
  }
});
for (const select of [srcSelect, dstSelect]) {
  select.addEventListener("change", () => {
    transferButton.disabled = false;
    transferNote.textContent = "";
  });
}

void app.start(location.search).then(() => {
  rebuildShapeList();
  rebuildSliders();
  syncControls(app.state);
});

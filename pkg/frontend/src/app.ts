import { AnnotationApi, ApiError, SessionPayload } from "./api.js";
import { OrbitCamera } from "./camera.js";
import { boundingBox } from "./mesh.js";
import { pickSurfacePoint } from "./picking.js";
import { patchColor } from "./palette.js";
import { MeshViewport } from "./renderer.js";
import { ViewState } from "./state.js";
import type { Vec3 } from "./math.js";

const CLICK1_COLOR: Vec3 = [0.2, 0.4, 1.0];
const AXIS_COLOR: Vec3 = [1.0, 0.15, 0.15];
const BODY_BASE: Vec3 = [0.72, 0.72, 0.78];
const OBJECT_BASE: Vec3 = [0.82, 0.62, 0.38];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function banner(message: string, isError = false): void {
  const bar = el<HTMLDivElement>("banner");
  bar.textContent = message;
  bar.className = isError ? "banner error" : "banner";
  bar.style.display = message ? "block" : "none";
}

function attachOrbit(canvas: HTMLCanvasElement, camera: OrbitCamera, redraw: () => void,
                     onClick?: (x: number, y: number) => void): void {
  let dragging = false;
  let moved = false;
  let last: [number, number] = [0, 0];
  canvas.addEventListener("mousedown", (e) => {
    dragging = true;
    moved = false;
    last = [e.offsetX, e.offsetY];
  });
  canvas.addEventListener("mousemove", (e) => {
    if (!dragging) return;
    const dx = e.offsetX - last[0];
    const dy = e.offsetY - last[1];
    if (Math.abs(dx) + Math.abs(dy) > 2) moved = true;
    camera.rotate(dx * 0.01, dy * 0.01);
    last = [e.offsetX, e.offsetY];
    redraw();
  });
  canvas.addEventListener("mouseup", (e) => {
    dragging = false;
    if (!moved && onClick) onClick(e.offsetX, e.offsetY);
  });
  canvas.addEventListener("mouseleave", () => { dragging = false; });
  canvas.addEventListener("wheel", (e) => {
    e.preventDefault();
    camera.zoom(e.deltaY > 0 ? 1.1 : 1 / 1.1);
    redraw();
  });
}

export async function startApp(base: string, sessionId: string): Promise<void> {
  const api = new AnnotationApi(base, sessionId);
  let session: SessionPayload;
  try {
    session = await api.session();
  } catch (err) {
    banner(`failed to load session: ${(err as Error).message}`, true);
    return;
  }

  el<HTMLDivElement>("image-label").textContent =
    `${session.image} — object: ${session.object_id}`;

  const state = new ViewState(session.patches.map((p) => p.patch_id), session.committed);
  const previews = new Map<number, { position: Vec3 }[]>();

  const bodyBox = boundingBox(session.body);
  const objectBox = boundingBox(session.object);
  const bodyCam = new OrbitCamera(bodyBox.center, bodyBox.radius * 3.2);
  const objectCam = new OrbitCamera(objectBox.center, objectBox.radius * 3.2);
  const bodyView = new MeshViewport(el<HTMLCanvasElement>("body-canvas"), bodyCam,
                                    session.body, BODY_BASE);
  const objectView = new MeshViewport(el<HTMLCanvasElement>("object-canvas"), objectCam,
                                      session.object, OBJECT_BASE);

  const patchSelect = el<HTMLSelectElement>("patch-select");
  for (const patch of session.patches) {
    const option = document.createElement("option");
    option.value = String(patch.patch_id);
    option.textContent = `patch ${patch.patch_id} (${patch.vertices.length} verts)`;
    patchSelect.appendChild(option);
  }

  function redrawBody(): void {
    // body panel is read-only: patches in their colors plus the active axis
    bodyView.colorVertices(session.patches.map((p, i) => ({
      vertices: p.vertices,
      color: patchColor(i),
    })));
    const active = session.patches.find((p) => p.patch_id === state.activePatch);
    const axisPoints = (active?.axis.waypoints ?? []).map((w) => ({
      position: [w[0], w[1], w[2]] as Vec3,
      color: AXIS_COLOR,
    }));
    bodyView.setPoints(axisPoints);
    bodyView.draw();
  }

  function redrawObject(): void {
    const overlays: { position: Vec3; color: Vec3 }[] = [];
    for (const [patchId, points] of previews) {
      const idx = session.patches.findIndex((p) => p.patch_id === patchId);
      for (const point of points) {
        overlays.push({ position: point.position, color: patchColor(idx) });
      }
    }
    for (const pick of state.clickBuffer) {
      overlays.push({ position: pick.position, color: CLICK1_COLOR });
    }
    objectView.setPoints(overlays);
    objectView.draw();
  }

  function refreshControls(): void {
    patchSelect.value = String(state.activePatch);
    el<HTMLButtonElement>("export-btn").disabled = !state.canExport();
    el<HTMLDivElement>("status").textContent =
      `active patch ${state.activePatch} | committed: ` +
      `${[...state.committed].sort((a, b) => a - b).join(", ") || "none"}`;
  }

  async function handleObjectClick(x: number, y: number): Promise<void> {
    const canvas = objectView.canvas;
    const pick = pickSurfacePoint(x, y, canvas.width, canvas.height, objectCam,
                                  session.object);
    if (!pick) {
      banner("click missed the object mesh", true);
      return;
    }
    banner("");
    const outcome = state.registerPick({ point: { face: pick.face, bary: pick.bary },
                                         position: pick.position });
    if (outcome.kind === "buffered") {
      redrawObject();
      return;
    }
    try {
      const preview = await api.transfer(state.activePatch, outcome.click1,
                                         outcome.click2 as [number, number, number]);
      previews.set(state.activePatch, preview.points.map((p) => ({
        position: [p.position[0], p.position[1], p.position[2]] as Vec3,
      })));
      state.transferSucceeded(state.activePatch);
      if (preview.dropped.length > 0) {
        banner(`${preview.dropped.length} points dropped`);
      }
    } catch (err) {
      state.transferFailed();
      banner(`transfer failed: ${(err as ApiError).message}`, true);
    }
    redrawObject();
    refreshControls();
  }

  attachOrbit(bodyView.canvas, bodyCam, redrawBody);
  attachOrbit(objectView.canvas, objectCam, redrawObject, (x, y) => {
    void handleObjectClick(x, y);
  });

  patchSelect.addEventListener("change", () => {
    state.setActive(Number(patchSelect.value));
    redrawBody();
    redrawObject();
    refreshControls();
  });

  el<HTMLButtonElement>("commit-btn").addEventListener("click", async () => {
    try {
      const result = await api.commit(state.activePatch);
      state.commitApplied(result.committed);
      banner(`patch ${state.activePatch} committed`);
    } catch (err) {
      banner(`commit failed: ${(err as ApiError).message}`, true);
    }
    refreshControls();
  });

  el<HTMLButtonElement>("undo-btn").addEventListener("click", async () => {
    try {
      const result = await api.undo();
      state.commitApplied(result.committed);
      banner("undone");
    } catch (err) {
      banner(`undo failed: ${(err as ApiError).message}`, true);
    }
    refreshControls();
  });

  el<HTMLButtonElement>("next-btn").addEventListener("click", () => {
    if (!state.nextContact()) {
      banner("all patches visited; ready to export");
    }
    redrawBody();
    redrawObject();
    refreshControls();
  });

  el<HTMLButtonElement>("reset-btn").addEventListener("click", () => {
    bodyCam.reset();
    objectCam.reset();
    redrawBody();
    redrawObject();
  });

  el<HTMLButtonElement>("export-btn").addEventListener("click", async () => {
    try {
      const doc = await api.export();
      const blob = new Blob([JSON.stringify(doc, null, 2)], { type: "application/json" });
      const a = document.createElement("a");
      a.href = URL.createObjectURL(blob);
      a.download = `${sessionId}-annotation.json`;
      a.click();
      URL.revokeObjectURL(a.href);
    } catch (err) {
      banner(`export failed: ${(err as ApiError).message}`, true);
    }
  });

  redrawBody();
  redrawObject();
  refreshControls();
}

declare global {
  interface Window { startAnnotator: typeof startApp }
}

if (typeof window !== "undefined") {
  window.startAnnotator = startApp;
}

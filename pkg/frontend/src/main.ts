/** Interactive scribble UI: draw shadow/lit strokes, watch the detected
 * mask, refine, run removal and compare before/after with a slider. All
 * imagery comes from service artifacts; the client never edits pixels. */

import { ArtifactKind, ServiceError, UmbraClient, makeClient, pollUntil } from "./api.js";
import { splitColumn } from "./compare.js";
import { DEFAULT_TINT, buildOverlay } from "./overlay.js";
import { CanvasStroke, MaskInfo, StrokeLabel, StrokeQueue, finalizeStroke } from "./strokes.js";
import { Point, ViewTransform, fitTransform, identityTransform, pan, screenToImage, zoomAt } from "./transform.js";

interface AppState {
  client: UmbraClient;
  sessionId: string | null;
  imageW: number;
  imageH: number;
  transform: ViewTransform;
  label: StrokeLabel;
  radius: number;
  drawing: Point[] | null;
  strokes: CanvasStroke[];
  maskVisible: boolean;
  maskBitmap: ImageBitmap | null;
  overlay: ImageData | null;
  originalBitmap: ImageBitmap | null;
  resultBitmap: ImageBitmap | null;
  slider: number;
  revision: number;
  removalBusy: boolean;
}

const state: AppState = {
  client: makeClient(""),
  sessionId: null,
  imageW: 0,
  imageH: 0,
  transform: identityTransform(),
  label: "shadow",
  radius: 6,
  drawing: null,
  strokes: [],
  maskVisible: true,
  maskBitmap: null,
  overlay: null,
  originalBitmap: null,
  resultBitmap: null,
  slider: 0,
  revision: 0,
  removalBusy: false,
};

const canvas = document.getElementById("stage") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const status = document.getElementById("status") as HTMLElement;
const fileInput = document.getElementById("file") as HTMLInputElement;
const removeBtn = document.getElementById("remove") as HTMLButtonElement;
const compareInput = document.getElementById("compare") as HTMLInputElement;
const radiusInput = document.getElementById("radius") as HTMLInputElement;
const maskToggle = document.getElementById("mask-toggle") as HTMLInputElement;
const pixelCount = document.getElementById("pixel-count") as HTMLElement;

const queue = new StrokeQueue(uploadStroke, onMask, (err) => toast(describeError(err)));

function toast(message: string): void {
  status.textContent = message;
  status.classList.add("visible");
  window.setTimeout(() => status.classList.remove("visible"), 4000);
}

function describeError(err: unknown): string {
  if (err instanceof ServiceError) {
    return `${err.code}: ${err.message}`;
  }
  return String(err);
}

async function uploadStroke(stroke: CanvasStroke): Promise<MaskInfo> {
  if (!state.sessionId) {
    throw new Error("no session");
  }
  return state.client.addStrokes(state.sessionId, [stroke]);
}

async function onMask(info: MaskInfo): Promise<void> {
  state.revision = info.revision;
  pixelCount.textContent = `${info.shadowPixelCount.toLocaleString()} shadow px`;
  await refreshMask();
  draw();
}

async function refreshMask(): Promise<void> {
  if (!state.sessionId) {
    return;
  }
  const blob = await state.client.fetchArtifact(state.sessionId, "mask");
  const bitmap = await createImageBitmap(blob);
  state.maskBitmap = bitmap;
  const off = new OffscreenCanvas(bitmap.width, bitmap.height);
  const octx = off.getContext("2d")!;
  octx.drawImage(bitmap, 0, 0);
  const raw = octx.getImageData(0, 0, bitmap.width, bitmap.height);
  const tinted = buildOverlay(raw.data, DEFAULT_TINT);
  state.overlay = new ImageData(tinted, bitmap.width, bitmap.height);
}

async function loadArtifactBitmap(kind: ArtifactKind): Promise<ImageBitmap> {
  const blob = await state.client.fetchArtifact(state.sessionId!, kind);
  return createImageBitmap(blob);
}

function resizeCanvas(): void {
  canvas.width = canvas.clientWidth * devicePixelRatio;
  canvas.height = canvas.clientHeight * devicePixelRatio;
  draw();
}

function draw(): void {
  ctx.save();
  ctx.setTransform(devicePixelRatio, 0, 0, devicePixelRatio, 0, 0);
  ctx.clearRect(0, 0, canvas.clientWidth, canvas.clientHeight);
  if (!state.originalBitmap) {
    ctx.restore();
    return;
  }
  const t = state.transform;
  ctx.translate(t.offsetX, t.offsetY);
  ctx.scale(t.scale, t.scale);
  ctx.imageSmoothingEnabled = t.scale < 2;

  if (state.resultBitmap) {
    // compare view: original left of the split, result right of it
    const split = splitColumn(state.slider, state.imageW);
    ctx.drawImage(state.resultBitmap, 0, 0);
    if (split > 0) {
      ctx.drawImage(state.originalBitmap, 0, 0, split, state.imageH, 0, 0, split, state.imageH);
    }
    ctx.strokeStyle = "#ffffffcc";
    ctx.lineWidth = 1 / t.scale;
    ctx.beginPath();
    ctx.moveTo(split, 0);
    ctx.lineTo(split, state.imageH);
    ctx.stroke();
  } else {
    ctx.drawImage(state.originalBitmap, 0, 0);
  }

  if (state.maskVisible && state.overlay && !state.resultBitmap) {
    const off = new OffscreenCanvas(state.imageW, state.imageH);
    off.getContext("2d")!.putImageData(state.overlay, 0, 0);
    ctx.drawImage(off, 0, 0);
  }

  if (!state.resultBitmap) {
    drawStrokes();
  }
  ctx.restore();
}

function drawStrokes(): void {
  const render = (stroke: CanvasStroke, alpha: number) => {
    ctx.strokeStyle = stroke.label === "shadow" ? `rgba(230,60,60,${alpha})` : `rgba(60,110,230,${alpha})`;
    ctx.lineWidth = stroke.radius * 2;
    ctx.lineCap = "round";
    ctx.lineJoin = "round";
    ctx.beginPath();
    const [first, ...rest] = stroke.points;
    ctx.moveTo(first.x, first.y);
    if (rest.length === 0) {
      ctx.lineTo(first.x + 0.01, first.y);
    }
    for (const p of rest) {
      ctx.lineTo(p.x, p.y);
    }
    ctx.stroke();
  };
  for (const stroke of state.strokes) {
    render(stroke, 0.65);
  }
  if (state.drawing && state.drawing.length > 0) {
    render({ label: state.label, radius: state.radius, points: state.drawing }, 0.9);
  }
}

// --------------------------------------------------------------------------
// pointer handling

let panning: Point | null = null;

canvas.addEventListener("pointerdown", (ev) => {
  if (!state.sessionId || state.resultBitmap) {
    return;
  }
  if (ev.button === 1 || ev.shiftKey) {
    panning = { x: ev.offsetX, y: ev.offsetY };
    return;
  }
  canvas.setPointerCapture(ev.pointerId);
  state.drawing = [screenToImage(state.transform, { x: ev.offsetX, y: ev.offsetY })];
  draw();
});

canvas.addEventListener("pointermove", (ev) => {
  if (panning) {
    state.transform = pan(state.transform, ev.offsetX - panning.x, ev.offsetY - panning.y);
    panning = { x: ev.offsetX, y: ev.offsetY };
    draw();
    return;
  }
  if (!state.drawing) {
    return;
  }
  state.drawing.push(screenToImage(state.transform, { x: ev.offsetX, y: ev.offsetY }));
  draw();
});

canvas.addEventListener("pointerup", (ev) => {
  if (panning) {
    panning = null;
    return;
  }
  if (!state.drawing) {
    return;
  }
  const stroke = finalizeStroke(state.label, state.radius, state.drawing, state.imageW, state.imageH);
  state.drawing = null;
  if (!stroke) {
    toast("stroke outside the image was discarded");
    draw();
    return;
  }
  state.strokes.push(stroke);
  queue.enqueue(stroke);
  draw();
});

canvas.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  const factor = ev.deltaY < 0 ? 1.2 : 1 / 1.2;
  state.transform = zoomAt(state.transform, factor, { x: ev.offsetX, y: ev.offsetY });
  draw();
});

// --------------------------------------------------------------------------
// toolbar

for (const id of ["pick-shadow", "pick-lit"] as const) {
  document.getElementById(id)!.addEventListener("click", () => {
    state.label = id === "pick-shadow" ? "shadow" : "lit";
    document.getElementById("pick-shadow")!.classList.toggle("active", state.label === "shadow");
    document.getElementById("pick-lit")!.classList.toggle("active", state.label === "lit");
  });
}

radiusInput.addEventListener("input", () => {
  state.radius = Number(radiusInput.value);
});

maskToggle.addEventListener("change", () => {
  state.maskVisible = maskToggle.checked;
  draw();
});

window.addEventListener("keydown", (ev) => {
  if (ev.key === "m") {
    maskToggle.checked = !maskToggle.checked;
    state.maskVisible = maskToggle.checked;
    draw();
  }
});

fileInput.addEventListener("change", async () => {
  const file = fileInput.files?.[0];
  if (!file) {
    return;
  }
  try {
    const info = await state.client.createSession(file, file.name);
    state.sessionId = info.id;
    state.imageW = info.width;
    state.imageH = info.height;
    state.strokes = [];
    state.maskBitmap = null;
    state.overlay = null;
    state.resultBitmap = null;
    state.originalBitmap = await loadArtifactBitmap("original");
    state.transform = fitTransform(info.width, info.height, canvas.clientWidth, canvas.clientHeight);
    removeBtn.disabled = false;
    toast(`session ${info.id.slice(0, 8)} ready; draw one shadow and one lit stroke`);
    draw();
  } catch (err) {
    toast(describeError(err));
  }
});

removeBtn.addEventListener("click", async () => {
  if (!state.sessionId || state.removalBusy) {
    return;
  }
  state.removalBusy = true;
  removeBtn.disabled = true;
  toast("removing shadow…");
  try {
    await queue.idle();
    const removal = state.client.runRemoval(state.sessionId, {});
    // poll while the removal computes so the result appears as soon as the
    // artifact is available
    const ready = pollUntil(async () => {
      try {
        await state.client.fetchArtifact(state.sessionId!, "result");
        return true;
      } catch {
        return false;
      }
    }, 500);
    await removal;
    await ready;
    state.resultBitmap = await loadArtifactBitmap("result");
    compareInput.disabled = false;
    state.slider = Number(compareInput.value) / 100;
    toast("done; drag the slider to compare");
  } catch (err) {
    toast(describeError(err));
  } finally {
    state.removalBusy = false;
    removeBtn.disabled = false;
    draw();
  }
});

document.getElementById("back-to-strokes")!.addEventListener("click", () => {
  state.resultBitmap = null;
  compareInput.disabled = true;
  draw();
});

compareInput.addEventListener("input", () => {
  state.slider = Number(compareInput.value) / 100;
  draw();
});

window.addEventListener("resize", resizeCanvas);
resizeCanvas();
toast("open an image to start");

/** Canvas UI wiring: file pickers, paint tools, compose button, history. */

import { ComposeClient } from "./api.js";
import { base64ToBytes, bytesToBase64 } from "./png.js";
import { MaskRaster } from "./raster.js";
import { HistoryEntry, LoadedImage, MASK_LEVELS, Session } from "./session.js";

type Tool = "brush" | "eraser" | "rectangle";

const session = new Session();
const client = new ComposeClient(window.location.origin);

let tool: Tool = "brush";
let brushRadius = 12;
let painting = false;
let last: { x: number; y: number } | null = null;
let rectStart: { x: number; y: number } | null = null;

const el = {
  backgroundInput: byId<HTMLInputElement>("background-input"),
  objectInput: byId<HTMLInputElement>("object-input"),
  objectPreview: byId<HTMLImageElement>("object-preview"),
  canvas: byId<HTMLCanvasElement>("paint-canvas"),
  tools: Array.from(document.querySelectorAll<HTMLButtonElement>("[data-tool]")),
  brushSize: byId<HTMLInputElement>("brush-size"),
  undoButton: byId<HTMLButtonElement>("undo-button"),
  clearButton: byId<HTMLButtonElement>("clear-button"),
  levelSelect: byId<HTMLSelectElement>("level-select"),
  composeButton: byId<HTMLButtonElement>("compose-button"),
  exportLink: byId<HTMLAnchorElement>("export-mask"),
  status: byId<HTMLElement>("status-line"),
  errorBox: byId<HTMLElement>("error-box"),
  result: byId<HTMLImageElement>("result-image"),
  history: byId<HTMLElement>("history-strip"),
};

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function loadImageFile(file: File): Promise<LoadedImage> {
  const bytes = new Uint8Array(await file.arrayBuffer());
  const bitmap = await createImageBitmap(new Blob([bytes]));
  try {
    return {
      name: file.name,
      width: bitmap.width,
      height: bitmap.height,
      pngBase64: bytesToBase64(bytes),
    };
  } finally {
    bitmap.close();
  }
}

function pngUrl(b64: string): string {
  return `data:image/png;base64,${b64}`;
}

const backdrop = new Image();

function redraw(): void {
  const ctx = el.canvas.getContext("2d");
  if (!ctx || !session.mask) return;
  ctx.clearRect(0, 0, el.canvas.width, el.canvas.height);
  if (backdrop.complete && backdrop.naturalWidth > 0) {
    ctx.drawImage(backdrop, 0, 0);
  }
  ctx.fillStyle = "rgba(233, 69, 96, 0.55)";
  const mask: MaskRaster = session.mask;
  for (let y = 0; y < mask.height; y++) {
    let runStart = -1;
    for (let x = 0; x <= mask.width; x++) {
      const on = x < mask.width && mask.data[y * mask.width + x] === 1;
      if (on && runStart < 0) runStart = x;
      if (!on && runStart >= 0) {
        ctx.fillRect(runStart, y, x - runStart, 1);
        runStart = -1;
      }
    }
  }
  if (rectStart && last && tool === "rectangle" && painting) {
    ctx.strokeStyle = "#e94560";
    ctx.strokeRect(
      Math.min(rectStart.x, last.x) + 0.5, Math.min(rectStart.y, last.y) + 0.5,
      Math.abs(last.x - rectStart.x), Math.abs(last.y - rectStart.y));
  }
}

function refreshControls(): void {
  el.composeButton.disabled = !session.canSubmit();
  el.undoButton.disabled = session.mask === null;
  el.status.textContent = session.inFlight
    ? "composing…"
    : session.background
      ? `mask level ${session.maskLevel}, ${session.history.length} result(s)`
      : "load a background to start painting";
  const error = session.lastError;
  el.errorBox.hidden = error === null;
  el.errorBox.textContent = error === null ? "" : describe(error);
  el.errorBox.dataset.kind = error?.kind ?? "";
  if (session.mask && !session.maskIsEmpty()) {
    el.exportLink.href = pngUrl(bytesToBase64(maskBytes()));
    el.exportLink.removeAttribute("aria-disabled");
  } else {
    el.exportLink.href = "#";
    el.exportLink.setAttribute("aria-disabled", "true");
  }
}

function describe(error: NonNullable<typeof session.lastError>): string {
  if (error.kind === "field") return `${error.field}: ${error.message}`;
  return error.message;
}

function maskBytes(): Uint8Array {
  return base64ToBytes(session.buildPayload().mask);
}

function canvasPoint(event: PointerEvent): { x: number; y: number } {
  const rect = el.canvas.getBoundingClientRect();
  return {
    x: (event.clientX - rect.left) * (el.canvas.width / rect.width),
    y: (event.clientY - rect.top) * (el.canvas.height / rect.height),
  };
}

function renderHistory(): void {
  el.history.replaceChildren();
  session.history.forEach((entry: HistoryEntry, index: number) => {
    const img = document.createElement("img");
    img.src = pngUrl(entry.image);
    img.title = `result ${index + 1} (level ${entry.maskLevel}, ${entry.jobId})`;
    img.addEventListener("click", () => { el.result.src = img.src; });
    el.history.append(img);
  });
}

el.backgroundInput.addEventListener("change", async () => {
  const file = el.backgroundInput.files?.[0];
  if (!file) return;
  try {
    const image = await loadImageFile(file);
    session.setBackground(image);
    el.canvas.width = image.width;
    el.canvas.height = image.height;
    backdrop.onload = redraw;
    backdrop.src = pngUrl(image.pngBase64);
  } catch (error) {
    session.lastError = { kind: "field", field: "background", message: String(error) };
  }
  redraw();
  refreshControls();
});

el.objectInput.addEventListener("change", async () => {
  const file = el.objectInput.files?.[0];
  if (!file) return;
  try {
    const image = await loadImageFile(file);
    session.setObject(image);
    el.objectPreview.src = pngUrl(image.pngBase64);
    el.objectPreview.hidden = false;
  } catch (error) {
    session.lastError = { kind: "field", field: "object", message: String(error) };
  }
  refreshControls();
});

for (const button of el.tools) {
  button.addEventListener("click", () => {
    tool = button.dataset.tool as Tool;
    el.tools.forEach((b) => b.classList.toggle("active", b === button));
  });
}

el.brushSize.addEventListener("input", () => {
  brushRadius = Number(el.brushSize.value);
});

el.canvas.addEventListener("pointerdown", (event) => {
  if (!session.mask) return;
  el.canvas.setPointerCapture(event.pointerId);
  painting = true;
  const p = canvasPoint(event);
  session.beginStroke();
  if (tool === "rectangle") {
    rectStart = p;
  } else {
    session.applyBrush(p.x, p.y, brushRadius, tool === "eraser");
  }
  last = p;
  redraw();
});

el.canvas.addEventListener("pointermove", (event) => {
  if (!painting || !session.mask || !last) return;
  const p = canvasPoint(event);
  if (tool !== "rectangle") {
    session.applyBrushSegment(last.x, last.y, p.x, p.y, brushRadius, tool === "eraser");
  }
  last = p;
  redraw();
});

el.canvas.addEventListener("pointerup", (event) => {
  if (!painting) return;
  painting = false;
  const p = canvasPoint(event);
  if (tool === "rectangle" && rectStart) {
    session.applyRectangle(rectStart.x, rectStart.y, p.x, p.y);
    rectStart = null;
  }
  last = null;
  redraw();
  refreshControls();
});

el.undoButton.addEventListener("click", () => {
  session.undo();
  redraw();
  refreshControls();
});

el.clearButton.addEventListener("click", () => {
  if (!session.mask) return;
  session.beginStroke();
  session.mask.data.fill(0);
  redraw();
  refreshControls();
});

el.levelSelect.addEventListener("change", () => {
  session.setMaskLevel(Number(el.levelSelect.value));
  refreshControls();
});

el.composeButton.addEventListener("click", () => {
  void (async () => {
    refreshControls();
    const entry = await session.submit(client);
    if (entry) {
      el.result.src = pngUrl(entry.image);
      el.result.hidden = false;
      renderHistory();
    }
    refreshControls();
  })();
  refreshControls(); // reflect the in-flight state immediately
});

for (const level of MASK_LEVELS) {
  const option = document.createElement("option");
  option.value = String(level);
  option.textContent = `level ${level}${level === 4 ? " (bounding box)" : ""}`;
  if (level === session.maskLevel) option.selected = true;
  el.levelSelect.append(option);
}
refreshControls();

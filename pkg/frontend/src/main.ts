/**
 * Browser glue: canvas mask editing over the radiograph, loss weights,
 * launch buttons and the run-card dashboard. All state changes flow
 * through StudioClient; this file only wires DOM events to the models in
 * mask.ts and follow.ts.
 */

import { StudioClient } from "./api.js";
import {
  BrushMode,
  MaskDocument,
  addStroke,
  newDocument,
  renderMaskPng,
  renderRaster,
  truncateStrokes,
} from "./mask.js";
import { LaunchInputs, RunBoard, RunCard } from "./follow.js";

const client = new StudioClient(window.location.origin);
const board = new RunBoard(client);

let doc: MaskDocument = newDocument(512, 512);
let contentBytes: Uint8Array | null = null;
let styleBytes: Uint8Array | null = null;
let baseImage: HTMLImageElement | null = null;
let brushMode: BrushMode = "add";
let brushRadius = 14;
let painting = false;

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

const canvas = $("mask-canvas") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;

function redraw(): void {
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (baseImage) {
    ctx.drawImage(baseImage, 0, 0, canvas.width, canvas.height);
  } else {
    ctx.fillStyle = "#202830";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
  }
  // Mask overlay rendered from the boolean raster so what you see is
  // exactly what the service will receive.
  const raster = renderRaster(doc);
  const overlay = ctx.createImageData(doc.width, doc.height);
  for (let i = 0; i < raster.length; i++) {
    if (raster[i]) {
      overlay.data[i * 4] = 230;
      overlay.data[i * 4 + 1] = 60;
      overlay.data[i * 4 + 2] = 60;
      overlay.data[i * 4 + 3] = 110;
    }
  }
  void createImageBitmap(overlay).then((bitmap) => {
    ctx.drawImage(bitmap, 0, 0, canvas.width, canvas.height);
  });
}

function canvasPos(event: MouseEvent): { x: number; y: number } {
  const rect = canvas.getBoundingClientRect();
  return {
    x: ((event.clientX - rect.left) / rect.width) * doc.width,
    y: ((event.clientY - rect.top) / rect.height) * doc.height,
  };
}

canvas.addEventListener("mousedown", (e) => {
  painting = true;
  const { x, y } = canvasPos(e);
  addStroke(doc, x, y, brushRadius, brushMode, Date.now());
  redraw();
});
canvas.addEventListener("mousemove", (e) => {
  if (!painting) return;
  const { x, y } = canvasPos(e);
  addStroke(doc, x, y, brushRadius, brushMode, Date.now());
  redraw();
});
window.addEventListener("mouseup", () => {
  painting = false;
});

function bindFileInput(id: string, handler: (bytes: Uint8Array, url: string) => void) {
  ($(id) as HTMLInputElement).addEventListener("change", async (e) => {
    const input = e.target as HTMLInputElement;
    const file = input.files?.[0];
    if (!file) return;
    const bytes = new Uint8Array(await file.arrayBuffer());
    handler(bytes, URL.createObjectURL(file));
  });
}

bindFileInput("content-file", (bytes, url) => {
  contentBytes = bytes;
  const img = new Image();
  img.onload = () => {
    doc = newDocument(img.naturalWidth, img.naturalHeight);
    canvas.width = img.naturalWidth;
    canvas.height = img.naturalHeight;
    baseImage = img;
    redraw();
  };
  img.src = url;
});
bindFileInput("style-file", (bytes) => {
  styleBytes = bytes;
});

($("brush-mode") as HTMLSelectElement).addEventListener("change", (e) => {
  brushMode = (e.target as HTMLSelectElement).value as BrushMode;
});
($("brush-radius") as HTMLInputElement).addEventListener("input", (e) => {
  brushRadius = Number((e.target as HTMLInputElement).value);
});
$("undo-stroke").addEventListener("click", () => {
  truncateStrokes(doc);
  redraw();
});
$("clear-mask").addEventListener("click", () => {
  doc.strokes.length = 0;
  redraw();
});

function numberValue(id: string): number {
  return Number(($(id) as HTMLInputElement).value);
}

function gatherInputs(): LaunchInputs {
  if (!contentBytes || !styleBytes) {
    throw new Error("load a radiograph and a style painting first");
  }
  const styleLayers = (($("style-taps") as HTMLInputElement).value || "")
    .split(",")
    .map((s) => s.trim())
    .filter(Boolean);
  const weight = styleLayers.length ? 1.0 / styleLayers.length : 0;
  const styleTaps: Record<string, number> = {};
  for (const layer of styleLayers) styleTaps[layer] = weight;
  return {
    label: `run ${board.cards.length + 1} (beta=${numberValue("beta")})`,
    contentPng: contentBytes,
    stylePng: styleBytes,
    maskPng: doc.strokes.length ? renderMaskPng(doc) : undefined,
    weightsPath: ($("weights-path") as HTMLInputElement).value,
    size: numberValue("size"),
    loss: {
      alpha: numberValue("alpha"),
      beta: numberValue("beta"),
      tv_weight: numberValue("tv-weight"),
      content_taps: [($("content-tap") as HTMLInputElement).value],
      style_taps: styleTaps,
    },
    optimizer: {
      kind: "adam",
      lr: numberValue("lr"),
      steps: numberValue("steps"),
      snapshot_every: numberValue("snapshot-every"),
    },
    init: ($("init-mode") as HTMLSelectElement).value,
    seed: numberValue("seed"),
  };
}

function drawSparkline(canvasEl: HTMLCanvasElement, series: number[]): void {
  const g = canvasEl.getContext("2d")!;
  g.clearRect(0, 0, canvasEl.width, canvasEl.height);
  if (series.length < 2) return;
  const lo = Math.min(...series);
  const hi = Math.max(...series);
  const span = hi - lo || 1;
  g.strokeStyle = "#4fb477";
  g.beginPath();
  series.forEach((v, i) => {
    const x = (i / (series.length - 1)) * canvasEl.width;
    const y = canvasEl.height - ((v - lo) / span) * (canvasEl.height - 2) - 1;
    if (i === 0) g.moveTo(x, y);
    else g.lineTo(x, y);
  });
  g.stroke();
}

function renderCard(card: RunCard): void {
  const id = `card-${board.cards.indexOf(card)}`;
  let el = document.getElementById(id);
  if (!el) {
    el = document.createElement("div");
    el.id = id;
    el.className = "run-card";
    el.innerHTML = `
      <header><span class="label"></span> <span class="state"></span></header>
      <div class="banner" hidden>service unreachable, retrying</div>
      <canvas class="sparkline" width="180" height="40"></canvas>
      <div class="meta"></div>
      <img class="snapshot" alt="latest snapshot" hidden />
      <button class="cancel">cancel</button>`;
    $("runs").appendChild(el);
    el.querySelector<HTMLButtonElement>(".cancel")!.addEventListener(
      "click",
      () => {
        if (card.jobId) void client.cancelJob(card.jobId);
      },
    );
  }
  el.querySelector(".label")!.textContent = card.label;
  el.querySelector(".state")!.textContent = card.offline
    ? `${card.state} (offline)`
    : card.state;
  (el.querySelector(".banner") as HTMLElement).hidden = !card.offline;
  el.querySelector(".meta")!.textContent =
    `iteration ${card.iteration}, ${card.snapshotCount} snapshots` +
    (card.error ? ` — ${card.error.code}: ${card.error.message}` : "");
  drawSparkline(
    el.querySelector(".sparkline") as HTMLCanvasElement,
    card.lossHistory,
  );
  const img = el.querySelector(".snapshot") as HTMLImageElement;
  if (card.latestSnapshotUrl) {
    img.hidden = false;
    img.src = `${card.latestSnapshotUrl}?t=${card.iteration}`;
  }
}

$("launch").addEventListener("click", () => {
  let inputs: LaunchInputs;
  try {
    inputs = gatherInputs();
  } catch (err) {
    $("status").textContent = String(err);
    return;
  }
  $("status").textContent = "";
  void board.launch(inputs, renderCard).catch((err) => {
    $("status").textContent = String(err);
  });
});

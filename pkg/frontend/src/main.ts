/** DOM wiring: fetch queue, render crops, translate keys into verdicts. */

import { ApiClient } from "./api.js";
import { cellToPixel, composeView } from "./render.js";
import {
  QueueState, current, decide, initQueue, nextPost, postFailed,
  postSucceeded, remaining, skip, undo,
} from "./queue.js";
import { CandidateDetail } from "./types.js";

const api = new ApiClient("");
let state: QueueState = initQueue([]);
let detail: CandidateDetail | null = null;
let overlayOpacity = 0.6;
let hillshadeOn = true;
let reviewer = localStorage.getItem("reviewer") ?? "";
const ZOOM = 5;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

async function boot(): Promise<void> {
  while (!reviewer) {
    reviewer = window.prompt("Reviewer name:") ?? "";
  }
  localStorage.setItem("reviewer", reviewer);
  const pending = await api.listCandidates("pending");
  state = initQueue(pending);
  await showCurrent();
  refreshStats();
}

async function showCurrent(): Promise<void> {
  const cand = current(state);
  el<HTMLSpanElement>("remaining").textContent = String(remaining(state));
  if (!cand) {
    detail = null;
    el<HTMLDivElement>("legend").textContent = "queue empty";
    const canvas = el<HTMLCanvasElement>("view");
    canvas.getContext("2d")?.clearRect(0, 0, canvas.width, canvas.height);
    return;
  }
  try {
    detail = await api.getCandidate(cand.id);
    draw();
  } catch {
    banner(`failed to load ${cand.id}; skipping`);
    state = skip(state);
    await showCurrent();
  }
}

function draw(): void {
  if (!detail) return;
  const canvas = el<HTMLCanvasElement>("view");
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const img = composeView(detail.dem, detail.prob, {
    hillshadeOn, overlayOpacity, cellSize: detail.cell_size,
  });
  canvas.width = img.width * ZOOM;
  canvas.height = img.height * ZOOM;
  const off = new OffscreenCanvas(img.width, img.height);
  const offCtx = off.getContext("2d") as OffscreenCanvasRenderingContext2D;
  const pixels = new Uint8ClampedArray(img.rgba); // fresh ArrayBuffer for ImageData
  offCtx.putImageData(new ImageData(pixels, img.width, img.height), 0, 0);
  ctx.imageSmoothingEnabled = false; // nearest-neighbor keeps cell boundaries
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);

  const rows = detail.dem.length;
  ctx.strokeStyle = "#18e36b";
  ctx.lineWidth = 2;
  ctx.beginPath();
  detail.polygon.forEach(([x, y], i) => {
    const [px, py] = cellToPixel(x, y, rows, ZOOM);
    if (i === 0) ctx.moveTo(px, py);
    else ctx.lineTo(px, py);
  });
  ctx.closePath();
  ctx.stroke();

  if (detail.horseshoe) {
    const { p0, p1, width } = detail.horseshoe;
    const [x0, y0] = cellToPixel(p0[0], p0[1], rows, ZOOM);
    const [x1, y1] = cellToPixel(p1[0], p1[1], rows, ZOOM);
    ctx.strokeStyle = "#ff5dd0";
    ctx.beginPath();
    ctx.moveTo(x0, y0);
    ctx.lineTo(x1, y1);
    ctx.stroke();
    const len = Math.hypot(x1 - x0, y1 - y0) || 1;
    const nx = (-(y1 - y0) / len) * (width * ZOOM) / 2;
    const ny = ((x1 - x0) / len) * (width * ZOOM) / 2;
    ctx.setLineDash([4, 4]);
    for (const s of [1, -1]) {
      ctx.beginPath();
      ctx.moveTo(x0 + s * nx, y0 + s * ny);
      ctx.lineTo(x1 + s * nx, y1 + s * ny);
      ctx.stroke();
    }
    ctx.setLineDash([]);
  }

  el<HTMLDivElement>("legend").textContent =
    `${detail.id}  median p ${detail.median_p.toFixed(3)}  ` +
    `area ${detail.area_m2.toFixed(1)} m²  elev var ${detail.elev_var.toFixed(3)} m²`;
}

function banner(text: string): void {
  const node = el<HTMLDivElement>("banner");
  node.textContent = text;
  node.style.display = text ? "block" : "none";
}

async function flushOutbox(): Promise<void> {
  for (;;) {
    const [post, next] = nextPost(state);
    if (!post) return;
    state = next;
    try {
      await api.postVerdict(post.id, post.verdict, reviewer);
      state = postSucceeded(state);
      banner("");
    } catch {
      state = postFailed(state, post);
      banner("offline: verdict queued for retry");
      return;
    }
  }
  }

async function refreshStats(): Promise<void> {
  try {
    const stats = await api.getStats();
    const total = Object.values(stats.counts).reduce((a, b) => a + b, 0);
    const done = (stats.counts["accepted"] ?? 0) + (stats.counts["rejected"] ?? 0);
    const bar = el<HTMLDivElement>("progress-fill");
    bar.style.width = total ? `${(100 * done) / total}%` : "0";
    el<HTMLSpanElement>("progress-text").textContent = `${done}/${total}`;
  } catch {
    /* stats are cosmetic */
  }
}

async function onKey(ev: KeyboardEvent): Promise<void> {
  if (ev.key === "a" || ev.key === "r") {
    state = decide(state, ev.key === "a" ? "accept" : "reject");
    await flushOutbox();
    await showCurrent();
    refreshStats();
  } else if (ev.key === "s") {
    state = skip(state);
    await showCurrent();
  } else if (ev.key === "u") {
    state = undo(state);
    await showCurrent();
  } else if (ev.key === "h") {
    hillshadeOn = !hillshadeOn;
    draw();
  }
}

window.addEventListener("keydown", (ev) => { void onKey(ev); });
window.addEventListener("DOMContentLoaded", () => {
  el<HTMLInputElement>("opacity").addEventListener("input", (ev) => {
    overlayOpacity = Number((ev.target as HTMLInputElement).value) / 100;
    draw();
  });
  setInterval(() => { void flushOutbox(); }, 4000);
  void boot();
});

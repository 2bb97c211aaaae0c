/** DOM wiring for the refocus studio.
 *
 * Every pixel drawn on the canvases comes from a service response decoded
 * as-is; this module only composites (overlay alpha, A/B wipe) and routes
 * events into the controller/job helpers.
 */

import { QueueFullError, ServiceClient } from "./api.js";
import { DEFAULT_SETTINGS, PreviewController } from "./controller.js";
import { formatError, formatFocusDisparity, formatProgress } from "./format.js";
import { JobFailedError, renderClip, ResultScrubber } from "./jobs.js";
import { planOverlay, type OverlayState } from "./overlay.js";
import type { ClipInfo, OverlayKind, RendererKind } from "./types.js";
import { wipeLayout } from "./wipe.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

const baseUrlInput = el<HTMLInputElement>("base-url");
const rgbDirInput = el<HTMLInputElement>("rgb-dir");
const disparityDirInput = el<HTMLInputElement>("disparity-dir");
const registerButton = el<HTMLButtonElement>("register");
const clipFacts = el<HTMLSpanElement>("clip-facts");

const view = el<HTMLCanvasElement>("view");
const overlayCanvas = el<HTMLCanvasElement>("overlay");
const marker = el<HTMLDivElement>("marker");
const focusReadout = el<HTMLSpanElement>("focus-readout");
const toast = el<HTMLDivElement>("toast");

const strengthSlider = el<HTMLInputElement>("strength");
const strengthValue = el<HTMLSpanElement>("strength-value");
const layersSlider = el<HTMLInputElement>("layers");
const layersValue = el<HTMLSpanElement>("layers-value");
const rendererSelect = el<HTMLSelectElement>("renderer");
const frameSlider = el<HTMLInputElement>("frame");
const frameValue = el<HTMLSpanElement>("frame-value");

const overlaySelect = el<HTMLSelectElement>("overlay-kind");
const overlayLayerInput = el<HTMLInputElement>("overlay-layer");

const renderButton = el<HTMLButtonElement>("render-clip");
const renderProgress = el<HTMLProgressElement>("render-progress");
const renderStatus = el<HTMLSpanElement>("render-status");
const wipeSlider = el<HTMLInputElement>("wipe");
const compareToggle = el<HTMLInputElement>("compare");

let client = new ServiceClient(baseUrlInput.value);
let clip: ClipInfo | null = null;
let scrubber: ResultScrubber | null = null;
const sourceBitmaps = new Map<number, ImageBitmap>();
let previewBitmap: ImageBitmap | null = null;
let resultBitmap: ImageBitmap | null = null;
let overlayState: OverlayState = { kind: "none", layer: 1 };

function showToast(message: string): void {
  toast.textContent = message;
  toast.classList.add("visible");
  setTimeout(() => toast.classList.remove("visible"), 4000);
}

async function decodePng(bytes: Uint8Array): Promise<ImageBitmap> {
  return createImageBitmap(new Blob([bytes.slice().buffer], { type: "image/png" }));
}

const controller = new PreviewController(client, {
  onPreview: (result) => {
    void (async () => {
      previewBitmap = await decodePng(result.png);
      focusReadout.textContent = formatFocusDisparity(result.focusDisparity);
      drawView();
      await drawOverlay();
    })();
  },
  onError: (error) => showToast(formatError(error)),
});

function currentFrameIndex(): number {
  return Number.parseInt(frameSlider.value, 10) || 0;
}

async function sourceBitmap(t: number): Promise<ImageBitmap | null> {
  if (clip === null) return null;
  const cached = sourceBitmaps.get(t);
  if (cached !== undefined) return cached;
  const bytes = await client.fetchFrame(clip.clipId, t, { kind: "rgb" });
  const bitmap = await decodePng(bytes);
  sourceBitmaps.set(t, bitmap);
  return bitmap;
}

function drawView(): void {
  const ctx = view.getContext("2d");
  if (ctx === null) return;
  ctx.clearRect(0, 0, view.width, view.height);
  const source = sourceBitmaps.get(currentFrameIndex()) ?? null;
  if (compareToggle.checked && scrubber !== null) {
    // A/B wipe: source beneath, rendered result revealed from the left
    if (source !== null) ctx.drawImage(source, 0, 0, view.width, view.height);
    if (resultBitmap !== null) {
      const layout = wipeLayout(Number.parseFloat(wipeSlider.value), view.width);
      if (layout.resultWidth > 0) {
        const srcWidth = (layout.resultWidth / view.width) * resultBitmap.width;
        ctx.drawImage(
          resultBitmap,
          0, 0, srcWidth, resultBitmap.height,
          0, 0, layout.resultWidth, view.height,
        );
      }
    }
    return;
  }
  const shown = previewBitmap ?? source;
  if (shown !== null) ctx.drawImage(shown, 0, 0, view.width, view.height);
}

async function drawOverlay(): Promise<void> {
  const ctx = overlayCanvas.getContext("2d");
  if (ctx === null) return;
  ctx.clearRect(0, 0, overlayCanvas.width, overlayCanvas.height);
  if (clip === null) return;
  const plan = planOverlay(
    overlayState,
    controller.lastFocusDisparity,
    controller.currentSettings.N,
  );
  if (plan === null) return;
  try {
    const bytes = await client.fetchFrame(clip.clipId, currentFrameIndex(), plan.options);
    const bitmap = await decodePng(bytes);
    ctx.globalAlpha = plan.alpha;
    ctx.drawImage(bitmap, 0, 0, overlayCanvas.width, overlayCanvas.height);
    ctx.globalAlpha = 1.0;
  } catch (error) {
    showToast(formatError(error));
  }
}

function sizeCanvases(width: number, height: number): void {
  const displayWidth = 512;
  const displayHeight = Math.round((displayWidth * height) / width);
  for (const canvas of [view, overlayCanvas]) {
    canvas.width = displayWidth;
    canvas.height = displayHeight;
  }
}

registerButton.addEventListener("click", () => {
  void (async () => {
    try {
      client = new ServiceClient(baseUrlInput.value);
      const info = await client.registerClip(rgbDirInput.value, disparityDirInput.value);
      clip = info;
      scrubber = null;
      resultBitmap = null;
      previewBitmap = null;
      sourceBitmaps.clear();
      controller.setClip(info);
      sizeCanvases(info.width, info.height);
      frameSlider.max = String(info.frames - 1);
      frameSlider.value = "0";
      frameValue.textContent = "0";
      clipFacts.textContent =
        `${info.frames} frames, ${info.width}x${info.height}, ` +
        `disparity [${info.disparityMin.toFixed(3)}, ${info.disparityMax.toFixed(3)}]`;
      focusReadout.textContent = formatFocusDisparity(null);
      marker.style.display = "none";
      await sourceBitmap(0);
      drawView();
      localStorage.setItem("vidbokeh-base-url", baseUrlInput.value);
    } catch (error) {
      showToast(formatError(error));
    }
  })();
});

view.parentElement?.addEventListener("click", (event) => {
  const rect = view.getBoundingClientRect();
  const picked = controller.clickFocus(
    event.clientX - rect.left,
    event.clientY - rect.top,
    rect.width,
    rect.height,
  );
  if (picked === null) return;
  marker.style.display = "block";
  marker.style.left = `${event.clientX - rect.left}px`;
  marker.style.top = `${event.clientY - rect.top}px`;
});

strengthSlider.addEventListener("input", () => {
  strengthValue.textContent = strengthSlider.value;
  controller.setStrength(Number.parseFloat(strengthSlider.value));
});

layersSlider.addEventListener("input", () => {
  layersValue.textContent = layersSlider.value;
  controller.setLayers(Number.parseInt(layersSlider.value, 10));
  void drawOverlay();
});

rendererSelect.addEventListener("change", () => {
  controller.setRenderer(rendererSelect.value as RendererKind);
});

frameSlider.addEventListener("input", () => {
  frameValue.textContent = frameSlider.value;
  const t = currentFrameIndex();
  controller.setFrame(t);
  previewBitmap = null;
  void (async () => {
    await sourceBitmap(t);
    if (compareToggle.checked && scrubber !== null) {
      resultBitmap = await decodePng(await scrubber.frame(t));
    }
    drawView();
    await drawOverlay();
  })();
});

for (const input of [overlaySelect, overlayLayerInput]) {
  input.addEventListener("change", () => {
    overlayState = {
      kind: overlaySelect.value as OverlayKind,
      layer: Number.parseInt(overlayLayerInput.value, 10) || 1,
    };
    void drawOverlay();
  });
}

renderButton.addEventListener("click", () => {
  if (clip === null || controller.currentFocus === null) {
    showToast("register a clip and click a focus point first");
    return;
  }
  const info = clip;
  const focus = controller.currentFocus;
  renderButton.disabled = true;
  renderStatus.textContent = "rendering…";
  renderProgress.max = info.frames;
  renderProgress.value = 0;
  void (async () => {
    try {
      const outcome = await renderClip(
        client,
        info.clipId,
        focus,
        { ...controller.currentSettings, previewScale: DEFAULT_SETTINGS.previewScale },
        [0, info.frames],
        {
          onProgress: (status) => {
            renderProgress.value = status.progress;
            renderStatus.textContent = formatProgress(status);
          },
        },
      );
      scrubber = outcome.scrubber;
      compareToggle.checked = true;
      resultBitmap = await decodePng(await scrubber.frame(currentFrameIndex()));
      drawView();
      renderStatus.textContent = `done (${outcome.status.total} frames)`;
      renderButton.disabled = false;
    } catch (error) {
      if (error instanceof QueueFullError) {
        renderStatus.textContent = "queue full — retry in a moment";
        setTimeout(() => {
          renderButton.disabled = false;
        }, 2000);
      } else {
        renderButton.disabled = false;
        renderStatus.textContent = error instanceof JobFailedError ? "failed" : "error";
        showToast(formatError(error));
      }
    }
  })();
});

for (const input of [wipeSlider, compareToggle]) {
  input.addEventListener("input", () => drawView());
}

const savedBase = localStorage.getItem("vidbokeh-base-url");
if (savedBase !== null) baseUrlInput.value = savedBase;
strengthValue.textContent = strengthSlider.value;
layersValue.textContent = layersSlider.value;
focusReadout.textContent = formatFocusDisparity(null);

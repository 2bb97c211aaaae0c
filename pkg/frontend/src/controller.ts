/** Preview loop: click-to-focus, debounced sliders, one in-flight request.
 *
 * Slider and focus changes are coalesced by a trailing debounce of at least
 * 100 ms; when a new request fires while an older one is still in flight,
 * the older one is aborted so the displayed preview can never go backwards.
 * The controller stores the preview bytes exactly as the service returned
 * them — presentation layers draw those bytes and nothing else.
 */

import type {
  ClipInfo,
  FocusPixel,
  FocusSpec,
  PreviewResult,
  RendererKind,
  RenderSettings,
} from "./types.js";

export interface PreviewClient {
  preview(
    clipId: string,
    focus: FocusSpec,
    settings: RenderSettings,
    t: number,
    signal?: AbortSignal,
  ): Promise<PreviewResult>;
}

export interface ControllerHooks {
  onPreview?: (result: PreviewResult) => void;
  onError?: (error: unknown) => void;
  /** Trailing debounce for parameter changes; clamped to >= 100 ms. */
  debounceMs?: number;
}

const MIN_DEBOUNCE_MS = 100;

export const DEFAULT_SETTINGS: RenderSettings = {
  K: 8,
  N: 8,
  renderer: "mpi",
  previewScale: 0.25,
};

export class PreviewController {
  private clip: ClipInfo | null = null;
  private focus: FocusSpec | null = null;
  private frame = 0;
  private settings: RenderSettings = { ...DEFAULT_SETTINGS };
  private timer: ReturnType<typeof setTimeout> | null = null;
  private inflight: AbortController | null = null;
  private generation = 0;
  private readonly debounceMs: number;

  /** Last preview exactly as received; null until the first one lands. */
  lastPreview: PreviewResult | null = null;
  /** Focal disparity the service resolved for the last preview. */
  lastFocusDisparity: number | null = null;

  constructor(
    private readonly client: PreviewClient,
    private readonly hooks: ControllerHooks = {},
  ) {
    this.debounceMs = Math.max(MIN_DEBOUNCE_MS, hooks.debounceMs ?? 120);
  }

  get currentClip(): ClipInfo | null {
    return this.clip;
  }

  get currentFocus(): FocusSpec | null {
    return this.focus;
  }

  get currentFrame(): number {
    return this.frame;
  }

  get currentSettings(): RenderSettings {
    return { ...this.settings };
  }

  get hasInflight(): boolean {
    return this.inflight !== null;
  }

  setClip(clip: ClipInfo): void {
    this.cancel();
    this.clip = clip;
    this.focus = null;
    this.frame = 0;
    this.lastPreview = null;
    this.lastFocusDisparity = null;
  }

  /**
   * Map a click on the displayed preview to a native-resolution focus pixel.
   * Clicks outside the displayed frame are ignored (returns null).
   */
  clickFocus(
    displayX: number,
    displayY: number,
    displayWidth: number,
    displayHeight: number,
  ): FocusPixel | null {
    if (this.clip === null || displayWidth <= 0 || displayHeight <= 0) return null;
    if (displayX < 0 || displayY < 0 || displayX >= displayWidth || displayY >= displayHeight) {
      return null;
    }
    const px: FocusPixel = {
      x: Math.min(this.clip.width - 1, Math.floor((displayX / displayWidth) * this.clip.width)),
      y: Math.min(this.clip.height - 1, Math.floor((displayY / displayHeight) * this.clip.height)),
      t: this.frame,
    };
    this.focus = { focusPx: px };
    this.schedule();
    return px;
  }

  /** Fix the focal plane numerically (reproducing a previous session). */
  setFocusDisparity(d: number): void {
    this.focus = { focusDisparity: d };
    this.schedule();
  }

  setFrame(t: number): void {
    if (this.clip === null) return;
    this.frame = Math.max(0, Math.min(this.clip.frames - 1, Math.trunc(t)));
    // a focus pixel is anchored to the frame it was picked on; keep it
    this.schedule();
  }

  setStrength(K: number): void {
    this.settings.K = Math.max(0, K);
    this.schedule();
  }

  setLayers(N: number): void {
    this.settings.N = Math.max(2, Math.trunc(N));
    this.schedule();
  }

  setRenderer(renderer: RendererKind): void {
    this.settings.renderer = renderer;
    this.schedule();
  }

  setPreviewScale(scale: number): void {
    this.settings.previewScale = scale;
    this.schedule();
  }

  /** Abort the pending debounce and any in-flight request. */
  cancel(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.generation += 1;
    if (this.inflight !== null) {
      this.inflight.abort();
      this.inflight = null;
    }
  }

  private schedule(): void {
    if (this.clip === null || this.focus === null) return;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.fire();
    }, this.debounceMs);
  }

  private async fire(): Promise<void> {
    if (this.clip === null || this.focus === null) return;
    if (this.inflight !== null) this.inflight.abort();
    const controller = new AbortController();
    this.inflight = controller;
    const generation = ++this.generation;
    try {
      const result = await this.client.preview(
        this.clip.clipId,
        this.focus,
        { ...this.settings },
        this.frame,
        controller.signal,
      );
      if (generation !== this.generation) return; // a newer request superseded us
      this.lastPreview = result;
      this.lastFocusDisparity = result.focusDisparity;
      this.hooks.onPreview?.(result);
    } catch (error) {
      if (controller.signal.aborted) return; // cancellation is not an error
      this.hooks.onError?.(error);
    } finally {
      if (this.inflight === controller) this.inflight = null;
    }
  }
}

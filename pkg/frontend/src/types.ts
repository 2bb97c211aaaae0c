/** Shared domain types mirroring the render service's JSON contracts. */

export interface ClipInfo {
  clipId: string;
  frames: number;
  width: number;
  height: number;
  frameRate: number;
  disparityMin: number;
  disparityMax: number;
}

/** Pixel in native clip resolution on frame t. */
export interface FocusPixel {
  x: number;
  y: number;
  t: number;
}

/** Exactly one way of fixing the focal plane. */
export type FocusSpec = { focusDisparity: number } | { focusPx: FocusPixel };

export type RendererKind = "mpi" | "raytrace";

export interface RenderSettings {
  /** Blur strength in pixels of blur radius per unit disparity difference. */
  K: number;
  /** Layer count of the fast renderer. */
  N: number;
  renderer: RendererKind;
  /** Previews are rendered at this fraction of native resolution. */
  previewScale: number;
}

/** A preview PNG exactly as the service returned it. */
export interface PreviewResult {
  png: Uint8Array;
  /** Focal-plane disparity the service resolved for the request. */
  focusDisparity: number;
}

export interface JobTicket {
  jobId: string;
  /** [start, end) frame range. */
  frames: [number, number];
  focusDisparity: number;
}

export type JobState = "queued" | "running" | "done" | "failed";

export interface JobStatus {
  jobId: string;
  clipId: string;
  state: JobState;
  progress: number;
  total: number;
  frames: [number, number];
  error: string | null;
}

export type OverlayKind = "none" | "vd" | "mask";

/** Typed client for the render service's HTTP API.
 *
 * The client never touches pixels: image endpoints hand back the PNG bytes
 * exactly as received, so everything the studio displays is byte-traceable
 * to a service response.
 */

import type {
  ClipInfo,
  FocusSpec,
  JobStatus,
  JobTicket,
  PreviewResult,
  RenderSettings,
} from "./types.js";

/** Error carrying the HTTP status and the server's detail message. */
export class ServiceError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

/** 425: a job-result frame exists but has not been rendered yet. */
export class NotReadyError extends ServiceError {
  constructor(message: string) {
    super(425, message);
    this.name = "NotReadyError";
  }
}

/** 409: the service's render queue is full; retry later. */
export class QueueFullError extends ServiceError {
  constructor(message: string) {
    super(409, message);
    this.name = "QueueFullError";
  }
}

export interface FrameImageOptions {
  kind?: "rgb" | "disparity" | "vd" | "mask";
  focus?: number;
  layer?: number;
  layers?: number;
}

interface RenderBody {
  K: number;
  N: number;
  renderer: string;
  preview_scale: number;
  frames: number | [number, number] | null;
  focus_disparity?: number;
  focus_px?: { x: number; y: number; t: number };
}

async function raiseForStatus(response: Response): Promise<void> {
  if (response.ok) return;
  let detail = `${response.status} ${response.statusText}`;
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; keep the status line
  }
  if (response.status === 425) throw new NotReadyError(detail);
  if (response.status === 409) throw new QueueFullError(detail);
  throw new ServiceError(response.status, detail);
}

function focusFields(focus: FocusSpec): Pick<RenderBody, "focus_disparity" | "focus_px"> {
  if ("focusDisparity" in focus) return { focus_disparity: focus.focusDisparity };
  const { x, y, t } = focus.focusPx;
  return { focus_px: { x, y, t } };
}

export class ServiceClient {
  readonly baseUrl: string;
  private readonly fetchImpl: typeof fetch;

  constructor(baseUrl: string, fetchImpl: typeof fetch = fetch) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl;
  }

  async health(): Promise<boolean> {
    const response = await this.fetchImpl(`${this.baseUrl}/healthz`);
    return response.ok && (await response.text()) === "ok";
  }

  /** Register server-side rgb/disparity directories as a clip session. */
  async registerClip(rgbDir: string, disparityDir: string): Promise<ClipInfo> {
    const response = await this.fetchImpl(`${this.baseUrl}/clips`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ rgb_dir: rgbDir, disparity_dir: disparityDir }),
    });
    await raiseForStatus(response);
    const body = (await response.json()) as {
      clip_id: string;
      frames: number;
      width: number;
      height: number;
      frame_rate: number;
      disparity_min: number;
      disparity_max: number;
    };
    return {
      clipId: body.clip_id,
      frames: body.frames,
      width: body.width,
      height: body.height,
      frameRate: body.frame_rate,
      disparityMin: body.disparity_min,
      disparityMax: body.disparity_max,
    };
  }

  /** URL of a source/derived frame image (usable directly as an img src). */
  frameUrl(clipId: string, t: number, options: FrameImageOptions = {}): string {
    const params = new URLSearchParams();
    params.set("kind", options.kind ?? "rgb");
    if (options.focus !== undefined) params.set("focus", String(options.focus));
    if (options.layer !== undefined) params.set("layer", String(options.layer));
    if (options.layers !== undefined) params.set("layers", String(options.layers));
    return `${this.baseUrl}/clips/${clipId}/frame/${t}?${params.toString()}`;
  }

  /** Fetch a frame image as raw PNG bytes. */
  async fetchFrame(
    clipId: string,
    t: number,
    options: FrameImageOptions = {},
    signal?: AbortSignal,
  ): Promise<Uint8Array> {
    const response = await this.fetchImpl(this.frameUrl(clipId, t, options), { signal });
    await raiseForStatus(response);
    return new Uint8Array(await response.arrayBuffer());
  }

  /** Synchronous single-frame preview; resolves the focal disparity too. */
  async preview(
    clipId: string,
    focus: FocusSpec,
    settings: RenderSettings,
    t: number,
    signal?: AbortSignal,
  ): Promise<PreviewResult> {
    const body: RenderBody = {
      K: settings.K,
      N: settings.N,
      renderer: settings.renderer,
      preview_scale: settings.previewScale,
      frames: t,
      ...focusFields(focus),
    };
    const response = await this.fetchImpl(`${this.baseUrl}/clips/${clipId}/render`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
    await raiseForStatus(response);
    const header = response.headers.get("X-Focus-Disparity");
    return {
      png: new Uint8Array(await response.arrayBuffer()),
      focusDisparity: header === null ? Number.NaN : Number.parseFloat(header),
    };
  }

  /** Enqueue a multi-frame render job over [start, end). */
  async startRender(
    clipId: string,
    focus: FocusSpec,
    settings: RenderSettings,
    range: [number, number],
  ): Promise<JobTicket> {
    const body: RenderBody = {
      K: settings.K,
      N: settings.N,
      renderer: settings.renderer,
      preview_scale: settings.previewScale,
      frames: range,
      ...focusFields(focus),
    };
    const response = await this.fetchImpl(`${this.baseUrl}/clips/${clipId}/render`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    await raiseForStatus(response);
    const ticket = (await response.json()) as {
      job_id: string;
      frames: [number, number];
      focus_disparity: number;
    };
    return {
      jobId: ticket.job_id,
      frames: ticket.frames,
      focusDisparity: ticket.focus_disparity,
    };
  }

  async jobStatus(jobId: string): Promise<JobStatus> {
    const response = await this.fetchImpl(`${this.baseUrl}/jobs/${jobId}`);
    await raiseForStatus(response);
    const body = (await response.json()) as {
      job_id: string;
      clip_id: string;
      state: JobStatus["state"];
      progress: number;
      total: number;
      frames: [number, number];
      error: string | null;
    };
    return {
      jobId: body.job_id,
      clipId: body.clip_id,
      state: body.state,
      progress: body.progress,
      total: body.total,
      frames: body.frames,
      error: body.error,
    };
  }

  /** Fetch one rendered frame of a finished (or partially done) job. */
  async jobResult(jobId: string, t: number): Promise<Uint8Array> {
    const response = await this.fetchImpl(`${this.baseUrl}/jobs/${jobId}/result/${t}`);
    await raiseForStatus(response);
    return new Uint8Array(await response.arrayBuffer());
  }
}

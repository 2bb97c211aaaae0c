/** Whole-clip rendering: start a job, poll progress, expose a scrubber.
 *
 * Result frames are fetched lazily and cached, always as the exact bytes
 * the service returned.
 */

import { NotReadyError, type ServiceClient } from "./api.js";
import type { FocusSpec, JobStatus, RenderSettings } from "./types.js";

export class JobFailedError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "JobFailedError";
  }
}

export interface PollOptions {
  intervalMs?: number;
  onProgress?: (status: JobStatus) => void;
  /** Injectable for tests; defaults to a real timer sleep. */
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number): Promise<void> =>
  new Promise((resolve) => setTimeout(resolve, ms));

/** Poll a job until it finishes; rejects with the server's message on failure. */
export async function pollJob(
  client: Pick<ServiceClient, "jobStatus">,
  jobId: string,
  options: PollOptions = {},
): Promise<JobStatus> {
  const interval = options.intervalMs ?? 250;
  const sleep = options.sleep ?? defaultSleep;
  for (;;) {
    const status = await client.jobStatus(jobId);
    options.onProgress?.(status);
    if (status.state === "done") return status;
    if (status.state === "failed") {
      throw new JobFailedError(status.error ?? "render failed");
    }
    await sleep(interval);
  }
}

/** Frame-by-frame access to a finished render, with byte-exact caching. */
export class ResultScrubber {
  private readonly cache = new Map<number, Uint8Array>();

  constructor(
    private readonly client: Pick<ServiceClient, "jobResult">,
    readonly jobId: string,
    readonly range: [number, number],
  ) {}

  get frameCount(): number {
    return this.range[1] - this.range[0];
  }

  /** Clamp a scrubber position to a valid absolute frame index. */
  clamp(t: number): number {
    return Math.max(this.range[0], Math.min(this.range[1] - 1, Math.trunc(t)));
  }

  async frame(t: number): Promise<Uint8Array> {
    const index = this.clamp(t);
    const cached = this.cache.get(index);
    if (cached !== undefined) return cached;
    const png = await this.client.jobResult(this.jobId, index);
    this.cache.set(index, png);
    return png;
  }
}

export interface ClipRenderHooks {
  onProgress?: (status: JobStatus) => void;
  sleep?: (ms: number) => Promise<void>;
  intervalMs?: number;
}

/**
 * Render [start, end) of a clip and hand back a scrubber over the results.
 * Propagates QueueFullError (409) so callers can disable the render button
 * with a retry hint, and JobFailedError with the server's message.
 */
export async function renderClip(
  client: Pick<ServiceClient, "startRender" | "jobStatus" | "jobResult">,
  clipId: string,
  focus: FocusSpec,
  settings: RenderSettings,
  range: [number, number],
  hooks: ClipRenderHooks = {},
): Promise<{ status: JobStatus; scrubber: ResultScrubber }> {
  const ticket = await client.startRender(clipId, focus, settings, range);
  const status = await pollJob(client, ticket.jobId, {
    intervalMs: hooks.intervalMs,
    onProgress: hooks.onProgress,
    sleep: hooks.sleep,
  });
  return { status, scrubber: new ResultScrubber(client, ticket.jobId, ticket.frames) };
}

/** Wait for one frame of a running job, retrying while it is not ready. */
export async function awaitResultFrame(
  client: Pick<ServiceClient, "jobResult">,
  jobId: string,
  t: number,
  options: { retries?: number; intervalMs?: number; sleep?: (ms: number) => Promise<void> } = {},
): Promise<Uint8Array> {
  const retries = options.retries ?? 40;
  const sleep = options.sleep ?? defaultSleep;
  for (let attempt = 0; ; attempt += 1) {
    try {
      return await client.jobResult(jobId, t);
    } catch (error) {
      if (!(error instanceof NotReadyError) || attempt >= retries) throw error;
      await sleep(options.intervalMs ?? 250);
    }
  }
}

/** Small display formatters for the control panel. */

import type { JobStatus } from "./types.js";

/** Focal disparity readout; fixed width so sessions are easy to transcribe. */
export function formatFocusDisparity(d: number | null): string {
  if (d === null || !Number.isFinite(d)) return "d_f = —";
  return `d_f = ${d.toFixed(4)}`;
}

export function formatProgress(status: JobStatus): string {
  return `${status.progress}/${status.total}`;
}

export function formatError(error: unknown): string {
  if (error instanceof Error) return error.message;
  return String(error);
}

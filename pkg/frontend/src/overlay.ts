/** Diagnostic overlays: distance-to-focus and layer-mask images.
 *
 * Overlays are fetched from the frame endpoint and composited over the
 * preview at 50% alpha on a separate layer, so toggling one off restores
 * the pristine preview untouched.
 */

import type { FrameImageOptions } from "./api.js";
import type { OverlayKind } from "./types.js";

export const OVERLAY_ALPHA = 0.5;

export interface OverlayState {
  kind: OverlayKind;
  /** 1-based mask layer index; only used for kind "mask". */
  layer: number;
}

export interface OverlayPlan {
  /** Query options for the frame-image endpoint. */
  options: FrameImageOptions;
  alpha: number;
}

/**
 * Decide what overlay image to fetch, or null when nothing should be drawn.
 * Both overlay kinds need the focal plane; masks also need the layer count.
 */
export function planOverlay(
  state: OverlayState,
  focusDisparity: number | null,
  layerCount: number,
): OverlayPlan | null {
  if (state.kind === "none") return null;
  if (focusDisparity === null || !Number.isFinite(focusDisparity)) return null;
  if (state.kind === "vd") {
    return { options: { kind: "vd", focus: focusDisparity }, alpha: OVERLAY_ALPHA };
  }
  const layer = Math.trunc(state.layer);
  if (layer < 1 || layer > layerCount) return null;
  return {
    options: { kind: "mask", focus: focusDisparity, layer, layers: layerCount },
    alpha: OVERLAY_ALPHA,
  };
}

/** A/B wipe geometry: reveal the rendered result from the left.
 *
 * At fraction 0 only the source is visible, at 1 only the result; in
 * between the result owns the left `round(fraction * width)` pixels and
 * the source the rest.
 */

export interface WipeLayout {
  /** Width in display pixels of the revealed result strip (from x = 0). */
  resultWidth: number;
  /** The source occupies [resultWidth, width). */
  sourceStart: number;
  width: number;
}

export function wipeLayout(fraction: number, width: number): WipeLayout {
  const w = Math.max(0, Math.trunc(width));
  const f = Math.min(1, Math.max(0, fraction));
  const resultWidth = Math.round(f * w);
  return { resultWidth, sourceStart: resultWidth, width: w };
}

import type { BBox, InstanceBox } from "./types.js";

/** Bounds are inclusive on all four edges. */
export function bboxContains(bbox: BBox, x: number, y: number): boolean {
  const [x0, y0, x1, y1] = bbox;
  return x >= x0 && x <= x1 && y >= y0 && y <= y1;
}

/**
 * Instance under a click, or null for background. Overlapping boxes
 * resolve to the smallest pixel area; equal areas resolve to the
 * lower instance index.
 */
export function pickInstance(
  instances: readonly InstanceBox[],
  x: number,
  y: number,
): InstanceBox | null {
  let best: InstanceBox | null = null;
  for (const inst of instances) {
    if (!bboxContains(inst.bbox, x, y)) continue;
    if (
      best === null ||
      inst.area < best.area ||
      (inst.area === best.area && inst.index < best.index)
    ) {
      best = inst;
    }
  }
  return best;
}

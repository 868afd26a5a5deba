import type { SelectionMode } from "./types.js";

export interface OverlayToggles {
  hulls: boolean;
  bboxes: boolean;
  labels: boolean;
}

/**
 * Client view model: current frame, overlay toggles, selection mode
 * and the count of edits awaiting server acknowledgment. The frame
 * index stays within the loaded sequence and the pending count never
 * drops below zero.
 */
export class ViewState {
  readonly frames: readonly number[];
  readonly overlays: OverlayToggles = { hulls: true, bboxes: true, labels: true };
  mode: SelectionMode = "target-pick";
  private index = 0;
  private pending = 0;

  constructor(frames: readonly number[]) {
    if (frames.length === 0) {
      throw new Error("sequence has no frames");
    }
    this.frames = frames;
  }

  get frameIndex(): number {
    return this.index;
  }

  /** Frame id at the current index (ids need not start at zero). */
  get frameId(): number {
    return this.frames[this.index]!;
  }

  get pendingEdits(): number {
    return this.pending;
  }

  gotoIndex(index: number): void {
    if (!Number.isInteger(index) || index < 0 || index >= this.frames.length) {
      throw new RangeError(
        `frame index ${index} outside [0, ${this.frames.length - 1}]`,
      );
    }
    this.index = index;
  }

  nextFrame(): void {
    if (this.index + 1 < this.frames.length) this.index += 1;
  }

  prevFrame(): void {
    if (this.index > 0) this.index -= 1;
  }

  toggle(layer: keyof OverlayToggles): void {
    this.overlays[layer] = !this.overlays[layer];
  }

  setMode(mode: SelectionMode): void {
    this.mode = mode;
  }

  /** An optimistic edit left the client; it is pending until settled. */
  beginEdit(): void {
    this.pending += 1;
  }

  /** The server acknowledged or definitively rejected one edit. */
  settleEdit(): void {
    if (this.pending === 0) {
      throw new Error("no pending edit to settle");
    }
    this.pending -= 1;
  }
}

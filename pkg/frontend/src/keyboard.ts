import type { ReviewVerdict, SelectionMode } from "./types.js";

export type KeyAction =
  | { type: "next-frame" }
  | { type: "prev-frame" }
  | { type: "verdict"; verdict: ReviewVerdict }
  | { type: "missed" }
  | { type: "toggle"; layer: "hulls" | "bboxes" | "labels" }
  | { type: "mode"; mode: SelectionMode };

/**
 * Keyboard map for hands-on-keys review: arrows page frames, number
 * keys issue the verdicts of the active mode, letters toggle overlay
 * chrome and switch modes. Unbound keys return null.
 */
export function actionForKey(key: string, mode: SelectionMode): KeyAction | null {
  switch (key) {
    case "ArrowRight":
      return { type: "next-frame" };
    case "ArrowLeft":
      return { type: "prev-frame" };
    case "h":
      return { type: "toggle", layer: "hulls" };
    case "b":
      return { type: "toggle", layer: "bboxes" };
    case "l":
      return { type: "toggle", layer: "labels" };
    case "t":
      return { type: "mode", mode: "target-pick" };
    case "c":
      return { type: "mode", mode: "cleanse" };
    case "v":
      return { type: "mode", mode: "verdict" };
    default:
      break;
  }
  if (mode === "cleanse") {
    if (key === "1") return { type: "verdict", verdict: "correct" };
    if (key === "2") return { type: "verdict", verdict: "mislabelled" };
  }
  if (mode === "verdict") {
    if (key === "1") return { type: "verdict", verdict: "tp" };
    if (key === "2") return { type: "verdict", verdict: "fp" };
    if (key === "3") return { type: "missed" };
  }
  return null;
}

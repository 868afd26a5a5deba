/** Inclusive pixel bounds in frame coordinates: [x0, y0, x1, y1]. */
export type BBox = [number, number, number, number];

/** One segmented instance as served for a frame. */
export interface InstanceBox {
  index: number;
  bbox: BBox;
  centroid: [number, number];
  area: number;
  low_confidence: boolean;
}

export interface SequenceInfo {
  name: string;
  frames: number[];
}

export interface TargetRef {
  frame: number;
  instance: number;
}

/** Verdict vocabulary persisted by the service. */
export type ServiceVerdict = "target" | "not_target" | "missed";

export interface TruthMark {
  frame: number;
  instance: number;
  verdict: ServiceVerdict;
}

export interface SessionState {
  id: string;
  revision: number;
  target: TargetRef | null;
  flags: [number, number][];
  truth: TruthMark[];
}

/** Error document the service returns for any failed request. */
export interface ProblemDetail {
  status: number;
  title: string;
  detail: string;
}

/**
 * Verdicts the reviewer issues. "correct" and "mislabelled" judge
 * bootstrap rows while cleansing; "tp" and "fp" judge tracker output.
 */
export type ReviewVerdict = "correct" | "mislabelled" | "tp" | "fp";

export type SelectionMode = "target-pick" | "cleanse" | "verdict";

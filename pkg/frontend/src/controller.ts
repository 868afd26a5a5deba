import { AuditLog } from "./audit.js";
import { pickInstance } from "./hitTest.js";
import { MutationQueue, type QueueStatus } from "./mutationQueue.js";
import { ViewState } from "./viewState.js";
import type { SessionApi } from "./api.js";
import type {
  InstanceBox,
  ReviewVerdict,
  SequenceInfo,
  ServiceVerdict,
  SessionState,
  TargetRef,
} from "./types.js";

export interface ControllerEvents {
  /** A gesture did nothing (background click, wrong mode or frame). */
  onHint?: (message: string) => void;
  /** An acknowledged-path problem (rejection, outage) worth showing. */
  onNotice?: (message: string) => void;
  onStatus?: (status: QueueStatus) => void;
}

export interface ControllerOptions {
  events?: ControllerEvents;
  clock?: () => string;
  retryDelayMs?: number;
  failingAfter?: number;
  delay?: (ms: number) => Promise<void>;
}

export interface InstanceMarks {
  flagged: boolean;
  verdict: ServiceVerdict | null;
  reviewed: boolean;
}

const TRUTH_FOR: Record<"tp" | "fp", ServiceVerdict> = {
  tp: "target",
  fp: "not_target",
};

function key(frame: number, instance: number): string {
  return `${frame}:${instance}`;
}

/**
 * Session logic behind the review screen. Marks apply optimistically
 * to a local mirror of the session; the serialized queue persists them
 * and reverts the mirror when the service rejects one. The mirror is
 * keyed by (frame, instance), so leaving and re-entering a frame
 * reproduces its marks exactly.
 */
export class ReviewController {
  readonly view: ViewState;
  readonly audit: AuditLog;
  readonly sequence: SequenceInfo;
  private readonly api: SessionApi;
  private readonly sessionId: string;
  private readonly queue: MutationQueue;
  private readonly events: ControllerEvents;
  private targetValue: TargetRef | null;
  private readonly flags = new Set<string>();
  private readonly truth = new Map<string, ServiceVerdict>();
  private readonly reviewedKeys = new Set<string>();

  constructor(
    api: SessionApi,
    sessionId: string,
    sequence: SequenceInfo,
    state: SessionState,
    options: ControllerOptions = {},
  ) {
    this.api = api;
    this.sessionId = sessionId;
    this.sequence = sequence;
    this.events = options.events ?? {};
    this.view = new ViewState(sequence.frames);
    this.audit = new AuditLog(options.clock);
    this.targetValue = state.target;
    for (const [frame, instance] of state.flags) {
      this.flags.add(key(frame, instance));
      this.reviewedKeys.add(key(frame, instance));
    }
    for (const mark of state.truth) {
      this.truth.set(key(mark.frame, mark.instance), mark.verdict);
      this.reviewedKeys.add(key(mark.frame, mark.instance));
    }
    this.queue = new MutationQueue(state.revision, {
      refreshRevision: async () =>
        (await this.api.sessionState(this.sessionId)).revision,
      onNotice: (message) => this.events.onNotice?.(message),
      onStatus: (status) => this.events.onStatus?.(status),
      ...(options.retryDelayMs !== undefined
        ? { retryDelayMs: options.retryDelayMs }
        : {}),
      ...(options.failingAfter !== undefined
        ? { failingAfter: options.failingAfter }
        : {}),
      ...(options.delay !== undefined ? { delay: options.delay } : {}),
    });
  }

  get target(): TargetRef | null {
    return this.targetValue;
  }

  get revision(): number {
    return this.queue.revision;
  }

  get queueStatus(): QueueStatus {
    return this.queue.status;
  }

  /** Resolves once every issued mutation is acknowledged or reverted. */
  settled(): Promise<void> {
    return this.queue.settled();
  }

  marksFor(frame: number, instance: number): InstanceMarks {
    const k = key(frame, instance);
    return {
      flagged: this.flags.has(k),
      verdict: this.truth.get(k) ?? null,
      reviewed: this.reviewedKeys.has(k),
    };
  }

  /** First instance on the current frame without any mark yet. */
  nextUnreviewed(instances: readonly InstanceBox[]): InstanceBox | null {
    for (const inst of instances) {
      if (!this.reviewedKeys.has(key(this.view.frameId, inst.index))) {
        return inst;
      }
    }
    return null;
  }

  /**
   * Resolve a click on the first frame to an instance and persist it
   * as the tracking target. Background clicks and clicks outside
   * target-pick mode explain themselves through the hint channel.
   */
  pickTarget(
    x: number,
    y: number,
    instances: readonly InstanceBox[],
  ): InstanceBox | null {
    if (this.view.mode !== "target-pick") {
      this.events.onHint?.("switch to target-pick mode to set the target");
      return null;
    }
    if (this.view.frameIndex !== 0) {
      this.events.onHint?.("the target is picked on the first frame");
      return null;
    }
    const hit = pickInstance(instances, x, y);
    if (hit === null) {
      this.events.onHint?.("click landed on background, nothing selected");
      return null;
    }
    const frame = this.view.frameId;
    const previous = this.targetValue;
    this.targetValue = { frame, instance: hit.index };
    this.audit.append("target", { frame, instance: hit.index });
    this.view.beginEdit();
    this.queue.enqueue({
      op: "target",
      send: (revision) =>
        this.api.setTarget(this.sessionId, {
          frame,
          instance: hit.index,
          revision,
        }),
      ack: () => this.view.settleEdit(),
      revert: () => {
        this.targetValue = previous;
        this.view.settleEdit();
      },
    });
    return hit;
  }

  /**
   * Judge one instance on the current frame. "mislabelled" flags the
   * bootstrap row for removal, "tp"/"fp" persist a truth verdict, and
   * "correct" is recorded locally only: the row needs no change.
   */
  mark(instance: InstanceBox, verdict: ReviewVerdict): void {
    const frame = this.view.frameId;
    const k = key(frame, instance.index);
    this.audit.append("mark", { frame, instance: instance.index, verdict });
    const freshlyReviewed = !this.reviewedKeys.has(k);
    this.reviewedKeys.add(k);
    if (verdict === "correct") {
      return;
    }
    if (verdict === "mislabelled") {
      const alreadyFlagged = this.flags.has(k);
      this.flags.add(k);
      this.view.beginEdit();
      this.queue.enqueue({
        op: "flag",
        send: (revision) =>
          this.api.addFlags(this.sessionId, {
            rows: [[frame, instance.index]],
            revision,
          }),
        ack: () => this.view.settleEdit(),
        revert: () => {
          if (!alreadyFlagged) this.flags.delete(k);
          if (freshlyReviewed) this.reviewedKeys.delete(k);
          this.view.settleEdit();
        },
      });
      return;
    }
    const serviceVerdict = TRUTH_FOR[verdict];
    this.pushTruth(frame, instance.index, serviceVerdict, freshlyReviewed);
  }

  /** Record that the target is visible on this frame but was never segmented. */
  markMissed(): void {
    const frame = this.view.frameId;
    this.audit.append("mark", { frame, instance: -1, verdict: "missed" });
    const k = key(frame, -1);
    const freshlyReviewed = !this.reviewedKeys.has(k);
    this.reviewedKeys.add(k);
    this.pushTruth(frame, -1, "missed", freshlyReviewed);
  }

  private pushTruth(
    frame: number,
    instance: number,
    verdict: ServiceVerdict,
    freshlyReviewed: boolean,
  ): void {
    const k = key(frame, instance);
    const previous = this.truth.get(k);
    this.truth.set(k, verdict);
    this.view.beginEdit();
    this.queue.enqueue({
      op: "truth",
      send: (revision) =>
        this.api.addTruth(this.sessionId, { frame, instance, verdict, revision }),
      ack: () => this.view.settleEdit(),
      revert: () => {
        if (previous === undefined) this.truth.delete(k);
        else this.truth.set(k, previous);
        if (freshlyReviewed) this.reviewedKeys.delete(k);
        this.view.settleEdit();
      },
    });
  }
}

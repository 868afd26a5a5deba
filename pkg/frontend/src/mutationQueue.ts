import { ApiError } from "./api.js";

/** One optimistic edit: already applied locally, not yet acknowledged. */
export interface Mutation {
  /** Short operation name used in notices ("target", "flag", "truth"). */
  op: string;
  /** Issue the request against the given session revision. */
  send(revision: number): Promise<{ revision: number }>;
  /** Confirm the optimistic update once the server acknowledged it. */
  ack(): void;
  /** Undo the optimistic update after a definitive rejection. */
  revert(): void;
}

export type QueueStatus = "idle" | "busy" | "retrying" | "failing";

export interface QueueOptions {
  /** Re-read the server-side revision after a conflict. */
  refreshRevision: () => Promise<number>;
  /** Human-readable rejection and outage notices. */
  onNotice?: (message: string) => void;
  onStatus?: (status: QueueStatus) => void;
  /** Pause between retries of an unreachable server. */
  retryDelayMs?: number;
  /** Consecutive transport failures before the outage is surfaced. */
  failingAfter?: number;
  delay?: (ms: number) => Promise<void>;
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

/**
 * Serialized mutation pipeline: at most one request is in flight, in
 * issue order, each carrying the revision the previous reply (or a
 * conflict resync) established.
 *
 * A 409 conflict means the edit was based on state someone else moved;
 * the edit is reverted with a notice and the local revision resyncs
 * from the server. Any other service rejection also reverts the edit.
 * Transport failures keep the edit queued and retry it; a persistent
 * outage is surfaced through the status callback but never drops edits.
 */
export class MutationQueue {
  private readonly queue: Mutation[] = [];
  private readonly refreshRevision: () => Promise<number>;
  private readonly onNotice: (message: string) => void;
  private readonly onStatus: (status: QueueStatus) => void;
  private readonly retryDelayMs: number;
  private readonly failingAfter: number;
  private readonly delay: (ms: number) => Promise<void>;
  private revisionValue: number;
  private statusValue: QueueStatus = "idle";
  private pumping: Promise<void> | null = null;

  constructor(initialRevision: number, options: QueueOptions) {
    this.revisionValue = initialRevision;
    this.refreshRevision = options.refreshRevision;
    this.onNotice = options.onNotice ?? (() => {});
    this.onStatus = options.onStatus ?? (() => {});
    this.retryDelayMs = options.retryDelayMs ?? 1000;
    this.failingAfter = options.failingAfter ?? 3;
    this.delay = options.delay ?? sleep;
  }

  /** Revision the next mutation will be issued against. */
  get revision(): number {
    return this.revisionValue;
  }

  get status(): QueueStatus {
    return this.statusValue;
  }

  /** Mutations not yet settled, including the one in flight. */
  get depth(): number {
    return this.queue.length;
  }

  enqueue(mutation: Mutation): void {
    this.queue.push(mutation);
    this.pump();
  }

  /** Resolves once every mutation queued so far has been settled. */
  async settled(): Promise<void> {
    while (this.pumping !== null) {
      await this.pumping;
    }
  }

  private setStatus(status: QueueStatus): void {
    if (status !== this.statusValue) {
      this.statusValue = status;
      this.onStatus(status);
    }
  }

  private pump(): void {
    if (this.pumping !== null) return;
    this.pumping = this.run().finally(() => {
      this.pumping = null;
      // an enqueue can land between the drain check and this cleanup
      if (this.queue.length > 0) this.pump();
    });
  }

  private async run(): Promise<void> {
    while (this.queue.length > 0) {
      this.setStatus("busy");
      await this.settleHead(this.queue[0]!);
      this.queue.shift();
    }
    this.setStatus("idle");
  }

  private async settleHead(mutation: Mutation): Promise<void> {
    let failures = 0;
    let outageSurfaced = false;
    for (;;) {
      try {
        const reply = await mutation.send(this.revisionValue);
        this.revisionValue = reply.revision;
        mutation.ack();
        return;
      } catch (error) {
        if (error instanceof ApiError && error.problem.status === 409) {
          const fresh = await this.refreshRevision().catch(() => null);
          if (fresh !== null) {
            this.revisionValue = fresh;
            mutation.revert();
            this.onNotice(`${mutation.op} rejected: ${error.problem.detail}`);
            return;
          }
          // conflict seen but the resync failed; treat as an outage
          failures += 1;
        } else if (error instanceof ApiError) {
          mutation.revert();
          this.onNotice(`${mutation.op} rejected: ${error.problem.detail}`);
          return;
        } else {
          failures += 1;
        }
        if (failures >= this.failingAfter && !outageSurfaced) {
          outageSurfaced = true;
          this.onNotice(
            `server unreachable, ${mutation.op} still queued for retry`,
          );
        }
        this.setStatus(failures >= this.failingAfter ? "failing" : "retrying");
        await this.delay(this.retryDelayMs);
        this.setStatus("busy");
      }
    }
  }
}

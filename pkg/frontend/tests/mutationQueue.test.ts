import { describe, expect, it } from "vitest";
import { ApiError } from "../src/api.js";
import { MutationQueue, type QueueStatus } from "../src/mutationQueue.js";

function deferred<T>() {
  let resolve!: (value: T) => void;
  let reject!: (reason: unknown) => void;
  const promise = new Promise<T>((res, rej) => {
    resolve = res;
    reject = rej;
  });
  return { promise, resolve, reject };
}

function conflict(detail = "someone else moved the session"): ApiError {
  return new ApiError({ status: 409, title: "stale revision", detail });
}

/** Mutation whose sends resolve from a scripted list of outcomes. */
function scripted(op: string, outcomes: Array<number | Error>) {
  const sentRevisions: number[] = [];
  let acked = 0;
  let reverted = 0;
  const mutation = {
    op,
    send(revision: number): Promise<{ revision: number }> {
      sentRevisions.push(revision);
      const outcome = outcomes.shift();
      if (outcome === undefined) {
        return Promise.reject(new Error(`${op}: unscripted send`));
      }
      if (outcome instanceof Error) return Promise.reject(outcome);
      return Promise.resolve({ revision: outcome });
    },
    ack: () => {
      acked += 1;
    },
    revert: () => {
      reverted += 1;
    },
  };
  return {
    mutation,
    sentRevisions,
    acks: () => acked,
    reverts: () => reverted,
  };
}

function makeQueue(
  initialRevision: number,
  overrides: {
    refresh?: () => Promise<number>;
    retryDelayMs?: number;
    failingAfter?: number;
  } = {},
) {
  const notices: string[] = [];
  const statuses: QueueStatus[] = [];
  const delays: number[] = [];
  const queue = new MutationQueue(initialRevision, {
    refreshRevision: overrides.refresh ?? (() => Promise.resolve(0)),
    onNotice: (message) => notices.push(message),
    onStatus: (status) => statuses.push(status),
    retryDelayMs: overrides.retryDelayMs ?? 5,
    failingAfter: overrides.failingAfter ?? 3,
    delay: (ms) => {
      delays.push(ms);
      return Promise.resolve();
    },
  });
  return { queue, notices, statuses, delays };
}

describe("MutationQueue", () => {
  it("acknowledges a mutation and adopts the reply revision", async () => {
    const { queue, statuses } = makeQueue(0);
    const first = scripted("target", [1]);
    queue.enqueue(first.mutation);
    await queue.settled();
    expect(first.sentRevisions).toEqual([0]);
    expect(first.acks()).toBe(1);
    expect(first.reverts()).toBe(0);
    expect(queue.revision).toBe(1);
    expect(queue.depth).toBe(0);
    expect(statuses).toEqual(["busy", "idle"]);
  });

  it("keeps at most one request in flight, in issue order", async () => {
    const { queue } = makeQueue(0);
    const firstGate = deferred<{ revision: number }>();
    const sends: string[] = [];
    queue.enqueue({
      op: "a",
      send: () => {
        sends.push("a");
        return firstGate.promise;
      },
      ack: () => {},
      revert: () => {},
    });
    const second = scripted("b", [6]);
    queue.enqueue({
      op: "b",
      send: (revision) => {
        sends.push("b");
        return second.mutation.send(revision);
      },
      ack: second.mutation.ack,
      revert: second.mutation.revert,
    });
    await Promise.resolve();
    expect(sends).toEqual(["a"]);
    expect(queue.depth).toBe(2);
    firstGate.resolve({ revision: 5 });
    await queue.settled();
    expect(sends).toEqual(["a", "b"]);
    expect(second.sentRevisions).toEqual([5]);
    expect(queue.revision).toBe(6);
  });

  it("threads revisions through consecutive mutations", async () => {
    const { queue } = makeQueue(0);
    const a = scripted("a", [1]);
    const b = scripted("b", [2]);
    const c = scripted("c", [3]);
    queue.enqueue(a.mutation);
    queue.enqueue(b.mutation);
    queue.enqueue(c.mutation);
    await queue.settled();
    expect(a.sentRevisions).toEqual([0]);
    expect(b.sentRevisions).toEqual([1]);
    expect(c.sentRevisions).toEqual([2]);
  });

  it("reverts a conflicted edit, resyncs and moves on", async () => {
    const { queue, notices } = makeQueue(1, {
      refresh: () => Promise.resolve(7),
    });
    const clash = scripted("target", [conflict("session is at revision 7")]);
    const after = scripted("truth", [8]);
    queue.enqueue(clash.mutation);
    queue.enqueue(after.mutation);
    await queue.settled();
    expect(clash.reverts()).toBe(1);
    expect(clash.acks()).toBe(0);
    expect(notices).toEqual(["target rejected: session is at revision 7"]);
    expect(after.sentRevisions).toEqual([7]);
    expect(queue.revision).toBe(8);
  });

  it("reverts on any other service rejection without resync", async () => {
    let refreshes = 0;
    const { queue, notices } = makeQueue(2, {
      refresh: () => {
        refreshes += 1;
        return Promise.resolve(99);
      },
    });
    const bad = scripted("flag", [
      new ApiError({ status: 404, title: "unknown instance", detail: "no row" }),
    ]);
    queue.enqueue(bad.mutation);
    await queue.settled();
    expect(bad.reverts()).toBe(1);
    expect(refreshes).toBe(0);
    expect(queue.revision).toBe(2);
    expect(notices).toEqual(["flag rejected: no row"]);
  });

  it("retries through an outage without dropping the edit", async () => {
    const { queue, statuses, delays, notices } = makeQueue(0, {
      retryDelayMs: 9,
      failingAfter: 3,
    });
    const flaky = scripted("truth", [
      new TypeError("fetch failed"),
      new TypeError("fetch failed"),
      4,
    ]);
    queue.enqueue(flaky.mutation);
    await queue.settled();
    expect(flaky.sentRevisions).toEqual([0, 0, 0]);
    expect(flaky.acks()).toBe(1);
    expect(flaky.reverts()).toBe(0);
    expect(delays).toEqual([9, 9]);
    expect(statuses).toContain("retrying");
    expect(statuses).not.toContain("failing");
    expect(notices).toEqual([]);
    expect(queue.revision).toBe(4);
  });

  it("surfaces a persistent outage once and recovers", async () => {
    const { queue, statuses, notices } = makeQueue(0, { failingAfter: 2 });
    const flaky = scripted("target", [
      new TypeError("fetch failed"),
      new TypeError("fetch failed"),
      new TypeError("fetch failed"),
      3,
    ]);
    queue.enqueue(flaky.mutation);
    await queue.settled();
    expect(flaky.acks()).toBe(1);
    expect(statuses).toContain("failing");
    expect(statuses[statuses.length - 1]).toBe("idle");
    expect(notices).toEqual(["server unreachable, target still queued for retry"]);
  });

  it("retries the conflict resync itself when the server vanishes", async () => {
    let refreshes = 0;
    const { queue } = makeQueue(1, {
      refresh: () => {
        refreshes += 1;
        return refreshes === 1
          ? Promise.reject(new TypeError("fetch failed"))
          : Promise.resolve(9);
      },
    });
    const clash = scripted("flag", [conflict(), conflict()]);
    queue.enqueue(clash.mutation);
    await queue.settled();
    expect(refreshes).toBe(2);
    expect(clash.sentRevisions).toEqual([1, 1]);
    expect(clash.reverts()).toBe(1);
    expect(queue.revision).toBe(9);
  });

  it("drains mutations enqueued while the pump is finishing", async () => {
    const { queue } = makeQueue(0);
    const a = scripted("a", [1]);
    queue.enqueue(a.mutation);
    await queue.settled();
    const b = scripted("b", [2]);
    queue.enqueue(b.mutation);
    await queue.settled();
    expect(a.acks()).toBe(1);
    expect(b.acks()).toBe(1);
    expect(b.sentRevisions).toEqual([1]);
    expect(queue.depth).toBe(0);
  });
});

import { describe, expect, it } from "vitest";
import { ApiError, type MutationReply, type SessionApi } from "../src/api.js";
import { ReviewController } from "../src/controller.js";
import type { QueueStatus } from "../src/mutationQueue.js";
import type {
  BBox,
  InstanceBox,
  SequenceInfo,
  ServiceVerdict,
  SessionState,
} from "../src/types.js";

const SEQ: SequenceInfo = { name: "herd01", frames: [0, 1, 2] };

function inst(index: number, bbox: BBox, area: number): InstanceBox {
  return {
    index,
    bbox,
    centroid: [(bbox[0] + bbox[2]) / 2, (bbox[1] + bbox[3]) / 2],
    area,
    low_confidence: false,
  };
}

const BIG = inst(0, [0, 0, 99, 99], 9000);
const SMALL = inst(1, [40, 40, 59, 59], 350);

function emptyState(): SessionState {
  return { id: "s1", revision: 0, target: null, flags: [], truth: [] };
}

function deferred<T>() {
  let resolve!: (value: T) => void;
  const promise = new Promise<T>((res) => {
    resolve = res;
  });
  return { promise, resolve };
}

class FakeService implements SessionApi {
  readonly calls: Array<{ method: string; body: Record<string, unknown> }> = [];
  readonly failures: Error[] = [];
  readonly gates: Array<Promise<MutationReply>> = [];
  stateRevision = 0;

  private handle(
    method: string,
    body: { revision: number },
  ): Promise<MutationReply> {
    this.calls.push({ method, body: { ...body } });
    const failure = this.failures.shift();
    if (failure !== undefined) return Promise.reject(failure);
    const gate = this.gates.shift();
    if (gate !== undefined) return gate;
    return Promise.resolve({ revision: body.revision + 1 });
  }

  sessionState(id: string): Promise<SessionState> {
    return Promise.resolve({
      id,
      revision: this.stateRevision,
      target: null,
      flags: [],
      truth: [],
    });
  }

  setTarget(
    id: string,
    body: { frame: number; instance: number; revision: number },
  ): Promise<MutationReply> {
    return this.handle("target", body);
  }

  addFlags(
    id: string,
    body: { rows: [number, number][]; revision: number },
  ): Promise<MutationReply> {
    return this.handle("flags", body);
  }

  addTruth(
    id: string,
    body: {
      frame: number;
      instance: number;
      verdict: ServiceVerdict;
      revision: number;
    },
  ): Promise<MutationReply> {
    return this.handle("truth", body);
  }
}

function makeController(service: FakeService, state = emptyState()) {
  const hints: string[] = [];
  const notices: string[] = [];
  const statuses: QueueStatus[] = [];
  const controller = new ReviewController(service, "s1", SEQ, state, {
    events: {
      onHint: (message) => hints.push(message),
      onNotice: (message) => notices.push(message),
      onStatus: (status) => statuses.push(status),
    },
    clock: () => "T0",
    retryDelayMs: 1,
    failingAfter: 2,
    delay: () => Promise.resolve(),
  });
  return { controller, hints, notices, statuses };
}

describe("pickTarget", () => {
  it("persists the clicked instance with the session revision", async () => {
    const service = new FakeService();
    const { controller, hints } = makeController(service);
    const hit = controller.pickTarget(45, 45, [BIG, SMALL]);
    expect(hit?.index).toBe(1);
    expect(controller.target).toEqual({ frame: 0, instance: 1 });
    expect(controller.view.pendingEdits).toBe(1);
    await controller.settled();
    expect(controller.view.pendingEdits).toBe(0);
    expect(service.calls).toEqual([
      { method: "target", body: { frame: 0, instance: 1, revision: 0 } },
    ]);
    expect(hints).toEqual([]);
    expect(controller.audit.lines()).toEqual([
      'T0 target {"frame":0,"instance":1}',
    ]);
  });

  it("hints and does nothing on a background click", async () => {
    const service = new FakeService();
    const { controller, hints } = makeController(service);
    expect(controller.pickTarget(200, 200, [BIG, SMALL])).toBeNull();
    await controller.settled();
    expect(hints).toEqual(["click landed on background, nothing selected"]);
    expect(service.calls).toEqual([]);
    expect(controller.target).toBeNull();
    expect(controller.view.pendingEdits).toBe(0);
  });

  it("requires target-pick mode on the first frame", async () => {
    const service = new FakeService();
    const { controller, hints } = makeController(service);
    controller.view.setMode("cleanse");
    expect(controller.pickTarget(45, 45, [SMALL])).toBeNull();
    controller.view.setMode("target-pick");
    controller.view.gotoIndex(1);
    expect(controller.pickTarget(45, 45, [SMALL])).toBeNull();
    await controller.settled();
    expect(service.calls).toEqual([]);
    expect(hints).toHaveLength(2);
    expect(hints[0]).toContain("target-pick mode");
    expect(hints[1]).toContain("first frame");
  });

  it("reverts the optimistic target on a stale-revision conflict", async () => {
    const service = new FakeService();
    service.failures.push(
      new ApiError({ status: 409, title: "stale revision", detail: "at 7" }),
    );
    service.stateRevision = 7;
    const { controller, notices } = makeController(service);
    controller.pickTarget(45, 45, [SMALL]);
    expect(controller.target).toEqual({ frame: 0, instance: 1 });
    await controller.settled();
    expect(controller.target).toBeNull();
    expect(controller.view.pendingEdits).toBe(0);
    expect(notices).toEqual(["target rejected: at 7"]);
    expect(controller.revision).toBe(7);
    controller.mark(SMALL, "tp");
    await controller.settled();
    expect(service.calls[1]?.body).toEqual({
      frame: 0,
      instance: 1,
      verdict: "target",
      revision: 7,
    });
  });
});

describe("mark", () => {
  it("flags a mislabelled bootstrap row", async () => {
    const service = new FakeService();
    const { controller } = makeController(service);
    controller.mark(BIG, "mislabelled");
    expect(controller.marksFor(0, 0).flagged).toBe(true);
    expect(controller.view.pendingEdits).toBe(1);
    await controller.settled();
    expect(controller.view.pendingEdits).toBe(0);
    expect(service.calls).toEqual([
      { method: "flags", body: { rows: [[0, 0]], revision: 0 } },
    ]);
    expect(controller.marksFor(0, 0)).toEqual({
      flagged: true,
      verdict: null,
      reviewed: true,
    });
  });

  it("maps tp and fp onto truth verdicts and missed onto the sentinel", async () => {
    const service = new FakeService();
    const { controller } = makeController(service);
    controller.mark(SMALL, "tp");
    controller.mark(BIG, "fp");
    controller.view.gotoIndex(2);
    controller.markMissed();
    await controller.settled();
    expect(service.calls).toEqual([
      {
        method: "truth",
        body: { frame: 0, instance: 1, verdict: "target", revision: 0 },
      },
      {
        method: "truth",
        body: { frame: 0, instance: 0, verdict: "not_target", revision: 1 },
      },
      {
        method: "truth",
        body: { frame: 2, instance: -1, verdict: "missed", revision: 2 },
      },
    ]);
    expect(controller.marksFor(0, 1).verdict).toBe("target");
    expect(controller.marksFor(0, 0).verdict).toBe("not_target");
    expect(controller.marksFor(2, -1).verdict).toBe("missed");
    expect(controller.revision).toBe(3);
  });

  it("records a correct row locally without any request", async () => {
    const service = new FakeService();
    const { controller } = makeController(service);
    controller.view.setMode("cleanse");
    controller.mark(BIG, "correct");
    await controller.settled();
    expect(service.calls).toEqual([]);
    expect(controller.marksFor(0, 0)).toEqual({
      flagged: false,
      verdict: null,
      reviewed: true,
    });
    expect(controller.nextUnreviewed([BIG, SMALL])?.index).toBe(1);
    expect(controller.audit.lines()).toEqual([
      'T0 mark {"frame":0,"instance":0,"verdict":"correct"}',
    ]);
  });

  it("restores the previous verdict when the service rejects the new one", async () => {
    const service = new FakeService();
    const seeded = emptyState();
    seeded.revision = 3;
    seeded.truth = [{ frame: 0, instance: 1, verdict: "target" }];
    service.stateRevision = 5;
    service.failures.push(
      new ApiError({ status: 409, title: "stale revision", detail: "at 5" }),
    );
    const { controller, notices } = makeController(service, seeded);
    controller.mark(SMALL, "fp");
    expect(controller.marksFor(0, 1).verdict).toBe("not_target");
    await controller.settled();
    expect(controller.marksFor(0, 1)).toEqual({
      flagged: false,
      verdict: "target",
      reviewed: true,
    });
    expect(notices).toEqual(["truth rejected: at 5"]);
    expect(controller.revision).toBe(5);
  });

  it("queues marks through an outage, retries and surfaces it", async () => {
    const service = new FakeService();
    service.failures.push(new TypeError("fetch failed"));
    service.failures.push(new TypeError("fetch failed"));
    const { controller, notices, statuses } = makeController(service);
    controller.mark(SMALL, "tp");
    await controller.settled();
    expect(service.calls).toHaveLength(3);
    expect(controller.marksFor(0, 1).verdict).toBe("target");
    expect(controller.view.pendingEdits).toBe(0);
    expect(statuses).toContain("failing");
    expect(notices).toEqual([
      "server unreachable, truth still queued for retry",
    ]);
  });

  it("counts every optimistic edit until the server acknowledges it", async () => {
    const service = new FakeService();
    const gateA = deferred<MutationReply>();
    const gateB = deferred<MutationReply>();
    service.gates.push(gateA.promise, gateB.promise);
    const { controller } = makeController(service);
    controller.mark(SMALL, "tp");
    controller.mark(BIG, "fp");
    expect(controller.view.pendingEdits).toBe(2);
    gateA.resolve({ revision: 1 });
    gateB.resolve({ revision: 2 });
    await controller.settled();
    expect(controller.view.pendingEdits).toBe(0);
    expect(controller.revision).toBe(2);
  });
});

describe("session state", () => {
  it("leaves marks intact across frame navigation", async () => {
    const service = new FakeService();
    const { controller } = makeController(service);
    controller.mark(SMALL, "tp");
    controller.mark(BIG, "mislabelled");
    await controller.settled();
    const before = [controller.marksFor(0, 0), controller.marksFor(0, 1)];
    controller.view.gotoIndex(2);
    controller.view.gotoIndex(0);
    expect([controller.marksFor(0, 0), controller.marksFor(0, 1)]).toEqual(
      before,
    );
    expect(before[0]).toEqual({ flagged: true, verdict: null, reviewed: true });
    expect(before[1]).toEqual({
      flagged: false,
      verdict: "target",
      reviewed: true,
    });
  });

  it("seeds the local mirror from a reloaded server session", () => {
    const service = new FakeService();
    const state: SessionState = {
      id: "s1",
      revision: 4,
      target: { frame: 0, instance: 2 },
      flags: [[1, 0]],
      truth: [{ frame: 1, instance: 1, verdict: "not_target" }],
    };
    const { controller } = makeController(service, state);
    expect(controller.target).toEqual({ frame: 0, instance: 2 });
    expect(controller.revision).toBe(4);
    expect(controller.marksFor(1, 0).flagged).toBe(true);
    expect(controller.marksFor(1, 1).verdict).toBe("not_target");
    controller.view.gotoIndex(1);
    const frameInstances = [
      inst(0, [0, 0, 9, 9], 80),
      inst(1, [20, 0, 29, 9], 80),
      inst(2, [40, 0, 49, 9], 80),
    ];
    expect(controller.nextUnreviewed(frameInstances)?.index).toBe(2);
  });
});

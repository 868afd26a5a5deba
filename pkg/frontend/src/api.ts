import type {
  InstanceBox,
  ProblemDetail,
  SequenceInfo,
  ServiceVerdict,
  SessionState,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface MutationReply {
  revision: number;
}

/** Subset of the service a review session mutates; stubbed in tests. */
export interface SessionApi {
  sessionState(id: string): Promise<SessionState>;
  setTarget(
    id: string,
    body: { frame: number; instance: number; revision: number },
  ): Promise<MutationReply>;
  addFlags(
    id: string,
    body: { rows: [number, number][]; revision: number },
  ): Promise<MutationReply>;
  addTruth(
    id: string,
    body: {
      frame: number;
      instance: number;
      verdict: ServiceVerdict;
      revision: number;
    },
  ): Promise<MutationReply>;
}

/** The service answered, but with a problem document. */
export class ApiError extends Error {
  readonly problem: ProblemDetail;

  constructor(problem: ProblemDetail) {
    super(`${problem.status} ${problem.title}: ${problem.detail}`);
    this.name = "ApiError";
    this.problem = problem;
  }
}

async function problemFrom(response: Response): Promise<ProblemDetail> {
  try {
    const body: unknown = await response.json();
    if (
      typeof body === "object" &&
      body !== null &&
      typeof (body as { title?: unknown }).title === "string" &&
      typeof (body as { detail?: unknown }).detail === "string"
    ) {
      const doc = body as { status?: unknown; title: string; detail: string };
      return {
        status: typeof doc.status === "number" ? doc.status : response.status,
        title: doc.title,
        detail: doc.detail,
      };
    }
  } catch {
    // non-JSON error body, fall through to the generic document
  }
  return {
    status: response.status,
    title: "request failed",
    detail: response.statusText || `http status ${response.status}`,
  };
}

/**
 * Thin typed client for the review service REST API. The transport is
 * injectable so tests can run without a server; network failures
 * propagate as-is and are distinguishable from ApiError rejections.
 */
export class ReviewApi implements SessionApi {
  private readonly base: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.base = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  private async getJson<T>(path: string): Promise<T> {
    const response = await this.fetchImpl(this.base + path);
    if (!response.ok) throw new ApiError(await problemFrom(response));
    return (await response.json()) as T;
  }

  private async getText(path: string): Promise<string> {
    const response = await this.fetchImpl(this.base + path);
    if (!response.ok) throw new ApiError(await problemFrom(response));
    return response.text();
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchImpl(this.base + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) throw new ApiError(await problemFrom(response));
    return (await response.json()) as T;
  }

  listSequences(): Promise<SequenceInfo[]> {
    return this.getJson("/sequences");
  }

  frameInstances(sequence: string, frame: number): Promise<InstanceBox[]> {
    const seq = encodeURIComponent(sequence);
    return this.getJson(`/sequences/${seq}/frames/${frame}/instances`);
  }

  frameImageUrl(sequence: string, frame: number): string {
    const seq = encodeURIComponent(sequence);
    return `${this.base}/sequences/${seq}/frames/${frame}/image.png`;
  }

  sessionState(id: string): Promise<SessionState> {
    return this.getJson(`/sessions/${encodeURIComponent(id)}`);
  }

  setTarget(
    id: string,
    body: { frame: number; instance: number; revision: number },
  ): Promise<MutationReply> {
    return this.post(`/sessions/${encodeURIComponent(id)}/target`, body);
  }

  addFlags(
    id: string,
    body: { rows: [number, number][]; revision: number },
  ): Promise<MutationReply> {
    return this.post(`/sessions/${encodeURIComponent(id)}/flags`, body);
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
    return this.post(`/sessions/${encodeURIComponent(id)}/truth`, body);
  }

  exportDatasetCsv(id: string): Promise<string> {
    return this.getText(`/sessions/${encodeURIComponent(id)}/export/dataset.csv`);
  }

  exportTruthJsonl(id: string): Promise<string> {
    return this.getText(`/sessions/${encodeURIComponent(id)}/export/truth.jsonl`);
  }
}

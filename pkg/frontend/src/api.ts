/** Typed client for the compositing service's /v1 HTTP API.
 *
 * Transport and time are injectable so tests can run against a scripted
 * server with instant polling. Jobs are submitted, then polled at a fixed
 * interval until done, failed, or the deadline passes.
 */

export interface ComposePayload {
  background: string; // base64 PNG
  object: string;
  mask: string;
  steps?: number;
  cfg_scale?: number;
  seed?: number;
  mask_level?: number;
}

export type JobState = "pending" | "running" | "done" | "failed";

export interface JobStatus {
  job_id: string;
  status: JobState;
  image?: string;
  error?: string;
}

export interface HealthStatus {
  status: string;
  version: string;
  checkpoint: string | null;
}

export interface ComposeResult {
  jobId: string;
  image: string; // base64 PNG
}

/** The server rejected one request field (HTTP 400 or 422). */
export class FieldError extends Error {
  constructor(readonly status: number, readonly field: string, message: string) {
    super(message);
    this.name = "FieldError";
  }
}

/** The compose queue is full (HTTP 429); retry after a short wait. */
export class BusyError extends Error {
  constructor(readonly retryAfterSeconds: number, message: string) {
    super(message);
    this.name = "BusyError";
  }
}

/** The request never reached the server or the response never arrived. */
export class NetworkError extends Error {
  constructor(message: string, readonly cause?: unknown) {
    super(message);
    this.name = "NetworkError";
  }
}

/** The job finished on the server with status "failed". */
export class JobFailedError extends Error {
  constructor(readonly jobId: string, message: string) {
    super(message);
    this.name = "JobFailedError";
  }
}

/** The job did not finish within the polling deadline. */
export class PollTimeoutError extends Error {
  constructor(readonly jobId: string, message: string) {
    super(message);
    this.name = "PollTimeoutError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;
export type SleepLike = (ms: number) => Promise<void>;

export interface ClientOptions {
  fetchFn?: FetchLike;
  sleep?: SleepLike;
  pollIntervalMs?: number;
  pollTimeoutMs?: number;
}

const defaultSleep: SleepLike = (ms) => new Promise((resolve) => setTimeout(resolve, ms));

async function detailOf(response: Response): Promise<unknown> {
  try {
    const body: unknown = await response.json();
    return typeof body === "object" && body !== null ? (body as { detail?: unknown }).detail : undefined;
  } catch {
    return undefined;
  }
}

export class ComposeClient {
  private readonly baseUrl: string;
  private readonly fetchFn: FetchLike;
  private readonly sleep: SleepLike;
  readonly pollIntervalMs: number;
  readonly pollTimeoutMs: number;

  constructor(baseUrl: string, options: ClientOptions = {}) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchFn = options.fetchFn ?? ((url, init) => fetch(url, init));
    this.sleep = options.sleep ?? defaultSleep;
    this.pollIntervalMs = options.pollIntervalMs ?? 1000;
    this.pollTimeoutMs = options.pollTimeoutMs ?? 120_000;
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    } catch (cause) {
      throw new NetworkError(`request to ${path} failed`, cause);
    }
    if (response.ok) return response;

    const detail = await detailOf(response);
    if (response.status === 429) {
      const hint = Number(response.headers.get("retry-after") ?? "1");
      const message = typeof detail === "string" ? detail : "server is busy";
      throw new BusyError(Number.isFinite(hint) ? hint : 1, message);
    }
    if (typeof detail === "object" && detail !== null && "field" in detail) {
      const d = detail as { field: string; error: string };
      throw new FieldError(response.status, d.field, d.error);
    }
    const message = typeof detail === "string" ? detail : `HTTP ${response.status} on ${path}`;
    throw new FieldError(response.status, "request", message);
  }

  async health(): Promise<HealthStatus> {
    const response = await this.request("/v1/health");
    return (await response.json()) as HealthStatus;
  }

  /** Queue a compose job; resolves to its id once the server accepts it. */
  async submit(payload: ComposePayload): Promise<string> {
    const response = await this.request("/v1/compose", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
    const body = (await response.json()) as { job_id: string };
    return body.job_id;
  }

  async jobStatus(jobId: string): Promise<JobStatus> {
    const response = await this.request(`/v1/jobs/${jobId}`);
    return (await response.json()) as JobStatus;
  }

  /** Poll until the job leaves the queue; throws on failure or deadline. */
  async waitForJob(jobId: string): Promise<JobStatus> {
    const attempts = Math.max(1, Math.ceil(this.pollTimeoutMs / this.pollIntervalMs));
    for (let i = 0; i < attempts; i++) {
      const status = await this.jobStatus(jobId);
      if (status.status === "done") return status;
      if (status.status === "failed") {
        throw new JobFailedError(jobId, status.error ?? "compose failed");
      }
      await this.sleep(this.pollIntervalMs);
    }
    throw new PollTimeoutError(jobId, `job ${jobId} still queued after ${this.pollTimeoutMs}ms`);
  }

  /** Submit and wait; resolves to the finished image. */
  async compose(payload: ComposePayload): Promise<ComposeResult> {
    const jobId = await this.submit(payload);
    const status = await this.waitForJob(jobId);
    if (!status.image) throw new JobFailedError(jobId, "job finished without an image");
    return { jobId, image: status.image };
  }
}

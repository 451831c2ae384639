/**
 * Thin client for the studio service. These five endpoints are the only
 * way the UI ever touches server state.
 */

export interface JobProgress {
  iteration: number;
  losses: {
    total: number;
    content: number;
    style: number;
    tv: number;
  } | null;
}

export interface Job {
  id: string;
  state: "queued" | "running" | "done" | "failed" | "cancelled";
  config: Record<string, unknown>;
  progress: JobProgress;
  snapshots: string[];
  error: { code: string; message: string } | null;
  created_at: string;
  updated_at: string;
}

/** The service's error JSON, surfaced verbatim. */
export class ServiceError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public field?: string,
  ) {
    super(message);
  }
}

/** Network-level failure (service unreachable): the UI shows a retry banner. */
export class OfflineError extends Error {
  constructor(cause: unknown) {
    super(`service unreachable: ${String(cause)}`);
  }
}

async function parseError(response: Response): Promise<ServiceError> {
  let code = "http_error";
  let message = `${response.status} ${response.statusText}`;
  let field: string | undefined;
  try {
    const body = await response.json();
    code = body.code ?? code;
    message = body.message ?? message;
    field = body.field;
  } catch {
    // non-JSON error body; keep the status line
  }
  return new ServiceError(response.status, code, message, field);
}

export class StudioClient {
  constructor(public baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async doFetch(path: string, init?: RequestInit): Promise<Response> {
    let response: Response;
    try {
      response = await fetch(`${this.baseUrl}${path}`, init);
    } catch (cause) {
      throw new OfflineError(cause);
    }
    if (!response.ok) {
      throw await parseError(response);
    }
    return response;
  }

  async health(): Promise<boolean> {
    const r = await this.doFetch("/healthz");
    return (await r.json()).status === "ok";
  }

  /** Upload PNG/JPEG bytes; returns the content-addressed asset id. */
  async uploadAsset(data: Uint8Array): Promise<string> {
    const r = await this.doFetch("/v1/assets", {
      method: "POST",
      headers: { "Content-Type": "application/octet-stream" },
      body: data as BodyInit,
    });
    return (await r.json()).asset_id;
  }

  async createJob(config: Record<string, unknown>): Promise<string> {
    const r = await this.doFetch("/v1/jobs", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(config),
    });
    return (await r.json()).job_id;
  }

  async getJob(jobId: string): Promise<Job> {
    const r = await this.doFetch(`/v1/jobs/${jobId}`);
    return (await r.json()) as Job;
  }

  async cancelJob(jobId: string): Promise<Job> {
    const r = await this.doFetch(`/v1/jobs/${jobId}`, { method: "DELETE" });
    return (await r.json()) as Job;
  }

  snapshotUrl(jobId: string, index: number): string {
    return `${this.baseUrl}/v1/jobs/${jobId}/snapshots/${index}`;
  }
}

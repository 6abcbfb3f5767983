/** Typed client for the drafting service HTTP API. */

import type { ApiConfig } from "./config.js";

export interface SectionTitle {
  index: number;
  text: string;
}

export interface Plan {
  titles: SectionTitle[];
  revision: number;
  approved: boolean;
}

export interface JobState {
  stage: string;
  section_index?: number;
  reason?: string;
}

export interface JobSpec {
  id: string;
  title: string;
  description: string;
  category?: string;
}

export interface JobConfig {
  mode: string;
  top_k: number;
  context_token_budget: number;
  llm_polish: boolean;
  seed: number;
}

export interface JobView {
  job_id: string;
  spec: JobSpec;
  config: JobConfig;
  state: JobState;
  plan: Plan | null;
  n_sections: number;
  draft_available: boolean;
  created_at: number;
  updated_at: number;
}

export interface JobSummary {
  job_id: string;
  title: string;
  state: JobState;
  created_at: number;
  updated_at: number;
}

export interface SectionRecord {
  index: number;
  title: string;
  content: string;
  summary: string;
}

export interface Draft {
  spec_id: string;
  sections: SectionRecord[];
  assembled_text: string;
  config: JobConfig;
  provenance: string[][];
}

export interface TraceEvent {
  kind: string;
  section_index?: number;
  retrieved_ids?: string[];
  [key: string]: unknown;
}

export interface DraftResponse {
  draft: Draft;
  trace: TraceEvent[];
}

export interface Metrics {
  rouge_l: { precision: number; recall: number; f1: number };
  bleu: number;
  meteor: number;
  variants: Record<string, string>;
}

export interface EvalResult {
  metrics: Metrics;
  judge: { score: number | null; parse: string | null } | null;
}

export type PlanEdit =
  | { op: "rename"; index: number; text: string }
  | { op: "insert"; index: number; text: string }
  | { op: "remove"; index: number }
  | { op: "move"; from_index: number; to_index: number };

/** Error body from the service: { code, message } plus the HTTP status. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class ApiClient {
  constructor(private readonly config: ApiConfig) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["Content-Type"] = "application/json";
    if (this.config.token) headers["Authorization"] = `Bearer ${this.config.token}`;
    const response = await fetch(this.config.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let code = "internal";
      let message = `${response.status} ${response.statusText}`;
      try {
        const payload = await response.json();
        if (typeof payload.code === "string") code = payload.code;
        if (typeof payload.message === "string") message = payload.message;
      } catch {
        // non-JSON error body; keep the status line
      }
      throw new ApiError(response.status, code, message);
    }
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/healthz");
  }

  createJob(
    spec: JobSpec,
    config?: Partial<JobConfig>,
  ): Promise<{ job_id: string; state: JobState }> {
    const body: Record<string, unknown> = { spec };
    if (config) body.config = config;
    return this.request("POST", "/jobs", body);
  }

  listJobs(): Promise<{ jobs: JobSummary[] }> {
    return this.request("GET", "/jobs");
  }

  getJob(jobId: string): Promise<JobView> {
    return this.request("GET", `/jobs/${jobId}`);
  }

  editPlan(jobId: string, edit: PlanEdit, expectedRevision: number): Promise<{ plan: Plan }> {
    return this.request("PATCH", `/jobs/${jobId}/plan`, {
      edit,
      expected_revision: expectedRevision,
    });
  }

  approve(jobId: string): Promise<{ state: JobState }> {
    return this.request("POST", `/jobs/${jobId}/approve`);
  }

  getDraft(jobId: string): Promise<DraftResponse> {
    return this.request("GET", `/jobs/${jobId}/draft`);
  }

  evaluate(jobId: string, referenceText: string): Promise<EvalResult> {
    return this.request("POST", `/jobs/${jobId}/evaluate`, {
      reference_text: referenceText,
    });
  }
}

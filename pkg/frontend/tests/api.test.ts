import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";

interface Recorded {
  url: string;
  method: string;
  headers: Record<string, string>;
  body: string | undefined;
}

describe("ApiClient", () => {
  const BASE = "http://api.test:1";
  let calls: Recorded[];
  let nextResponse: {
    status: number;
    statusText?: string;
    payload?: unknown;
    invalidJson?: boolean;
  };

  beforeEach(() => {
    calls = [];
    nextResponse = { status: 200, payload: {} };
    vi.stubGlobal("fetch", async (url: string, init?: RequestInit) => {
      calls.push({
        url,
        method: init?.method ?? "GET",
        headers: (init?.headers ?? {}) as Record<string, string>,
        body: init?.body as string | undefined,
      });
      const { status, statusText = "", payload, invalidJson } = nextResponse;
      return {
        ok: status < 400,
        status,
        statusText,
        json: async () => {
          if (invalidJson) throw new SyntaxError("not json");
          return payload;
        },
      };
    });
  });

  afterEach(() => {
    vi.unstubAllGlobals();
  });

  const client = () => new ApiClient({ baseUrl: BASE });

  it("builds URLs from the configured base", async () => {
    await client().getJob("j1");
    expect(calls[0].url).toBe(`${BASE}/jobs/j1`);
    expect(calls[0].method).toBe("GET");
    expect(calls[0].body).toBeUndefined();
    expect(calls[0].headers).not.toHaveProperty("Content-Type");
  });

  it("sends plan edits with the expected revision", async () => {
    await client().editPlan("j1", { op: "move", from_index: 2, to_index: 0 }, 5);
    expect(calls[0].url).toBe(`${BASE}/jobs/j1/plan`);
    expect(calls[0].method).toBe("PATCH");
    expect(calls[0].headers["Content-Type"]).toBe("application/json");
    expect(JSON.parse(calls[0].body!)).toEqual({
      edit: { op: "move", from_index: 2, to_index: 0 },
      expected_revision: 5,
    });
  });

  it("posts the reference text for evaluation", async () => {
    await client().evaluate("j1", "the reference");
    expect(calls[0].url).toBe(`${BASE}/jobs/j1/evaluate`);
    expect(calls[0].method).toBe("POST");
    expect(JSON.parse(calls[0].body!)).toEqual({ reference_text: "the reference" });
  });

  it("sends the spec and only includes config when given", async () => {
    const spec = { id: "j1", title: "T", description: "D" };
    await client().createJob(spec);
    expect(JSON.parse(calls[0].body!)).toEqual({ spec });

    await client().createJob(spec, { mode: "structure_only" });
    expect(JSON.parse(calls[1].body!)).toEqual({ spec, config: { mode: "structure_only" } });
  });

  it("approves with an empty body", async () => {
    await client().approve("j1");
    expect(calls[0].url).toBe(`${BASE}/jobs/j1/approve`);
    expect(calls[0].method).toBe("POST");
    expect(calls[0].body).toBeUndefined();
    expect(calls[0].headers).not.toHaveProperty("Content-Type");
  });

  it("attaches the bearer token only when configured", async () => {
    await new ApiClient({ baseUrl: BASE, token: "sekrit" }).listJobs();
    expect(calls[0].headers["Authorization"]).toBe("Bearer sekrit");

    await client().listJobs();
    expect(calls[1].headers).not.toHaveProperty("Authorization");
  });

  it("turns service errors into ApiError with the served code", async () => {
    nextResponse = {
      status: 409,
      payload: { code: "revision_mismatch", message: "plan revision mismatch" },
    };
    const error = await client()
      .approve("j1")
      .catch((e: unknown) => e);
    expect(error).toBeInstanceOf(ApiError);
    expect((error as ApiError).status).toBe(409);
    expect((error as ApiError).code).toBe("revision_mismatch");
    expect((error as ApiError).message).toBe("plan revision mismatch");
  });

  it("falls back to the status line when the error body is not JSON", async () => {
    nextResponse = { status: 502, statusText: "Bad Gateway", invalidJson: true };
    const error = await client()
      .getJob("j1")
      .catch((e: unknown) => e);
    expect(error).toBeInstanceOf(ApiError);
    expect((error as ApiError).code).toBe("internal");
    expect((error as ApiError).message).toBe("502 Bad Gateway");
  });
});

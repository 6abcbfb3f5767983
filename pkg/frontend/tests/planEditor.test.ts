import { describe, expect, it } from "vitest";

import { ApiError } from "../src/api.js";
import type { JobView, Plan, PlanEdit } from "../src/api.js";
import { CONFLICT_MESSAGE, PlanEditor } from "../src/planEditor.js";

const INITIAL: Plan = {
  titles: [
    { index: 0, text: "Introduction" },
    { index: 1, text: "Definitions" },
    { index: 2, text: "Obligations" },
  ],
  revision: 0,
  approved: false,
};

function viewWith(plan: Plan | null, stage = "awaiting_approval"): JobView {
  return {
    job_id: "j1",
    spec: { id: "j1", title: "T", description: "D" },
    config: { mode: "full_wrapper", top_k: 3, context_token_budget: 4500, llm_polish: false, seed: 0 },
    state: { stage },
    plan,
    n_sections: plan ? plan.titles.length : 0,
    draft_available: false,
    created_at: 1,
    updated_at: 1,
  };
}

function applyEdit(plan: Plan, edit: PlanEdit): Plan {
  const texts = plan.titles.map((t) => t.text);
  switch (edit.op) {
    case "rename":
      texts[edit.index] = edit.text;
      break;
    case "insert":
      texts.splice(edit.index, 0, edit.text);
      break;
    case "remove":
      texts.splice(edit.index, 1);
      break;
    case "move":
      texts.splice(edit.to_index, 0, ...texts.splice(edit.from_index, 1));
      break;
  }
  return {
    titles: texts.map((text, index) => ({ index, text })),
    revision: plan.revision + 1,
    approved: false,
  };
}

/** In-memory stand-in for the service: same optimistic-concurrency rules. */
function fakeApi(initial: Plan = INITIAL) {
  let plan = structuredClone(initial);
  const sent: { edit: PlanEdit; expectedRevision: number }[] = [];
  let failWith: ApiError | null = null;
  const api = {
    async editPlan(_jobId: string, edit: PlanEdit, expectedRevision: number) {
      sent.push({ edit, expectedRevision });
      if (failWith) throw failWith;
      if (expectedRevision !== plan.revision) {
        throw new ApiError(409, "revision_mismatch", "plan revision mismatch");
      }
      plan = applyEdit(plan, edit);
      return { plan: structuredClone(plan) };
    },
    async getJob(_jobId: string): Promise<JobView> {
      return viewWith(structuredClone(plan));
    },
  };
  return {
    api,
    sent,
    latest: () => plan,
    fail: (error: ApiError | null) => {
      failWith = error;
    },
  };
}

describe("PlanEditor", () => {
  it("sends every edit with the revision the server last confirmed", async () => {
    const { api, sent } = fakeApi();
    const editor = new PlanEditor(api, "j1");
    editor.load(viewWith(structuredClone(INITIAL)));

    expect(await editor.rename(0, "Scope of Work")).toBe(true);
    expect(await editor.insert(1, "Compensation")).toBe(true);
    expect(await editor.remove(2)).toBe(true);

    expect(sent.map((s) => s.expectedRevision)).toEqual([0, 1, 2]);
    expect(editor.revision).toBe(3);
    expect(editor.titles).toEqual(["Scope of Work", "Compensation", "Obligations"]);
  });

  it("raises the conflict banner on a stale edit and stops sending", async () => {
    const shared = fakeApi();
    const ahead = new PlanEditor(shared.api, "j1");
    ahead.load(viewWith(structuredClone(INITIAL)));
    await ahead.rename(0, "Preamble");

    const stale = new PlanEditor(shared.api, "j1");
    stale.load(viewWith(structuredClone(INITIAL)));
    expect(await stale.rename(0, "Scope")).toBe(false);
    expect(stale.status).toBe("conflict");
    expect(stale.conflictBanner).toBe(CONFLICT_MESSAGE);
    expect(stale.conflictBanner).toBe("plan changed elsewhere — reload");
    expect(stale.editable).toBe(false);

    const before = shared.sent.length;
    expect(await stale.rename(0, "Again")).toBe(false);
    expect(shared.sent.length).toBe(before);
    // the stale plan stays on screen untouched until the user reloads
    expect(stale.revision).toBe(0);
  });

  it("reload clears the conflict and adopts the server plan", async () => {
    const shared = fakeApi();
    const ahead = new PlanEditor(shared.api, "j1");
    ahead.load(viewWith(structuredClone(INITIAL)));
    await ahead.rename(0, "Preamble");

    const stale = new PlanEditor(shared.api, "j1");
    stale.load(viewWith(structuredClone(INITIAL)));
    await stale.rename(0, "Scope");
    expect(stale.status).toBe("conflict");

    await stale.reload();
    expect(stale.status).toBe("idle");
    expect(stale.conflictBanner).toBeNull();
    expect(stale.revision).toBe(shared.latest().revision);
    expect(stale.editable).toBe(true);
    expect(await stale.rename(0, "Scope")).toBe(true);
    expect(shared.latest().titles[0].text).toBe("Scope");
  });

  it("passes non-conflict errors through and stays editable", async () => {
    const { api, fail } = fakeApi();
    const editor = new PlanEditor(api, "j1");
    editor.load(viewWith(structuredClone(INITIAL)));

    fail(new ApiError(422, "invalid_edit", "bad index"));
    await expect(editor.remove(99)).rejects.toThrow("bad index");
    expect(editor.status).toBe("idle");
    expect(editor.conflictBanner).toBeNull();
    expect(editor.editable).toBe(true);
  });

  it("refuses to edit before any plan is loaded", async () => {
    const { api } = fakeApi();
    const editor = new PlanEditor(api, "j1");
    await expect(editor.rename(0, "X")).rejects.toThrow("no plan loaded");
  });

  it("is editable only while the job awaits approval", () => {
    const { api } = fakeApi();
    const editor = new PlanEditor(api, "j1");
    editor.load(viewWith(structuredClone(INITIAL), "generating"));
    expect(editor.editable).toBe(false);
    editor.load(viewWith(structuredClone(INITIAL)));
    expect(editor.editable).toBe(true);
  });
});

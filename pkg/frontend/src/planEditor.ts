/**
 * Plan editing with optimistic concurrency.
 *
 * Every edit is sent with the revision from the last server response, never
 * a guessed or cached-elsewhere one. A 409 from the server means someone
 * else moved the plan first; we keep our (now stale) view, raise the
 * conflict banner, and let the user reload before editing again.
 */

import { ApiClient, ApiError, type JobView, type Plan, type PlanEdit } from "./api.js";

export const CONFLICT_MESSAGE = "plan changed elsewhere — reload";

export type EditorStatus = "idle" | "saving" | "conflict";

type EditorApi = Pick<ApiClient, "editPlan" | "getJob">;

export class PlanEditor {
  private _plan: Plan | null = null;
  private stage = "";
  private _status: EditorStatus = "idle";
  private _banner: string | null = null;

  constructor(
    private readonly api: EditorApi,
    readonly jobId: string,
  ) {}

  /** Adopt a fresh server view; clears any conflict. */
  load(view: JobView): void {
    this._plan = view.plan;
    this.stage = view.state.stage;
    this._status = "idle";
    this._banner = null;
  }

  /** Re-fetch the job and adopt it. The way out of a conflict. */
  async reload(): Promise<void> {
    this.load(await this.api.getJob(this.jobId));
  }

  /** The plan as last confirmed by the server (load or successful edit). */
  get plan(): Plan | null {
    return this._plan;
  }

  get revision(): number | null {
    return this._plan ? this._plan.revision : null;
  }

  get titles(): string[] {
    return this._plan ? this._plan.titles.map((t) => t.text) : [];
  }

  get status(): EditorStatus {
    return this._status;
  }

  get conflictBanner(): string | null {
    return this._banner;
  }

  /** Edits are only offered while the job awaits plan approval. */
  get editable(): boolean {
    return this.stage === "awaiting_approval" && this._status !== "conflict";
  }

  rename(index: number, text: string): Promise<boolean> {
    return this.send({ op: "rename", index, text });
  }

  insert(index: number, text: string): Promise<boolean> {
    return this.send({ op: "insert", index, text });
  }

  remove(index: number): Promise<boolean> {
    return this.send({ op: "remove", index });
  }

  move(fromIndex: number, toIndex: number): Promise<boolean> {
    return this.send({ op: "move", from_index: fromIndex, to_index: toIndex });
  }

  private async send(edit: PlanEdit): Promise<boolean> {
    if (!this._plan) throw new Error("no plan loaded");
    if (this._status === "conflict") return false;
    this._status = "saving";
    try {
      const response = await this.api.editPlan(this.jobId, edit, this._plan.revision);
      this._plan = response.plan;
      this._status = "idle";
      this._banner = null;
      return true;
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        this._status = "conflict";
        this._banner = CONFLICT_MESSAGE;
        return false;
      }
      this._status = "idle";
      throw error;
    }
  }
}

/** App shell: one job list, one job detail pane, all state polled from the API. */

import { ApiClient } from "./api.js";
import type { DraftResponse, EvalResult, JobView } from "./api.js";
import { configFromPage } from "./config.js";
import { renderDraft, renderEval, renderJobList, renderPlanEditor, renderProgress } from "./dom.js";
import { PlanEditor } from "./planEditor.js";
import { Poller } from "./poll.js";
import { draftView, evalView, jobListView, planEditorView, progressView } from "./views.js";

const api = new ApiClient(configFromPage());
const app = document.getElementById("app") ?? document.body;

let currentJobId: string | null = null;
let editor: PlanEditor | null = null;
let lastView: JobView | null = null;
let lastDraft: DraftResponse | null = null;
let lastEval: EvalResult | null = null;

const listPane = document.createElement("div");
const formPane = document.createElement("div");
const detailPane = document.createElement("div");
app.append(formPane, listPane, detailPane);

const listPoller = new Poller({
  fetchValue: () => api.listJobs(),
  onUpdate: (response) => {
    listPane.replaceChildren(renderJobList(jobListView(response.jobs), openJob));
  },
  onError: (error) => showError(listPane, error),
});

const jobPoller = new Poller<JobView>({
  fetchValue: () => api.getJob(requireJobId()),
  onUpdate: (view) => {
    lastView = view;
    // a conflicted editor keeps its stale view until the user reloads
    if (editor && editor.status !== "conflict") editor.load(view);
    if (view.state.stage === "complete" && !lastDraft) void loadDraft();
    renderDetail();
  },
  onError: (error) => showError(detailPane, error),
});

function requireJobId(): string {
  if (!currentJobId) throw new Error("no job selected");
  return currentJobId;
}

function showError(pane: HTMLElement, error: unknown): void {
  const message = error instanceof Error ? error.message : String(error);
  const note = document.createElement("p");
  note.className = "error";
  note.textContent = message;
  pane.prepend(note);
}

function openJob(jobId: string): void {
  currentJobId = jobId;
  editor = new PlanEditor(api, jobId);
  lastView = null;
  lastDraft = null;
  lastEval = null;
  jobPoller.stop();
  jobPoller.start();
}

async function loadDraft(): Promise<void> {
  try {
    lastDraft = await api.getDraft(requireJobId());
    renderDetail();
  } catch (error) {
    showError(detailPane, error);
  }
}

function renderDetail(): void {
  if (!lastView) return;
  const view = lastView;
  detailPane.replaceChildren();
  detailPane.append(renderProgress(progressView(view)));

  if (editor) {
    const planEditor = editor;
    // show the plan the editor last adopted from the server, not an older poll
    const planSource = planEditor.plan ? { ...view, plan: planEditor.plan } : view;
    detailPane.append(
      renderPlanEditor(planEditorView(planSource), planEditor.conflictBanner, {
        onRename: (index, text) => void applyEdit(() => planEditor.rename(index, text)),
        onInsert: (index, text) => void applyEdit(() => planEditor.insert(index, text)),
        onRemove: (index) => void applyEdit(() => planEditor.remove(index)),
        onMove: (fromIndex, toIndex) => void applyEdit(() => planEditor.move(fromIndex, toIndex)),
        onApprove: () => void approve(),
        onReload: () => void reloadPlan(),
      }),
    );
  }

  if (lastDraft) {
    detailPane.append(renderDraft(draftView(lastDraft.draft)));
    const form = document.createElement("form");
    const reference = document.createElement("textarea");
    reference.placeholder = "reference text";
    const submit = document.createElement("button");
    submit.textContent = "evaluate";
    form.append(reference, submit);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void evaluate(reference.value);
    });
    detailPane.append(form);
  }
  if (lastEval) detailPane.append(renderEval(evalView(lastEval)));
}

async function applyEdit(send: () => Promise<boolean>): Promise<void> {
  try {
    await send();
  } catch (error) {
    showError(detailPane, error);
  }
  renderDetail();
}

async function reloadPlan(): Promise<void> {
  try {
    await editor?.reload();
  } catch (error) {
    showError(detailPane, error);
  }
  renderDetail();
}

async function approve(): Promise<void> {
  try {
    await api.approve(requireJobId());
  } catch (error) {
    showError(detailPane, error);
  }
}

async function evaluate(referenceText: string): Promise<void> {
  try {
    lastEval = await api.evaluate(requireJobId(), referenceText);
    renderDetail();
  } catch (error) {
    showError(detailPane, error);
  }
}

function renderForm(): void {
  const form = document.createElement("form");
  form.className = "new-job";
  const field = (name: string, placeholder: string): HTMLInputElement => {
    const input = document.createElement("input");
    input.name = name;
    input.placeholder = placeholder;
    form.append(input);
    return input;
  };
  const id = field("id", "job id");
  const title = field("title", "title");
  const description = field("description", "description");
  const mode = document.createElement("select");
  for (const value of ["full_wrapper", "structure_only", "long_prompt_only", "retrieval_only"]) {
    const option = document.createElement("option");
    option.value = value;
    option.textContent = value;
    mode.append(option);
  }
  form.append(mode);
  const submit = document.createElement("button");
  submit.textContent = "create job";
  form.append(submit);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    void (async () => {
      try {
        const view = await api.createJob(
          { id: id.value, title: title.value, description: description.value },
          { mode: mode.value },
        );
        openJob(view.job_id);
      } catch (error) {
        showError(formPane, error);
      }
    })();
  });
  formPane.replaceChildren(form);
}

renderForm();
listPoller.start();

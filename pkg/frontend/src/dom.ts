/** DOM rendering for the view models. Everything re-renders from scratch;
 * state lives on the server and in the small app shell, never in the DOM. */

import type { EvalViewModel, DraftViewModel, JobListRow, PlanEditorViewModel, ProgressViewModel } from "./views.js";

type Child = Node | string;

export function el(tag: string, attrs: Record<string, string> = {}, children: Child[] = []): HTMLElement {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  for (const child of children) {
    node.append(typeof child === "string" ? document.createTextNode(child) : child);
  }
  return node;
}

export function renderJobList(rows: JobListRow[], onOpen: (jobId: string) => void): HTMLElement {
  const list = el("ul", { class: "job-list" });
  for (const row of rows) {
    const open = el("a", { href: "#" }, [row.title || row.jobId]);
    open.addEventListener("click", (event) => {
      event.preventDefault();
      onOpen(row.jobId);
    });
    const meta = row.detail ? `${row.stage}: ${row.detail}` : row.stage;
    list.append(el("li", {}, [open, " ", el("span", { class: "stage" }, [meta])]));
  }
  if (!rows.length) list.append(el("li", { class: "empty" }, ["no jobs yet"]));
  return list;
}

export interface PlanEditorHandlers {
  onRename: (index: number, text: string) => void;
  onInsert: (index: number, text: string) => void;
  onRemove: (index: number) => void;
  onMove: (fromIndex: number, toIndex: number) => void;
  onApprove: () => void;
  onReload: () => void;
}

export function renderPlanEditor(
  model: PlanEditorViewModel,
  banner: string | null,
  handlers: PlanEditorHandlers,
): HTMLElement {
  const root = el("section", { class: "plan-editor" });
  root.append(el("span", { class: "revision-badge" }, [model.revisionBadge]));
  if (banner) {
    const note = el("div", { class: "conflict-banner", role: "alert" }, [banner, " "]);
    const reload = el("button", {}, ["reload"]);
    reload.addEventListener("click", handlers.onReload);
    note.append(reload);
    root.append(note);
  }

  const list = el("ol", { class: "titles" });
  model.titles.forEach((title, position) => {
    const item = el("li", { draggable: model.enabled ? "true" : "false" });
    const input = el("input", { value: title.text, type: "text" }) as HTMLInputElement;
    input.disabled = !model.enabled;
    input.addEventListener("change", () => handlers.onRename(position, input.value));

    const remove = el("button", { title: "remove section" }, ["x"]) as HTMLButtonElement;
    remove.disabled = !model.enabled;
    remove.addEventListener("click", () => handlers.onRemove(position));

    const insert = el("button", { title: "insert section below" }, ["+"]) as HTMLButtonElement;
    insert.disabled = !model.enabled;
    insert.addEventListener("click", () => {
      const text = window.prompt("New section title");
      if (text) handlers.onInsert(position + 1, text);
    });

    item.append(input, remove, insert);
    // drag to reorder: remember the origin index, drop on the target item
    item.addEventListener("dragstart", (event) => {
      event.dataTransfer?.setData("text/plain", String(position));
    });
    item.addEventListener("dragover", (event) => event.preventDefault());
    item.addEventListener("drop", (event) => {
      event.preventDefault();
      const origin = Number(event.dataTransfer?.getData("text/plain"));
      if (Number.isInteger(origin) && origin !== position) {
        handlers.onMove(origin, position);
      }
    });
    list.append(item);
  });
  root.append(list);

  const approve = el("button", { class: "approve" }, ["approve plan"]) as HTMLButtonElement;
  approve.disabled = !model.enabled;
  approve.addEventListener("click", handlers.onApprove);
  root.append(approve);
  return root;
}

export function renderProgress(model: ProgressViewModel): HTMLElement {
  const root = el("section", { class: "progress" }, [el("h3", {}, [model.stage])]);
  if (model.reason) root.append(el("p", { class: "reason" }, [model.reason]));
  const list = el("ol");
  for (const row of model.rows) {
    list.append(el("li", { class: row.status }, [`${row.title} [${row.status}]`]));
  }
  root.append(list);
  return root;
}

export function renderDraft(model: DraftViewModel): HTMLElement {
  // read-only by design: generated text is a draft for review, not an editor
  const root = el("section", { class: "draft" });
  for (const section of model.sections) {
    const context =
      typeof section.context === "string"
        ? el("p", { class: "no-context" }, [section.context])
        : el("ul", {}, section.context.map((id) => el("li", {}, [id])));
    root.append(
      el("article", {}, [
        el("h3", {}, [section.heading]),
        el("pre", {}, [section.content]),
        el("details", {}, [
          el("summary", {}, ["retrieved context"]),
          el("p", { class: "section-summary" }, [section.summary]),
          context,
        ]),
      ]),
    );
  }
  return root;
}

export function renderEval(model: EvalViewModel): HTMLElement {
  const table = el("table", { class: "metrics" });
  for (const row of model.rows) {
    table.append(el("tr", {}, [el("td", {}, [row.metric]), el("td", {}, [row.value])]));
  }
  table.append(el("tr", {}, [el("td", {}, ["judge"]), el("td", {}, [model.judge])]));
  return table;
}

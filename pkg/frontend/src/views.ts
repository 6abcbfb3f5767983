/** Pure view models. No DOM, no fetch: plain data in, plain data out. */

import type { Draft, EvalResult, JobSummary, JobView } from "./api.js";

export const RETRIEVAL_DISABLED = "retrieval disabled" as const;

const RETRIEVAL_MODES = new Set(["full_wrapper", "retrieval_only"]);

export interface JobListRow {
  jobId: string;
  title: string;
  stage: string;
  detail: string;
}

export function jobListView(jobs: JobSummary[]): JobListRow[] {
  return jobs.map((job) => ({
    jobId: job.job_id,
    title: job.title,
    stage: job.state.stage,
    detail: stateDetail(job.state.stage, job.state.section_index, job.state.reason),
  }));
}

function stateDetail(stage: string, sectionIndex?: number, reason?: string): string {
  if (stage === "generating" && sectionIndex !== undefined) {
    return `section ${sectionIndex + 1}`;
  }
  if (stage === "failed" && reason) return reason;
  return "";
}

export interface PlanEditorViewModel {
  enabled: boolean;
  revisionBadge: string;
  titles: { index: number; text: string }[];
  approved: boolean;
}

export function planEditorView(view: JobView): PlanEditorViewModel {
  const plan = view.plan;
  return {
    enabled: view.state.stage === "awaiting_approval",
    revisionBadge: plan ? `rev ${plan.revision}` : "no plan yet",
    titles: plan ? plan.titles.map((t) => ({ index: t.index, text: t.text })) : [],
    approved: plan ? plan.approved : false,
  };
}

export type SectionStatus = "done" | "writing" | "pending";

export interface ProgressViewModel {
  stage: string;
  reason: string | null;
  rows: { index: number; title: string; status: SectionStatus }[];
}

export function progressView(view: JobView): ProgressViewModel {
  const titles = view.plan ? view.plan.titles.map((t) => t.text) : [];
  const stage = view.state.stage;
  const writing = stage === "generating" ? (view.state.section_index ?? 0) : null;
  const allDone = stage === "refining" || stage === "complete";
  const rows = titles.map((title, index) => {
    let status: SectionStatus = "pending";
    if (allDone || (writing !== null && index < writing)) status = "done";
    else if (writing === index) status = "writing";
    return { index, title, status };
  });
  return { stage, reason: view.state.reason ?? null, rows };
}

export interface DraftSectionViewModel {
  heading: string;
  content: string;
  summary: string;
  /** Retrieved entry ids shown in the context inspector, or the disabled note. */
  context: string[] | typeof RETRIEVAL_DISABLED;
}

export interface DraftViewModel {
  assembledText: string;
  sections: DraftSectionViewModel[];
}

export function draftView(draft: Draft): DraftViewModel {
  const retrievalOn = RETRIEVAL_MODES.has(draft.config.mode);
  const sections = draft.sections.map((section, i) => ({
    heading: `${section.index + 1}. ${section.title}`.trimEnd(),
    content: section.content,
    summary: section.summary,
    context: retrievalOn ? (draft.provenance[i] ?? []) : RETRIEVAL_DISABLED,
  }));
  return { assembledText: draft.assembled_text, sections };
}

export interface EvalViewModel {
  rows: { metric: string; value: string }[];
  judge: string;
}

export function evalView(result: EvalResult): EvalViewModel {
  const m = result.metrics;
  const rows = [
    { metric: "rouge_l_f1", value: m.rouge_l.f1.toFixed(4) },
    { metric: "bleu", value: m.bleu.toFixed(4) },
    { metric: "meteor", value: m.meteor.toFixed(4) },
  ];
  let judge = "-";
  if (result.judge && result.judge.score !== null) {
    judge = `${result.judge.score} (${result.judge.parse})`;
  }
  return { rows, judge };
}

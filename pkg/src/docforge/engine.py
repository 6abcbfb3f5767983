"""Generate a document section by section over an approved plan.

Each section gets a retrieval-augmented context, produces content plus a
summary, and the summary is stored before the next section begins. Ablation
modes strip structure, retrieval, or both.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .errors import DocforgeError, GenerationFailed, PipelineError
from .gateway import ChatRequest, Gateway, render_template
from .memory import EmbeddingProvider, HashEmbeddingProvider, MemoryIndex, build_entry
from .model import (
    DocumentSpec,
    DraftDocument,
    GenerationConfig,
    JobState,
    Mode,
    SectionPlan,
    SectionRecord,
    token_estimate,
)

SUMMARY_MARKER = "SUMMARY:"
SUMMARY_WORD_CAP = 120
SECTION_MAX_TOKENS = 2048
LONG_DOC_MAX_TOKENS = 8192
DEFAULT_CHUNK_COUNT = 4

Progress = Callable[[JobState], None]
TraceSink = list


@dataclass(frozen=True, slots=True)
class SectionContext:
    section_index: int
    doc_title: str
    description: str
    section_title: str
    retrieved: tuple[tuple[str, str], ...]
    budget_tokens: int
    retrieved_ids: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if len(self.retrieved_ids) != len(self.retrieved):
            raise ValueError("retrieved_ids must parallel retrieved")
        if self.token_estimate > self.budget_tokens and (
            self.retrieved or self.description
        ):
            raise ValueError("context exceeds its token budget")

    @property
    def token_estimate(self) -> int:
        total = token_estimate(self.doc_title) + token_estimate(self.description)
        total += token_estimate(self.section_title)
        for title, summary in self.retrieved:
            total += token_estimate(title) + token_estimate(summary)
        return total


def _trace(sink: TraceSink | None, event: dict) -> None:
    if sink is not None:
        sink.append(event)


def _clip_words(text: str, cap: int) -> str:
    words = text.split()
    return " ".join(words[:cap])


def build_context(
    spec: DocumentSpec,
    plan: SectionPlan,
    section_index: int,
    memory: MemoryIndex,
    config: GenerationConfig,
    embedding_provider: EmbeddingProvider | None = None,
    job_id: str | None = None,
    trace_sink: TraceSink | None = None,
) -> SectionContext:
    """Assemble one section's context, trimmed to the token budget."""
    if not plan.approved:
        raise ValueError("plan must be approved before generation")
    if not 0 <= section_index < len(plan.titles):
        raise ValueError(f"section index {section_index} outside plan")
    job = job_id if job_id is not None else spec.id
    provider = embedding_provider or HashEmbeddingProvider(seed=config.seed)
    title = plan.texts[section_index]

    retrieved: list[tuple[str, str]] = []
    ids: list[str] = []
    if config.mode.uses_retrieval and config.top_k > 0 and memory.count(job) > 0:
        query_text = f"{title} {spec.description}".strip()
        results = memory.query(job, query_text, config.top_k, provider)
        retrieved = [(r.entry.title, r.entry.summary) for r in results]
        ids = [f"{job}:{r.entry.section_index}" for r in results]
        _trace(
            trace_sink,
            {
                "kind": "query",
                "section_index": section_index,
                "k": config.top_k,
                "returned": len(results),
                "retrieved_ids": list(ids),
            },
        )

    budget = config.context_token_budget
    description = spec.description

    def over() -> int:
        total = token_estimate(spec.title) + token_estimate(description)
        total += token_estimate(title)
        total += sum(token_estimate(t) + token_estimate(s) for t, s in retrieved)
        return total - budget

    # lowest-scored summaries go first; the description is cut only after that
    while retrieved and over() > 0:
        retrieved.pop()
        ids.pop()
    if over() > 0:
        words = description.split()
        keep = max(0, len(words) - over())
        description = " ".join(words[:keep])

    return SectionContext(
        section_index=section_index,
        doc_title=spec.title,
        description=description,
        section_title=title,
        retrieved=tuple(retrieved),
        budget_tokens=budget,
        retrieved_ids=tuple(ids),
    )


def _retrieved_block(retrieved: tuple[tuple[str, str], ...]) -> str:
    if not retrieved:
        return ""
    lines = ["Summaries of related parts already written:"]
    for title, summary in retrieved:
        label = title if title else "(untitled part)"
        lines.append(f"- {label}: {summary}")
    return "\n".join(lines) + "\n"


def _split_summary(text: str) -> tuple[str, str]:
    """Split model output at the last SUMMARY: marker; ("", text) if absent."""
    cut = text.rfind(SUMMARY_MARKER)
    if cut < 0:
        return text.strip(), ""
    content = text[:cut].strip()
    summary = text[cut + len(SUMMARY_MARKER):].strip()
    return content, summary


def _summarize(
    content: str,
    gateway: Gateway,
    config: GenerationConfig,
    section_index: int,
    trace_sink: TraceSink | None,
) -> str:
    prompt = render_template("summarize", {"content": content})
    _trace(
        trace_sink,
        {
            "kind": "summarize",
            "section_index": section_index,
            "template_id": "summarize",
            "prompt_tokens": token_estimate(prompt),
            "retrieved_ids": [],
        },
    )
    response = gateway.complete(
        ChatRequest.of(prompt, max_tokens=SECTION_MAX_TOKENS, seed=config.seed)
    )
    return response.text.strip()


def generate_section(
    context: SectionContext,
    gateway: Gateway,
    config: GenerationConfig,
    trace_sink: TraceSink | None = None,
) -> SectionRecord:
    """One model call for content + summary; a second call only if the
    summary marker is missing."""
    prompt = render_template(
        "section",
        {
            "title": context.doc_title,
            "description": context.description,
            "retrieved_block": _retrieved_block(context.retrieved),
            "section_title": context.section_title,
        },
    )
    _trace(
        trace_sink,
        {
            "kind": "generate",
            "section_index": context.section_index,
            "template_id": "section",
            "prompt_tokens": token_estimate(prompt),
            "retrieved_ids": list(context.retrieved_ids),
        },
    )
    response = gateway.complete(
        ChatRequest.of(prompt, max_tokens=SECTION_MAX_TOKENS, seed=config.seed)
    )
    content, summary = _split_summary(response.text)
    if not content:
        raise GenerationFailed(
            f"empty content for section {context.section_index}"
        )
    if not summary:
        summary = _summarize(content, gateway, config, context.section_index, trace_sink)
    if not summary:
        raise GenerationFailed(
            f"empty summary for section {context.section_index}"
        )
    return SectionRecord(
        index=context.section_index,
        title=context.section_title,
        content=content,
        summary=_clip_words(summary, SUMMARY_WORD_CAP),
    )


def _headings_once_in_order(text: str, sections: list[SectionRecord]) -> bool:
    position = -1
    for i, record in enumerate(sections):
        heading = f"{i + 1}. {record.title}".rstrip()
        if text.count(heading) != 1:
            return False
        found = text.find(heading)
        if found <= position:
            return False
        position = found
    return True


def refine_document(
    sections: list[SectionRecord] | tuple[SectionRecord, ...],
    config: GenerationConfig,
    gateway: Gateway | None = None,
    trace_sink: TraceSink | None = None,
) -> str:
    """Deterministic numbered assembly, with an optional verified polish pass."""
    sections = list(sections)
    blocks = []
    for i, record in enumerate(sections):
        heading = f"{i + 1}. {record.title}".rstrip()
        if record.content:
            blocks.append(f"{heading}\n\n{record.content}")
        else:
            blocks.append(heading)
    assembled = "\n\n".join(blocks).rstrip()

    if config.llm_polish and gateway is not None and sections:
        prompt = render_template("polish", {"document": assembled})
        _trace(
            trace_sink,
            {
                "kind": "polish",
                "section_index": None,
                "template_id": "polish",
                "prompt_tokens": token_estimate(prompt),
                "retrieved_ids": [],
            },
        )
        response = gateway.complete(
            ChatRequest.of(prompt, max_tokens=LONG_DOC_MAX_TOKENS, seed=config.seed)
        )
        polished = response.text.strip()
        if polished and _headings_once_in_order(polished, sections):
            return polished
    return assembled


def _category_line(spec: DocumentSpec) -> str:
    return f"Category: {spec.category}\n" if spec.category else ""


def run_pipeline(
    spec: DocumentSpec,
    plan: SectionPlan | None,
    gateway: Gateway,
    memory: MemoryIndex,
    config: GenerationConfig,
    job_id: str | None = None,
    embedding_provider: EmbeddingProvider | None = None,
    chunk_count: int = DEFAULT_CHUNK_COUNT,
    progress: Progress | None = None,
    trace_sink: TraceSink | None = None,
) -> DraftDocument:
    """Drive one document from approved plan (or none) to assembled draft."""
    job = job_id if job_id is not None else spec.id
    provider = embedding_provider or HashEmbeddingProvider(seed=config.seed)

    def report(state: JobState) -> None:
        if progress is not None:
            progress(state)

    if config.mode is Mode.LONG_PROMPT_ONLY:
        return _run_long_prompt(spec, gateway, config, report, trace_sink)
    if config.mode is Mode.RETRIEVAL_ONLY:
        return _run_chunked(
            spec, gateway, memory, config, job, provider, chunk_count, report, trace_sink
        )
    return _run_sectioned(
        spec, plan, gateway, memory, config, job, provider, report, trace_sink
    )


def _run_sectioned(
    spec, plan, gateway, memory, config, job, provider, report, trace_sink
) -> DraftDocument:
    if plan is None or not plan.approved:
        raise ValueError("this mode needs an approved plan")
    sections: list[SectionRecord] = []
    provenance: list[tuple[str, ...]] = []
    for i, title in enumerate(plan.texts):
        report(JobState.generating(i))
        try:
            context = build_context(
                spec,
                plan,
                i,
                memory,
                config,
                embedding_provider=provider,
                job_id=job,
                trace_sink=trace_sink,
            )
            record = generate_section(context, gateway, config, trace_sink=trace_sink)
            if config.mode is Mode.FULL_WRAPPER:
                memory.upsert(build_entry(job, i, title, record.summary, provider))
                _trace(
                    trace_sink,
                    {"kind": "upsert", "section_index": i, "entry_id": f"{job}:{i}"},
                )
        except DocforgeError as exc:
            raise PipelineError(i, str(exc)) from exc
        sections.append(record)
        provenance.append(context.retrieved_ids)
    report(JobState.refining())
    assembled = refine_document(sections, config, gateway, trace_sink=trace_sink)
    return DraftDocument(
        spec_id=spec.id,
        sections=tuple(sections),
        assembled_text=assembled,
        config=config,
        provenance=tuple(provenance),
    )


def _run_long_prompt(spec, gateway, config, report, trace_sink) -> DraftDocument:
    report(JobState.generating(0))
    prompt = render_template(
        "long_document",
        {
            "title": spec.title,
            "description": spec.description,
            "category_line": _category_line(spec),
        },
    )
    _trace(
        trace_sink,
        {
            "kind": "generate",
            "section_index": 0,
            "template_id": "long_document",
            "prompt_tokens": token_estimate(prompt),
            "retrieved_ids": [],
        },
    )
    response = gateway.complete(
        ChatRequest.of(prompt, max_tokens=LONG_DOC_MAX_TOKENS, seed=config.seed)
    )
    text = response.text.strip()
    if not text:
        raise PipelineError(0, "model returned an empty document")
    record = SectionRecord(
        index=0, title="", content=text, summary=_clip_words(text, SUMMARY_WORD_CAP)
    )
    report(JobState.refining())
    # the single call's output is the document; no assembly pass
    return DraftDocument(
        spec_id=spec.id,
        sections=(record,),
        assembled_text=text,
        config=config,
        provenance=(),
    )


def _run_chunked(
    spec, gateway, memory, config, job, provider, chunk_count, report, trace_sink
) -> DraftDocument:
    if chunk_count < 1:
        raise ValueError("chunk_count must be >= 1")
    sections: list[SectionRecord] = []
    provenance: list[tuple[str, ...]] = []
    for i in range(chunk_count):
        report(JobState.generating(i))
        try:
            retrieved: list[tuple[str, str]] = []
            ids: list[str] = []
            if config.top_k > 0 and memory.count(job) > 0:
                results = memory.query(job, spec.description, config.top_k, provider)
                retrieved = [(r.entry.title, r.entry.summary) for r in results]
                ids = [f"{job}:{r.entry.section_index}" for r in results]
                _trace(
                    trace_sink,
                    {
                        "kind": "query",
                        "section_index": i,
                        "k": config.top_k,
                        "returned": len(results),
                        "retrieved_ids": list(ids),
                    },
                )
            prompt = render_template(
                "chunk",
                {
                    "title": spec.title,
                    "description": spec.description,
                    "retrieved_block": _retrieved_block(tuple(retrieved)),
                    "chunk_number": str(i + 1),
                    "chunk_count": str(chunk_count),
                },
            )
            _trace(
                trace_sink,
                {
                    "kind": "generate",
                    "section_index": i,
                    "template_id": "chunk",
                    "prompt_tokens": token_estimate(prompt),
                    "retrieved_ids": list(ids),
                },
            )
            response = gateway.complete(
                ChatRequest.of(prompt, max_tokens=SECTION_MAX_TOKENS, seed=config.seed)
            )
            content, summary = _split_summary(response.text)
            if not content:
                raise GenerationFailed(f"empty content for chunk {i}")
            if not summary:
                summary = _summarize(content, gateway, config, i, trace_sink)
            if not summary:
                raise GenerationFailed(f"empty summary for chunk {i}")
            summary = _clip_words(summary, SUMMARY_WORD_CAP)
            memory.upsert(build_entry(job, i, "", summary, provider))
            _trace(
                trace_sink,
                {"kind": "upsert", "section_index": i, "entry_id": f"{job}:{i}"},
            )
        except DocforgeError as exc:
            raise PipelineError(i, str(exc)) from exc
        sections.append(SectionRecord(index=i, title="", content=content, summary=summary))
        provenance.append(tuple(ids))
    report(JobState.refining())
    assembled = refine_document(sections, config, gateway, trace_sink=trace_sink)
    return DraftDocument(
        spec_id=spec.id,
        sections=tuple(sections),
        assembled_text=assembled,
        config=config,
        provenance=tuple(provenance),
    )

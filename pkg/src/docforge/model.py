"""Core domain types shared by every module.

All types are immutable values; mutation happens only through the job store.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any

MAX_TITLE_CHARS = 200
MAX_PLAN_TITLES = 64


def token_estimate(text: str) -> int:
    """Whitespace-token count; the engine's model-agnostic budget unit."""
    return len(text.split())


class Mode(str, enum.Enum):
    FULL_WRAPPER = "full_wrapper"
    LONG_PROMPT_ONLY = "long_prompt_only"
    RETRIEVAL_ONLY = "retrieval_only"
    STRUCTURE_ONLY = "structure_only"

    @property
    def uses_retrieval(self) -> bool:
        return self in (Mode.FULL_WRAPPER, Mode.RETRIEVAL_ONLY)

    @property
    def uses_plan(self) -> bool:
        return self in (Mode.FULL_WRAPPER, Mode.STRUCTURE_ONLY)


@dataclass(frozen=True, slots=True)
class DocumentSpec:
    """User input: what document to draft and how."""

    id: str
    title: str
    description: str
    category: str = ""

    def to_payload(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "title": self.title,
            "description": self.description,
            "category": self.category,
        }

    @classmethod
    def from_payload(cls, payload: dict[str, Any]) -> "DocumentSpec":
        return cls(
            id=str(payload["id"]),
            title=str(payload.get("title", "")),
            description=str(payload.get("description", "")),
            category=str(payload.get("category", "")),
        )


def validate_spec(spec: DocumentSpec) -> list[str]:
    """Return a list of violations; empty means the spec is usable."""
    violations = []
    if not spec.title.strip():
        violations.append("empty title")
    if not spec.description.strip():
        violations.append("empty description")
    return violations


@dataclass(frozen=True, slots=True)
class SectionTitle:
    index: int
    text: str

    def to_payload(self) -> dict[str, Any]:
        return {"index": self.index, "text": self.text}


def _folded(text: str) -> str:
    return text.strip().casefold()


@dataclass(frozen=True, slots=True)
class SectionPlan:
    """Ordered section titles plus edit-tracking state."""

    titles: tuple[SectionTitle, ...]
    revision: int = 0
    approved: bool = False

    def __post_init__(self) -> None:
        for pos, title in enumerate(self.titles):
            if title.index != pos:
                raise ValueError(f"title index {title.index} at position {pos}")
            if not title.text.strip():
                raise ValueError("empty section title")
            if len(title.text) > MAX_TITLE_CHARS:
                raise ValueError(f"section title longer than {MAX_TITLE_CHARS} chars")
        folded = [_folded(t.text) for t in self.titles]
        if len(set(folded)) != len(folded):
            raise ValueError("duplicate section titles")
        if len(self.titles) > MAX_PLAN_TITLES:
            raise ValueError(f"more than {MAX_PLAN_TITLES} section titles")
        if self.approved and not self.titles:
            raise ValueError("approved plan must not be empty")

    @classmethod
    def from_texts(cls, texts: list[str], revision: int = 0, approved: bool = False) -> "SectionPlan":
        return cls(
            titles=tuple(SectionTitle(i, t) for i, t in enumerate(texts)),
            revision=revision,
            approved=approved,
        )

    @property
    def texts(self) -> list[str]:
        return [t.text for t in self.titles]

    def to_payload(self) -> dict[str, Any]:
        return {
            "titles": [t.to_payload() for t in self.titles],
            "revision": self.revision,
            "approved": self.approved,
        }

    @classmethod
    def from_payload(cls, payload: dict[str, Any]) -> "SectionPlan":
        return cls(
            titles=tuple(
                SectionTitle(int(t["index"]), str(t["text"])) for t in payload["titles"]
            ),
            revision=int(payload["revision"]),
            approved=bool(payload["approved"]),
        )


@dataclass(frozen=True, slots=True)
class SectionRecord:
    """One generated section: body text plus its stored summary."""

    index: int
    title: str
    content: str
    summary: str

    def __post_init__(self) -> None:
        if self.content and not self.summary:
            raise ValueError("non-empty content requires a summary")

    @property
    def token_estimate(self) -> int:
        return token_estimate(self.content)

    def to_payload(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "title": self.title,
            "content": self.content,
            "summary": self.summary,
            "token_estimate": self.token_estimate,
        }

    @classmethod
    def from_payload(cls, payload: dict[str, Any]) -> "SectionRecord":
        return cls(
            index=int(payload["index"]),
            title=str(payload["title"]),
            content=str(payload["content"]),
            summary=str(payload["summary"]),
        )


@dataclass(frozen=True, slots=True)
class GenerationConfig:
    mode: Mode = Mode.FULL_WRAPPER
    top_k: int = 3
    context_token_budget: int = 4500
    llm_polish: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.top_k < 0:
            raise ValueError("top_k must be >= 0")
        if self.context_token_budget <= 0:
            raise ValueError("context_token_budget must be positive")

    def to_payload(self) -> dict[str, Any]:
        return {
            "mode": self.mode.value,
            "top_k": self.top_k,
            "context_token_budget": self.context_token_budget,
            "llm_polish": self.llm_polish,
            "seed": self.seed,
        }

    @classmethod
    def from_payload(cls, payload: dict[str, Any]) -> "GenerationConfig":
        return cls(
            mode=Mode(payload.get("mode", Mode.FULL_WRAPPER.value)),
            top_k=int(payload.get("top_k", 3)),
            context_token_budget=int(payload.get("context_token_budget", 4500)),
            llm_polish=bool(payload.get("llm_polish", False)),
            seed=int(payload.get("seed", 0)),
        )


@dataclass(frozen=True, slots=True)
class DraftDocument:
    """The finished output: one record per section plus the assembled text."""

    spec_id: str
    sections: tuple[SectionRecord, ...]
    assembled_text: str
    config: GenerationConfig
    provenance: tuple[tuple[str, ...], ...] = ()

    def to_payload(self) -> dict[str, Any]:
        return {
            "spec_id": self.spec_id,
            "sections": [s.to_payload() for s in self.sections],
            "assembled_text": self.assembled_text,
            "config": self.config.to_payload(),
            "provenance": [list(ids) for ids in self.provenance],
        }

    @classmethod
    def from_payload(cls, payload: dict[str, Any]) -> "DraftDocument":
        return cls(
            spec_id=str(payload["spec_id"]),
            sections=tuple(SectionRecord.from_payload(s) for s in payload["sections"]),
            assembled_text=str(payload["assembled_text"]),
            config=GenerationConfig.from_payload(payload["config"]),
            provenance=tuple(tuple(ids) for ids in payload.get("provenance", [])),
        )


class Stage(str, enum.Enum):
    PLAN_PENDING = "plan_pending"
    AWAITING_APPROVAL = "awaiting_approval"
    GENERATING = "generating"
    REFINING = "refining"
    COMPLETE = "complete"
    FAILED = "failed"


@dataclass(frozen=True, slots=True)
class JobState:
    stage: Stage
    section_index: int | None = None
    reason: str | None = None

    def __post_init__(self) -> None:
        if self.stage is Stage.GENERATING and self.section_index is None:
            raise ValueError("generating state needs a section index")
        if self.stage is not Stage.GENERATING and self.section_index is not None:
            raise ValueError("only generating state carries a section index")
        if self.stage is not Stage.FAILED and self.reason is not None:
            raise ValueError("only failed state carries a reason")

    @classmethod
    def plan_pending(cls) -> "JobState":
        return cls(Stage.PLAN_PENDING)

    @classmethod
    def awaiting_approval(cls) -> "JobState":
        return cls(Stage.AWAITING_APPROVAL)

    @classmethod
    def generating(cls, section_index: int) -> "JobState":
        return cls(Stage.GENERATING, section_index=section_index)

    @classmethod
    def refining(cls) -> "JobState":
        return cls(Stage.REFINING)

    @classmethod
    def complete(cls) -> "JobState":
        return cls(Stage.COMPLETE)

    @classmethod
    def failed(cls, reason: str) -> "JobState":
        return cls(Stage.FAILED, reason=reason)

    def to_payload(self) -> dict[str, Any]:
        payload: dict[str, Any] = {"stage": self.stage.value}
        if self.section_index is not None:
            payload["section_index"] = self.section_index
        if self.reason is not None:
            payload["reason"] = self.reason
        return payload

    @classmethod
    def from_payload(cls, payload: dict[str, Any]) -> "JobState":
        return cls(
            stage=Stage(payload["stage"]),
            section_index=payload.get("section_index"),
            reason=payload.get("reason"),
        )


def can_transition(current: JobState, new: JobState) -> bool:
    """The job lifecycle relation; anything else is illegal."""
    if new.stage is Stage.FAILED:
        return True
    cur, nxt = current.stage, new.stage
    if cur is Stage.PLAN_PENDING:
        return nxt is Stage.AWAITING_APPROVAL
    if cur is Stage.AWAITING_APPROVAL:
        if nxt is Stage.AWAITING_APPROVAL:
            return True  # plan edits loop here
        return nxt is Stage.GENERATING and new.section_index == 0
    if cur is Stage.GENERATING:
        if nxt is Stage.GENERATING:
            assert current.section_index is not None
            return new.section_index == current.section_index + 1
        return nxt is Stage.REFINING
    if cur is Stage.REFINING:
        return nxt is Stage.COMPLETE
    return False

"""Plan a document's section titles and apply human edits until approval."""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass
from typing import Any, Mapping

from .errors import (
    AlreadyApproved,
    DuplicateTitle,
    EmptyPlan,
    InvalidEdit,
    OutOfBounds,
    PlanLocked,
    PlanningFailed,
)
from .gateway import ChatRequest, Gateway, render_template
from .model import (
    MAX_PLAN_TITLES,
    MAX_TITLE_CHARS,
    DocumentSpec,
    GenerationConfig,
    SectionPlan,
    validate_spec,
)

# numbered ("3." / "3)"), bulleted ("-" / "*"), or heading ("#") lines
_MARKER = re.compile(r"^\s*(?:\d+\s*[.)]|[-*]|#+)\s*(.*)$")


def parse_titles(raw: str) -> list[str]:
    """Pull section titles out of a model's free-form list output."""
    titles: list[str] = []
    seen: set[str] = set()
    for line in raw.splitlines():
        match = _MARKER.match(line)
        if not match:
            continue
        title = match.group(1).strip()[:MAX_TITLE_CHARS].rstrip()
        if not title:
            continue
        folded = title.casefold()
        if folded in seen:
            continue
        seen.add(folded)
        titles.append(title)
        if len(titles) == MAX_PLAN_TITLES:
            break
    return titles


def _category_line(spec: DocumentSpec) -> str:
    return f"Category: {spec.category}\n" if spec.category else ""


def generate_plan(
    spec: DocumentSpec, gateway: Gateway, config: GenerationConfig | None = None
) -> SectionPlan:
    """Ask the model for an outline; one strict retry if parsing finds nothing."""
    config = config or GenerationConfig()
    violations = validate_spec(spec)
    if violations:
        raise ValueError(f"invalid spec: {', '.join(violations)}")
    bindings = {
        "title": spec.title,
        "description": spec.description,
        "category_line": _category_line(spec),
    }
    for template_id in ("plan", "plan_strict"):
        prompt = render_template(template_id, bindings)
        response = gateway.complete(
            ChatRequest.of(prompt, max_tokens=512, seed=config.seed)
        )
        titles = parse_titles(response.text)
        if titles:
            return SectionPlan.from_texts(titles)
    raise PlanningFailed(f"no section titles parseable for spec {spec.id}")


@dataclass(frozen=True, slots=True)
class Rename:
    index: int
    new_text: str


@dataclass(frozen=True, slots=True)
class Insert:
    index: int
    text: str


@dataclass(frozen=True, slots=True)
class Remove:
    index: int


@dataclass(frozen=True, slots=True)
class Move:
    from_index: int
    to_index: int


PlanEdit = Rename | Insert | Remove | Move


def edit_from_payload(payload: Mapping[str, Any]) -> PlanEdit:
    op = payload.get("op")
    try:
        if op == "rename":
            return Rename(int(payload["index"]), str(payload["text"]))
        if op == "insert":
            return Insert(int(payload["index"]), str(payload["text"]))
        if op == "remove":
            return Remove(int(payload["index"]))
        if op == "move":
            return Move(int(payload["from_index"]), int(payload["to_index"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidEdit(f"malformed {op} edit: {exc}") from exc
    raise InvalidEdit(f"unknown edit op {op!r}")


def edit_to_payload(edit: PlanEdit) -> dict[str, Any]:
    if isinstance(edit, Rename):
        return {"op": "rename", "index": edit.index, "text": edit.new_text}
    if isinstance(edit, Insert):
        return {"op": "insert", "index": edit.index, "text": edit.text}
    if isinstance(edit, Remove):
        return {"op": "remove", "index": edit.index}
    return {"op": "move", "from_index": edit.from_index, "to_index": edit.to_index}


def _check_new_title(text: str) -> str:
    title = text.strip()
    if not title:
        raise InvalidEdit("title must be non-empty")
    if len(title) > MAX_TITLE_CHARS:
        raise InvalidEdit(f"title longer than {MAX_TITLE_CHARS} chars")
    return title


def apply_edit(plan: SectionPlan, edit: PlanEdit) -> SectionPlan:
    """Return a new plan with the edit applied and revision bumped."""
    if plan.approved:
        raise PlanLocked("plan is approved; edits are closed")
    texts = plan.texts
    n = len(texts)

    if isinstance(edit, Rename):
        if not 0 <= edit.index < n:
            raise OutOfBounds(f"rename index {edit.index} outside 0..{n - 1}")
        title = _check_new_title(edit.new_text)
        others = {t.casefold() for i, t in enumerate(texts) if i != edit.index}
        if title.casefold() in others:
            raise DuplicateTitle(title)
        texts[edit.index] = title
    elif isinstance(edit, Insert):
        if not 0 <= edit.index <= n:
            raise OutOfBounds(f"insert index {edit.index} outside 0..{n}")
        if n >= MAX_PLAN_TITLES:
            raise InvalidEdit(f"plan already holds {MAX_PLAN_TITLES} titles")
        title = _check_new_title(edit.text)
        if title.casefold() in {t.casefold() for t in texts}:
            raise DuplicateTitle(title)
        texts.insert(edit.index, title)
    elif isinstance(edit, Remove):
        if not 0 <= edit.index < n:
            raise OutOfBounds(f"remove index {edit.index} outside 0..{n - 1}")
        del texts[edit.index]
    elif isinstance(edit, Move):
        if not (0 <= edit.from_index < n and 0 <= edit.to_index < n):
            raise OutOfBounds(f"move {edit.from_index}->{edit.to_index} outside 0..{n - 1}")
        title = texts.pop(edit.from_index)
        texts.insert(edit.to_index, title)
    else:
        raise InvalidEdit(f"unknown edit type {type(edit).__name__}")

    return SectionPlan.from_texts(texts, revision=plan.revision + 1)


def approve_plan(plan: SectionPlan) -> SectionPlan:
    if plan.approved:
        raise AlreadyApproved("plan is already approved")
    if not plan.titles:
        raise EmptyPlan("cannot approve an empty plan")
    return dataclasses.replace(plan, approved=True)

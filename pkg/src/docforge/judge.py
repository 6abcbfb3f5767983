"""Single-score LLM judging of generated documents.

Renders the judging prompt from its versioned template, sends one request
per case through the gateway, and parses the reply as an integer score in
1..10. Parsing is strict first, with a logged lenient fallback.
"""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .errors import AllCasesFailed, OutOfRange, UnparseableScore
from .gateway import ChatRequest, Gateway, render_template

JUDGE_TEMPLATE_ID = "judge"
JUDGE_MAX_TOKENS = 16
SCORE_MIN = 1
SCORE_MAX = 10

_STRICT_LANGUAGE = {str(v) for v in range(SCORE_MIN, SCORE_MAX + 1)}
_CANONICAL_INT = re.compile(r"0|[1-9][0-9]*")
_INT_TOKEN = re.compile(r"[+-]?[0-9]+")


@dataclass(frozen=True)
class JudgeCase:
    doc_des: str
    actual_document: str
    generated_document: str

    def __post_init__(self):
        for name in ("doc_des", "actual_document", "generated_document"):
            if not getattr(self, name).strip():
                raise ValueError(f"{name} must be non-empty")


def render_judge_prompt(case: JudgeCase) -> str:
    return render_template(
        JUDGE_TEMPLATE_ID,
        {
            "doc_des": case.doc_des,
            "Actual_Document": case.actual_document,
            "Generated_Document": case.generated_document,
        },
    )


def parse_score(response_text: str, lenient: bool = False) -> int:
    """Read a 1..10 integer out of a judge reply.

    Strict mode accepts exactly the ten bare integer strings, modulo
    surrounding whitespace. Lenient mode takes the first whitespace
    delimited integer token that lands in range.
    """
    trimmed = response_text.strip()
    if not lenient:
        if trimmed in _STRICT_LANGUAGE:
            return int(trimmed)
        if _CANONICAL_INT.fullmatch(trimmed):
            raise OutOfRange(f"score {trimmed} outside {SCORE_MIN}..{SCORE_MAX}")
        raise UnparseableScore(f"not a bare integer score: {trimmed[:80]!r}")
    saw_integer = False
    for token in trimmed.split():
        if not _INT_TOKEN.fullmatch(token):
            continue
        saw_integer = True
        value = int(token)
        if SCORE_MIN <= value <= SCORE_MAX:
            return value
    if saw_integer:
        raise OutOfRange(f"no integer token in range: {trimmed[:80]!r}")
    raise UnparseableScore(f"no integer token found: {trimmed[:80]!r}")


def _judge_once(gateway: Gateway, case: JudgeCase, seed: int) -> dict:
    prompt = render_judge_prompt(case)
    request = ChatRequest.of(prompt, max_tokens=JUDGE_MAX_TOKENS, seed=seed)
    response = gateway.complete(request)
    try:
        return {"score": parse_score(response.text), "parse": "strict"}
    except (UnparseableScore, OutOfRange):
        pass
    return {"score": parse_score(response.text, lenient=True), "parse": "lenient"}


def _judge_case(gateway: Gateway, index: int, case: JudgeCase,
                samples: int, seed: int) -> dict:
    entry = {"index": index, "score": None, "parse": None, "error": None}
    scores = []
    parses = []
    try:
        for offset in range(samples):
            result = _judge_once(gateway, case, seed + offset)
            scores.append(result["score"])
            parses.append(result["parse"])
    except Exception as exc:
        entry["error"] = f"{type(exc).__name__}: {exc}"
        return entry
    entry["score"] = sum(scores) / len(scores) if samples > 1 else scores[0]
    entry["parse"] = "lenient" if "lenient" in parses else "strict"
    return entry


def run_geval(cases, gateway: Gateway, samples: int = 1, seed: int = 0) -> dict:
    """Score every case; per-case failures are recorded, not dropped."""
    if samples < 1:
        raise ValueError("samples must be at least 1")
    cases = list(cases)
    if not cases:
        raise AllCasesFailed("no cases to judge")
    workers = min(len(cases), gateway.max_concurrency)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        entries = list(
            pool.map(
                lambda pair: _judge_case(gateway, pair[0], pair[1], samples, seed),
                enumerate(cases),
            )
        )
    scored = [e["score"] for e in entries if e["score"] is not None]
    if not scored:
        raise AllCasesFailed("every case failed to parse")
    return {
        "scores": entries,
        "mean": sum(scored) / len(scored),
        "scored": len(scored),
        "failed": len(entries) - len(scored),
    }

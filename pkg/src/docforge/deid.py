"""Entity-span redaction with residual-PII verification.

Detectors are pluggable: a rule-based fallback ships in-process, a remote
NER service fills the production role.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any, Protocol

import httpx

from .errors import DetectorUnavailable, SpanOutOfRange

_LABEL = re.compile(r"^[A-Z_]+$")


@dataclass(frozen=True, slots=True, order=True)
class EntitySpan:
    start: int
    end: int
    label: str

    def __post_init__(self) -> None:
        if self.start < 0 or self.end <= self.start:
            raise ValueError(f"bad span offsets [{self.start}, {self.end})")
        if not _LABEL.match(self.label):
            raise ValueError(f"label {self.label!r} must match [A-Z_]+")

    @property
    def length(self) -> int:
        return self.end - self.start

    def overlaps(self, other: "EntitySpan") -> bool:
        return self.start < other.end and other.start < self.end

    def to_payload(self) -> dict[str, Any]:
        return {"start": self.start, "end": self.end, "label": self.label}

    @classmethod
    def from_payload(cls, payload: dict[str, Any]) -> "EntitySpan":
        return cls(int(payload["start"]), int(payload["end"]), str(payload["label"]))


def normalize_spans(spans: list[EntitySpan]) -> list[EntitySpan]:
    """Resolve overlaps: longer span wins, earlier start on ties, contained
    spans dropped. Result is disjoint and sorted by start."""
    accepted: list[EntitySpan] = []
    for span in sorted(spans, key=lambda s: (-s.length, s.start)):
        if not any(span.overlaps(kept) for kept in accepted):
            accepted.append(span)
    accepted.sort(key=lambda s: s.start)
    return accepted


def redact(text: str, spans: list[EntitySpan]) -> str:
    for span in spans:
        if span.end > len(text):
            raise SpanOutOfRange(f"span [{span.start}, {span.end}) beyond |text|={len(text)}")
    out = text
    # right-to-left so earlier offsets stay valid
    for span in reversed(normalize_spans(spans)):
        out = out[: span.start] + f"[{span.label}]" + out[span.end :]
    return out


@dataclass(frozen=True, slots=True)
class DeidReport:
    counts: dict[str, int]
    residual_hits: tuple[tuple[str, int], ...]

    @property
    def passed(self) -> bool:
        return not self.residual_hits

    def to_payload(self) -> dict[str, Any]:
        return {
            "counts": dict(self.counts),
            "residual_hits": [list(hit) for hit in self.residual_hits],
            "passed": self.passed,
        }


def verify(
    original: str, spans: list[EntitySpan], redacted: str, min_len: int = 3
) -> DeidReport:
    """Search the output for every redacted surface; any find is a failure."""
    counts: dict[str, int] = {}
    hits: list[tuple[str, int]] = []
    for span in spans:
        counts[span.label] = counts.get(span.label, 0) + 1
        surface = original[span.start : span.end]
        if len(surface) < min_len:
            continue
        position = redacted.find(surface)
        if position >= 0:
            hits.append((surface, position))
    return DeidReport(counts=counts, residual_hits=tuple(hits))


class Detector(Protocol):
    def detect(self, text: str) -> list[EntitySpan]: ...


def detect_entities(text: str, detector: Detector) -> list[EntitySpan]:
    return sorted(detector.detect(text), key=lambda s: (s.start, s.end))


_MONTHS = (
    "January|February|March|April|May|June|July|August|September|October|"
    "November|December"
)

_ISO_DATE = re.compile(r"\b\d{4}-\d{2}-\d{2}\b")
_WRITTEN_DATE = re.compile(
    rf"\b(?:(?:{_MONTHS})\s+\d{{1,2}}(?:st|nd|rd|th)?,?\s+\d{{4}}"
    rf"|\d{{1,2}}(?:st|nd|rd|th)?\s+(?:{_MONTHS}),?\s+\d{{4}})\b"
)
_EMAIL = re.compile(r"\b[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}\b")
_PHONE = re.compile(r"\+?\d[\d\s().-]{6,}\d")
_PERSON = re.compile(
    r"\b(?:Mr|Ms|Mrs|Dr|Prof)\.?\s+((?:[A-Z][a-z]+)(?:\s+[A-Z][a-z]+)*)"
)


class RuleDetector:
    """Pattern fallback: dates, emails, phone numbers, honorific-prefixed names."""

    def detect(self, text: str) -> list[EntitySpan]:
        spans: list[EntitySpan] = []

        def free(start: int, end: int) -> bool:
            return not any(s.start < end and start < s.end for s in spans)

        for pattern in (_ISO_DATE, _WRITTEN_DATE):
            for m in pattern.finditer(text):
                if free(m.start(), m.end()):
                    spans.append(EntitySpan(m.start(), m.end(), "DATE"))
        for m in _EMAIL.finditer(text):
            if free(m.start(), m.end()):
                spans.append(EntitySpan(m.start(), m.end(), "EMAIL"))
        for m in _PHONE.finditer(text):
            digits = sum(c.isdigit() for c in m.group(0))
            if digits >= 8 and free(m.start(), m.end()):
                spans.append(EntitySpan(m.start(), m.end(), "PHONE"))
        for m in _PERSON.finditer(text):
            if free(m.start(1), m.end(1)):
                spans.append(EntitySpan(m.start(1), m.end(1), "PERSON"))
        return sorted(spans, key=lambda s: (s.start, s.end))


class RemoteDetector:
    """NER over HTTP: request {"text": ...}, response {"spans": [{start,end,label}]}."""

    def __init__(self, endpoint_url: str, timeout_ms: int = 30000, post=None):
        self.endpoint_url = endpoint_url
        self.timeout_s = timeout_ms / 1000.0
        self._post = post or httpx.post

    def detect(self, text: str) -> list[EntitySpan]:
        try:
            response = self._post(
                self.endpoint_url, json={"text": text}, timeout=self.timeout_s
            )
        except Exception as exc:
            raise DetectorUnavailable(str(exc)) from exc
        if response.status_code != 200:
            raise DetectorUnavailable(
                f"detector returned status {response.status_code}"
            )
        try:
            payload = response.json()
            return [EntitySpan.from_payload(s) for s in payload["spans"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise DetectorUnavailable(f"malformed detector response: {exc}") from exc


def deidentify(text: str, detector: Detector, min_len: int = 3) -> tuple[str, DeidReport]:
    """Detect, redact, verify in one pass; the common caller path."""
    spans = detect_entities(text, detector)
    redacted = redact(text, spans)
    return redacted, verify(text, spans, redacted, min_len=min_len)

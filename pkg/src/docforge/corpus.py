"""Corpus ingestion, splitting, and batch ablation runs.

A corpus is a UTF-8 JSON-lines file, one record per line with fields
id, category, title, description, and text (the reference document).
run_experiment drives every (config, record) pair through the full
planning and generation path with auto-approved plans and reports
lexical metrics, optional judge scores, and retrieval-op counts.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

from .engine import run_pipeline
from .errors import DocforgeError, DuplicateId, Unreadable
from .gateway import Gateway
from .judge import JudgeCase, run_geval
from .memory import MemoryIndex
from .metrics import score_pair
from .model import DocumentSpec, GenerationConfig
from .planner import approve_plan, generate_plan

RECORD_FIELDS = ("id", "category", "title", "description", "text")
MAX_PARALLEL_RECORDS = 4


@dataclass(frozen=True)
class CorpusRecord:
    id: str
    category: str
    title: str
    description: str
    text: str

    def __post_init__(self):
        if not self.id.strip():
            raise ValueError("record id must be non-empty")
        if not self.category.strip():
            raise ValueError("record category must be non-empty")

    def to_spec(self) -> DocumentSpec:
        return DocumentSpec(
            id=self.id,
            title=self.title,
            description=self.description,
            category=self.category,
        )


@dataclass(frozen=True)
class IngestResult:
    records: tuple
    errors: tuple

    def __iter__(self):
        return iter((list(self.records), list(self.errors)))


def _parse_record(payload) -> CorpusRecord:
    if not isinstance(payload, dict):
        raise ValueError("line is not an object")
    missing = [f for f in RECORD_FIELDS if f not in payload]
    if missing:
        raise ValueError(f"missing fields: {', '.join(missing)}")
    values = {}
    for name in RECORD_FIELDS:
        value = payload[name]
        if not isinstance(value, str):
            raise ValueError(f"field {name} must be a string")
        values[name] = value
    return CorpusRecord(**values)


def ingest(path) -> IngestResult:
    """Read a JSON-lines corpus; bad lines become error entries, not crashes."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            lines = handle.read().splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise Unreadable(f"cannot read corpus {path}: {exc}")
    records: list = []
    errors: list = []
    seen: dict = {}
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = _parse_record(json.loads(line))
        except (ValueError, TypeError) as exc:
            errors.append({"line": line_no, "error": str(exc)})
            continue
        if record.id in seen:
            raise DuplicateId(
                f"id {record.id!r} on line {line_no} already used on line "
                f"{seen[record.id]}"
            )
        seen[record.id] = line_no
        records.append(record)
    return IngestResult(records=tuple(records), errors=tuple(errors))


@dataclass(frozen=True)
class SplitResult:
    train: tuple
    test: tuple
    singleton_categories: tuple

    def __iter__(self):
        # supports "train, test = split_one_per_category(...)"
        return iter((list(self.train), list(self.test)))


def split_one_per_category(records: Sequence[CorpusRecord], seed: int) -> SplitResult:
    """Hold out one seeded-uniform pick per category; the rest is train."""
    rng = random.Random(seed)
    by_category: dict = {}
    for record in records:
        by_category.setdefault(record.category, []).append(record)
    test_ids = set()
    singletons = []
    for category in sorted(by_category):
        group = sorted(by_category[category], key=lambda r: r.id)
        pick = group[rng.randrange(len(group))]
        test_ids.add(pick.id)
        if len(group) == 1:
            singletons.append(category)
    train = tuple(r for r in records if r.id not in test_ids)
    test = tuple(
        sorted((r for r in records if r.id in test_ids), key=lambda r: r.category)
    )
    return SplitResult(
        train=train, test=test, singleton_categories=tuple(singletons)
    )


@dataclass(frozen=True)
class ExperimentRun:
    run_id: str
    config: GenerationConfig
    records: tuple
    aggregates: dict

    def to_payload(self) -> dict:
        return {
            "run_id": self.run_id,
            "config": {
                "mode": self.config.mode.value,
                "top_k": self.config.top_k,
                "context_token_budget": self.config.context_token_budget,
                "llm_polish": self.config.llm_polish,
                "seed": self.config.seed,
            },
            "records": [dict(row) for row in self.records],
            "aggregates": json.loads(json.dumps(self.aggregates)),
        }


def derive_seed(run_id: str, record_id: str, base_seed: int) -> int:
    digest = hashlib.blake2b(
        f"{run_id}\x00{record_id}\x00{base_seed}".encode(), digest_size=4
    ).digest()
    return int.from_bytes(digest, "little") % (2**31)


def _score_one(record: CorpusRecord, config: GenerationConfig, run_id: str,
               gateway: Gateway, judge_gateway: Optional[Gateway]) -> dict:
    row = {
        "record_id": record.id,
        "seed": derive_seed(run_id, record.id, config.seed),
        "rouge_l_f1": None,
        "bleu": None,
        "meteor": None,
        "judge": None,
        "retrieval_queries": 0,
        "retrieval_upserts": 0,
        "error": None,
    }
    seeded = dataclasses.replace(config, seed=row["seed"])
    trace: list = []
    try:
        spec = record.to_spec()
        plan = None
        if seeded.mode.uses_plan:
            plan = approve_plan(generate_plan(spec, gateway, seeded))
        memory = MemoryIndex()
        draft = run_pipeline(
            spec, plan, gateway, memory, seeded,
            job_id=record.id, trace_sink=trace,
        )
    except (DocforgeError, ValueError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    row["retrieval_queries"] = sum(1 for e in trace if e["kind"] == "query")
    row["retrieval_upserts"] = sum(1 for e in trace if e["kind"] == "upsert")
    report = score_pair(draft.assembled_text, record.text)
    row["rouge_l_f1"] = report.rouge_l["f1"]
    row["bleu"] = report.bleu
    row["meteor"] = report.meteor
    if judge_gateway is not None:
        case = JudgeCase(
            doc_des=record.description or record.title,
            actual_document=record.text,
            generated_document=draft.assembled_text,
        )
        try:
            verdict = run_geval([case], judge_gateway, seed=row["seed"])
            row["judge"] = verdict["scores"][0]["score"]
            if row["judge"] is None:
                row["error"] = verdict["scores"][0]["error"]
        except DocforgeError as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _aggregate(rows, judged: bool) -> dict:
    scored = [r for r in rows if r["error"] is None and r["rouge_l_f1"] is not None]
    out = {"samples": len(scored), "failures": len(rows) - len(scored)}
    for key in ("rouge_l_f1", "bleu", "meteor"):
        values = [r[key] for r in scored]
        out[key] = (
            {"mean": sum(values) / len(values), "min": min(values), "max": max(values)}
            if values
            else None
        )
    if not judged:
        # judge column is absent, which is different from a zero score
        out["judge"] = None
        return out
    judge_values = [r["judge"] for r in scored if r["judge"] is not None]
    out["judge"] = (
        {
            "mean": sum(judge_values) / len(judge_values),
            "min": min(judge_values),
            "max": max(judge_values),
        }
        if judge_values
        else None
    )
    return out


def run_experiment(
    records: Sequence[CorpusRecord],
    configs: Sequence[GenerationConfig],
    gateway: Gateway,
    judge_gateway: Optional[Gateway] = None,
) -> list:
    """One run per config; every record lands in the run as scored or failed."""
    records = list(records)
    runs = []
    for index, config in enumerate(configs):
        run_id = f"{index:02d}-{config.mode.value}"
        with ThreadPoolExecutor(
            max_workers=max(1, min(MAX_PARALLEL_RECORDS, len(records) or 1))
        ) as pool:
            rows = list(
                pool.map(
                    lambda rec: _score_one(rec, config, run_id, gateway, judge_gateway),
                    records,
                )
            )
        rows.sort(key=lambda r: r["record_id"])
        runs.append(
            ExperimentRun(
                run_id=run_id,
                config=config,
                records=tuple(rows),
                aggregates=_aggregate(rows, judge_gateway is not None),
            )
        )
    return runs


def runs_payload(runs) -> dict:
    return {"runs": [run.to_payload() for run in runs]}


def _cell(stats, key="mean") -> str:
    if stats is None:
        return "-"
    return f"{stats[key]:.4f}"


def render_table(runs) -> str:
    """Plain-text summary, one row per config."""
    header = f"{'config':<22} {'n':>3} {'rouge_l':>8} {'bleu':>8} {'meteor':>8} {'judge':>8}"
    lines = [header, "-" * len(header)]
    for run in runs:
        agg = run.aggregates
        judge_cell = "-" if agg["judge"] is None else f"{agg['judge']['mean']:.2f}"
        lines.append(
            f"{run.config.mode.value:<22} {agg['samples']:>3} "
            f"{_cell(agg['rouge_l_f1']):>8} {_cell(agg['bleu']):>8} "
            f"{_cell(agg['meteor']):>8} {judge_cell:>8}"
        )
    return "\n".join(lines)

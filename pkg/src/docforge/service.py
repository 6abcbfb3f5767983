"""HTTP facade for the human-in-the-loop generation workflow.

Jobs are persisted as append-only JSON-lines event logs, one file per
job. A single pure reducer builds the materialized view both for live
appends and for replay at startup, so a restarted service reconstructs
byte-identical job views. Per-job mutations serialize through a per-job
lock; the JobState transition relation is enforced on every append.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from pathlib import Path
from typing import Any, Callable, Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .engine import run_pipeline
from .errors import (
    DocforgeError,
    DuplicateTitle,
    EmptyPlan,
    IllegalTransition,
    InvalidEdit,
    OutOfBounds,
    PlanLocked,
    RevisionMismatch,
    UnknownJob,
    WrongState,
)
from .gateway import Gateway
from .judge import JudgeCase, run_geval
from .memory import MemoryIndex
from .metrics import score_pair
from .model import (
    DocumentSpec,
    GenerationConfig,
    JobState,
    SectionPlan,
    Stage,
    can_transition,
    validate_spec,
)
from .planner import apply_edit, approve_plan, edit_from_payload, generate_plan


# --- event log and materialized views ---------------------------------------

def apply_event(view: Optional[dict], event: dict) -> dict:
    """Fold one event into a job view; the only place views are built."""
    kind = event["type"]
    if kind == "created":
        if view is not None:
            raise IllegalTransition("job already exists")
        return {
            "job_id": event["job_id"],
            "spec": event["spec"],
            "config": event["config"],
            "state": JobState.plan_pending().to_payload(),
            "plan": None,
            "draft": None,
            "trace": [],
            "created_at": event["ts"],
            "updated_at": event["ts"],
        }
    if view is None:
        raise IllegalTransition(f"event {kind} before creation")
    current = JobState.from_payload(view["state"])
    out = dict(view)
    out["updated_at"] = event["ts"]
    if kind == "plan_ready":
        new_state = JobState.awaiting_approval()
        if not can_transition(current, new_state):
            raise IllegalTransition(f"plan_ready from {current.stage.value}")
        out["state"] = new_state.to_payload()
        out["plan"] = event["plan"]
        return out
    if kind == "plan_edited":
        new_state = JobState.awaiting_approval()
        if not can_transition(current, new_state):
            raise IllegalTransition(f"plan_edited from {current.stage.value}")
        out["plan"] = event["plan"]
        return out
    if kind == "approved":
        new_state = JobState.generating(0)
        if not can_transition(current, new_state):
            raise IllegalTransition(f"approve from {current.stage.value}")
        out["state"] = new_state.to_payload()
        out["plan"] = event["plan"]
        return out
    if kind == "progress":
        new_state = JobState.from_payload(event["state"])
        if not can_transition(current, new_state):
            raise IllegalTransition(
                f"progress {event['state']} from {view['state']}"
            )
        out["state"] = new_state.to_payload()
        return out
    if kind == "draft_ready":
        new_state = JobState.complete()
        if not can_transition(current, new_state):
            raise IllegalTransition(f"draft_ready from {current.stage.value}")
        out["state"] = new_state.to_payload()
        out["draft"] = event["draft"]
        out["trace"] = event["trace"]
        return out
    if kind == "failed":
        out["state"] = JobState.failed(event["reason"]).to_payload()
        return out
    raise IllegalTransition(f"unknown event type {kind!r}")


class JobStore:
    """Append-only per-job logs with in-memory views rebuilt on start."""

    def __init__(self, data_dir=None):
        self._dir = Path(data_dir) if data_dir else None
        self._views: dict[str, dict] = {}
        self._locks: dict[str, threading.RLock] = {}
        self._master = threading.Lock()
        if self._dir:
            self._dir.mkdir(parents=True, exist_ok=True)
            self._replay()

    def _replay(self):
        for path in sorted(self._dir.glob("*.jsonl")):
            view = None
            with open(path, "r", encoding="utf-8") as handle:
                for line in handle:
                    if line.strip():
                        view = apply_event(view, json.loads(line))
            if view is not None:
                self._views[view["job_id"]] = view

    def lock(self, job_id: str) -> threading.RLock:
        with self._master:
            return self._locks.setdefault(job_id, threading.RLock())

    def append(self, job_id: str, event: dict) -> dict:
        """Validate, persist, then publish; rejected events leave no trace."""
        with self.lock(job_id):
            view = apply_event(self._views.get(job_id), event)
            if self._dir:
                with open(self._dir / f"{job_id}.jsonl", "a", encoding="utf-8") as f:
                    f.write(json.dumps(event, sort_keys=True) + "\n")
                    f.flush()
            self._views[job_id] = view
            return view

    def get(self, job_id: str) -> dict:
        view = self._views.get(job_id)
        if view is None:
            raise UnknownJob(f"no job {job_id!r}")
        return view

    def list_views(self) -> list:
        return sorted(
            self._views.values(), key=lambda v: (v["created_at"], v["job_id"])
        )


# --- the service proper -----------------------------------------------------

class JobService:
    """Endpoint logic, independent of HTTP so tests can drive it directly."""

    def __init__(
        self,
        gateway: Optional[Gateway] = None,
        judge_gateway: Optional[Gateway] = None,
        data_dir=None,
        sync: bool = False,
        now: Callable[[], float] = time.time,
        id_factory: Optional[Callable[[], str]] = None,
    ):
        self.gateway = gateway
        self.judge_gateway = judge_gateway
        self.store = JobStore(data_dir)
        self.sync = sync
        self._now = now
        self._new_id = id_factory or (lambda: uuid.uuid4().hex[:12])

    # -- helpers

    def _state(self, view: dict) -> JobState:
        return JobState.from_payload(view["state"])

    def _require_stage(self, view: dict, stage: Stage):
        if self._state(view).stage is not stage:
            raise WrongState(
                f"job is {self._state(view).stage.value}, needs {stage.value}"
            )

    def _fail(self, job_id: str, reason: str):
        self.store.append(
            job_id, {"type": "failed", "reason": reason, "ts": self._now()}
        )

    # -- operations

    def create_job(self, spec_payload: dict, config_payload: Optional[dict] = None) -> dict:
        if self.gateway is None:
            raise RuntimeError("no generation provider configured")
        spec = DocumentSpec.from_payload(spec_payload)
        violations = validate_spec(spec)
        if violations:
            raise ValueError("; ".join(violations))
        config = GenerationConfig.from_payload(config_payload or {})
        job_id = self._new_id()
        self.store.append(
            job_id,
            {
                "type": "created",
                "job_id": job_id,
                "spec": spec.to_payload(),
                "config": config.to_payload(),
                "ts": self._now(),
            },
        )
        self._run_or_spawn(lambda: self._plan(job_id, spec, config))
        return self.store.get(job_id)

    def _plan(self, job_id: str, spec: DocumentSpec, config: GenerationConfig):
        try:
            plan = generate_plan(spec, self.gateway, config)
        except DocforgeError as exc:
            self._fail(job_id, f"{type(exc).__name__}: {exc}")
            return
        self.store.append(
            job_id,
            {"type": "plan_ready", "plan": plan.to_payload(), "ts": self._now()},
        )

    def get_job(self, job_id: str) -> dict:
        view = self.store.get(job_id)
        plan = view["plan"]
        return {
            "job_id": view["job_id"],
            "spec": view["spec"],
            "config": view["config"],
            "state": view["state"],
            "plan": plan,
            "n_sections": len(plan["titles"]) if plan else 0,
            "draft_available": view["draft"] is not None,
            "created_at": view["created_at"],
            "updated_at": view["updated_at"],
        }

    def list_jobs(self) -> list:
        return [
            {
                "job_id": v["job_id"],
                "title": v["spec"]["title"],
                "state": v["state"],
                "created_at": v["created_at"],
                "updated_at": v["updated_at"],
            }
            for v in self.store.list_views()
        ]

    def edit_plan(self, job_id: str, edit_payload: dict, expected_revision: int) -> dict:
        with self.store.lock(job_id):
            view = self.store.get(job_id)
            self._require_stage(view, Stage.AWAITING_APPROVAL)
            plan = SectionPlan.from_payload(view["plan"])
            if plan.revision != expected_revision:
                raise RevisionMismatch(expected_revision, plan.revision)
            edit = edit_from_payload(edit_payload)
            new_plan = apply_edit(plan, edit)
            self.store.append(
                job_id,
                {
                    "type": "plan_edited",
                    "edit": edit_payload,
                    "plan": new_plan.to_payload(),
                    "ts": self._now(),
                },
            )
        return new_plan.to_payload()

    def approve(self, job_id: str) -> dict:
        with self.store.lock(job_id):
            view = self.store.get(job_id)
            self._require_stage(view, Stage.AWAITING_APPROVAL)
            plan = approve_plan(SectionPlan.from_payload(view["plan"]))
            self.store.append(
                job_id,
                {"type": "approved", "plan": plan.to_payload(), "ts": self._now()},
            )
        spec = DocumentSpec.from_payload(view["spec"])
        config = GenerationConfig.from_payload(view["config"])
        self._run_or_spawn(lambda: self._generate(job_id, spec, plan, config))
        return self.store.get(job_id)["state"]

    def _generate(self, job_id: str, spec, plan, config):
        trace: list = []
        last_emitted = JobState.generating(0)

        def progress(state: JobState):
            nonlocal last_emitted
            if state == last_emitted:
                return
            last_emitted = state
            self.store.append(
                job_id,
                {"type": "progress", "state": state.to_payload(), "ts": self._now()},
            )

        try:
            draft = run_pipeline(
                spec,
                plan,
                self.gateway,
                MemoryIndex(),
                config,
                job_id=job_id,
                progress=progress,
                trace_sink=trace,
            )
        except DocforgeError as exc:
            self._fail(job_id, f"{type(exc).__name__}: {exc}")
            return
        self.store.append(
            job_id,
            {
                "type": "draft_ready",
                "draft": draft.to_payload(),
                "trace": trace,
                "ts": self._now(),
            },
        )

    def get_draft(self, job_id: str) -> dict:
        view = self.store.get(job_id)
        self._require_stage(view, Stage.COMPLETE)
        return {"draft": view["draft"], "trace": view["trace"]}

    def evaluate(self, job_id: str, reference_text: str) -> dict:
        view = self.store.get(job_id)
        self._require_stage(view, Stage.COMPLETE)
        if not reference_text.strip():
            raise ValueError("reference_text must be non-empty")
        report = score_pair(view["draft"]["assembled_text"], reference_text)
        result: dict[str, Any] = {"metrics": report.to_payload(), "judge": None}
        if self.judge_gateway is not None:
            case = JudgeCase(
                doc_des=view["spec"]["description"] or view["spec"]["title"],
                actual_document=reference_text,
                generated_document=view["draft"]["assembled_text"],
            )
            verdict = run_geval([case], self.judge_gateway)
            entry = verdict["scores"][0]
            result["judge"] = {"score": entry["score"], "parse": entry["parse"]}
        return result

    def _run_or_spawn(self, task: Callable[[], None]):
        if self.sync:
            task()
        else:
            threading.Thread(target=task, daemon=True).start()


# --- HTTP layer -------------------------------------------------------------

class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _translate(exc: Exception) -> ApiError:
    if isinstance(exc, UnknownJob):
        return ApiError(404, "unknown_job", str(exc))
    if isinstance(exc, RevisionMismatch):
        return ApiError(409, "revision_mismatch", str(exc))
    if isinstance(exc, PlanLocked):
        return ApiError(409, "plan_locked", str(exc))
    if isinstance(exc, WrongState):
        return ApiError(409, "wrong_state", str(exc))
    if isinstance(exc, (InvalidEdit, OutOfBounds, DuplicateTitle)):
        return ApiError(422, "invalid_edit", str(exc))
    if isinstance(exc, EmptyPlan):
        return ApiError(422, "empty_plan", str(exc))
    if isinstance(exc, (ValueError, KeyError)):
        return ApiError(400, "invalid_request", str(exc))
    if isinstance(exc, RuntimeError):
        return ApiError(503, "provider_unavailable", str(exc))
    return ApiError(500, "internal", f"{type(exc).__name__}: {exc}")


def create_app(service: JobService, auth_token: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="docforge", docs_url=None, redoc_url=None)
    app.state.service = service

    @app.exception_handler(ApiError)
    async def on_api_error(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content={"code": exc.code, "message": exc.message},
        )

    @app.middleware("http")
    async def check_auth(request: Request, call_next):
        if auth_token and request.url.path != "/healthz":
            supplied = request.headers.get("authorization", "")
            if supplied != f"Bearer {auth_token}":
                return JSONResponse(
                    status_code=401,
                    content={"code": "unauthorized", "message": "bad or missing token"},
                )
        return await call_next(request)

    def guarded(fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ApiError:
            raise
        except Exception as exc:
            raise _translate(exc)

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok"}

    @app.post("/jobs", status_code=201)
    async def create_job(body: dict):
        spec = body.get("spec")
        if not isinstance(spec, dict):
            raise ApiError(400, "invalid_request", "body must carry a spec object")
        config = body.get("config")
        if config is not None and not isinstance(config, dict):
            raise ApiError(400, "invalid_request", "config must be an object")
        view = guarded(service.create_job, spec, config)
        return {"job_id": view["job_id"], "state": view["state"]}

    @app.get("/jobs")
    async def list_jobs():
        return {"jobs": guarded(service.list_jobs)}

    @app.get("/jobs/{job_id}")
    async def get_job(job_id: str):
        return guarded(service.get_job, job_id)

    @app.patch("/jobs/{job_id}/plan")
    async def edit_plan(job_id: str, body: dict):
        edit = body.get("edit")
        if not isinstance(edit, dict):
            raise ApiError(422, "invalid_edit", "body must carry an edit object")
        revision = body.get("expected_revision")
        if not isinstance(revision, int) or isinstance(revision, bool):
            raise ApiError(
                409, "revision_mismatch", "expected_revision must be an integer"
            )
        return {"plan": guarded(service.edit_plan, job_id, edit, revision)}

    @app.post("/jobs/{job_id}/approve", status_code=202)
    async def approve(job_id: str):
        return {"state": guarded(service.approve, job_id)}

    @app.get("/jobs/{job_id}/draft")
    async def get_draft(job_id: str):
        return guarded(service.get_draft, job_id)

    @app.post("/jobs/{job_id}/evaluate")
    async def evaluate(job_id: str, body: dict):
        reference = body.get("reference_text")
        if not isinstance(reference, str) or not reference.strip():
            raise ApiError(422, "invalid_request", "reference_text must be non-empty")
        return guarded(service.evaluate, job_id, reference)

    return app

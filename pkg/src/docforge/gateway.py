"""Model-agnostic chat-completion access.

One wire shape (role-tagged message list over HTTP) covers every remote
provider; a scripted mock covers tests. API keys come from the environment
only, never from config files.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import re
import threading
import time
from dataclasses import dataclass
from importlib import resources
from typing import Any, Callable, Mapping

import httpx

from .errors import (
    ExhaustedRetries,
    GatewayError,
    GatewayTimeout,
    MissingBinding,
    ProviderError,
    TemplateNotFound,
)

ROLES = ("system", "user", "assistant")

BACKOFF_BASE_S = 0.5
BACKOFF_FACTOR = 2.0
BACKOFF_CAP_S = 8.0
DEFAULT_CONCURRENCY = 4

_PLACEHOLDER = re.compile(r"\{\{([A-Za-z_][A-Za-z0-9_]*)\}\}")


@dataclass(frozen=True, slots=True)
class Message:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")


@dataclass(frozen=True, slots=True)
class ChatRequest:
    messages: tuple[Message, ...]
    max_tokens: int = 2048
    temperature: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if self.messages[-1].role != "user":
            raise ValueError("last message must have role user")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    @classmethod
    def of(cls, prompt: str, system: str = "", **kwargs: Any) -> "ChatRequest":
        msgs: list[Message] = []
        if system:
            msgs.append(Message("system", system))
        msgs.append(Message("user", prompt))
        return cls(messages=tuple(msgs), **kwargs)

    @property
    def prompt_text(self) -> str:
        return "\n".join(m.content for m in self.messages)


@dataclass(frozen=True, slots=True)
class ChatResponse:
    text: str
    provider_id: str
    latency_ms: float
    truncated: bool = False

    def __post_init__(self) -> None:
        if self.latency_ms < 0:
            raise ValueError("latency_ms must be >= 0")


@dataclass(frozen=True, slots=True)
class MockScript:
    """Deterministic canned responses: first rule whose pattern occurs in the
    prompt wins, else default_template."""

    rules: tuple[tuple[str, str], ...] = ()
    default_template: str = ""

    def respond(self, request: ChatRequest) -> str:
        prompt = request.prompt_text
        template = self.default_template
        for pattern, rule_template in self.rules:
            if pattern in prompt:
                template = rule_template
                break
        digest = hashlib.sha256(
            f"{prompt}\x00{request.seed}".encode()
        ).hexdigest()[:12]
        bindings = {"prompt": prompt, "seed": str(request.seed), "hash": digest}
        return _PLACEHOLDER.sub(
            lambda m: bindings.get(m.group(1), m.group(0)), template
        )

    def to_payload(self) -> dict[str, Any]:
        return {
            "rules": [{"pattern": p, "template": t} for p, t in self.rules],
            "default_template": self.default_template,
        }

    @classmethod
    def from_payload(cls, payload: Mapping[str, Any]) -> "MockScript":
        rules = []
        for rule in payload.get("rules", ()):
            if isinstance(rule, Mapping):
                rules.append((str(rule["pattern"]), str(rule["template"])))
            else:
                pattern, template = rule
                rules.append((str(pattern), str(template)))
        return cls(
            rules=tuple(rules),
            default_template=str(payload.get("default_template", "")),
        )


@dataclass(frozen=True, slots=True)
class ProviderConfig:
    kind: str = "mock"
    endpoint_url: str = ""
    model_name: str = ""
    api_key_env_var_name: str = ""
    timeout_ms: int = 60000
    max_retries: int = 3
    script: MockScript | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("remote_chat", "mock"):
            raise ValueError(f"unknown provider kind {self.kind!r}")
        if self.kind == "remote_chat" and not (self.endpoint_url and self.model_name):
            raise ValueError("remote_chat requires endpoint_url and model_name")
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    @classmethod
    def from_payload(cls, payload: Mapping[str, Any]) -> "ProviderConfig":
        # keys live in the environment, never in config files
        forbidden = {"api_key", "apikey", "token", "secret"} & {
            k.lower() for k in payload
        }
        if forbidden:
            raise ValueError(
                f"config file must not carry credentials ({sorted(forbidden)}); "
                "use api_key_env_var_name instead"
            )
        script = payload.get("script")
        return cls(
            kind=str(payload.get("kind", "mock")),
            endpoint_url=str(payload.get("endpoint_url", "")),
            model_name=str(payload.get("model_name", "")),
            api_key_env_var_name=str(payload.get("api_key_env_var_name", "")),
            timeout_ms=int(payload.get("timeout_ms", 60000)),
            max_retries=int(payload.get("max_retries", 3)),
            script=MockScript.from_payload(script) if script is not None else None,
        )

    @classmethod
    def from_file(cls, path: str) -> "ProviderConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_payload(json.load(fh))


def load_template(template_id: str) -> str:
    try:
        path = resources.files("docforge").joinpath("templates", f"{template_id}.txt")
        return path.read_text(encoding="utf-8")
    except (FileNotFoundError, ModuleNotFoundError) as exc:
        raise TemplateNotFound(template_id) from exc


def expand(template_text: str, bindings: Mapping[str, str]) -> str:
    """Substitute {{name}} placeholders in a single pass.

    Bindings are inserted literally: placeholder-like text inside a binding
    is never re-expanded.
    """
    for match in _PLACEHOLDER.finditer(template_text):
        if match.group(1) not in bindings:
            raise MissingBinding(match.group(1))
    return _PLACEHOLDER.sub(lambda m: str(bindings[m.group(1)]), template_text)


def render_template(template_id: str, bindings: Mapping[str, str]) -> str:
    return expand(load_template(template_id), bindings)


# transport: (url, headers, json_payload, timeout_s) -> (status_code, parsed body)
Transport = Callable[[str, Mapping[str, str], Mapping[str, Any], float], tuple[int, Any]]


def _http_transport(
    url: str, headers: Mapping[str, str], payload: Mapping[str, Any], timeout_s: float
) -> tuple[int, Any]:
    try:
        response = httpx.post(url, headers=dict(headers), json=payload, timeout=timeout_s)
    except httpx.TimeoutException as exc:
        raise GatewayTimeout(str(exc)) from exc
    except httpx.HTTPError as exc:
        raise GatewayError(str(exc)) from exc
    try:
        body = response.json()
    except ValueError:
        body = response.text
    return response.status_code, body


def _extract_text(body: Any) -> tuple[str, bool]:
    if not isinstance(body, Mapping):
        raise ProviderError(200, str(body))
    choices = body.get("choices")
    if not choices:
        raise ProviderError(200, json.dumps(body)[:200])
    first = choices[0]
    message = first.get("message", {})
    text = message.get("content")
    if text is None:
        text = first.get("text")
    if text is None:
        raise ProviderError(200, json.dumps(body)[:200])
    return str(text), first.get("finish_reason") == "length"


class Gateway:
    """complete() entry point shared by every caller; safe for concurrent use."""

    def __init__(
        self,
        provider: ProviderConfig,
        transport: Transport | None = None,
        sleeper: Callable[[float], None] | None = None,
        rng: random.Random | None = None,
        max_concurrency: int = DEFAULT_CONCURRENCY,
    ):
        self.provider = provider
        self._transport = transport or _http_transport
        self._sleep = sleeper or time.sleep
        self._rng = rng or random.Random()
        self.max_concurrency = max_concurrency
        self._slots = threading.BoundedSemaphore(max_concurrency)
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            self.calls += 1
        if self.provider.kind == "mock":
            script = self.provider.script or MockScript()
            return ChatResponse(
                text=script.respond(request),
                provider_id=f"mock:{self.provider.model_name or 'default'}",
                latency_ms=0.0,
            )
        return self._complete_remote(request)

    def _complete_remote(self, request: ChatRequest) -> ChatResponse:
        provider = self.provider
        headers = {"Content-Type": "application/json"}
        if provider.api_key_env_var_name:
            key = os.environ.get(provider.api_key_env_var_name, "")
            if key:
                headers["Authorization"] = f"Bearer {key}"
        payload = {
            "model": provider.model_name,
            "messages": [
                {"role": m.role, "content": m.content} for m in request.messages
            ],
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
            "seed": request.seed,
        }
        timeout_s = provider.timeout_ms / 1000.0
        attempts = provider.max_retries + 1
        last_error: Exception | None = None
        for attempt in range(attempts):
            if attempt:
                delay = min(BACKOFF_CAP_S, BACKOFF_BASE_S * BACKOFF_FACTOR ** (attempt - 1))
                delay *= 0.5 + 0.5 * self._rng.random()
                self._sleep(delay)
            started = time.monotonic()
            try:
                with self._slots:
                    status, body = self._transport(
                        provider.endpoint_url, headers, payload, timeout_s
                    )
            except (GatewayTimeout, GatewayError) as exc:
                last_error = exc
                continue
            if status == 429 or status >= 500:
                last_error = ProviderError(status, str(body))
                continue
            if status >= 400:
                raise ProviderError(status, str(body))
            text, truncated = _extract_text(body)
            return ChatResponse(
                text=text,
                provider_id=f"{provider.kind}:{provider.model_name}",
                latency_ms=(time.monotonic() - started) * 1000.0,
                truncated=truncated,
            )
        raise ExhaustedRetries(attempts, last_error)

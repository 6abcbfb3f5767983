"""Per-job vector memory over section summaries.

Exact full-scan cosine retrieval; embeddings are unit vectors so cosine is a
dot product. The offline provider hashes character n-grams, which keeps every
test fully deterministic.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Protocol

import httpx
import numpy as np

from .errors import DimensionMismatch, EmbeddingError, EmptyText

NORM_TOLERANCE = 1e-6


class EmbeddingProvider(Protocol):
    dimension: int

    def embed_raw(self, text: str) -> np.ndarray: ...


class HashEmbeddingProvider:
    """Seeded hash of character n-grams, projected to a fixed dimension."""

    def __init__(self, dimension: int = 256, seed: int = 0, ngram: int = 3):
        if dimension <= 0:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self.seed = seed
        self.ngram = ngram

    def embed_raw(self, text: str) -> np.ndarray:
        vector = np.zeros(self.dimension, dtype=np.float64)
        if len(text) < self.ngram:
            grams = [text]
        else:
            grams = [text[i : i + self.ngram] for i in range(len(text) - self.ngram + 1)]
        prefix = f"{self.seed}:".encode()
        for gram in grams:
            digest = hashlib.blake2b(prefix + gram.encode("utf-8"), digest_size=9).digest()
            bucket = int.from_bytes(digest[:8], "little") % self.dimension
            sign = 1.0 if digest[8] & 1 else -1.0
            vector[bucket] += sign
        return vector


class RemoteEmbeddingProvider:
    """HTTP embedding endpoint; API key read from the environment only."""

    def __init__(
        self,
        endpoint_url: str,
        model_name: str,
        dimension: int,
        api_key_env_var_name: str = "",
        timeout_ms: int = 60000,
        post=None,
    ):
        self.endpoint_url = endpoint_url
        self.model_name = model_name
        self.dimension = dimension
        self.api_key_env_var_name = api_key_env_var_name
        self.timeout_s = timeout_ms / 1000.0
        self._post = post or httpx.post

    def embed_raw(self, text: str) -> np.ndarray:
        headers = {"Content-Type": "application/json"}
        if self.api_key_env_var_name:
            key = os.environ.get(self.api_key_env_var_name, "")
            if key:
                headers["Authorization"] = f"Bearer {key}"
        response = self._post(
            self.endpoint_url,
            headers=headers,
            json={"model": self.model_name, "input": text},
            timeout=self.timeout_s,
        )
        if response.status_code != 200:
            raise EmbeddingError(f"embedding endpoint returned {response.status_code}")
        body = response.json()
        try:
            values = body["data"][0]["embedding"]
        except (KeyError, IndexError, TypeError) as exc:
            raise EmbeddingError(f"malformed embedding response: {exc}") from exc
        return np.asarray(values, dtype=np.float64)


def embed(text: str, provider: EmbeddingProvider) -> np.ndarray:
    """Embed text and L2-normalize, whatever the provider returned."""
    if not text.strip():
        raise EmptyText("cannot embed empty text")
    raw = np.asarray(provider.embed_raw(text), dtype=np.float64)
    if raw.ndim != 1 or raw.shape[0] != provider.dimension:
        raise EmbeddingError(
            f"provider returned shape {raw.shape}, expected ({provider.dimension},)"
        )
    norm = float(np.linalg.norm(raw))
    if norm == 0.0:
        raise EmbeddingError("provider returned a zero vector")
    # canonical storage form: normalize in float64, keep float32
    return (raw / norm).astype(np.float32)


@dataclass(frozen=True, slots=True, eq=False)
class MemoryEntry:
    job_id: str
    section_index: int
    title: str
    summary: str
    embedding: np.ndarray

    def __post_init__(self) -> None:
        norm = float(np.linalg.norm(self.embedding.astype(np.float64)))
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise ValueError(f"embedding norm {norm} is not 1 within {NORM_TOLERANCE}")


@dataclass(frozen=True, slots=True, eq=False)
class QueryResult:
    entry: MemoryEntry
    score: float


def build_entry(
    job_id: str, section_index: int, title: str, summary: str, provider: EmbeddingProvider
) -> MemoryEntry:
    return MemoryEntry(
        job_id=job_id,
        section_index=section_index,
        title=title,
        summary=summary,
        embedding=embed(summary, provider),
    )


def _log_name(job_id: str) -> str:
    safe = re.sub(r"[^A-Za-z0-9._-]", "_", job_id)
    if safe != job_id:
        safe += "-" + hashlib.sha1(job_id.encode("utf-8")).hexdigest()[:8]
    return f"{safe}.jsonl"


class MemoryIndex:
    """In-process exact index; one isolated namespace per job."""

    def __init__(self, dimension: int | None = None, log_dir: str | Path | None = None):
        self.dimension = dimension
        self._jobs: dict[str, dict[int, MemoryEntry]] = {}
        self._matrix_cache: dict[str, tuple[np.ndarray, list[MemoryEntry]]] = {}
        self._lock = threading.Lock()
        self._log_dir = Path(log_dir) if log_dir is not None else None
        if self._log_dir is not None:
            self._log_dir.mkdir(parents=True, exist_ok=True)
        self.upserts = 0
        self.queries = 0

    def upsert(self, entry: MemoryEntry) -> None:
        got = int(entry.embedding.shape[0])
        with self._lock:
            if self.dimension is None:
                self.dimension = got
            elif got != self.dimension:
                raise DimensionMismatch(self.dimension, got)
            self._jobs.setdefault(entry.job_id, {})[entry.section_index] = entry
            self._matrix_cache.pop(entry.job_id, None)
            self.upserts += 1
            if self._log_dir is not None:
                self._append_record(entry)

    def _append_record(self, entry: MemoryEntry) -> None:
        record = {
            "job_id": entry.job_id,
            "section_index": entry.section_index,
            "title": entry.title,
            "summary": entry.summary,
            "embedding": entry.embedding.astype("<f4").tobytes().hex(),
        }
        path = self._log_dir / _log_name(entry.job_id)
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    def _snapshot(self, job_id: str) -> tuple[np.ndarray, list[MemoryEntry]]:
        with self._lock:
            cached = self._matrix_cache.get(job_id)
            if cached is not None:
                return cached
            store = self._jobs.get(job_id, {})
            entries = [store[i] for i in sorted(store)]
            if entries:
                matrix = np.stack([e.embedding for e in entries]).astype(np.float64)
            else:
                matrix = np.zeros((0, self.dimension or 0), dtype=np.float64)
            self._matrix_cache[job_id] = (matrix, entries)
            return matrix, entries

    def query_vector(self, job_id: str, vector: np.ndarray, k: int) -> list[QueryResult]:
        if k < 0:
            raise ValueError("k must be >= 0")
        with self._lock:
            self.queries += 1
        matrix, entries = self._snapshot(job_id)
        if k == 0 or not entries:
            return []
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape[0] != matrix.shape[1]:
            raise DimensionMismatch(matrix.shape[1], vector.shape[0])
        scores = matrix @ vector
        indices = np.array([e.section_index for e in entries])
        order = np.lexsort((indices, -scores))[:k]
        return [QueryResult(entry=entries[i], score=float(scores[i])) for i in order]

    def query(
        self, job_id: str, query_text: str, k: int, provider: EmbeddingProvider
    ) -> list[QueryResult]:
        if k == 0:
            with self._lock:
                self.queries += 1
            return []
        return self.query_vector(job_id, embed(query_text, provider), k)

    def count(self, job_id: str) -> int:
        with self._lock:
            return len(self._jobs.get(job_id, {}))

    def entries(self, job_id: str) -> list[MemoryEntry]:
        _, entries = self._snapshot(job_id)
        return list(entries)

    def job_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._jobs)

    @classmethod
    def replay(cls, log_dir: str | Path, dimension: int | None = None) -> "MemoryIndex":
        """Rebuild an index bit-exactly from its append-only record files."""
        log_dir = Path(log_dir)
        index = cls(dimension=dimension)
        for path in sorted(log_dir.glob("*.jsonl")):
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    record = json.loads(line)
                    embedding = np.frombuffer(
                        bytes.fromhex(record["embedding"]), dtype="<f4"
                    ).copy()
                    index.upsert(
                        MemoryEntry(
                            job_id=str(record.get("job_id", path.stem)),
                            section_index=int(record["section_index"]),
                            title=str(record["title"]),
                            summary=str(record["summary"]),
                            embedding=embedding,
                        )
                    )
        index._log_dir = log_dir
        index.upserts = 0
        return index

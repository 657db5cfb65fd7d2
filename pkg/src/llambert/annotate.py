"""Send prompts to an LLM backend, cache raw responses, parse them into
binary labels, and discard anything that fails to classify.

Two backends: an HTTP client for any chat-completions-compatible endpoint,
and a seeded mock oracle for tests and desk-scale experiments. Raw responses
are cached in an append-only JSONL file so interrupted runs resume without
repeating calls.
"""

from __future__ import annotations

import json
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Optional

from filelock import FileLock

from .corpus import Corpus, Document
from .prompts import PromptSpec, RenderedPrompt, render, _normalize_surface
from .rng import SplitMix64, subseed

GARBAGE_TEXT = "I cannot determine that."


class AnnotateError(ValueError):
    pass


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    initial_backoff: float = 0.5
    multiplier: float = 2.0

    def __post_init__(self):
        if self.max_attempts < 1:
            raise AnnotateError("max_attempts must be >= 1")


@dataclass(frozen=True)
class OracleParams:
    error_rate: float = 0.0
    garbage_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.error_rate <= 1.0 and 0.0 <= self.garbage_rate <= 1.0):
            raise AnnotateError("error_rate and garbage_rate must be in [0, 1]")
        if self.error_rate + self.garbage_rate > 1.0:
            raise AnnotateError("error_rate + garbage_rate must not exceed 1")


@dataclass(frozen=True)
class LlmBackendConfig:
    kind: str  # "http_chat" | "mock_oracle"
    model_name: str = "mock"
    base_url: str = ""
    temperature: float = 0.0
    max_tokens: int = 8
    max_in_flight: int = 4
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    oracle_params: Optional[OracleParams] = None

    def __post_init__(self):
        if self.kind not in ("http_chat", "mock_oracle"):
            raise AnnotateError(f"unknown backend kind {self.kind!r}")
        if self.kind == "http_chat" and not self.base_url:
            raise AnnotateError("http_chat backend needs base_url")
        if self.max_in_flight < 1:
            raise AnnotateError("max_in_flight must be >= 1")

    @property
    def name(self) -> str:
        return f"{self.kind}:{self.model_name}"


@dataclass(frozen=True)
class RawResponse:
    doc_id: str
    prompt_hash: str
    response_text: str
    backend: str
    timestamp: float


@dataclass(frozen=True)
class Discard:
    doc_id: str
    reason: str  # transport | protocol | ambiguous | no-label


@dataclass(frozen=True)
class LabelRecord:
    doc_id: str
    label: str
    source: str  # gold | llm | noise | human | model
    model: str = ""
    prompt_hash: str = ""
    raw_response_excerpt: str = ""


@dataclass
class LabelSet:
    task_id: str
    records: dict = field(default_factory=dict)  # doc_id -> LabelRecord
    discards: list = field(default_factory=list)  # Discard

    def add(self, record: LabelRecord) -> None:
        if record.doc_id in self.records or any(d.doc_id == record.doc_id for d in self.discards):
            raise AnnotateError(f"doc {record.doc_id!r} already labeled or discarded")
        self.records[record.doc_id] = record

    def discard(self, doc_id: str, reason: str) -> None:
        if doc_id in self.records:
            raise AnnotateError(f"doc {doc_id!r} already labeled")
        self.discards.append(Discard(doc_id, reason))

    def __len__(self) -> int:
        return len(self.records)


class ResponseCache:
    """Append-only JSONL cache keyed by (doc_id, prompt_hash, backend)."""

    def __init__(self, path):
        self.path = Path(path)
        self._lock = FileLock(str(self.path) + ".lock")
        self._entries: dict[tuple, RawResponse] = {}
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    obj = json.loads(line)
                    resp = RawResponse(**obj)
                    self._entries[(resp.doc_id, resp.prompt_hash, resp.backend)] = resp

    def get(self, doc_id: str, prompt_hash: str, backend: str) -> Optional[RawResponse]:
        return self._entries.get((doc_id, prompt_hash, backend))

    def put(self, resp: RawResponse) -> None:
        key = (resp.doc_id, resp.prompt_hash, resp.backend)
        if key in self._entries:
            return
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(asdict(resp), ensure_ascii=False) + "\n")
        self._entries[key] = resp

    def __len__(self) -> int:
        return len(self._entries)


def mock_oracle_respond(document: Document, gold_label: str, params: OracleParams,
                        label_names) -> str:
    """Simulated LLM reply: garbage with probability delta, the opposite
    label with probability epsilon, else the gold label's surface string.

    Randomness is derived from (seed, doc_id), so the reply for a document
    never depends on request order or concurrency.
    """
    if gold_label is None:
        raise AnnotateError(f"mock oracle needs a gold label for doc {document.id!r}")
    if gold_label not in label_names:
        raise AnnotateError(f"gold label {gold_label!r} not in {tuple(label_names)}")
    rng = SplitMix64(subseed(params.seed, document.id))
    if rng.next_float() < params.garbage_rate:
        return GARBAGE_TEXT
    if rng.next_float() < params.error_rate:
        a, b = label_names
        return b if gold_label == a else a
    return gold_label


class MockOracleBackend:
    def __init__(self, config: LlmBackendConfig, corpus: Corpus):
        if config.oracle_params is None:
            raise AnnotateError("mock_oracle backend needs oracle_params")
        self.config = config
        self.corpus = corpus

    def complete(self, document: Document, prompt: RenderedPrompt) -> str:
        return mock_oracle_respond(
            document, document.gold_label, self.config.oracle_params, self.corpus.label_names
        )


class TransportError(RuntimeError):
    pass


class ProtocolError(RuntimeError):
    pass


class HttpChatBackend:
    """Client for POST {base_url}/v1/chat/completions. The API key comes
    from the LLAMBERT_API_KEY (or OPENAI_API_KEY) environment variable."""

    def __init__(self, config: LlmBackendConfig, corpus: Optional[Corpus] = None, session=None):
        import requests

        self.config = config
        self.corpus = corpus
        self.session = session or requests.Session()
        self.api_key = os.environ.get("LLAMBERT_API_KEY") or os.environ.get("OPENAI_API_KEY", "")

    def complete(self, document: Document, prompt: RenderedPrompt) -> str:
        cfg = self.config
        url = cfg.base_url.rstrip("/") + "/v1/chat/completions"
        body = {
            "model": cfg.model_name,
            "messages": [{"role": r, "content": c} for r, c in prompt.messages],
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        backoff = cfg.retry.initial_backoff
        last_exc = None
        for attempt in range(cfg.retry.max_attempts):
            if attempt:
                time.sleep(backoff)
                backoff *= cfg.retry.multiplier
            try:
                resp = self.session.post(url, json=body, headers=headers, timeout=60)
            except Exception as exc:
                last_exc = TransportError(str(exc))
                continue
            if resp.status_code >= 500 or resp.status_code == 429:
                last_exc = TransportError(f"HTTP {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise ProtocolError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                content = resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise ProtocolError(f"malformed endpoint reply: {exc}") from exc
            if not isinstance(content, str):
                raise ProtocolError("message content is not a string")
            return content
        raise last_exc or TransportError("request failed")


def make_backend(config: LlmBackendConfig, corpus: Corpus):
    if config.kind == "mock_oracle":
        return MockOracleBackend(config, corpus)
    return HttpChatBackend(config, corpus)


def annotate(doc_ids, spec: PromptSpec, backend, cache: Optional[ResponseCache] = None):
    """Fetch one raw response per document, consulting the cache first.

    Returns (responses sorted by doc id, transport/protocol discards).
    At most config.max_in_flight requests are outstanding at once.
    """
    config = backend.config
    corpus = backend.corpus
    if corpus is None:
        raise AnnotateError("backend has no corpus to resolve document ids against")

    jobs = []
    responses = {}
    discards = []
    for doc_id in doc_ids:
        doc = corpus[doc_id]
        prompt = render(spec, doc)
        cached = cache.get(doc_id, prompt.prompt_hash, config.name) if cache else None
        if cached is not None:
            responses[doc_id] = cached
        else:
            jobs.append((doc, prompt))

    def run(job):
        doc, prompt = job
        try:
            text = backend.complete(doc, prompt)
        except TransportError:
            return doc.id, None, "transport"
        except ProtocolError:
            return doc.id, None, "protocol"
        return doc.id, RawResponse(doc.id, prompt.prompt_hash, text, config.name, time.time()), None

    if jobs:
        with ThreadPoolExecutor(max_workers=config.max_in_flight) as pool:
            results = list(pool.map(run, jobs))
        for doc_id, resp, reason in results:
            if resp is None:
                discards.append(Discard(doc_id, reason))
            else:
                responses[doc_id] = resp
                if cache is not None:
                    cache.put(resp)
    return [responses[i] for i in sorted(responses)], discards


_WORD_RE_CACHE: dict[str, re.Pattern] = {}


def _count_whole_word(needle: str, haystack: str) -> int:
    pat = _WORD_RE_CACHE.get(needle)
    if pat is None:
        pat = re.compile(rf"(?<!\w){re.escape(needle)}(?!\w)")
        _WORD_RE_CACHE[needle] = pat
    return len(pat.findall(haystack))


def parse_response(response_text: str, label_lexicon: dict):
    """Map a raw reply to a label, or a Discard reason string.

    Lowercase, trim surrounding whitespace/punctuation, then count each
    label's surface strings as whole words. Exactly one label present wins;
    both or neither present is a discard ("ambiguous" / "no-label").
    Total: never raises on any input string.
    """
    text = response_text.strip().strip(".,;:!?'\"()[]{}").lower()
    counts = {}
    for label, surfaces in label_lexicon.items():
        counts[label] = sum(_count_whole_word(_normalize_surface(s), text) for s in surfaces)
    hits = [label for label, c in counts.items() if c > 0]
    if len(hits) == 1:
        return hits[0]
    return "ambiguous" if len(hits) > 1 else "no-label"


def label_subset(doc_ids, spec: PromptSpec, backend, cache: Optional[ResponseCache] = None,
                 out_dir=None) -> LabelSet:
    """Annotate + parse + discard, producing a LabelSet and, optionally,
    labels.jsonl / discards.jsonl / a run manifest under out_dir."""
    doc_ids = list(doc_ids)
    responses, transport_discards = annotate(doc_ids, spec, backend, cache)
    labels = LabelSet(task_id=spec.task_id)
    for d in transport_discards:
        labels.discard(d.doc_id, d.reason)
    for resp in responses:
        parsed = parse_response(resp.response_text, spec.label_lexicon)
        if parsed in ("ambiguous", "no-label"):
            labels.discard(resp.doc_id, parsed)
        else:
            labels.add(LabelRecord(
                doc_id=resp.doc_id,
                label=parsed,
                source="llm",
                model=backend.config.model_name,
                prompt_hash=resp.prompt_hash,
                raw_response_excerpt=resp.response_text[:80],
            ))
    if out_dir is not None:
        save_label_set(labels, out_dir, backend.config, spec)
    return labels


def save_label_set(labels: LabelSet, out_dir, config: Optional[LlmBackendConfig] = None,
                   spec: Optional[PromptSpec] = None) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "labels.jsonl", "w", encoding="utf-8") as fh:
        for doc_id in sorted(labels.records):
            fh.write(json.dumps(asdict(labels.records[doc_id]), ensure_ascii=False) + "\n")
    with open(out / "discards.jsonl", "w", encoding="utf-8") as fh:
        for d in sorted(labels.discards, key=lambda d: d.doc_id):
            fh.write(json.dumps({"doc_id": d.doc_id, "reason": d.reason}) + "\n")


def load_label_set(path, task_id: str = "") -> LabelSet:
    """Read labels.jsonl (and discards.jsonl if present beside it)."""
    path = Path(path)
    labels = LabelSet(task_id=task_id)
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                labels.add(LabelRecord(**json.loads(line)))
    discards = path.parent / "discards.jsonl"
    if discards.exists():
        with open(discards, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    obj = json.loads(line)
                    labels.discard(obj["doc_id"], obj["reason"])
    return labels

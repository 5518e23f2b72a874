"""Uniform access to completion and embedding backends with token accounting.

Every pipeline stage talks to a model through a :class:`Gateway`, which
validates requests, delegates to a configured backend (live HTTP or an
offline fixture archive), and records token usage per stage in a shared
:class:`UsageLedger`.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence

import numpy as np

# Closed set of pipeline stages a request may be issued under.
STAGES: frozenset[str] = frozenset(
    {
        "synthesize",
        "decompose",
        "plan_tools",
        "confirm_tool",
        "distill",
        "generate_script",
        "fix_error",
        "doc_fallback",
        "check_effectiveness",
        "early_stop",
        "sufficiency",
        "web_search",
        "assemble",
        "count_steps",
        "judge",
        "embed",
    }
)

DEFAULT_MAX_OUTPUT = 4096


class GatewayError(Exception):
    """Base class for gateway failures."""


class InvalidRequest(GatewayError):
    """Request violates a precondition (empty text, unknown stage, ...)."""


class TransportError(GatewayError):
    """Live backend could not be reached; retryable."""


class ProtocolError(GatewayError):
    """Live backend replied with a malformed or inconsistent payload."""


class FixtureMissing(GatewayError):
    """No fixture record exists for this request."""

    def __init__(self, role_id: str, digest: str):
        super().__init__(f"no fixture record for stage {role_id!r} (digest {digest})")
        self.role_id = role_id
        self.digest = digest


@dataclass(frozen=True)
class PromptRequest:
    """One completion request, tagged with the pipeline stage issuing it."""

    role_id: str
    system_text: str
    user_text: str
    temperature: float = 1.0
    max_output: int = DEFAULT_MAX_OUTPUT

    def validate(self) -> None:
        if self.role_id not in STAGES:
            raise InvalidRequest(f"unknown stage {self.role_id!r}")
        if not self.user_text:
            raise InvalidRequest("user_text must be non-empty")
        if not 0.0 <= self.temperature <= 2.0:
            raise InvalidRequest(f"temperature {self.temperature} outside [0, 2]")
        if self.max_output < 1:
            raise InvalidRequest("max_output must be positive")


@dataclass(frozen=True)
class TokenUsage:
    prompt_tokens: int
    completion_tokens: int
    stage: str


@dataclass(frozen=True)
class Completion:
    text: str
    usage: TokenUsage


class UsageLedger:
    """Per-stage token accumulator; safe for concurrent appends."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._per_stage: dict[str, list[int]] = {}
        self.call_count = 0

    def add(self, stage: str, prompt_tokens: int, completion_tokens: int) -> None:
        with self._lock:
            bucket = self._per_stage.setdefault(stage, [0, 0])
            bucket[0] += prompt_tokens
            bucket[1] += completion_tokens
            self.call_count += 1

    def per_stage(self) -> dict[str, TokenUsage]:
        with self._lock:
            return {
                stage: TokenUsage(p, c, stage)
                for stage, (p, c) in sorted(self._per_stage.items())
            }

    def total(self) -> tuple[int, int]:
        with self._lock:
            prompt = sum(p for p, _ in self._per_stage.values())
            completion = sum(c for _, c in self._per_stage.values())
        return prompt, completion

    def snapshot(self) -> dict[str, dict[str, int]]:
        """JSON-ready view: stage -> {prompt_tokens, completion_tokens}."""
        return {
            stage: {"prompt_tokens": u.prompt_tokens, "completion_tokens": u.completion_tokens}
            for stage, u in self.per_stage().items()
        }


@dataclass(frozen=True)
class UsageRow:
    stage: str
    prompt_tokens: int
    completion_tokens: int


def usage_report(ledger: UsageLedger) -> list[UsageRow]:
    """Rows for every stage with at least one recorded call, sorted by stage."""
    return [
        UsageRow(stage, u.prompt_tokens, u.completion_tokens)
        for stage, u in ledger.per_stage().items()
    ]


class Backend(Protocol):
    """A completion/embedding provider (live endpoint or fixture archive)."""

    def complete(self, req: PromptRequest) -> Completion: ...

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]: ...


def approx_tokens(text: str) -> int:
    """Deterministic token estimate used by offline backends."""
    return len(text.split())


def validate_vectors(vectors: Iterable[np.ndarray]) -> list[np.ndarray]:
    vecs = list(vectors)
    if not vecs:
        return vecs
    dim = vecs[0].shape[0]
    for v in vecs:
        if v.ndim != 1 or v.shape[0] != dim:
            raise ProtocolError(f"embedding dim mismatch: {v.shape} vs ({dim},)")
        if not np.all(np.isfinite(v)):
            raise ProtocolError("embedding contains non-finite entries")
    return vecs


class Gateway:
    """Validated access to one backend, with usage recorded per stage.

    A gateway may be shared across concurrent pipeline workers; the ledger
    accumulates atomically. ``scoped()`` yields a child gateway whose calls
    are additionally recorded into a private ledger, which is how each
    emitted pair gets its own usage slice.
    """

    def __init__(self, backend: Backend, ledger: UsageLedger | None = None):
        self.backend = backend
        self.ledger = ledger if ledger is not None else UsageLedger()
        self._parents: tuple[UsageLedger, ...] = ()

    def scoped(self) -> "Gateway":
        child = Gateway(self.backend, UsageLedger())
        child._parents = self._parents + (self.ledger,)
        return child

    def _record(self, stage: str, prompt_tokens: int, completion_tokens: int) -> None:
        self.ledger.add(stage, prompt_tokens, completion_tokens)
        for parent in self._parents:
            parent.add(stage, prompt_tokens, completion_tokens)

    def complete(self, req: PromptRequest) -> Completion:
        req.validate()
        completion = self.backend.complete(req)
        usage = completion.usage
        self._record(req.role_id, usage.prompt_tokens, usage.completion_tokens)
        return completion

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        texts = list(texts)
        if not texts:
            return []
        for t in texts:
            if not t:
                raise InvalidRequest("cannot embed empty text")
        vectors = validate_vectors(self.backend.embed(texts))
        self._record("embed", sum(approx_tokens(t) for t in texts), 0)
        return vectors

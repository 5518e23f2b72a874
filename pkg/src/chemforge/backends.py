"""Backend implementations: live HTTP, fixture archive, scripted replies.

The fixture archive is content-addressed: each record is keyed by a digest
of (role_id, system_text, user_text), so replaying the same requests against
the same archive is deterministic byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import re
import time
from collections import deque
from pathlib import Path
from typing import Sequence

import httpx
import numpy as np

from .gateway import (
    Backend,
    Completion,
    FixtureMissing,
    InvalidRequest,
    PromptRequest,
    ProtocolError,
    TokenUsage,
    TransportError,
    approx_tokens,
)

EMBED_DIM = 256

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class MockEmbedder:
    """Deterministic hash-bag embedder for offline runs.

    Lowercase word tokens are hashed into a fixed-dim count vector and
    L2-normalized, so equal texts embed identically and similarity behaves
    sensibly for retrieval (shared vocabulary raises cosine).
    """

    def __init__(self, dim: int = EMBED_DIM):
        self.dim = dim

    def embed_one(self, text: str) -> np.ndarray:
        tokens = _TOKEN_RE.findall(text.lower())
        if not tokens:
            raise InvalidRequest(f"text has no word tokens: {text!r}")
        vec = np.zeros(self.dim, dtype=np.float64)
        for tok in tokens:
            digest = hashlib.sha256(tok.encode("utf-8")).digest()
            vec[int.from_bytes(digest[:8], "big") % self.dim] += 1.0
        return vec / np.linalg.norm(vec)

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [self.embed_one(t) for t in texts]


def request_digest(role_id: str, system_text: str, user_text: str) -> str:
    payload = "\x1f".join((role_id, system_text, user_text)).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()[:32]


class FixtureArchive:
    """On-disk digest -> response record store."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def path_for(self, digest: str) -> Path:
        return self.root / f"{digest}.json"

    def lookup(self, digest: str) -> dict | None:
        path = self.path_for(digest)
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def store(
        self,
        req: PromptRequest,
        text: str,
        prompt_tokens: int | None = None,
        completion_tokens: int | None = None,
        note: str = "",
    ) -> str:
        digest = request_digest(req.role_id, req.system_text, req.user_text)
        record = {
            "role_id": req.role_id,
            "digest": digest,
            "note": note,
            "response": {
                "text": text,
                "prompt_tokens": (
                    prompt_tokens
                    if prompt_tokens is not None
                    else approx_tokens(req.system_text) + approx_tokens(req.user_text)
                ),
                "completion_tokens": (
                    completion_tokens if completion_tokens is not None else approx_tokens(text)
                ),
            },
        }
        self.root.mkdir(parents=True, exist_ok=True)
        self.path_for(digest).write_text(
            json.dumps(record, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
        return digest


class FixtureBackend:
    """Replays a fixture archive; embeddings come from the mock embedder.

    ``served`` keeps the raw call log (stage, prompt_tokens,
    completion_tokens) so tests can check ledger totals against an
    independent sum.
    """

    def __init__(self, archive: FixtureArchive | str | Path, dim: int = EMBED_DIM):
        self.archive = archive if isinstance(archive, FixtureArchive) else FixtureArchive(archive)
        self.embedder = MockEmbedder(dim)
        self.served: list[tuple[str, int, int]] = []

    def complete(self, req: PromptRequest) -> Completion:
        digest = request_digest(req.role_id, req.system_text, req.user_text)
        record = self.archive.lookup(digest)
        if record is None:
            raise FixtureMissing(req.role_id, digest)
        resp = record["response"]
        usage = TokenUsage(resp["prompt_tokens"], resp["completion_tokens"], req.role_id)
        self.served.append((req.role_id, usage.prompt_tokens, usage.completion_tokens))
        return Completion(text=resp["text"], usage=usage)

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        return self.embedder.embed(texts)


class ScriptedBackend:
    """Serves queued replies per stage; used by scripted scenario tests."""

    def __init__(self, dim: int = EMBED_DIM):
        self.embedder = MockEmbedder(dim)
        self._queues: dict[str, deque[str]] = {}
        self.requests: list[PromptRequest] = []

    def push(self, role_id: str, *replies: str) -> "ScriptedBackend":
        self._queues.setdefault(role_id, deque()).extend(replies)
        return self

    def pending(self, role_id: str) -> int:
        return len(self._queues.get(role_id, ()))

    def complete(self, req: PromptRequest) -> Completion:
        self.requests.append(req)
        queue = self._queues.get(req.role_id)
        if not queue:
            raise FixtureMissing(
                req.role_id, request_digest(req.role_id, req.system_text, req.user_text)
            )
        text = queue.popleft()
        usage = TokenUsage(
            approx_tokens(req.system_text) + approx_tokens(req.user_text),
            approx_tokens(text),
            req.role_id,
        )
        return Completion(text=text, usage=usage)

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        return self.embedder.embed(texts)


class RecordingBackend:
    """Wraps a backend and writes every served reply into a fixture archive."""

    def __init__(self, inner: Backend, archive: FixtureArchive):
        self.inner = inner
        self.archive = archive

    def complete(self, req: PromptRequest) -> Completion:
        completion = self.inner.complete(req)
        self.archive.store(
            req,
            completion.text,
            completion.usage.prompt_tokens,
            completion.usage.completion_tokens,
        )
        return completion

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        return self.inner.embed(texts)


class HttpBackend:
    """OpenAI-style chat-completion and embedding endpoints over HTTP.

    Endpoint, model names, and credentials come from arguments or the
    environment; nothing is hard-coded. Transport failures are retried
    twice with jittered backoff before surfacing as TransportError.
    """

    RETRIES = 2

    def __init__(
        self,
        base_url: str,
        model: str,
        embed_model: str,
        api_key: str | None = None,
        api_key_env: str = "CHEMFORGE_API_KEY",
        timeout: float = 60.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.embed_model = embed_model
        key = api_key if api_key is not None else os.environ.get(api_key_env, "")
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        self._client = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    def _post(self, path: str, payload: dict) -> dict:
        last: Exception | None = None
        for attempt in range(self.RETRIES + 1):
            try:
                resp = self._client.post(f"{self.base_url}{path}", json=payload)
                resp.raise_for_status()
                return resp.json()
            except (httpx.TransportError, httpx.HTTPStatusError) as exc:
                last = exc
                if attempt < self.RETRIES:
                    time.sleep((0.25 * 2**attempt) * (1.0 + random.random()))
        raise TransportError(f"POST {path} failed after {self.RETRIES + 1} attempts: {last}")

    def complete(self, req: PromptRequest) -> Completion:
        payload = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": req.system_text},
                {"role": "user", "content": req.user_text},
            ],
            "temperature": req.temperature,
            "max_tokens": req.max_output,
        }
        data = self._post("/chat/completions", payload)
        try:
            text = data["choices"][0]["message"]["content"]
            usage = data.get("usage", {})
            return Completion(
                text=text,
                usage=TokenUsage(
                    int(usage.get("prompt_tokens", 0)),
                    int(usage.get("completion_tokens", 0)),
                    req.role_id,
                ),
            )
        except (KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"malformed completion payload: {exc}") from exc

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        data = self._post("/embeddings", {"model": self.embed_model, "input": list(texts)})
        try:
            rows = sorted(data["data"], key=lambda r: r["index"])
            vectors = [np.asarray(r["embedding"], dtype=np.float64) for r in rows]
        except (KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed embedding payload: {exc}") from exc
        if len(vectors) != len(texts):
            raise ProtocolError(f"embedding count mismatch: {len(vectors)} != {len(texts)}")
        return vectors

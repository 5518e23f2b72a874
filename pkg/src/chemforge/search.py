"""Pluggable web-search backend used by the fallback path and doc retrieval."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping, Protocol

import httpx


class SearchError(Exception):
    """Search backend failed or is disabled."""


class SearchBackend(Protocol):
    def search(self, query: str) -> str:
        """Return retrieved text for the query; raises SearchError on failure."""
        ...


class FixtureSearch:
    """Serves canned results from a mapping or a JSON file of query -> text."""

    def __init__(self, results: Mapping[str, str] | str | Path):
        if isinstance(results, (str, Path)):
            results = json.loads(Path(results).read_text(encoding="utf-8"))
        self.results = dict(results)

    def search(self, query: str) -> str:
        if query not in self.results:
            raise SearchError(f"no fixture search result for {query!r}")
        return self.results[query]


class DisabledSearch:
    def search(self, query: str) -> str:
        raise SearchError("web search disabled")


class HttpSearch:
    """GET endpoint returning text or JSON with a "text" field."""

    def __init__(
        self,
        url: str,
        timeout: float = 30.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.url = url
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def search(self, query: str) -> str:
        try:
            resp = self._client.get(self.url, params={"q": query})
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            raise SearchError(f"search transport failed: {exc}") from exc
        content_type = resp.headers.get("content-type", "")
        if "json" in content_type:
            data = resp.json()
            return str(data.get("text", data))
        return resp.text

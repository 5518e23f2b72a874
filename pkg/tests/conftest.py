"""Shared fixtures and independent oracles used across the suite."""

from __future__ import annotations

import hashlib
import math
import re

import pytest

from chemforge.backends import MockEmbedder, ScriptedBackend
from chemforge.gateway import Gateway
from chemforge.registry import ToolRegistry, build_index, load_builtin_registry


def oracle_hash_bag(text: str, dim: int = 256) -> list[float]:
    """Independent pure-Python re-implementation of the hash-bag embedding."""
    counts: dict[int, int] = {}
    for token in re.findall(r"[a-z0-9]+", text.lower()):
        digest = hashlib.sha256(token.encode("utf-8")).digest()
        index = int.from_bytes(digest[:8], "big") % dim
        counts[index] = counts.get(index, 0) + 1
    norm = math.sqrt(sum(v * v for v in counts.values()))
    vector = [0.0] * dim
    for index, value in counts.items():
        vector[index] = value / norm
    return vector


def oracle_cosine(a: list[float], b: list[float]) -> float:
    dot = sum(x * y for x, y in zip(a, b))
    norm_a = math.sqrt(sum(x * x for x in a))
    norm_b = math.sqrt(sum(y * y for y in b))
    return dot / (norm_a * norm_b)


def brute_force_retrieve(indexed_texts: list[str], query: str, k: int) -> list[int]:
    """Exhaustive cosine scan with stable tie order; the retrieval oracle.

    Similarities are quantized to 12 decimals, mirroring the ranking
    contract: mathematical ties must compare equal independent of float
    summation order.
    """
    qvec = oracle_hash_bag(query)
    scored = []
    for i, text in enumerate(indexed_texts):
        scored.append((i, round(oracle_cosine(oracle_hash_bag(text), qvec), 12)))
    ordered = sorted(scored, key=lambda pair: (-pair[1], pair[0]))
    return [i for i, _ in ordered[:k]]


@pytest.fixture(scope="session")
def builtin_registry() -> ToolRegistry:
    return load_builtin_registry()


@pytest.fixture(scope="session")
def mock_embedder() -> MockEmbedder:
    return MockEmbedder()


@pytest.fixture()
def builtin_index(builtin_registry, mock_embedder):
    return build_index(builtin_registry, mock_embedder.embed)


@pytest.fixture()
def scripted_gateway():
    """(backend, gateway) pair ready for queued scripted replies."""
    backend = ScriptedBackend()
    return backend, Gateway(backend)

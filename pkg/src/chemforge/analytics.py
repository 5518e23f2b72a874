"""Dataset emission, corpus statistics, diversity metrics, and judging."""

from __future__ import annotations

import json
import re
import statistics
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import prompts
from .gateway import Gateway, UsageLedger
from .instructions import Constraint, DifficultyReport, Instruction
from .pipeline import InstructionResponsePair, Response, ToolOutput


class EmitError(Exception):
    """A pair could not be serialized; names the offending pair id."""


class StepCountError(Exception):
    """Step-count reply was not a single integer."""


class Unscorable(Exception):
    """Judge reply held no parseable verdict after one re-prompt."""


# ---------------------------------------------------------------------------
# Emission and loading


def pair_to_record(pair: InstructionResponsePair) -> dict[str, Any]:
    x = pair.instruction
    record: dict[str, Any] = {
        "id": pair.pair_id(),
        "instruction": {
            "text": x.text,
            "task_id": x.task_id,
            "constraint": {"category": x.constraint.category, "text": x.constraint.text},
            "metadata_digest": x.metadata_digest,
            "difficulty": (
                {
                    "score": x.difficulty.score,
                    "explanations": list(x.difficulty.explanations),
                    "flagged": x.difficulty.flagged,
                }
                if x.difficulty
                else None
            ),
            "calibration": x.calibration,
        },
        "response": (
            {
                "text": pair.response.text,
                "plan_digest": pair.response.plan_digest,
                "outputs_used": [o.payload() for o in pair.response.outputs_used],
            }
            if pair.response
            else None
        ),
        "trace": list(pair.tool_trace),
        "usage": pair.usage,
        "failure": pair.failure,
        "flags": list(pair.flags),
    }
    return record


def record_to_pair(record: Mapping[str, Any]) -> InstructionResponsePair:
    inst = record["instruction"]
    difficulty = inst.get("difficulty")
    instruction = Instruction(
        text=inst["text"],
        task_id=inst["task_id"],
        constraint=Constraint(**inst["constraint"]),
        metadata_digest=inst["metadata_digest"],
        difficulty=(
            DifficultyReport(
                score=difficulty["score"],
                explanations=tuple(difficulty["explanations"]),
                flagged=difficulty.get("flagged", False),
            )
            if difficulty
            else None
        ),
        calibration=inst.get("calibration", ""),
    )
    resp = record.get("response")
    response = (
        Response(
            text=resp["text"],
            plan_digest=resp["plan_digest"],
            outputs_used=tuple(
                ToolOutput(
                    source=o["source"],
                    text=o["text"],
                    tool_name=o.get("tool_name"),
                    effective=o.get("effective", True),
                )
                for o in resp["outputs_used"]
            ),
        )
        if resp
        else None
    )
    return InstructionResponsePair(
        instruction=instruction,
        response=response,
        tool_trace=tuple(record["trace"]),
        usage={k: dict(v) for k, v in record["usage"].items()},
        failure=record.get("failure", ""),
        flags=tuple(record.get("flags", ())),
    )


def emit_pairs(pairs: Sequence[InstructionResponsePair], path: str | Path) -> int:
    """Write one canonical JSON line per pair; reloadable losslessly."""
    path = Path(path)
    lines = []
    for pair in pairs:
        try:
            lines.append(
                json.dumps(
                    pair_to_record(pair),
                    sort_keys=True,
                    ensure_ascii=False,
                    separators=(",", ":"),
                )
            )
        except (TypeError, ValueError) as exc:
            raise EmitError(f"pair {pair.pair_id()} failed to serialize: {exc}") from exc
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return len(lines)


def load_pairs(
    path: str | Path, skip_corrupt: bool = False
) -> tuple[list[InstructionResponsePair], list[str]]:
    """Load an emitted dataset. Returns (pairs, warnings for skipped lines)."""
    pairs: list[InstructionResponsePair] = []
    warnings: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                pairs.append(record_to_pair(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                if not skip_corrupt:
                    raise ValueError(f"corrupt record at line {lineno}: {exc}") from exc
                warnings.append(f"line {lineno}: {exc}")
    return pairs, warnings


def pair_schema() -> dict[str, Any]:
    raw = resources.files("chemforge").joinpath("data/pair_schema.json").read_text("utf-8")
    return json.loads(raw)


# ---------------------------------------------------------------------------
# Diversity metrics


def _cosine_matrix(vectors: Sequence[np.ndarray]) -> np.ndarray:
    matrix = np.vstack(vectors)
    norms = np.linalg.norm(matrix, axis=1)
    norms = np.where(norms == 0.0, 1.0, norms)
    return (matrix @ matrix.T) / np.outer(norms, norms)


def aps(vectors: Sequence[np.ndarray]) -> float:
    """Mean cosine similarity over all unordered distinct vector pairs."""
    n = len(vectors)
    if n < 2:
        raise ValueError("average pairwise similarity needs at least two vectors")
    cos = _cosine_matrix(vectors)
    upper = cos[np.triu_indices(n, k=1)]
    return float(upper.mean())


def remote_clique(vectors: Sequence[np.ndarray], subset_size: int | None = None) -> float:
    """Mean pairwise cosine distance within a greedily dispersed subset.

    Selection seeds at the most distant pair, then repeatedly adds the
    vector maximizing its minimum distance to the chosen set (ties resolved
    by input order).
    """
    n = len(vectors)
    if subset_size is None:
        subset_size = min(50, n)
    if subset_size < 2 or subset_size > n:
        raise ValueError(f"subset size {subset_size} outside [2, {n}]")
    dist = 1.0 - _cosine_matrix(vectors)

    flat = np.argmax(dist)  # row-major argmax = earliest max pair
    i, j = divmod(int(flat), n)
    selected = [min(i, j), max(i, j)] if i != j else [0, 1]
    while len(selected) < subset_size:
        remaining = [k for k in range(n) if k not in selected]
        min_dists = [dist[k, selected].min() for k in remaining]
        selected.append(remaining[int(np.argmax(min_dists))])

    chosen = sorted(selected)
    total = 0.0
    count = 0
    for a in range(len(chosen)):
        for b in range(a + 1, len(chosen)):
            total += float(dist[chosen[a], chosen[b]])
            count += 1
    return total / count


@dataclass(frozen=True)
class DiversityReport:
    aps: float
    remote_clique: float
    sample_count: int
    embedder_id: str


def diversity_report(
    vectors: Sequence[np.ndarray], embedder_id: str, subset_size: int | None = None
) -> DiversityReport:
    return DiversityReport(
        aps=aps(vectors),
        remote_clique=remote_clique(vectors, subset_size),
        sample_count=len(vectors),
        embedder_id=embedder_id,
    )


# ---------------------------------------------------------------------------
# Corpus statistics


@dataclass(frozen=True)
class StatsReport:
    pair_count: int
    failed_count: int
    mean_instruction_words: float
    median_instruction_words: float
    mean_response_words: float
    median_response_words: float
    mean_tools_per_pair: float
    step_histogram: dict[int, int]

    def to_json(self) -> dict[str, Any]:
        data = dict(self.__dict__)
        data["step_histogram"] = {str(k): v for k, v in sorted(self.step_histogram.items())}
        return data


def word_count(text: str) -> int:
    return len(text.split())


def tools_invoked(pair: InstructionResponsePair) -> int:
    """Tool outputs grounding the response; web fallback is not a tool."""
    if pair.response is None:
        return 0
    return sum(1 for o in pair.response.outputs_used if o.source == "tool")


def corpus_stats(
    pairs: Sequence[InstructionResponsePair],
    step_counts: Sequence[int] | None = None,
) -> StatsReport:
    """Word counts and tool usage over non-failed pairs."""
    complete = [p for p in pairs if p.response is not None]
    instruction_words = [word_count(p.instruction.text) for p in complete]
    response_words = [word_count(p.response.text) for p in complete]  # type: ignore[union-attr]
    tools = [tools_invoked(p) for p in complete]
    histogram: dict[int, int] = {}
    for count in step_counts or ():
        histogram[count] = histogram.get(count, 0) + 1
    return StatsReport(
        pair_count=len(pairs),
        failed_count=len(pairs) - len(complete),
        mean_instruction_words=statistics.mean(instruction_words) if instruction_words else 0.0,
        median_instruction_words=(
            float(statistics.median(instruction_words)) if instruction_words else 0.0
        ),
        mean_response_words=statistics.mean(response_words) if response_words else 0.0,
        median_response_words=(
            float(statistics.median(response_words)) if response_words else 0.0
        ),
        mean_tools_per_pair=statistics.mean(tools) if tools else 0.0,
        step_histogram=histogram,
    )


_INT_RE = re.compile(r"-?\d+")


def count_reasoning_steps(response_text: str, gateway: Gateway) -> int:
    """Model-extracted count of reasoning steps in a response."""
    if not response_text.strip():
        raise ValueError("response text must be non-empty")
    reply = gateway.complete(prompts.render_count_steps(response_text)).text.strip()
    match = _INT_RE.fullmatch(reply)
    if not match:
        matches = _INT_RE.findall(reply)
        if len(matches) != 1:
            raise StepCountError(f"step-count reply not a single integer: {reply!r}")
        match = _INT_RE.search(reply)
    value = int(match.group(0))
    if value < 0:
        raise StepCountError(f"negative step count: {value}")
    return value


# ---------------------------------------------------------------------------
# LLM-as-a-judge


@dataclass(frozen=True)
class JudgeVerdict:
    mode: str  # binary | score10
    verdict: str | int
    rationale: str


_SCORE_RE = re.compile(r"final score:\s*(-?\d+)", re.IGNORECASE)
_BINARY_RE = re.compile(r"\b(incorrect|correct)\b", re.IGNORECASE)


def judge(
    question: str,
    predicted: str,
    reference: str,
    mode: str,
    gateway: Gateway,
) -> JudgeVerdict:
    """Render the matching evaluation prompt and parse the final verdict."""
    if mode not in ("binary", "score10"):
        raise ValueError(f"unknown judge mode {mode!r}")
    for text in (question, predicted, reference):
        if not text.strip():
            raise ValueError("judge inputs must be non-empty")

    req = prompts.render_judge(mode, question, predicted, reference)
    reply = gateway.complete(req).text
    verdict = _parse_verdict(mode, reply)
    if verdict is None:
        retry = replace(req, user_text=req.user_text + " Respond in the exact output format.")
        reply = gateway.complete(retry).text
        verdict = _parse_verdict(mode, reply)
    if verdict is None:
        raise Unscorable(f"no parseable {mode} verdict in: {reply!r}")
    return JudgeVerdict(mode=mode, verdict=verdict, rationale=reply.strip())


def _parse_verdict(mode: str, reply: str) -> str | int | None:
    if mode == "score10":
        matches = _SCORE_RE.findall(reply)
        if not matches:
            return None
        score = int(matches[-1])
        return score if 1 <= score <= 10 else None
    matches = _BINARY_RE.findall(reply)
    return matches[-1].lower() if matches else None


# ---------------------------------------------------------------------------
# Cost accounting


@dataclass(frozen=True)
class PriceTable:
    prompt_rate: float  # currency per prompt token
    completion_rate: float  # currency per completion token

    def __post_init__(self) -> None:
        if self.prompt_rate < 0 or self.completion_rate < 0:
            raise ValueError("token rates must be non-negative")


@dataclass(frozen=True)
class CostReport:
    rows: tuple[tuple[str, float], ...]  # (stage, cost)
    total: float

    def to_json(self) -> dict[str, Any]:
        return {"per_stage": {s: c for s, c in self.rows}, "total": self.total}


def cost_report(ledger: UsageLedger, prices: PriceTable) -> CostReport:
    """Linear pricing: stage cost = prompt x rate + completion x rate."""
    rows = []
    total = 0.0
    for stage, usage in ledger.per_stage().items():
        cost = (
            usage.prompt_tokens * prices.prompt_rate
            + usage.completion_tokens * prices.completion_rate
        )
        rows.append((stage, cost))
        total += cost
    return CostReport(rows=tuple(rows), total=total)

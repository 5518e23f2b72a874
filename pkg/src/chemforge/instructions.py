"""Stage 1: diverse instruction generation with difficulty calibration.

Instructions are synthesized per (task, constraint, metadata) triple, scored
1-5 by a pluggable difficulty scorer, and regenerated with the scorer's
feedback until they hit the requested level or the round budget runs out.
"""

from __future__ import annotations

import ast
import hashlib
import itertools
import json
import logging
import re
from dataclasses import dataclass, replace
from importlib import resources
from typing import Any, Iterable, Iterator, Protocol, Sequence

import httpx

from . import prompts
from .gateway import Gateway

logger = logging.getLogger(__name__)

TASK_CATEGORIES = frozenset({"general_qa", "task_specific", "tool_usage", "reasoning"})

CONSTRAINT_CATEGORIES = frozenset(
    {
        "sentence_length",
        "language_style",
        "application_domain",
        "knowledge_level",
        "knowledge_source",
        "concreteness_extent",
        "problem_context",
        "problem_attribution",
        "specific_knowledge_usage",
        "quantitative_level",
    }
)

DEFAULT_BATCH_SIZE = 5


class GenerationParseError(Exception):
    """Model reply could not be parsed as a quoted-string list."""

    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


class ScorerUnavailable(Exception):
    """The difficulty scorer cannot be reached."""


@dataclass(frozen=True)
class Task:
    id: str
    description: str
    category: str = "general_qa"

    def __post_init__(self) -> None:
        if not self.description.strip():
            raise ValueError("task description must be non-empty")
        if self.category not in TASK_CATEGORIES:
            raise ValueError(f"unknown task category {self.category!r}")


@dataclass(frozen=True)
class Constraint:
    category: str
    text: str

    def __post_init__(self) -> None:
        if self.category not in CONSTRAINT_CATEGORIES:
            raise ValueError(f"unknown constraint category {self.category!r}")


@dataclass(frozen=True)
class Metadata:
    """Structured seed records conditioning generation (may be empty)."""

    records: tuple[Any, ...] = ()
    source: str = ""

    def payload(self) -> Any:
        if not self.records:
            return None
        return {"source": self.source, "records": list(self.records)}

    def digest(self) -> str:
        canonical = json.dumps(self.payload(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class DifficultyReport:
    score: int
    explanations: tuple[str, ...]
    flagged: bool = False

    def __post_init__(self) -> None:
        if self.score not in (1, 2, 3, 4, 5):
            raise ValueError(f"difficulty score {self.score} outside 1-5")


@dataclass(frozen=True)
class Instruction:
    text: str
    task_id: str
    constraint: Constraint
    metadata_digest: str
    difficulty: DifficultyReport | None = None
    calibration: str = ""

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("instruction text must be non-empty")


_FENCE_RE = re.compile(r"^```[a-zA-Z]*\n|\n?```$", re.MULTILINE)
_QUOTED_RE = re.compile(r'"((?:[^"\\]|\\.)+)"')


def parse_string_list(raw: str) -> list[str]:
    """Parse a bracketed, quoted string list with surrounding prose stripped."""
    text = _FENCE_RE.sub("", raw).strip()
    start, end = text.find("["), text.rfind("]")
    if start == -1 or end == -1 or end <= start:
        raise GenerationParseError("no bracketed list found", raw)
    snippet = text[start : end + 1]
    try:
        value = ast.literal_eval(snippet)
        if isinstance(value, (list, tuple)) and all(isinstance(v, str) for v in value):
            return [v for v in value]
    except (ValueError, SyntaxError):
        pass
    items = [m.group(1).replace('\\"', '"') for m in _QUOTED_RE.finditer(snippet)]
    if not items:
        raise GenerationParseError("bracketed list held no quoted strings", raw)
    return items


def complete_string_list(gateway: Gateway, req) -> list[str]:
    """One parse attempt plus one corrective re-prompt before failing."""
    reply = gateway.complete(req).text
    try:
        return parse_string_list(reply)
    except GenerationParseError:
        correction = replace(
            req,
            user_text=req.user_text
            + "\n\nThe previous reply could not be parsed. Return strictly a "
            'Python-style list of strings, e.g. ["first", "second"].',
        )
        retry = gateway.complete(correction).text
        return parse_string_list(retry)


def generate_instructions(
    task: Task,
    constraint: Constraint,
    metadata: Metadata,
    n: int,
    gateway: Gateway,
) -> list[Instruction]:
    """Synthesize up to n unique instructions for one (t, c, m) triple."""
    if n < 1:
        raise ValueError("n must be >= 1")
    req = prompts.render_synthesis(task.description, constraint.text, metadata.payload(), n)
    texts = complete_string_list(gateway, req)
    unique = list(dict.fromkeys(t.strip() for t in texts if t.strip()))[:n]
    if len(unique) < min(n, len(texts)):
        logger.warning(
            "instruction batch for task %s deduplicated %d -> %d",
            task.id,
            len(texts),
            len(unique),
        )
    return [
        Instruction(
            text=t,
            task_id=task.id,
            constraint=constraint,
            metadata_digest=metadata.digest(),
        )
        for t in unique
    ]


class DifficultyScorer(Protocol):
    def score(self, text: str) -> DifficultyReport: ...


def clamp_report(score: int, explanations: Sequence[str]) -> DifficultyReport:
    clamped = max(1, min(5, int(score)))
    return DifficultyReport(
        score=clamped,
        explanations=tuple(explanations) or ("no explanation provided",),
        flagged=clamped != score,
    )


class HeuristicScorer:
    """Transparent rubric: length, jargon-lexicon hits, quantitative markers.

    Each triggered aspect adds a point on top of a base score of 1; the
    result is clamped to 1-5. The rubric is deliberately simple so offline
    tests can recompute it by hand.
    """

    MATH_VERBS = frozenset(
        {"calculate", "compute", "determine", "estimate", "derive", "quantify", "solve"}
    )

    def __init__(self, lexicon: Iterable[str] | None = None):
        if lexicon is None:
            lexicon = load_difficulty_lexicon()
        self.lexicon = frozenset(term.lower() for term in lexicon)

    def score(self, text: str) -> DifficultyReport:
        words = text.split()
        lowered = text.lower()
        points = 0
        explanations: list[str] = []

        if len(words) >= 24:
            points += 2
            explanations.append(f"long, information-dense phrasing ({len(words)} words)")
        elif len(words) >= 12:
            points += 1
            explanations.append(f"moderately long phrasing ({len(words)} words)")

        hits = sorted(term for term in self.lexicon if term in lowered)
        if len(hits) >= 3:
            points += 2
            explanations.append("dense technical terminology: " + ", ".join(hits[:5]))
        elif hits:
            points += 1
            explanations.append("technical terminology: " + ", ".join(hits[:5]))

        if re.search(r"\d", text):
            points += 1
            explanations.append("quantitative values present")
        if any(verb in lowered for verb in self.MATH_VERBS):
            points += 1
            explanations.append("requires explicit computation")

        score = 1 + min(points, 4)
        if score == 1:
            explanations = ["short, common-sense phrasing without technical terminology"]
        return DifficultyReport(score=score, explanations=tuple(explanations))


class RemoteScorer:
    """Difficulty endpoint speaking JSON: {text} -> {score, explanations}."""

    def __init__(
        self,
        url: str,
        timeout: float = 30.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.url = url
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def score(self, text: str) -> DifficultyReport:
        try:
            resp = self._client.post(self.url, json={"text": text})
            resp.raise_for_status()
            data = resp.json()
        except (httpx.HTTPError, json.JSONDecodeError) as exc:
            raise ScorerUnavailable(f"difficulty endpoint failed: {exc}") from exc
        try:
            return clamp_report(int(data["score"]), [str(e) for e in data.get("explanations", [])])
        except (KeyError, TypeError, ValueError) as exc:
            raise ScorerUnavailable(f"malformed scorer reply: {data!r}") from exc


class ScriptedScorer:
    """Pops a queued (score, explanations) per call; for scripted tests."""

    def __init__(self, *reports: int | tuple[int, Sequence[str]]):
        self._queue = list(reports)
        self.calls = 0

    def score(self, text: str) -> DifficultyReport:
        if not self._queue:
            raise ScorerUnavailable("scripted scorer exhausted")
        item = self._queue.pop(0)
        self.calls += 1
        if isinstance(item, tuple):
            score, explanations = item
        else:
            score, explanations = item, (f"scripted difficulty {item}",)
        return clamp_report(score, explanations)


def score_difficulty(instruction: Instruction, scorer: DifficultyScorer) -> DifficultyReport:
    """Score 1-5 with explanations; scorers clamp out-of-range replies."""
    return scorer.score(instruction.text)


def calibrate_difficulty(
    instruction: Instruction,
    target: int,
    budget: int,
    gateway: Gateway,
    scorer: DifficultyScorer,
    task: Task,
    constraint: Constraint,
    metadata: Metadata,
    tolerance: int = 0,
) -> Instruction:
    """Score/regenerate until the difficulty target is met, within budget.

    ``budget`` caps the number of scored candidates (so regenerations are at
    most budget - 1). If no candidate hits the target the best |score -
    target| candidate is returned, earliest on ties, marked uncalibrated.
    """
    if target not in (1, 2, 3, 4, 5):
        raise ValueError(f"difficulty target {target} outside 1-5")
    if budget < 1:
        raise ValueError("budget must be >= 1")

    current = instruction
    best: Instruction | None = None
    best_delta = 10
    for round_index in range(budget):
        report = score_difficulty(current, scorer)
        scored = replace(current, difficulty=report)
        delta = abs(report.score - target)
        if delta <= tolerance:
            return replace(scored, calibration="calibrated")
        if delta < best_delta:
            best, best_delta = scored, delta
        if round_index + 1 < budget:
            req = prompts.render_synthesis(
                task.description,
                constraint.text,
                metadata.payload(),
                n=1,
                feedback=report.explanations,
            )
            texts = complete_string_list(gateway, req)
            current = replace(instruction, text=texts[0].strip())
    assert best is not None
    return replace(best, calibration="uncalibrated")


def enumerate_batches(
    tasks: Sequence[Task],
    constraints: Sequence[Constraint],
    metadata_set: Sequence[Metadata],
) -> Iterator[tuple[Task, Constraint, Metadata]]:
    """Full Cartesian iteration: task-major, then constraint, then metadata."""
    return itertools.product(tasks, constraints, metadata_set)


def load_difficulty_lexicon() -> frozenset[str]:
    text = resources.files("chemforge").joinpath("data/difficulty_lexicon.txt").read_text("utf-8")
    return frozenset(
        line.strip().lower() for line in text.splitlines() if line.strip() and not line.startswith("#")
    )


def load_constraint_catalog() -> dict[str, str]:
    """Category -> example text for the shipped ten constraint categories."""
    raw = resources.files("chemforge").joinpath("data/constraints.json").read_text("utf-8")
    catalog = {entry["category"]: entry["example"] for entry in json.loads(raw)}
    missing = CONSTRAINT_CATEGORIES - catalog.keys()
    if missing:
        raise ValueError(f"constraint catalog missing categories: {sorted(missing)}")
    return catalog

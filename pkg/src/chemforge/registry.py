"""Sub-tool pool: schema validation, loading, registration, and retrieval.

Each registered tool documents five components (operation description,
argument specification, return values, minimal working example, real-world
use case). Retrieval embeds ``name: description`` per tool, ranks by cosine
similarity against a query capability description, and optionally keeps a
candidate only after a model confirms it can serve the task.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from . import prompts
from .gateway import Gateway, InvalidRequest

SCHEMA_COMPONENTS = ("description", "parameters", "returns", "minimal_example", "use_case")
DEFAULT_TOP_K = 5


class RegistryError(Exception):
    """Base class for registry failures."""


class DuplicateName(RegistryError):
    def __init__(self, name: str, indices: Sequence[int]):
        super().__init__(f"duplicate tool name {name!r} at indices {list(indices)}")
        self.name = name
        self.indices = tuple(indices)


class MissingField(RegistryError):
    def __init__(self, field_name: str):
        super().__init__(f"missing required field {field_name!r}")
        self.field_name = field_name


class InvalidRegistry(RegistryError):
    """Aggregate of every invalid entry found while loading."""

    def __init__(self, problems: Sequence[str]):
        super().__init__("; ".join(problems))
        self.problems = tuple(problems)


@dataclass(frozen=True)
class ToolParam:
    name: str
    semantic_type: str
    required: bool = True
    description: str = ""


@dataclass(frozen=True)
class ToolSpec:
    name: str
    module_path: str
    description: str
    parameters: tuple[ToolParam, ...]
    returns: str
    minimal_example: str
    use_case: str
    documentation_url: str = ""
    origin: str = "builtin"

    def indexed_text(self) -> str:
        return f"{self.name}: {self.description}"


@dataclass(frozen=True)
class ToolDescription:
    """One expected capability, phrased as a single-function description."""

    text: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("tool description must be non-empty")


@dataclass(frozen=True)
class ToolRegistry:
    specs: tuple[ToolSpec, ...]
    version: str = "1"

    def __post_init__(self) -> None:
        seen: dict[str, int] = {}
        for i, spec in enumerate(self.specs):
            if spec.name in seen:
                raise DuplicateName(spec.name, [seen[spec.name], i])
            seen[spec.name] = i

    def get(self, name: str) -> ToolSpec:
        for spec in self.specs:
            if spec.name == name:
                return spec
        raise KeyError(name)


@dataclass(frozen=True)
class ValidationReport:
    spec_name: str
    issues: tuple[str, ...]

    @property
    def valid(self) -> bool:
        return not self.issues


@dataclass(frozen=True)
class ToolCandidate:
    spec: ToolSpec
    similarity: float
    matched_description: ToolDescription
    flagged: bool = False


def validate_spec(spec: ToolSpec) -> ValidationReport:
    """Check that all five schema components are present and well-formed."""
    issues: list[str] = []
    if not spec.description.strip():
        issues.append("missing high-level operation description")
    if not spec.returns.strip():
        issues.append("missing expected return values")
    if not spec.minimal_example.strip():
        issues.append("missing minimal working example")
    if not spec.use_case.strip():
        issues.append("missing real-world use case")
    for i, param in enumerate(spec.parameters):
        if not param.name.strip():
            issues.append(f"parameter {i} has no name")
        if not param.semantic_type.strip():
            issues.append(f"parameter {i} ({param.name!r}) has no semantic type")
    return ValidationReport(spec.name, tuple(issues))


def _parse_parameters(raw: Any) -> tuple[ToolParam, ...]:
    # Accepts both the list form shipped in the builtin registry and the
    # name -> description mapping used by runtime custom-tool records.
    if raw is None:
        return ()
    if isinstance(raw, Mapping):
        return tuple(
            ToolParam(name=str(k), semantic_type=str(v), required=True, description=str(v))
            for k, v in raw.items()
        )
    params = []
    for entry in raw:
        params.append(
            ToolParam(
                name=str(entry.get("name", "")),
                semantic_type=str(entry.get("type", "")),
                required=bool(entry.get("required", True)),
                description=str(entry.get("description", "")),
            )
        )
    return tuple(params)


def _spec_from_record(record: Mapping[str, Any], origin: str | None = None) -> ToolSpec:
    return ToolSpec(
        name=str(record.get("tool", "")),
        module_path=str(record.get("module", "")),
        description=str(record.get("description", "")),
        parameters=_parse_parameters(record.get("parameters")),
        returns=str(record.get("returns", "")),
        minimal_example=str(record.get("minimal_example", "")),
        use_case=str(record.get("use_case", "")),
        documentation_url=str(record.get("documentation", "")),
        origin=origin if origin is not None else str(record.get("origin", "builtin")),
    )


def _record_from_spec(spec: ToolSpec) -> dict[str, Any]:
    return {
        "tool": spec.name,
        "module": spec.module_path,
        "description": spec.description,
        "parameters": [
            {
                "name": p.name,
                "type": p.semantic_type,
                "required": p.required,
                "description": p.description,
            }
            for p in spec.parameters
        ],
        "returns": spec.returns,
        "minimal_example": spec.minimal_example,
        "use_case": spec.use_case,
        "documentation": spec.documentation_url,
        "origin": spec.origin,
    }


def load_registry(path: str | Path) -> ToolRegistry:
    """Load and validate a registry document; aggregates all entry problems."""
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidRegistry([f"cannot parse {path}: {exc}"]) from exc

    if isinstance(document, Mapping):
        version = str(document.get("version", "1"))
        records = document.get("tools", [])
    else:
        version = "1"
        records = document
    if not isinstance(records, list):
        raise InvalidRegistry([f"{path}: top level must be a list of tool records"])

    problems: list[str] = []
    specs: list[ToolSpec] = []
    names: dict[str, int] = {}
    for i, record in enumerate(records):
        spec = _spec_from_record(record)
        if not spec.name:
            problems.append(f"entry {i}: missing tool name")
            continue
        if spec.name in names:
            problems.append(
                f"entry {i}: duplicate tool name {spec.name!r} (first at {names[spec.name]})"
            )
            continue
        names[spec.name] = i
        report = validate_spec(spec)
        if not report.valid:
            problems.append(f"entry {i} ({spec.name}): " + "; ".join(report.issues))
            continue
        specs.append(spec)
    if problems:
        raise InvalidRegistry(problems)
    return ToolRegistry(specs=tuple(specs), version=version)


def save_registry(registry: ToolRegistry, path: str | Path) -> None:
    document = {
        "version": registry.version,
        "tools": [_record_from_spec(s) for s in registry.specs],
    }
    Path(path).write_text(
        json.dumps(document, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def builtin_registry_path() -> Path:
    return Path(str(resources.files("chemforge").joinpath("data/registry.json")))


def load_builtin_registry() -> ToolRegistry:
    return load_registry(builtin_registry_path())


def register_custom_tool(registry: ToolRegistry, entry: Mapping[str, Any]) -> ToolRegistry:
    """Append a runtime custom-tool record; returns a new registry.

    The record must carry tool, module, description, parameters, and
    documentation. The remaining schema components may be given explicitly;
    otherwise serviceable defaults are derived so the entry still satisfies
    the five-component validation.
    """
    for required in ("tool", "module", "description", "parameters", "documentation"):
        if required not in entry or entry[required] in ("", None):
            raise MissingField(required)

    name = str(entry["tool"])
    for i, spec in enumerate(registry.specs):
        if spec.name == name:
            raise DuplicateName(name, [i, len(registry.specs)])

    params = _parse_parameters(entry["parameters"])
    module = str(entry["module"])
    returns = str(entry.get("returns", "")) or f"See documentation: {entry['documentation']}"
    minimal_example = str(entry.get("minimal_example", "")) or _example_skeleton(
        module, name, params
    )
    use_case = str(entry.get("use_case", "")) or str(entry["description"])

    spec = ToolSpec(
        name=name,
        module_path=module,
        description=str(entry["description"]),
        parameters=params,
        returns=returns,
        minimal_example=minimal_example,
        use_case=use_case,
        documentation_url=str(entry["documentation"]),
        origin="custom",
    )
    report = validate_spec(spec)
    if not report.valid:
        raise InvalidRegistry([f"custom entry {name}: " + "; ".join(report.issues)])
    return ToolRegistry(specs=registry.specs + (spec,), version=registry.version)


def _example_skeleton(module: str, name: str, params: tuple[ToolParam, ...]) -> str:
    args = ", ".join(f"{p.name}={p.name}" for p in params)
    binds = "\n".join(f"{p.name} = ...  # {p.semantic_type}" for p in params)
    lines = [f"import {module}", binds, f"result = {module}.{name}({args})", "print(result)"]
    return "\n".join(line for line in lines if line)


Embedder = Callable[[Sequence[str]], "list[np.ndarray]"]


@dataclass(frozen=True, eq=False)
class ToolIndex:
    """Immutable embedding index over a registry; shareable across workers."""

    registry: ToolRegistry
    vectors: tuple[np.ndarray, ...] = field(repr=False)
    embedder: Embedder = field(repr=False)

    @property
    def matrix(self) -> np.ndarray:
        return np.vstack(self.vectors)


def build_index(registry: ToolRegistry, embedder: Embedder) -> ToolIndex:
    if not registry.specs:
        raise InvalidRegistry(["cannot index an empty registry"])
    texts = [spec.indexed_text() for spec in registry.specs]
    try:
        vectors = embedder(texts)
    except Exception as exc:
        raise RegistryError(f"embedding registry failed ({texts[0]!r}...): {exc}") from exc
    if len(vectors) != len(registry.specs):
        raise RegistryError(
            f"embedder returned {len(vectors)} vectors for {len(registry.specs)} specs"
        )
    return ToolIndex(registry=registry, vectors=tuple(vectors), embedder=embedder)


# Similarities are quantized before ranking so mathematically-tied cosines
# compare equal regardless of summation order, making tie order reproducible
# across numerically different but equivalent implementations.
SIMILARITY_DECIMALS = 12


def retrieve(index: ToolIndex, query: ToolDescription, k: int = DEFAULT_TOP_K) -> list[ToolCandidate]:
    """Top-k specs by cosine similarity; ties resolved by registry order."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not query.text.strip():
        raise InvalidRequest("empty retrieval query")
    matrix = index.matrix
    qvec = index.embedder([query.text])[0]
    norms = np.linalg.norm(matrix, axis=1) * np.linalg.norm(qvec)
    sims = np.round((matrix @ qvec) / np.where(norms == 0.0, 1.0, norms), SIMILARITY_DECIMALS)
    # Stable argsort on the negated similarities keeps registry order on ties.
    order = np.argsort(-sims, kind="stable")[:k]
    return [
        ToolCandidate(
            spec=index.registry.specs[i], similarity=float(sims[i]), matched_description=query
        )
        for i in order
    ]


def confirm_candidates(
    task_text: str,
    candidates: Sequence[ToolCandidate],
    gateway: Gateway,
    metadata_payload: Any = None,
) -> list[ToolCandidate]:
    """Keep each candidate the model confirms; drop explicit "no" replies.

    Replies that are neither the candidate's index nor "no" keep the
    candidate conservatively, flagged; distillation prunes false positives
    downstream.
    """
    if not candidates:
        raise ValueError("confirm_candidates requires a non-empty candidate list")
    kept: list[ToolCandidate] = []
    for i, candidate in enumerate(candidates):
        req = prompts.render_confirm(
            task_text, i, candidate.spec.name, candidate.spec.description, metadata_payload
        )
        reply = gateway.complete(req).text.strip()
        if reply.lower() == "no":
            continue
        try:
            confirmed = int(reply) == i
        except ValueError:
            confirmed = False
            kept.append(dataclasses.replace(candidate, flagged=True))
            continue
        if confirmed:
            kept.append(candidate)
        else:
            kept.append(dataclasses.replace(candidate, flagged=True))
    return kept

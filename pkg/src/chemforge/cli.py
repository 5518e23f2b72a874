"""Operator command line: generate, registry, analyze, replay, judge.

Exit codes: 0 success; 1 operation failure (invalid specs, replay diff,
empty dataset); 3 configuration error (missing or malformed inputs);
4 backend error (archive or credentials unavailable); 5 zero-output run.
Progress and summaries go to stderr; dataset bytes only to the output path.
"""

from __future__ import annotations

import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import click

from . import analytics
from .backends import FixtureBackend, HttpBackend, MockEmbedder
from .gateway import Gateway, UsageLedger, usage_report
from .instructions import (
    Constraint,
    HeuristicScorer,
    Instruction,
    Metadata,
    RemoteScorer,
    ScorerUnavailable,
    Task,
    calibrate_difficulty,
    enumerate_batches,
    generate_instructions,
)
from .pipeline import InstructionResponsePair, Pipeline, PipelineConfig
from .registry import (
    InvalidRegistry,
    RegistryError,
    build_index,
    load_builtin_registry,
    load_registry,
    register_custom_tool,
    save_registry,
)
from .sandbox import SandboxLimits, ScriptRunner
from .search import DisabledSearch, FixtureSearch, HttpSearch

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 3
EXIT_BACKEND = 4
EXIT_ZERO_OUTPUT = 5


class ConfigError(Exception):
    pass


class BackendError(Exception):
    pass


@dataclass
class RunManifest:
    tasks: Path
    constraints: Path
    output: Path
    metadata: Path | None = None
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    backend: str = "fixture"
    archive: Path | None = None
    live: dict[str, Any] = field(default_factory=dict)
    search: dict[str, Any] = field(default_factory=lambda: {"mode": "disabled"})
    registry: Path | None = None
    difficulty_target: int | None = None
    difficulty_budget: int = 3
    scorer: Any = "heuristic"
    instructions_per_triple: int = 5
    workers: int = 1
    sandbox: SandboxLimits = field(default_factory=SandboxLimits)
    scratch_root: Path | None = None

    @classmethod
    def load(cls, path: str | Path, overrides: Mapping[str, Any] | None = None) -> "RunManifest":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read manifest {path}: {exc}") from exc
        if overrides:
            data.update({k: v for k, v in overrides.items() if v is not None})
        base = path.parent

        def resolve(key: str, required: bool = False) -> Path | None:
            value = data.get(key)
            if value is None:
                if required:
                    raise ConfigError(f"manifest field {key!r} is required")
                return None
            return (base / value).resolve() if not os.path.isabs(str(value)) else Path(value)

        pipeline_value = data.get("pipeline", {})
        if isinstance(pipeline_value, str):
            pipeline_cfg = PipelineConfig.from_file(base / pipeline_value)
        else:
            try:
                pipeline_cfg = PipelineConfig.from_mapping(pipeline_value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid pipeline config: {exc}") from exc

        sandbox_value = data.get("sandbox", {})
        try:
            sandbox = SandboxLimits(**sandbox_value)
        except TypeError as exc:
            raise ConfigError(f"invalid sandbox limits: {exc}") from exc

        manifest = cls(
            tasks=resolve("tasks", required=True),
            constraints=resolve("constraints", required=True),
            output=resolve("output", required=True),
            metadata=resolve("metadata"),
            pipeline=pipeline_cfg,
            backend=data.get("backend", "fixture"),
            archive=resolve("archive"),
            live=data.get("live", {}),
            search=data.get("search", {"mode": "disabled"}),
            registry=resolve("registry"),
            difficulty_target=data.get("difficulty_target"),
            difficulty_budget=int(data.get("difficulty_budget", 3)),
            scorer=data.get("scorer", "heuristic"),
            instructions_per_triple=int(data.get("instructions_per_triple", 5)),
            workers=int(data.get("workers", 1)),
            sandbox=sandbox,
            scratch_root=resolve("scratch_root"),
        )
        manifest.validate()
        return manifest

    def validate(self) -> None:
        for label, p in (("tasks", self.tasks), ("constraints", self.constraints)):
            if not p.exists():
                raise ConfigError(f"{label} file does not exist: {p}")
        if self.metadata is not None and not self.metadata.exists():
            raise ConfigError(f"metadata file does not exist: {self.metadata}")
        if self.registry is not None and not self.registry.exists():
            raise ConfigError(f"registry file does not exist: {self.registry}")
        if self.backend not in ("fixture", "live"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.difficulty_target is not None and self.difficulty_target not in (1, 2, 3, 4, 5):
            raise ConfigError(f"difficulty target {self.difficulty_target} outside 1-5")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


def _load_tasks(path: Path) -> list[Task]:
    try:
        rows = json.loads(path.read_text(encoding="utf-8"))
        return [Task(**row) for row in rows]
    except (json.JSONDecodeError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid tasks file {path}: {exc}") from exc


def _load_constraints(path: Path) -> list[Constraint]:
    try:
        rows = json.loads(path.read_text(encoding="utf-8"))
        return [Constraint(**row) for row in rows]
    except (json.JSONDecodeError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid constraints file {path}: {exc}") from exc


def _load_metadata(path: Path | None) -> list[Metadata]:
    if path is None:
        return [Metadata()]
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"invalid metadata file {path}: {exc}") from exc
    entries = data if isinstance(data, list) else [data]
    out = []
    for entry in entries:
        if isinstance(entry, Mapping) and "records" in entry:
            out.append(Metadata(records=tuple(entry["records"]), source=str(entry.get("source", ""))))
        else:
            out.append(Metadata(records=(entry,), source=str(path)))
    return out or [Metadata()]


def _build_backend(manifest: RunManifest):
    if manifest.backend == "fixture":
        if manifest.archive is None or not manifest.archive.exists():
            raise BackendError(f"fixture archive not found: {manifest.archive}")
        return FixtureBackend(manifest.archive)
    live = manifest.live
    for required in ("base_url", "model", "embed_model"):
        if required not in live:
            raise BackendError(f"live backend config missing {required!r}")
    key_env = live.get("api_key_env", "CHEMFORGE_API_KEY")
    if not os.environ.get(key_env):
        raise BackendError(f"live backend requires credentials in ${key_env}")
    return HttpBackend(
        live["base_url"], live["model"], live["embed_model"], api_key_env=key_env
    )


def _build_search(manifest: RunManifest):
    mode = manifest.search.get("mode", "disabled")
    if mode == "disabled":
        return DisabledSearch()
    if mode == "fixture":
        results = manifest.search.get("results")
        if results is None:
            raise ConfigError("fixture search requires a results file")
        base = manifest.tasks.parent
        results_path = Path(results)
        if not results_path.is_absolute():
            results_path = (base / results_path).resolve()
        return FixtureSearch(results_path)
    if mode == "http":
        return HttpSearch(manifest.search["url"])
    raise ConfigError(f"unknown search mode {mode!r}")


def _build_scorer(manifest: RunManifest):
    if manifest.scorer == "heuristic":
        return HeuristicScorer()
    if isinstance(manifest.scorer, Mapping) and "url" in manifest.scorer:
        return RemoteScorer(manifest.scorer["url"])
    raise ConfigError(f"unknown scorer config {manifest.scorer!r}")


@dataclass
class GenerationRun:
    pairs: list[InstructionResponsePair]
    instructions: int
    emitted: int
    aborted: int
    gateway: Gateway


def run_generation(manifest: RunManifest, echo=lambda msg: None) -> GenerationRun:
    """Drive instruction generation and response construction end to end."""
    backend = _build_backend(manifest)
    gateway = Gateway(backend)
    registry = (
        load_registry(manifest.registry) if manifest.registry else load_builtin_registry()
    )
    if manifest.backend == "fixture":
        index = build_index(registry, MockEmbedder().embed)
    else:
        index = build_index(registry, gateway.embed)
    search = _build_search(manifest)
    scratch = manifest.scratch_root or Path(tempfile.mkdtemp(prefix="chemforge-scratch-"))
    runner = ScriptRunner(scratch, manifest.sandbox)
    pipeline = Pipeline(gateway, index, search, runner, manifest.pipeline)
    scorer = _build_scorer(manifest)

    tasks = _load_tasks(manifest.tasks)
    constraints = _load_constraints(manifest.constraints)
    metadata_set = _load_metadata(manifest.metadata)

    work: list[tuple[Instruction, Metadata]] = []
    for task, constraint, metadata in enumerate_batches(tasks, constraints, metadata_set):
        instructions = generate_instructions(
            task, constraint, metadata, manifest.instructions_per_triple, gateway
        )
        for instruction in instructions:
            if manifest.difficulty_target is not None:
                try:
                    instruction = calibrate_difficulty(
                        instruction,
                        manifest.difficulty_target,
                        manifest.difficulty_budget,
                        gateway,
                        scorer,
                        task,
                        constraint,
                        metadata,
                    )
                except ScorerUnavailable as exc:
                    echo(f"warning: scorer unavailable, proceeding uncalibrated: {exc}")
            work.append((instruction, metadata))
    echo(f"generated {len(work)} instruction(s)")

    def run_one(item: tuple[Instruction, Metadata]) -> InstructionResponsePair:
        instruction, metadata = item
        try:
            return pipeline.generate_pair(instruction, metadata)
        except Exception as exc:  # backend faults become structured failures
            return InstructionResponsePair(
                instruction=instruction,
                response=None,
                tool_trace=(),
                usage={},
                failure=f"pipeline error: {exc}",
            )

    pairs: list[InstructionResponsePair] = []
    aborted = 0
    if manifest.workers == 1:
        try:
            for i, item in enumerate(work):
                pairs.append(run_one(item))
                echo(f"pair {i + 1}/{len(work)} done")
        except KeyboardInterrupt:
            aborted = len(work) - len(pairs)
            echo(f"interrupted; {aborted} pair(s) aborted")
    else:
        with ThreadPoolExecutor(max_workers=manifest.workers) as pool:
            try:
                pairs = list(pool.map(run_one, work))
            except KeyboardInterrupt:
                pool.shutdown(cancel_futures=True)
                aborted = len(work) - len(pairs)
                echo(f"interrupted; {aborted} pair(s) aborted")

    succeeded = [p for p in pairs if p.ok]
    emitted = analytics.emit_pairs(succeeded, manifest.output)
    return GenerationRun(
        pairs=pairs,
        instructions=len(work),
        emitted=emitted,
        aborted=aborted,
        gateway=gateway,
    )


def _summary(run: GenerationRun, echo) -> None:
    failures = [p for p in run.pairs if not p.ok]
    echo(f"instructions: {run.instructions}")
    echo(f"pairs emitted: {run.emitted}")
    echo(f"failures: {len(failures)}")
    if run.aborted:
        echo(f"aborted: {run.aborted}")
    for failure in failures:
        echo(f"  failed: {failure.instruction.text[:60]!r}: {failure.failure}")
    echo("token usage per stage:")
    for row in usage_report(run.gateway.ledger):
        echo(f"  {row.stage}: prompt={row.prompt_tokens} completion={row.completion_tokens}")


def _err(msg: str) -> None:
    click.echo(msg, err=True)


@click.group()
def main() -> None:
    """Synthesize tool-grounded instruction-response pairs for chemistry."""


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--output", type=click.Path(), default=None, help="Override output path.")
@click.option("--workers", type=int, default=None, help="Override worker bound.")
@click.option("--backend", type=click.Choice(["fixture", "live"]), default=None)
def generate(manifest_path, output, workers, backend) -> None:
    """Run the full two-stage generation pipeline from a manifest."""
    try:
        manifest = RunManifest.load(
            manifest_path, {"output": output, "workers": workers, "backend": backend}
        )
    except ConfigError as exc:
        _err(f"config error: {exc}")
        sys.exit(EXIT_CONFIG)
    try:
        run = run_generation(manifest, echo=_err)
    except BackendError as exc:
        _err(f"backend error: {exc}")
        sys.exit(EXIT_BACKEND)
    except ConfigError as exc:
        _err(f"config error: {exc}")
        sys.exit(EXIT_CONFIG)
    _summary(run, _err)
    if run.emitted == 0:
        _err("zero pairs emitted")
        sys.exit(EXIT_ZERO_OUTPUT)
    sys.exit(EXIT_OK)


@main.group()
def registry() -> None:
    """Validate or extend a tool registry file."""


@registry.command()
@click.argument("path", type=click.Path())
def validate(path) -> None:
    """Validate every spec in a registry file."""
    if not Path(path).exists():
        _err(f"config error: registry file not found: {path}")
        sys.exit(EXIT_CONFIG)
    try:
        reg = load_registry(path)
    except InvalidRegistry as exc:
        for problem in exc.problems:
            _err(f"invalid: {problem}")
        sys.exit(EXIT_FAILURE)
    for spec in reg.specs:
        _err(f"ok: {spec.name}")
    click.echo(f"{len(reg.specs)} specs valid")
    sys.exit(EXIT_OK)


@registry.command()
@click.argument("path", type=click.Path())
@click.option("--record", "record_path", required=True, type=click.Path(),
              help="JSON file holding one custom tool record.")
@click.option("--output", type=click.Path(), default=None,
              help="Write here instead of rewriting the registry in place.")
def add(path, record_path, output) -> None:
    """Append a custom tool record and rewrite the registry."""
    for p in (path, record_path):
        if not Path(p).exists():
            _err(f"config error: file not found: {p}")
            sys.exit(EXIT_CONFIG)
    try:
        reg = load_registry(path)
        record = json.loads(Path(record_path).read_text(encoding="utf-8"))
        if isinstance(record, list):
            for entry in record:
                reg = register_custom_tool(reg, entry)
        else:
            reg = register_custom_tool(reg, record)
        save_registry(reg, output or path)
    except (RegistryError, json.JSONDecodeError) as exc:
        _err(f"registration failed: {exc}")
        sys.exit(EXIT_FAILURE)
    click.echo(f"registry now holds {len(reg.specs)} specs")
    sys.exit(EXIT_OK)


@main.command()
@click.argument("dataset", type=click.Path())
@click.option("--stats/--no-stats", default=True)
@click.option("--diversity", is_flag=True, default=False)
@click.option("--cost", is_flag=True, default=False)
@click.option("--prompt-rate", type=float, default=0.0)
@click.option("--completion-rate", type=float, default=0.0)
@click.option("--out-dir", type=click.Path(), default=None)
def analyze(dataset, stats, diversity, cost, prompt_rate, completion_rate, out_dir) -> None:
    """Compute corpus statistics, diversity metrics, and cost reports."""
    dataset_path = Path(dataset)
    if not dataset_path.exists():
        _err(f"config error: dataset not found: {dataset}")
        sys.exit(EXIT_CONFIG)
    pairs, warnings = analytics.load_pairs(dataset_path, skip_corrupt=True)
    for warning in warnings:
        _err(f"warning: corrupt record skipped: {warning}")
    if not pairs:
        _err("error: dataset holds no readable pairs")
        sys.exit(EXIT_FAILURE)
    out_base = Path(out_dir) if out_dir else dataset_path.parent
    out_base.mkdir(parents=True, exist_ok=True)

    written = []
    errors = []
    if stats:
        report = analytics.corpus_stats(pairs)
        path = out_base / "stats.json"
        path.write_text(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")
        written.append(path)
    if cost:
        ledger = UsageLedger()
        for pair in pairs:
            for stage, usage in pair.usage.items():
                ledger.add(stage, usage["prompt_tokens"], usage["completion_tokens"])
        report = analytics.cost_report(
            ledger, analytics.PriceTable(prompt_rate, completion_rate)
        )
        path = out_base / "cost.json"
        path.write_text(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")
        written.append(path)
    if diversity:
        if len(pairs) < 2:
            errors.append("diversity metrics need at least two pairs")
        else:
            embedder = MockEmbedder()
            vectors = [embedder.embed_one(p.instruction.text) for p in pairs]
            report = analytics.diversity_report(vectors, embedder_id="hash-bag-256")
            path = out_base / "diversity.json"
            path.write_text(json.dumps(report.__dict__, indent=2, sort_keys=True) + "\n")
            written.append(path)

    _err(f"pairs: {len(pairs)}; warnings: {len(warnings)}")
    for path in written:
        click.echo(str(path))
    if errors:
        for message in errors:
            _err(f"error: {message}")
        sys.exit(EXIT_FAILURE)
    sys.exit(EXIT_OK)


@main.command()
@click.argument("golden", type=click.Path())
def replay(golden) -> None:
    """Re-run a recorded scenario against fixtures and diff the trace."""
    golden_path = Path(golden)
    if not golden_path.exists():
        _err(f"config error: golden trace not found: {golden}")
        sys.exit(EXIT_CONFIG)
    try:
        document = json.loads(golden_path.read_text(encoding="utf-8"))
        replay_output = Path(tempfile.mkdtemp(prefix="chemforge-replay-")) / "dataset.jsonl"
        manifest = RunManifest.load(
            golden_path.parent / document["manifest"], {"output": str(replay_output)}
        )
    except (json.JSONDecodeError, KeyError) as exc:
        _err(f"config error: malformed golden trace: {exc}")
        sys.exit(EXIT_CONFIG)
    except ConfigError as exc:
        _err(f"config error: {exc}")
        sys.exit(EXIT_CONFIG)
    try:
        run = run_generation(manifest)
    except BackendError as exc:
        _err(f"backend error: {exc}")
        sys.exit(EXIT_BACKEND)
    if not run.pairs:
        _err("replay produced no pairs")
        sys.exit(EXIT_FAILURE)
    got = list(run.pairs[0].tool_trace)
    expected = document["trace"]
    for i, (g, e) in enumerate(zip(got, expected)):
        if g != e:
            _err(f"divergence at stage {i} ({e.get('stage', '?')}):")
            _err(f"  expected: {json.dumps(e, sort_keys=True)}")
            _err(f"  got:      {json.dumps(g, sort_keys=True)}")
            sys.exit(EXIT_FAILURE)
    if len(got) != len(expected):
        _err(f"trace length mismatch: expected {len(expected)}, got {len(got)}")
        sys.exit(EXIT_FAILURE)
    click.echo("replay identical")
    sys.exit(EXIT_OK)


@main.command()
@click.option("--dataset", "dataset_path", required=True, type=click.Path(),
              help="JSONL rows with question, predicted, reference fields.")
@click.option("--mode", type=click.Choice(["binary", "score10"]), default="binary")
@click.option("--archive", type=click.Path(), required=True,
              help="Fixture archive directory serving judge replies.")
@click.option("--output", type=click.Path(), required=True)
def judge(dataset_path, mode, archive, output) -> None:
    """Judge predicted answers against references with fixture replies."""
    if not Path(dataset_path).exists():
        _err(f"config error: dataset not found: {dataset_path}")
        sys.exit(EXIT_CONFIG)
    if not Path(archive).exists():
        _err(f"backend error: archive not found: {archive}")
        sys.exit(EXIT_BACKEND)
    gateway = Gateway(FixtureBackend(archive))
    verdicts = []
    unscorable = 0
    with open(dataset_path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            try:
                verdict = analytics.judge(
                    row["question"], row["predicted"], row["reference"], mode, gateway
                )
                verdicts.append(
                    {"question": row["question"], "verdict": verdict.verdict,
                     "rationale": verdict.rationale}
                )
            except analytics.Unscorable as exc:
                unscorable += 1
                verdicts.append({"question": row["question"], "verdict": None,
                                 "error": str(exc)})
    Path(output).write_text(
        "".join(json.dumps(v, sort_keys=True, ensure_ascii=False) + "\n" for v in verdicts)
    )
    _err(f"judged {len(verdicts)} rows; unscorable: {unscorable}")
    sys.exit(EXIT_OK if verdicts else EXIT_FAILURE)


if __name__ == "__main__":
    main()

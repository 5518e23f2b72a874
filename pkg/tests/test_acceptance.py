"""Acceptance gate: offline, fixture-backed checks with printed verdicts.

Each criterion is one test that ends by printing an ACCEPTANCE line; a
failing criterion surfaces as a normal pytest failure. Run with -s (or
-rA) to see the verdict lines.
"""

from __future__ import annotations

import itertools
import json
import math
import random
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from chemforge.analytics import PriceTable, aps, cost_report, remote_clique, tools_invoked
from chemforge.backends import FixtureBackend, MockEmbedder, ScriptedBackend
from chemforge.cli import RunManifest, run_generation
from chemforge.gateway import Gateway, UsageLedger, usage_report
from chemforge.instructions import (
    Constraint,
    Instruction,
    Metadata,
    ScriptedScorer,
    Task,
    calibrate_difficulty,
)
from chemforge.pipeline import (
    Pipeline,
    PipelineConfig,
    ReasoningPlan,
    canonical_trace,
)
from chemforge.registry import (
    ToolDescription,
    ToolParam,
    ToolRegistry,
    ToolSpec,
    build_index,
    load_builtin_registry,
    retrieve,
)
from chemforge.sandbox import (
    ExecutionRecord,
    SandboxLimits,
    ScriptRunner,
    ToolExecutor,
)
from chemforge.search import DisabledSearch, FixtureSearch

from conftest import brute_force_retrieve

REPO_ROOT = Path(__file__).resolve().parent.parent
LIPINSKI_DIR = REPO_ROOT / "fixtures" / "lipinski"

TASK = Task(id="t", description="demo", category="general_qa")
CONSTRAINT = Constraint(category="problem_context", text="demo")
META = Metadata()


def _instruction(text="Run the diagnostics suite and report.") -> Instruction:
    return Instruction(
        text=text, task_id="t", constraint=CONSTRAINT, metadata_digest=META.digest()
    )


def _passed(n: int, label: str, extra: str = "") -> None:
    suffix = f" ({extra})" if extra else ""
    print(f"ACCEPTANCE {n} ({label}): PASS{suffix}")


# ---------------------------------------------------------------------------
# Criterion 1: golden-trace replay, byte-identical across 3 runs, < 10 s


def test_criterion_1_golden_trace_replay(tmp_path):
    golden = json.loads((LIPINSKI_DIR / "golden.json").read_text())
    expected = canonical_trace(golden["trace"])
    expected_stages = [r["stage"] for r in golden["trace"]]
    assert expected_stages[:4] == ["decompose", "plan_tools", "retrieve", "distill"]
    assert expected_stages[-3:] == ["sufficiency", "web_fallback", "assemble"]
    assert expected_stages.count("execute") >= 1

    started = time.monotonic()
    traces = []
    for i in range(3):
        manifest = RunManifest.load(
            LIPINSKI_DIR / "manifest.json",
            {"output": str(tmp_path / f"run{i}.jsonl")},
        )
        run = run_generation(manifest)
        assert run.emitted == 1
        traces.append(canonical_trace(run.pairs[0].tool_trace))
    elapsed = time.monotonic() - started

    assert traces[0] == traces[1] == traces[2] == expected
    assert elapsed < 10.0, f"replay took {elapsed:.2f}s"
    _passed(1, "golden-trace replay", f"3 runs in {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# Criterion 2: retrieval equals brute-force cosine scan on 500 random cases


WORDS = [
    "molecule", "weight", "compute", "predict", "lookup", "search", "ring",
    "bond", "atom", "acid", "base", "energy", "reaction", "solvent", "polar",
    "structure", "canonical", "formula", "chart", "viewer", "count", "estimate",
    "spectrum", "mass", "charge", "donor", "acceptor", "partition", "profile",
]


def _random_spec(name: str, description: str) -> ToolSpec:
    return ToolSpec(
        name=name,
        module_path="m",
        description=description,
        parameters=(ToolParam("x", "text"),),
        returns="r",
        minimal_example="e",
        use_case="u",
    )


def test_criterion_2_retrieval_oracle_equivalence():
    rng = random.Random(20240817)
    embedder = MockEmbedder()
    started = time.monotonic()
    for case in range(500):
        n = rng.randint(1, 200)
        descriptions = [
            " ".join(rng.choices(WORDS, k=rng.randint(2, 8))) for _ in range(n)
        ]
        # Force exact ties in roughly half the cases.
        if n >= 2 and rng.random() < 0.5:
            for _ in range(rng.randint(1, 3)):
                descriptions[rng.randrange(n)] = descriptions[rng.randrange(n)]
        query = " ".join(rng.choices(WORDS, k=rng.randint(1, 6)))
        k = rng.randint(1, 10)

        registry = ToolRegistry(
            specs=tuple(
                _random_spec(f"tool_{i:03d}", d) for i, d in enumerate(descriptions)
            )
        )
        index = build_index(registry, embedder.embed)
        got = [c.spec.name for c in retrieve(index, ToolDescription(query), k)]
        expected = [
            f"tool_{i:03d}"
            for i in brute_force_retrieve(
                [s.indexed_text() for s in registry.specs], query, k
            )
        ]
        assert got == expected, f"case {case}: {got} != {expected}"
    elapsed = time.monotonic() - started
    assert elapsed < 30.0, f"sweep took {elapsed:.2f}s"
    _passed(2, "retrieval oracle equivalence", f"500 cases in {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# Criterion 3: 1000 randomized reply streams never violate the budgets


class FakeRunner:
    """Runner double: scripted pass/fail outcomes without subprocesses."""

    def __init__(self, rng: random.Random, fail_probability: float):
        self.rng = rng
        self.fail_probability = fail_probability

    def new_scratch(self, label: str) -> Path:
        return Path(tempfile.gettempdir())

    def execute(self, script, scratch) -> ExecutionRecord:
        if self.rng.random() < self.fail_probability:
            return ExecutionRecord("error", "", "RuntimeError: scripted fault", 0.01)
        return ExecutionRecord("ok", "scripted output 42", "", 0.01)


def _random_reply(rng: random.Random) -> str:
    roll = rng.random()
    if roll < 0.4:
        return "no"
    if roll < 0.7:
        return str(rng.randint(-3, 9))
    return rng.choice(["hmm", "", "maybe index 2?"])


def test_criterion_3_budget_safety_sweep(tmp_path):
    rng = random.Random(99)
    registry = load_builtin_registry()
    index = build_index(registry, MockEmbedder().embed)
    violations = 0

    # 400 distillation streams against the App-default budget tau = 5.
    for _ in range(400):
        backend = ScriptedBackend()
        backend.push("distill", *[_random_reply(rng) for _ in range(40)])
        pipeline = Pipeline(
            Gateway(backend), index, DisabledSearch(),
            ScriptRunner(tmp_path / "unused", SandboxLimits()), PipelineConfig(),
        )
        pool = retrieve(index, ToolDescription("compound structure value"), rng.randint(1, 8))
        plan = ReasoningPlan(steps=("s",), instruction_digest="d")
        toolset = pipeline.distill(pool, _instruction(), plan, META)
        if len(toolset.specs) > 5:
            violations += 1

    # 300 repair streams and 300 effectiveness streams through the executor.
    spec = registry.get("echo")
    for trial in range(600):
        backend = ScriptedBackend()
        backend.push("generate_script", *["print(1)"] * 6)
        backend.push(
            "fix_error",
            *[rng.choice(["print(2)", "", "print(3)"]) for _ in range(10)],
        )
        backend.push("doc_fallback", "print(4)")
        backend.push(
            "check_effectiveness",
            *[rng.choice(["useful", "print(5)", "print(6)"]) for _ in range(12)],
        )
        executor = ToolExecutor(
            Gateway(backend),
            FakeRunner(rng, fail_probability=0.5 if trial < 300 else 0.15),
            FixtureSearch({spec.documentation_url: "doc text"}),
        )
        result = executor.run(spec, "task", ("s",), META)
        history = result.history
        if history.error_fix_attempts > 3:
            violations += 1
        if history.effectiveness_rounds > 5:
            violations += 1
        if history.script_regenerations > 3:
            violations += 1
        assert len(history.attempts) <= 1 + 3 + 1 + 5  # execution count bound

    assert violations == 0
    _passed(3, "budget safety sweep", "1000 streams, zero violations")


# ---------------------------------------------------------------------------
# Criterion 4: self-repair ablation direction on a fault-injection suite


def _flaky_script(fail_times: int) -> str:
    return (
        "import chemforge.mocktools\n"
        f'payload = "recovered after {fail_times}"\n'
        f"result = chemforge.mocktools.flaky(payload, {fail_times})\n"
        'print("The flaky tool finally returned:", result)\n'
    )


def test_criterion_4_self_repair_ablation(tmp_path):
    registry = load_builtin_registry()
    spec = registry.get("flaky")
    runner = ScriptRunner(tmp_path / "sandbox", SandboxLimits(wall_time=15.0))
    fault_counts = [0, 1, 2, 3] * 25  # 100 scenarios

    def run_suite(self_repair: bool) -> list[bool]:
        outcomes = []
        for faults in fault_counts:
            script = _flaky_script(faults)
            backend = ScriptedBackend()
            backend.push("generate_script", script)
            backend.push("fix_error", *[script] * 3)
            backend.push("check_effectiveness", "useful")
            executor = ToolExecutor(
                Gateway(backend), runner, DisabledSearch(), self_repair=self_repair
            )
            outcomes.append(executor.run(spec, "task", ("s",), META).ok)
        return outcomes

    with_repair = run_suite(self_repair=True)
    without_repair = run_suite(self_repair=False)

    assert all(with_repair), "every fault count <= limit must succeed with repair"
    failure_rate_with = 1.0 - sum(with_repair) / len(with_repair)
    failure_rate_without = 1.0 - sum(without_repair) / len(without_repair)
    assert failure_rate_without > failure_rate_with
    _passed(
        4,
        "self-repair ablation direction",
        f"failure rate {failure_rate_without:.0%} disabled vs {failure_rate_with:.0%} enabled",
    )


# ---------------------------------------------------------------------------
# Criterion 5: distillation lowers mean tools invoked at equal success


def _echo_script(marker: str) -> str:
    return (
        "import chemforge.mocktools\n"
        f"payload = {marker!r}\n"
        "result = chemforge.mocktools.echo(payload)\n"
        'print("The tool reports:", result)\n'
    )


def _probe_registry() -> ToolRegistry:
    specs = tuple(
        ToolSpec(
            name=f"{label}_probe",
            module_path="chemforge.mocktools",
            description=f"Echoes the {label} diagnostic payload verbatim.",
            parameters=(ToolParam("payload", "text"),),
            returns="The payload.",
            minimal_example="import chemforge.mocktools\nprint(chemforge.mocktools.echo('x'))",
            use_case="Offline testing.",
            documentation_url=f"https://example.org/mock#{label}",
        )
        for label in ("alpha", "beta", "gamma", "delta")
    )
    return ToolRegistry(specs=specs)


def _distillation_scenario(tmp_path, enabled: bool, scenario: int):
    cfg = PipelineConfig(top_k=4, early_stop=False, distillation=enabled)
    backend = ScriptedBackend()
    registry = _probe_registry()
    index = build_index(registry, MockEmbedder().embed)
    runner = ScriptRunner(tmp_path / f"sb-{enabled}-{scenario}",
                          SandboxLimits(wall_time=15.0))
    pipeline = Pipeline(Gateway(backend), index, DisabledSearch(), runner, cfg)

    backend.push("decompose", '["inspect", "report"]')
    backend.push("plan_tools", '["echoes a diagnostic payload verbatim"]')
    backend.push("confirm_tool", "0", "1", "2", "3")
    if enabled:
        backend.push("distill", "1", "no")  # prune one indirectly related tool
    tool_count = 3 if enabled else 4
    for i in range(tool_count):
        backend.push("generate_script", _echo_script(f"scenario {scenario} tool {i}"))
        backend.push("check_effectiveness", "useful")
    backend.push("sufficiency", "yes")
    backend.push("assemble", f"Scenario {scenario} resolved with {tool_count} probes.")
    return pipeline.generate_pair(_instruction(f"Scenario {scenario} diagnostics?"), META)


def test_criterion_5_distillation_direction(tmp_path):
    enabled_pairs = [_distillation_scenario(tmp_path, True, i) for i in range(6)]
    disabled_pairs = [_distillation_scenario(tmp_path, False, i) for i in range(6)]

    success_enabled = sum(1 for p in enabled_pairs if p.ok)
    success_disabled = sum(1 for p in disabled_pairs if p.ok)
    mean_enabled = sum(tools_invoked(p) for p in enabled_pairs) / len(enabled_pairs)
    mean_disabled = sum(tools_invoked(p) for p in disabled_pairs) / len(disabled_pairs)

    assert success_enabled == success_disabled == 6
    assert mean_enabled <= mean_disabled
    _passed(
        5,
        "distillation direction",
        f"mean tools {mean_enabled:.2f} enabled vs {mean_disabled:.2f} disabled",
    )


# ---------------------------------------------------------------------------
# Criterion 6: calibration loop equals simulation oracle on all score streams


def test_criterion_6_calibration_loop_exhaustive():
    mismatches = 0
    total = 0
    for length in (1, 2, 3, 4):
        for scores in itertools.product((1, 2, 3, 4, 5), repeat=length):
            for target in (1, 2, 3, 4, 5):
                total += 1
                backend = ScriptedBackend()
                for i in range(length - 1):
                    backend.push("synthesize", f'["candidate {i + 1}"]')
                result = calibrate_difficulty(
                    _instruction("candidate 0"),
                    target,
                    budget=length,
                    gateway=Gateway(backend),
                    scorer=ScriptedScorer(*scores),
                    task=TASK,
                    constraint=CONSTRAINT,
                    metadata=META,
                )

                # Direct simulation oracle over the scripted score sequence.
                expected_score = None
                expected_status = "uncalibrated"
                for s in scores:
                    if s == target:
                        expected_score, expected_status = s, "calibrated"
                        break
                if expected_score is None:
                    best_delta = min(abs(s - target) for s in scores)
                    expected_score = next(
                        s for s in scores if abs(s - target) == best_delta
                    )

                if (
                    result.difficulty.score != expected_score
                    or result.calibration != expected_status
                ):
                    mismatches += 1
    assert mismatches == 0
    _passed(6, "calibration loop", f"{total} cases, zero mismatches")


# ---------------------------------------------------------------------------
# Criterion 7: diversity metric oracles


def _pure_cosine(a, b) -> float:
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    return dot / (na * nb)


def test_criterion_7_diversity_metric_oracles():
    rng = np.random.default_rng(424242)

    # APS against the O(n^2) brute-force mean on 100 random 20-vector sets.
    for _ in range(100):
        vectors = [rng.normal(size=12) for _ in range(20)]
        plain = [v.tolist() for v in vectors]
        total, count = 0.0, 0
        for i in range(20):
            for j in range(i + 1, 20):
                total += _pure_cosine(plain[i], plain[j])
                count += 1
        assert abs(aps(vectors) - total / count) <= 1e-9

    # Greedy dispersion against exhaustive best-subset enumeration.
    max_gap = 0.0
    cases = 0
    for n in range(4, 9):
        for subset_size in range(2, 5):
            for _ in range(4):
                vectors = [rng.normal(size=8) for _ in range(n)]
                plain = [v.tolist() for v in vectors]
                greedy = remote_clique(vectors, subset_size)
                exhaustive = max(
                    sum(
                        1.0 - _pure_cosine(plain[i], plain[j])
                        for i, j in itertools.combinations(subset, 2)
                    )
                    / (subset_size * (subset_size - 1) / 2)
                    for subset in itertools.combinations(range(n), subset_size)
                )
                gap = exhaustive - greedy
                assert greedy <= exhaustive + 1e-9
                assert gap >= -1e-9
                max_gap = max(max_gap, gap)
                cases += 1
    _passed(7, "diversity metric oracles", f"{cases} subset cases, max gap {max_gap:.4f}")


# ---------------------------------------------------------------------------
# Criterion 8: ledger and cost integrity on fixture runs


def test_criterion_8_ledger_cost_integrity(tmp_path):
    manifest = RunManifest.load(
        LIPINSKI_DIR / "manifest.json", {"output": str(tmp_path / "out.jsonl")}
    )
    run = run_generation(manifest)
    backend = run.gateway.backend
    assert isinstance(backend, FixtureBackend)

    # Independent sum over the backend's raw served-call log.
    expected: dict[str, list[int]] = {}
    for stage, prompt_tokens, completion_tokens in backend.served:
        bucket = expected.setdefault(stage, [0, 0])
        bucket[0] += prompt_tokens
        bucket[1] += completion_tokens
    got = {
        row.stage: [row.prompt_tokens, row.completion_tokens]
        for row in usage_report(run.gateway.ledger)
        if row.stage != "embed"  # embeddings never hit the fixture archive
    }
    assert got == expected

    prices = PriceTable(prompt_rate=0.00003, completion_rate=0.00012)
    report = cost_report(run.gateway.ledger, prices)
    hand_total = 0.0
    hand_rows = {}
    for row in usage_report(run.gateway.ledger):
        cost = row.prompt_tokens * 0.00003 + row.completion_tokens * 0.00012
        hand_rows[row.stage] = cost
        hand_total += cost
    assert dict(report.rows) == hand_rows
    assert report.total == hand_total

    # The per-pair usage slice also reconciles with the global ledger.
    pair = run.pairs[0]
    for stage, usage in pair.usage.items():
        assert usage["prompt_tokens"] >= 0 and usage["completion_tokens"] >= 0
    _passed(8, "ledger and cost integrity", f"{run.gateway.ledger.call_count} calls reconciled")

"""Stage 2 control plane: from one instruction to a grounded response.

The pipeline decomposes the instruction into reasoning steps, plans expected
tool capabilities, retrieves and confirms candidate tools, prunes them to a
budget, executes each survivor in the sandbox with self-repair, validates
output sufficiency (falling back to web search), and assembles the final
response. Every stage transition lands in an ordered trace whose serialized
form is byte-identical across reruns on the same fixtures.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

from . import prompts
from .gateway import Gateway
from .instructions import (
    GenerationParseError,
    Instruction,
    Metadata,
    complete_string_list,
)
from .registry import (
    ToolCandidate,
    ToolDescription,
    ToolIndex,
    ToolSpec,
    confirm_candidates,
    retrieve,
)
from .sandbox import RepairHistory, ScriptRunner, ToolExecutor, ToolRunResult
from .search import SearchBackend, SearchError

STAGE_ORDER = (
    "decompose",
    "plan_tools",
    "retrieve",
    "distill",
    "execute",
    "sufficiency",
    "web_fallback",
    "assemble",
)


@dataclass(frozen=True)
class PipelineConfig:
    top_k: int = 5
    distill_budget: int = 5
    error_fix_limit: int = 3
    script_fix_limit: int = 3
    effectiveness_limit: int = 5
    early_stop: bool = True
    web_fallback: bool = True
    self_repair: bool = True
    distillation: bool = True

    def __post_init__(self) -> None:
        for name in ("top_k", "distill_budget", "error_fix_limit", "script_fix_limit",
                     "effectiveness_limit"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "PipelineConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown pipeline config fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        return cls.from_mapping(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class ReasoningPlan:
    steps: tuple[str, ...]
    instruction_digest: str

    def __post_init__(self) -> None:
        if not self.steps or any(not s.strip() for s in self.steps):
            raise ValueError("plan requires at least one non-empty step")


@dataclass(frozen=True)
class ToolSet:
    specs: tuple[ToolSpec, ...]
    budget: int

    def __post_init__(self) -> None:
        if len(self.specs) > self.budget:
            raise ValueError(f"tool set of {len(self.specs)} exceeds budget {self.budget}")


@dataclass(frozen=True)
class ToolOutput:
    source: str  # tool | web
    text: str
    tool_name: str | None = None
    effective: bool = True

    def __post_init__(self) -> None:
        if self.source == "web" and self.tool_name is not None:
            raise ValueError("web outputs carry no tool name")

    def payload(self) -> dict[str, Any]:
        return {
            "source": self.source,
            "tool_name": self.tool_name,
            "text": self.text,
            "effective": self.effective,
        }


@dataclass(frozen=True)
class ToolOutcome:
    tool_name: str
    output: ToolOutput | None
    history: RepairHistory
    failure_reason: str = ""

    @property
    def ok(self) -> bool:
        return self.output is not None


@dataclass(frozen=True)
class Response:
    text: str
    outputs_used: tuple[ToolOutput, ...]
    plan_digest: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("response text must be non-empty")


@dataclass(frozen=True)
class InstructionResponsePair:
    instruction: Instruction
    response: Response | None
    tool_trace: tuple[dict[str, Any], ...]
    usage: dict[str, dict[str, int]]
    timing: float = 0.0
    failure: str = ""
    flags: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return self.response is not None

    def pair_id(self) -> str:
        raw = f"{self.instruction.text}\x1f{self.instruction.metadata_digest}"
        return hashlib.sha256(raw.encode("utf-8")).hexdigest()[:16]


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def canonical_trace(trace: Sequence[Mapping[str, Any]]) -> str:
    """Deterministic serialization used for golden-trace comparison."""
    return json.dumps(list(trace), sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def call_budget(cfg: PipelineConfig, steps: int, descriptions: int, raw_pool: int) -> int:
    """Closed-form upper bound on model calls one pair may consume."""
    executed = min(cfg.distill_budget, raw_pool) if cfg.distillation else raw_pool
    per_tool = (
        (1 + cfg.script_fix_limit)  # script generation and regenerations
        + cfg.error_fix_limit  # error repairs
        + 2  # doc fallback regeneration and its retry slot
        + (cfg.effectiveness_limit + 1)  # effectiveness checks
    )
    return (
        2  # decompose + retry
        + 2  # plan + retry
        + raw_pool  # one confirmation per retrieved candidate
        + 2 * (raw_pool + 1)  # distillation rounds incl. retries
        + executed * per_tool
        + executed  # early-stop checks
        + 1  # sufficiency
        + 2  # assemble + retry
    )


class Pipeline:
    """Wires one instruction through every stage with shared dependencies."""

    def __init__(
        self,
        gateway: Gateway,
        index: ToolIndex,
        search_backend: SearchBackend,
        runner: ScriptRunner,
        cfg: PipelineConfig = PipelineConfig(),
    ):
        self.gateway = gateway
        self.index = index
        self.search_backend = search_backend
        self.runner = runner
        self.cfg = cfg

    # ------------------------------------------------------------------
    # Individual stage operations

    def decompose(self, x: Instruction, m: Metadata, gateway: Gateway | None = None) -> ReasoningPlan:
        gw = gateway or self.gateway
        req = prompts.render_decompose(x.text, m.payload())
        steps = complete_string_list(gw, req)
        steps = [s.strip() for s in steps if s.strip()]
        if not steps:
            raise GenerationParseError("decomposition produced no steps", "")
        return ReasoningPlan(steps=tuple(steps), instruction_digest=text_digest(x.text))

    def plan_expected_tools(
        self, plan: ReasoningPlan, m: Metadata, gateway: Gateway | None = None
    ) -> list[ToolDescription]:
        gw = gateway or self.gateway
        req = prompts.render_plan_tools(plan.steps, m.payload())
        texts = complete_string_list(gw, req)
        return [ToolDescription(t.strip()) for t in texts if t.strip()]

    def assemble_raw_pool(
        self,
        descriptions: Sequence[ToolDescription],
        task_text: str,
        m: Metadata,
        gateway: Gateway | None = None,
    ) -> list[ToolCandidate]:
        """Union of confirmed top-k candidates over every description."""
        gw = gateway or self.gateway
        pool: dict[str, ToolCandidate] = {}
        for description in descriptions:
            candidates = retrieve(self.index, description, self.cfg.top_k)
            if not candidates:
                continue
            kept = confirm_candidates(task_text, candidates, gw, m.payload())
            for candidate in kept:
                pool.setdefault(candidate.spec.name, candidate)
        return list(pool.values())

    def distill(
        self,
        raw_pool: Sequence[ToolCandidate],
        x: Instruction,
        plan: ReasoningPlan,
        m: Metadata,
        budget: int | None = None,
        gateway: Gateway | None = None,
    ) -> ToolSet:
        toolset, _ = self._distill_verbose(raw_pool, x, plan, m, budget, gateway)
        return toolset

    def _distill_verbose(
        self,
        raw_pool: Sequence[ToolCandidate],
        x: Instruction,
        plan: ReasoningPlan,
        m: Metadata,
        budget: int | None = None,
        gateway: Gateway | None = None,
    ) -> tuple[ToolSet, dict[str, Any]]:
        gw = gateway or self.gateway
        tau = budget if budget is not None else self.cfg.distill_budget
        if tau < 1:
            raise ValueError("distillation budget must be >= 1")
        kept = list(raw_pool)
        removed: list[str] = []
        forced: list[str] = []
        rounds = 0
        flagged = False

        while kept:
            rounds += 1
            numbered = [
                f"{i}: {c.spec.name}: {c.spec.description}" for i, c in enumerate(kept)
            ]
            req = prompts.render_distill(x.text, numbered, tau, m.payload())
            reply = gw.complete(req).text.strip()
            choice = _parse_distill_reply(reply, len(kept))
            if choice is None:
                retry = replace(
                    req,
                    user_text=req.user_text
                    + '\n\nThe previous reply was unparseable. Return one tool index '
                    'or the string "no" only.',
                )
                choice = _parse_distill_reply(gw.complete(retry).text.strip(), len(kept))
                if choice is None:
                    flagged = True
                    choice = "no"
            if choice == "no":
                break
            removed.append(kept.pop(int(choice)).spec.name)

        # The model declined further removals (or emptied the pool); the size
        # budget still holds, so force out the weakest candidates if needed.
        if len(kept) > tau:
            index_of = {spec.name: i for i, spec in enumerate(self.index.registry.specs)}
            ranked = sorted(
                kept,
                key=lambda c: (-c.similarity, index_of.get(c.spec.name, len(index_of))),
            )
            survivors = {c.spec.name for c in ranked[:tau]}
            forced = [c.spec.name for c in kept if c.spec.name not in survivors]
            kept = [c for c in kept if c.spec.name in survivors]

        toolset = ToolSet(specs=tuple(c.spec for c in kept), budget=tau)
        detail = {
            "kept": [s.name for s in toolset.specs],
            "removed": removed,
            "forced": forced,
            "rounds": rounds,
            "flagged": flagged,
        }
        return toolset, detail

    def run_tool(
        self,
        spec: ToolSpec,
        x: Instruction,
        plan: ReasoningPlan,
        m: Metadata,
        gateway: Gateway | None = None,
    ) -> ToolOutcome:
        gw = gateway or self.gateway
        executor = ToolExecutor(
            gw,
            self.runner,
            self.search_backend,
            error_fix_limit=self.cfg.error_fix_limit,
            script_fix_limit=self.cfg.script_fix_limit,
            effectiveness_limit=self.cfg.effectiveness_limit,
            self_repair=self.cfg.self_repair,
        )
        result: ToolRunResult = executor.run(spec, x.text, plan.steps, m)
        output = (
            ToolOutput(source="tool", tool_name=spec.name, text=result.stdout)
            if result.ok
            else None
        )
        return ToolOutcome(
            tool_name=spec.name,
            output=output,
            history=result.history,
            failure_reason=result.failure_reason,
        )

    def check_early_stop(
        self, x: Instruction, outputs: Sequence[ToolOutput], gateway: Gateway | None = None
    ) -> bool:
        gw = gateway or self.gateway
        if not outputs:
            raise ValueError("early-stop check requires at least one output")
        req = prompts.render_results_check(
            "early_stop", x.text, [o.text for o in outputs]
        )
        return gw.complete(req).text.strip().lower() == "yes"

    def validate_sufficiency(
        self, x: Instruction, outputs: Sequence[ToolOutput], gateway: Gateway | None = None
    ) -> bool:
        gw = gateway or self.gateway
        useful = [o for o in outputs if o.text.strip()]
        if not useful:
            return False  # nothing to validate; skip the model call
        req = prompts.render_results_check(
            "sufficiency", x.text, [o.text for o in useful]
        )
        return gw.complete(req).text.strip().lower() == "yes"

    def web_fallback(self, x: Instruction, m: Metadata) -> tuple[ToolOutput, bool]:
        """Returns (output, degraded); degraded outputs are empty-marked."""
        try:
            text = self.search_backend.search(x.text)
            return ToolOutput(source="web", text=text), False
        except SearchError:
            return ToolOutput(source="web", text="", effective=False), True

    def assemble(
        self,
        x: Instruction,
        outputs: Sequence[ToolOutput],
        m: Metadata,
        plan: ReasoningPlan | None = None,
        gateway: Gateway | None = None,
    ) -> Response:
        gw = gateway or self.gateway
        req = prompts.render_assemble(x.text, [o.payload() for o in outputs], m.payload())
        text = gw.complete(req).text.strip()
        if not text:
            retry = replace(req, user_text=req.user_text + "\n\nRegeneration attempt: 1")
            text = gw.complete(retry).text.strip()
        if not text:
            raise GenerationParseError("assembly produced no response text", "")
        return Response(
            text=text,
            outputs_used=tuple(outputs),
            plan_digest=plan.instruction_digest if plan else "",
        )

    # ------------------------------------------------------------------
    # Full pipeline

    def generate_pair(self, x: Instruction, m: Metadata) -> InstructionResponsePair:
        """Run every stage; always returns a pair or a structured failure."""
        started = time.monotonic()
        gw = self.gateway.scoped()
        trace: list[dict[str, Any]] = []
        flags: list[str] = []

        def finish(response: Response | None, failure: str = "") -> InstructionResponsePair:
            _pad_trace(trace)
            return InstructionResponsePair(
                instruction=x,
                response=response,
                tool_trace=tuple(trace),
                usage=gw.ledger.snapshot(),
                timing=time.monotonic() - started,
                failure=failure,
                flags=tuple(flags),
            )

        def fail_stage(stage: str, exc: Exception) -> InstructionResponsePair:
            trace.append({"stage": stage, "status": "failed",
                          "detail": {"error": str(exc)}})
            return finish(None, failure=f"{stage}: {exc}")

        try:
            plan = self.decompose(x, m, gw)
            trace.append({"stage": "decompose", "status": "ok",
                          "detail": {"steps": list(plan.steps)}})
        except Exception as exc:
            return fail_stage("decompose", exc)

        try:
            descriptions = self.plan_expected_tools(plan, m, gw)
            trace.append({"stage": "plan_tools", "status": "ok",
                          "detail": {"descriptions": [d.text for d in descriptions]}})
        except Exception as exc:
            return fail_stage("plan_tools", exc)

        try:
            raw_pool = self.assemble_raw_pool(descriptions, x.text, m, gw)
        except Exception as exc:
            return fail_stage("retrieve", exc)
        trace.append(
            {
                "stage": "retrieve",
                "status": "ok",
                "detail": {
                    "queries": [d.text for d in descriptions],
                    "pool": [c.spec.name for c in raw_pool],
                },
            }
        )

        if self.cfg.distillation and raw_pool:
            try:
                toolset, detail = self._distill_verbose(raw_pool, x, plan, m, gateway=gw)
            except Exception as exc:
                return fail_stage("distill", exc)
            trace.append({"stage": "distill", "status": "ok", "detail": detail})
        else:
            toolset = ToolSet(
                specs=tuple(c.spec for c in raw_pool), budget=max(len(raw_pool), 1)
            )
            trace.append({"stage": "distill", "status": "skipped",
                          "detail": {"kept": [s.name for s in toolset.specs]}})

        if not toolset.specs and not self.cfg.web_fallback:
            trace.append({"stage": "execute", "status": "skipped",
                          "detail": {"reason": "empty tool set"}})
            trace.append({"stage": "sufficiency", "status": "skipped", "detail": {}})
            trace.append({"stage": "web_fallback", "status": "skipped",
                          "detail": {"reason": "disabled"}})
            trace.append({"stage": "assemble", "status": "skipped", "detail": {}})
            return finish(None, failure="no tools selected and web fallback disabled")

        outputs: list[ToolOutput] = []
        stopped_early = False
        specs = list(toolset.specs)
        if not specs:
            trace.append({"stage": "execute", "status": "skipped",
                          "detail": {"reason": "empty tool set"}})
        for i, spec in enumerate(specs):
            if stopped_early:
                trace.append({"stage": "execute", "tool": spec.name, "status": "skipped",
                              "detail": {"reason": "early_stop"}})
                continue
            try:
                outcome = self.run_tool(spec, x, plan, m, gw)
            except Exception as exc:  # infrastructure faults, not tool errors
                trace.append({"stage": "execute", "tool": spec.name, "status": "failed",
                              "detail": {"error": str(exc)}})
                return finish(None, failure=f"execute {spec.name}: {exc}")
            detail: dict[str, Any] = {
                "repairs": outcome.history.error_fix_attempts,
                "doc_fallback": outcome.history.doc_fallback_used,
                "effectiveness_rounds": outcome.history.effectiveness_rounds,
                "executions": len(outcome.history.attempts),
            }
            if outcome.ok:
                assert outcome.output is not None
                outputs.append(outcome.output)
                detail["output"] = outcome.output.text
                status = "ok"
            else:
                detail["error"] = outcome.failure_reason
                status = "failed"
            remaining = len(specs) - i - 1
            if self.cfg.early_stop and outputs and remaining > 0:
                try:
                    detail["early_stop"] = self.check_early_stop(x, outputs, gw)
                except Exception as exc:
                    trace.append({"stage": "execute", "tool": spec.name,
                                  "status": status, "detail": detail})
                    return fail_stage("sufficiency", exc)
                stopped_early = detail["early_stop"]
            trace.append(
                {"stage": "execute", "tool": spec.name, "status": status, "detail": detail}
            )

        try:
            sufficient = self.validate_sufficiency(x, outputs, gw)
        except Exception as exc:
            return fail_stage("sufficiency", exc)
        trace.append(
            {
                "stage": "sufficiency",
                "status": "ok",
                "detail": {"sufficient": sufficient, "outputs": len(outputs)},
            }
        )

        if not sufficient and self.cfg.web_fallback:
            web_output, degraded = self.web_fallback(x, m)
            outputs.append(web_output)
            if degraded:
                flags.append("web_search_failed")
            trace.append(
                {
                    "stage": "web_fallback",
                    "status": "ok",
                    "detail": {"degraded": degraded, "text": web_output.text},
                }
            )
        else:
            trace.append(
                {
                    "stage": "web_fallback",
                    "status": "skipped",
                    "detail": {"reason": "sufficient" if sufficient else "disabled"},
                }
            )

        try:
            response = self.assemble(x, outputs, m, plan, gw)
        except Exception as exc:
            return fail_stage("assemble", exc)
        trace.append({"stage": "assemble", "status": "ok",
                      "detail": {"length": len(response.text)}})
        return finish(response)


def _parse_distill_reply(reply: str, pool_size: int) -> int | str | None:
    if reply.lower() == "no":
        return "no"
    try:
        index = int(reply)
    except ValueError:
        return None
    if 0 <= index < pool_size:
        return index
    return None


def _pad_trace(trace: list[dict[str, Any]]) -> None:
    """Mark unreached stages as skipped so traces always cover Alg order."""
    present = {record["stage"] for record in trace}
    for stage in STAGE_ORDER:
        if stage not in present:
            trace.append({"stage": stage, "status": "skipped",
                          "detail": {"reason": "not reached"}})

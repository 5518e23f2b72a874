"""Script generation, isolated subprocess execution, and self-repair.

Generated scripts are untrusted: each one runs in a separate OS process
with a private scratch directory, wall-clock and memory limits, a write
guard confining file modification to the scratch dir, and an optional
network-deny mode. Failures drive the repair state machine: error-trace
repairs up to a budget, a one-shot documentation fallback, then
effectiveness checking of successful output.
"""

from __future__ import annotations

import ast
import os
import re
import shutil
import subprocess
import sys
import time
import uuid
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

from . import prompts
from .gateway import Gateway
from .instructions import GenerationParseError, Metadata
from .registry import ToolSpec
from .search import SearchBackend, SearchError

GUARD_MODULE = '''\
"""Sandbox guard imported at interpreter startup (sitecustomize hook)."""
import os

_ROOT = os.environ.get("CHEMFORGE_SANDBOX_ROOT")
_DENY_NET = os.environ.get("CHEMFORGE_SANDBOX_DENY_NET") == "1"

if _ROOT:
    import builtins
    import io

    _ROOT_REAL = os.path.realpath(_ROOT)
    _REAL_OPEN = builtins.open
    _REAL_OS_OPEN = os.open
    _WRITE_FLAGS = os.O_WRONLY | os.O_RDWR | os.O_APPEND | os.O_CREAT | os.O_TRUNC

    def _inside(path):
        try:
            real = os.path.realpath(os.fspath(path))
        except TypeError:
            return True  # descriptors and other non-path arguments
        return (
            real == _ROOT_REAL
            or real.startswith(_ROOT_REAL + os.sep)
            or real == os.devnull
        )

    def _guarded_open(file, mode="r", *args, **kwargs):
        if any(c in str(mode) for c in "wax+") and not _inside(file):
            raise PermissionError(f"sandbox: write outside scratch denied: {file}")
        return _REAL_OPEN(file, mode, *args, **kwargs)

    def _guarded_os_open(path, flags, *args, **kwargs):
        if flags & _WRITE_FLAGS and not _inside(path):
            raise PermissionError(f"sandbox: write outside scratch denied: {path}")
        return _REAL_OS_OPEN(path, flags, *args, **kwargs)

    def _guard_path_op(name):
        real = getattr(os, name)

        def guarded(*args, **kwargs):
            for value in args:
                if isinstance(value, (str, bytes, os.PathLike)) and not _inside(value):
                    raise PermissionError(
                        f"sandbox: {name} outside scratch denied: {value!r}"
                    )
            return real(*args, **kwargs)

        return guarded

    builtins.open = _guarded_open
    io.open = _guarded_open
    os.open = _guarded_os_open
    for _name in ("remove", "unlink", "rename", "replace", "rmdir", "mkdir",
                  "makedirs", "symlink", "link", "truncate"):
        setattr(os, _name, _guard_path_op(_name))

if _DENY_NET:
    import socket

    def _deny(*args, **kwargs):
        raise PermissionError("sandbox: network disabled")

    class _DeniedSocket(socket.socket):
        def __init__(self, *args, **kwargs):
            _deny()

    socket.socket = _DeniedSocket
    socket.create_connection = _deny
    socket.socketpair = _deny
'''


@dataclass(frozen=True)
class SandboxLimits:
    wall_time: float = 30.0
    memory_mb: int = 512
    no_network: bool = False


@dataclass(frozen=True)
class ScriptArtifact:
    tool_name: str
    source_text: str
    bindings: tuple[tuple[str, str], ...] = ()
    generation: int = 0
    provenance: str = "initial"

    def __post_init__(self) -> None:
        if not self.source_text.strip():
            raise ValueError("script source must be non-empty")


@dataclass(frozen=True)
class ExecutionRecord:
    exit_status: str  # ok | error | timeout | killed
    stdout: str
    error_trace: str
    wall_time: float

    @property
    def ok(self) -> bool:
        return self.exit_status == "ok"


@dataclass
class RepairHistory:
    attempts: list[tuple[ScriptArtifact, ExecutionRecord]] = field(default_factory=list)
    error_fix_attempts: int = 0
    doc_fallback_used: bool = False
    effectiveness_rounds: int = 0
    script_regenerations: int = 0


@dataclass(frozen=True)
class ToolRunResult:
    tool_name: str
    ok: bool
    stdout: str
    history: RepairHistory
    effectiveness_flagged: bool = False
    failure_reason: str = ""


_FENCE_RE = re.compile(r"^```[a-zA-Z0-9_+-]*\s*\n(.*?)\n?```\s*$", re.DOTALL)


def strip_fences(text: str) -> str:
    """Remove code-fence and quote markers models wrap scripts in."""
    t = text.strip()
    m = _FENCE_RE.match(t)
    if m:
        t = m.group(1)
    elif t.startswith("`") and t.endswith("`"):
        t = t.strip("`")
    if t.startswith('"""') and t.endswith('"""') and len(t) > 6:
        t = t[3:-3]
    return t.strip()


def extract_bindings(script_text: str, param_names: Sequence[str]) -> dict[str, str]:
    """Pull parameter variable assignments (literals only) out of a script."""
    names = set(param_names) | {f"{p}_value" for p in param_names}
    found: dict[str, str] = {}
    try:
        tree = ast.parse(script_text)
    except SyntaxError:
        return found
    for node in ast.walk(tree):
        if isinstance(node, ast.Assign) and len(node.targets) == 1:
            target = node.targets[0]
            if isinstance(target, ast.Name) and target.id in names:
                if isinstance(node.value, ast.Constant):
                    key = target.id.removesuffix("_value")
                    found[key] = ast.unparse(node.value)
    return found


def derive_parameter_values(spec: ToolSpec, metadata: Metadata) -> dict[str, Any]:
    """Bind declared parameters from metadata records where keys match."""
    values: dict[str, Any] = {}
    for param in spec.parameters:
        for record in metadata.records:
            if isinstance(record, Mapping) and param.name in record:
                values[param.name] = record[param.name]
                break
    return values


class ScriptRunner:
    """Executes script text in an isolated interpreter subprocess."""

    def __init__(
        self,
        scratch_root: str | Path,
        limits: SandboxLimits = SandboxLimits(),
        interpreter: str | None = None,
    ):
        self.scratch_root = Path(scratch_root)
        self.limits = limits
        self.interpreter = interpreter or sys.executable
        self._guard_dir = self.scratch_root / ".guard"
        self._guard_dir.mkdir(parents=True, exist_ok=True)
        (self._guard_dir / "sitecustomize.py").write_text(GUARD_MODULE, encoding="utf-8")

    def new_scratch(self, label: str) -> Path:
        safe = re.sub(r"[^A-Za-z0-9_.-]", "_", label)
        scratch = self.scratch_root / f"{safe}-{uuid.uuid4().hex[:8]}"
        scratch.mkdir(parents=True)
        return scratch

    def execute(self, script: ScriptArtifact, scratch: Path) -> ExecutionRecord:
        if not shutil.which(self.interpreter) and not os.path.exists(self.interpreter):
            raise EnvironmentError(f"tool runtime interpreter not found: {self.interpreter}")
        script_path = scratch / f"attempt_{script.generation}_{script.provenance}.py"
        script_path.write_text(script.source_text, encoding="utf-8")

        env = os.environ.copy()
        guard_path = str(self._guard_dir)
        existing = env.get("PYTHONPATH", "")
        env["PYTHONPATH"] = guard_path + (os.pathsep + existing if existing else "")
        env["CHEMFORGE_SANDBOX_ROOT"] = str(scratch)
        env["TMPDIR"] = str(scratch)
        if self.limits.no_network:
            env["CHEMFORGE_SANDBOX_DENY_NET"] = "1"
        else:
            env.pop("CHEMFORGE_SANDBOX_DENY_NET", None)

        def set_limits() -> None:
            import resource

            mem = self.limits.memory_mb * 1024 * 1024
            resource.setrlimit(resource.RLIMIT_AS, (mem, mem))

        started = time.monotonic()
        try:
            proc = subprocess.run(
                [self.interpreter, str(script_path)],
                cwd=scratch,
                env=env,
                capture_output=True,
                timeout=self.limits.wall_time,
                preexec_fn=set_limits,
            )
        except subprocess.TimeoutExpired as exc:
            elapsed = max(time.monotonic() - started, self.limits.wall_time)
            return ExecutionRecord(
                exit_status="timeout",
                stdout=(exc.stdout or b"").decode("utf-8", errors="replace"),
                error_trace=f"wall-time limit of {self.limits.wall_time}s exceeded",
                wall_time=elapsed,
            )
        elapsed = time.monotonic() - started
        stdout = proc.stdout.decode("utf-8", errors="replace")
        stderr = proc.stderr.decode("utf-8", errors="replace")
        if proc.returncode == 0:
            status = "ok"
        elif proc.returncode < 0:
            status = "killed"
        else:
            status = "error"
        return ExecutionRecord(
            exit_status=status,
            stdout=stdout,
            error_trace=stderr if status != "ok" else stderr,
            wall_time=elapsed,
        )


@dataclass(frozen=True)
class EffectivenessResult:
    effective: bool
    revision: ScriptArtifact | None = None
    flagged: bool = False


def generate_script(
    spec: ToolSpec,
    task_text: str,
    plan_steps: Sequence[str],
    metadata: Metadata,
    gateway: Gateway,
    regeneration_limit: int = 3,
    doc_context: str = "",
) -> tuple[ScriptArtifact, int]:
    """Ask the model for a runnable script; regenerate on empty replies.

    Returns the artifact plus the number of from-scratch regenerations
    consumed (parse failures burn the regeneration budget).
    """
    values = derive_parameter_values(spec, metadata)
    parameters: dict[str, Any] = {}
    for param in spec.parameters:
        if param.name in values:
            parameters[param.name] = values[param.name]
        else:
            parameters[param.name] = f"<{param.semantic_type}> {param.description}".strip()

    regenerations = 0
    while True:
        req = prompts.render_script(
            task_text, spec.module_path, spec.name, parameters, doc_context=doc_context
        )
        if regenerations:
            req = replace(
                req, user_text=req.user_text + f"\n\nRegeneration attempt: {regenerations}"
            )
        text = strip_fences(gateway.complete(req).text)
        if text:
            bindings = {k: repr(v) for k, v in values.items()}
            bindings.update(extract_bindings(text, [p.name for p in spec.parameters]))
            return (
                ScriptArtifact(
                    tool_name=spec.name,
                    source_text=text,
                    bindings=tuple(sorted(bindings.items())),
                    generation=regenerations,
                    provenance="doc_fallback" if doc_context else "initial",
                ),
                regenerations,
            )
        regenerations += 1
        if regenerations > regeneration_limit:
            raise GenerationParseError(
                f"empty script for tool {spec.name} after {regeneration_limit} regenerations",
                text,
            )


def repair(
    script: ScriptArtifact,
    record: ExecutionRecord,
    metadata: Metadata,
    gateway: Gateway,
) -> ScriptArtifact:
    """One error-trace repair round; returns the next script generation."""
    if record.ok:
        raise ValueError("repair requires a failed execution record")
    req = prompts.render_fix_error(script.source_text, record.error_trace, metadata.payload())
    text = strip_fences(gateway.complete(req).text)
    if not text:
        raise GenerationParseError(f"empty repair for tool {script.tool_name}", text)
    return replace(
        script, source_text=text, generation=script.generation + 1, provenance="error_fix"
    )


def doc_fallback(
    spec: ToolSpec,
    script: ScriptArtifact,
    task_text: str,
    plan_steps: Sequence[str],
    metadata: Metadata,
    search_backend: SearchBackend,
    gateway: Gateway,
) -> ScriptArtifact:
    """Regenerate the script with retrieved documentation in context."""
    query = spec.documentation_url or f"{spec.name} documentation"
    doc_text = search_backend.search(query)
    artifact, _ = generate_script(
        spec,
        task_text,
        plan_steps,
        metadata,
        gateway,
        regeneration_limit=0,
        doc_context=doc_text,
    )
    return replace(artifact, generation=script.generation + 1)


def check_effectiveness(
    task_text: str,
    plan_steps: Sequence[str],
    script: ScriptArtifact,
    record: ExecutionRecord,
    gateway: Gateway,
    website: str = "",
) -> EffectivenessResult:
    """Validate that a successful execution's output actually serves the task."""
    if not record.ok:
        raise ValueError("effectiveness check requires a successful execution")
    req = prompts.render_effectiveness(
        task_text, plan_steps, script.source_text, record.stdout, website
    )
    reply = strip_fences(gateway.complete(req).text)
    if reply.lower() == "useful":
        return EffectivenessResult(effective=True)
    if not reply:
        # Treat as effective to avoid an unbounded revise loop, but flag it.
        return EffectivenessResult(effective=True, flagged=True)
    revision = replace(
        script,
        source_text=reply,
        generation=script.generation + 1,
        provenance="effectiveness_fix",
    )
    return EffectivenessResult(effective=False, revision=revision)


class ToolExecutor:
    """Drives one tool run through the generate/execute/repair state machine.

    Budgets: ``error_fix_limit`` total error repairs per run (shared across
    effectiveness revisions), ``script_fix_limit`` from-scratch regenerations
    at script-generation time, ``effectiveness_limit`` revision rounds, and
    one documentation fallback. Every path terminates in an effective output
    or a failure, never an exception.
    """

    def __init__(
        self,
        gateway: Gateway,
        runner: ScriptRunner,
        search_backend: SearchBackend,
        error_fix_limit: int = 3,
        script_fix_limit: int = 3,
        effectiveness_limit: int = 5,
        self_repair: bool = True,
    ):
        self.gateway = gateway
        self.runner = runner
        self.search_backend = search_backend
        self.error_fix_limit = error_fix_limit
        self.script_fix_limit = script_fix_limit
        self.effectiveness_limit = effectiveness_limit
        self.self_repair = self_repair

    def run(
        self,
        spec: ToolSpec,
        task_text: str,
        plan_steps: Sequence[str],
        metadata: Metadata,
    ) -> ToolRunResult:
        history = RepairHistory()
        scratch = self.runner.new_scratch(spec.name)
        try:
            return self._run(spec, task_text, plan_steps, metadata, history, scratch)
        except GenerationParseError as exc:
            return ToolRunResult(spec.name, False, "", history, failure_reason=str(exc))
        except SearchError as exc:
            return ToolRunResult(
                spec.name, False, "", history, failure_reason=f"documentation fallback: {exc}"
            )

    def _run(
        self,
        spec: ToolSpec,
        task_text: str,
        plan_steps: Sequence[str],
        metadata: Metadata,
        history: RepairHistory,
        scratch: Path,
    ) -> ToolRunResult:
        script, regens = generate_script(
            spec, task_text, plan_steps, metadata, self.gateway,
            regeneration_limit=self.script_fix_limit,
        )
        history.script_regenerations = regens

        outcome = self._execute_until_ok(spec, script, task_text, plan_steps, metadata,
                                         history, scratch)
        if outcome is None:
            return ToolRunResult(
                spec.name, False, "", history,
                failure_reason="execution failed after exhausting repair budgets",
            )
        script, record = outcome
        if not self.self_repair:
            return ToolRunResult(spec.name, True, record.stdout, history)

        while True:
            result = check_effectiveness(
                task_text, plan_steps, script, record, self.gateway,
                website=spec.documentation_url,
            )
            if result.effective:
                return ToolRunResult(
                    spec.name, True, record.stdout, history,
                    effectiveness_flagged=result.flagged,
                )
            if history.effectiveness_rounds >= self.effectiveness_limit:
                return ToolRunResult(
                    spec.name, False, record.stdout, history,
                    failure_reason="effectiveness budget exhausted",
                )
            history.effectiveness_rounds += 1
            assert result.revision is not None
            outcome = self._execute_until_ok(
                spec, result.revision, task_text, plan_steps, metadata, history, scratch
            )
            if outcome is None:
                return ToolRunResult(
                    spec.name, False, "", history,
                    failure_reason="revised script failed after exhausting repair budgets",
                )
            script, record = outcome

    def _execute_until_ok(
        self,
        spec: ToolSpec,
        script: ScriptArtifact,
        task_text: str,
        plan_steps: Sequence[str],
        metadata: Metadata,
        history: RepairHistory,
        scratch: Path,
    ) -> tuple[ScriptArtifact, ExecutionRecord] | None:
        record = self.runner.execute(script, scratch)
        history.attempts.append((script, record))
        if record.ok:
            return script, record
        if not self.self_repair:
            return None

        while history.error_fix_attempts < self.error_fix_limit:
            history.error_fix_attempts += 1
            try:
                script = repair(script, record, metadata, self.gateway)
            except GenerationParseError:
                continue  # failed repair generation still burns the attempt
            record = self.runner.execute(script, scratch)
            history.attempts.append((script, record))
            if record.ok:
                return script, record

        if not history.doc_fallback_used:
            history.doc_fallback_used = True
            script = doc_fallback(
                spec, script, task_text, plan_steps, metadata,
                self.search_backend, self.gateway,
            )
            record = self.runner.execute(script, scratch)
            history.attempts.append((script, record))
            if record.ok:
                return script, record
        return None

"""Tool-grounded instruction-response pair synthesis for chemistry tasks."""

from .gateway import (
    Completion,
    FixtureMissing,
    Gateway,
    InvalidRequest,
    PromptRequest,
    TokenUsage,
    UsageLedger,
    usage_report,
)
from .backends import (
    FixtureArchive,
    FixtureBackend,
    HttpBackend,
    MockEmbedder,
    RecordingBackend,
    ScriptedBackend,
)
from .instructions import (
    Constraint,
    DifficultyReport,
    HeuristicScorer,
    Instruction,
    Metadata,
    Task,
    calibrate_difficulty,
    enumerate_batches,
    generate_instructions,
    score_difficulty,
)
from .registry import (
    ToolCandidate,
    ToolDescription,
    ToolIndex,
    ToolRegistry,
    ToolSpec,
    build_index,
    load_builtin_registry,
    load_registry,
    register_custom_tool,
    retrieve,
    save_registry,
    validate_spec,
)
from .pipeline import (
    InstructionResponsePair,
    Pipeline,
    PipelineConfig,
    ReasoningPlan,
    Response,
    ToolOutput,
    ToolSet,
)
from .sandbox import (
    ExecutionRecord,
    RepairHistory,
    SandboxLimits,
    ScriptArtifact,
    ScriptRunner,
    ToolExecutor,
)

__version__ = "0.1.0"

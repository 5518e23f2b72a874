#!/usr/bin/env python3
"""Regenerate the shipped drug-likeness fixture scenario.

Runs the pipeline once against scripted replies, recording every
(request, reply) into a content-addressed archive, then freezes the
resulting trace as the golden reference for `chemforge replay`.
Output is deterministic: rerunning produces byte-identical files.
"""

from __future__ import annotations

import json
import shutil
import sys
import tempfile
from pathlib import Path

from chemforge.backends import (
    FixtureArchive,
    MockEmbedder,
    RecordingBackend,
    ScriptedBackend,
)
from chemforge.gateway import Gateway
from chemforge.instructions import Constraint, Metadata, Task, generate_instructions
from chemforge.pipeline import Pipeline, PipelineConfig
from chemforge.registry import ToolDescription, build_index, load_builtin_registry, retrieve
from chemforge.sandbox import SandboxLimits, ScriptRunner
from chemforge.search import DisabledSearch

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "fixtures" / "lipinski"

INSTRUCTION_TEXT = (
    "How can Lipinski's Rule of Five be used to assess the drug-likeness of a compound?"
)

DECOMPOSITION_STEPS = [
    "Research and summarize Lipinski's Rule of Five, focusing on its criteria for drug-likeness.",
    "Identify the key parameters of Lipinski's Rule of Five: molecular weight, logP, hydrogen bond donors, and hydrogen bond acceptors.",
    "Acquire the chemical structure of the compound to be assessed for drug-likeness.",
    "Calculate the molecular weight of the compound using its chemical structure.",
    "Determine the compound's partition coefficient (logP) to evaluate its hydrophobicity or hydrophilicity.",
    "Count the number of hydrogen bond donors (e.g., NH or OH groups) in the compound's structure.",
    "Count the number of hydrogen bond acceptors (e.g., N or O atoms) in the compound's structure.",
    "Compare the calculated values against Lipinski's criteria: molecular weight < 500 Da, logP < 5, hydrogen bond donors < 5, and hydrogen bond acceptors < 10.",
    "Assess the compound's drug-likeness based on its conformity to Lipinski's Rule of Five.",
    "Consider using cheminformatics software tools for automated calculations and analysis.",
]

EXPECTED_TOOLS = [
    "Molecular weight calculator: Computes the molecular weight of a compound from its chemical structure.",
    "LogP calculator: Determines the partition coefficient of a compound to assess its hydrophobicity or hydrophilicity.",
    "Hydrogen bond donor counter: Counts NH and OH groups in a compound's chemical structure.",
    "Hydrogen bond acceptor counter: Counts nitrogen and oxygen atoms in a compound's chemical structure.",
    "Cheminformatics structure viewer: Visualizes the chemical structure of a compound.",
]

# Tools the confirmation stage keeps for this task. Confirmation replies are
# content-addressed by (task, tool index, tool), so the same tool retrieved
# under two capability queries must answer consistently; membership in this
# set is that single answer.
CONFIRMED_TOOLS = {"molecular_weight", "logp", "h_bond_donors", "h_bond_acceptors"}

TOOL_RESULTS = {
    "molecular_weight": "molecular weight of biphenyl (C1=CC=CC=C1C2=CC=CC=C2): 154.21 g/mol",
    "logp": "estimated logP of biphenyl: approximately 4.0",
    "h_bond_donors": "hydrogen bond donors in biphenyl: 0",
    "h_bond_acceptors": "hydrogen bond acceptors in biphenyl: 0",
}

FINAL_RESPONSE = (
    "Lipinski's Rule of Five assesses drug-likeness with four thresholds: molecular "
    "weight below 500 Da, logP below 5, fewer than 5 hydrogen bond donors, and fewer "
    "than 10 hydrogen bond acceptors. For biphenyl (C1=CC=CC=C1C2=CC=CC=C2) the tools "
    "report a molecular weight of 154.21 g/mol, a logP of approximately 4.0, 0 hydrogen "
    "bond donors, and 0 hydrogen bond acceptors. Every value sits inside the thresholds, "
    "so biphenyl satisfies all four Lipinski criteria and profiles as drug-like; its "
    "lack of hydrogen bond donors and acceptors and moderate lipophilicity also favor "
    "membrane permeability."
)


def echo_script(tool_name: str) -> str:
    payload = TOOL_RESULTS[tool_name]
    return (
        "import chemforge.mocktools\n"
        f'payload = "{payload}"\n'
        "result = chemforge.mocktools.echo(payload)\n"
        f'print("The {tool_name} tool reports:", result)\n'
    )


def quoted_list(items) -> str:
    return "[\n" + ",\n".join(json.dumps(i, ensure_ascii=False) for i in items) + "\n]"


def build_scripted_backend(index) -> ScriptedBackend:
    backend = ScriptedBackend()
    backend.push("synthesize", quoted_list([INSTRUCTION_TEXT]))
    backend.push("decompose", quoted_list(DECOMPOSITION_STEPS))
    backend.push("plan_tools", quoted_list(EXPECTED_TOOLS))

    confirmed: list[str] = []
    for description in EXPECTED_TOOLS:
        candidates = retrieve(index, ToolDescription(description), 5)
        for j, candidate in enumerate(candidates):
            if candidate.spec.name in CONFIRMED_TOOLS:
                backend.push("confirm_tool", str(j))
                if candidate.spec.name not in confirmed:
                    confirmed.append(candidate.spec.name)
            else:
                backend.push("confirm_tool", "no")

    backend.push("distill", "no")
    for tool_name in confirmed:
        backend.push("generate_script", echo_script(tool_name))
        backend.push("check_effectiveness", "useful")
    for _ in range(len(confirmed) - 1):
        backend.push("early_stop", "no")
    backend.push("sufficiency", "yes")
    backend.push("assemble", FINAL_RESPONSE)
    return backend


def main() -> int:
    archive_dir = FIXTURE_DIR / "archive"
    if archive_dir.exists():
        shutil.rmtree(archive_dir)
    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)

    registry = load_builtin_registry()
    index = build_index(registry, MockEmbedder().embed)
    scripted = build_scripted_backend(index)
    archive = FixtureArchive(archive_dir)
    gateway = Gateway(RecordingBackend(scripted, archive))

    task = Task(
        id="druglikeness",
        description="Assessing the drug-likeness of chemical compounds",
        category="general_qa",
    )
    constraint = Constraint(
        category="specific_knowledge_usage",
        text="Involve Lipinski's Rule of Five criteria.",
    )
    metadata = Metadata(
        records=({"smiles": "C1=CC=CC=C1C2=CC=CC=C2", "compound": "biphenyl"},),
        source="seed compounds",
    )

    instructions = generate_instructions(task, constraint, metadata, 1, gateway)
    assert len(instructions) == 1, "scenario expects one instruction"

    scratch = Path(tempfile.mkdtemp(prefix="fixture-build-"))
    pipeline = Pipeline(
        gateway,
        index,
        DisabledSearch(),
        ScriptRunner(scratch, SandboxLimits(wall_time=20.0)),
        PipelineConfig(),
    )
    pair = pipeline.generate_pair(instructions[0], metadata)
    assert pair.ok, f"scenario failed: {pair.failure}"
    assert scripted.pending("confirm_tool") == 0, "unused confirm replies"

    (FIXTURE_DIR / "tasks.json").write_text(
        json.dumps(
            [{"id": task.id, "description": task.description, "category": task.category}],
            indent=2,
        )
        + "\n"
    )
    (FIXTURE_DIR / "constraints.json").write_text(
        json.dumps([{"category": constraint.category, "text": constraint.text}], indent=2)
        + "\n"
    )
    (FIXTURE_DIR / "metadata.json").write_text(
        json.dumps(
            [{"records": list(metadata.records), "source": metadata.source}], indent=2
        )
        + "\n"
    )
    (FIXTURE_DIR / "manifest.json").write_text(
        json.dumps(
            {
                "tasks": "tasks.json",
                "constraints": "constraints.json",
                "metadata": "metadata.json",
                "output": "dataset.jsonl",
                "backend": "fixture",
                "archive": "archive",
                "instructions_per_triple": 1,
                "pipeline": {},
                "search": {"mode": "disabled"},
                "sandbox": {"wall_time": 20.0},
            },
            indent=2,
        )
        + "\n"
    )
    (FIXTURE_DIR / "golden.json").write_text(
        json.dumps(
            {"manifest": "manifest.json", "trace": list(pair.tool_trace)},
            indent=2,
            sort_keys=True,
            ensure_ascii=False,
        )
        + "\n"
    )
    print(f"wrote scenario under {FIXTURE_DIR}")
    print(f"archive records: {len(list(archive_dir.glob('*.json')))}")
    print(f"trace stages: {[r['stage'] for r in pair.tool_trace]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

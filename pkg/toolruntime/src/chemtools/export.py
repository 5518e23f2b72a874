"""Export every sub-tool's five-component record as a registry file."""

from __future__ import annotations

import json
from pathlib import Path

DOC_BASE = "https://example.org/chemtools"


def _param(name: str, type_: str, description: str, required: bool = True) -> dict:
    return {"name": name, "type": type_, "required": required, "description": description}


_SMILES_PARAM = _param("smiles", "SMILES text", "Molecular structure in SMILES notation.")


def registry_records() -> list[dict]:
    """Five-component records for every exported sub-tool, in stable order."""
    return [
        {
            "tool": "molecular_weight",
            "module": "chemtools.descriptors",
            "description": "Computes the average molecular weight of a compound from its SMILES chemical structure, in grams per mole.",
            "parameters": [_SMILES_PARAM],
            "returns": "Average molecular weight in g/mol as a float.",
            "minimal_example": "import chemtools.descriptors\nsmiles = \"CCO\"\nweight = chemtools.descriptors.molecular_weight(smiles)\nprint(\"The molecular weight of the compound is\", weight, \"g/mol\")",
            "use_case": "Checking whether a drug candidate stays under the 500 Da threshold during lead optimization.",
            "documentation": f"{DOC_BASE}/descriptors#molecular_weight",
            "origin": "builtin",
        },
        {
            "tool": "logp",
            "module": "chemtools.descriptors",
            "description": "Determines the partition coefficient (logP) of a compound to assess its hydrophobicity or hydrophilicity.",
            "parameters": [_SMILES_PARAM],
            "returns": "Estimated logP as a float; positive values indicate lipophilicity.",
            "minimal_example": "import chemtools.descriptors\nsmiles = \"c1ccccc1\"\nvalue = chemtools.descriptors.logp(smiles)\nprint(\"The estimated partition coefficient (logP) is\", value)",
            "use_case": "Screening a compound library for membrane permeability before assay selection.",
            "documentation": f"{DOC_BASE}/descriptors#logp",
            "origin": "builtin",
        },
        {
            "tool": "h_bond_donors",
            "module": "chemtools.descriptors",
            "description": "Counts hydrogen bond donors (NH and OH groups) in a compound's chemical structure.",
            "parameters": [_SMILES_PARAM],
            "returns": "Number of hydrogen bond donor groups as an integer.",
            "minimal_example": "import chemtools.descriptors\nsmiles = \"CCO\"\ndonors = chemtools.descriptors.h_bond_donors(smiles)\nprint(\"The compound has\", donors, \"hydrogen bond donor group(s)\")",
            "use_case": "Profiling hydrogen bonding capacity when predicting blood-brain barrier penetration.",
            "documentation": f"{DOC_BASE}/descriptors#h_bond_donors",
            "origin": "builtin",
        },
        {
            "tool": "h_bond_acceptors",
            "module": "chemtools.descriptors",
            "description": "Counts hydrogen bond acceptors (nitrogen and oxygen atoms) in a compound's chemical structure.",
            "parameters": [_SMILES_PARAM],
            "returns": "Number of hydrogen bond acceptor atoms as an integer.",
            "minimal_example": "import chemtools.descriptors\nsmiles = \"CC(=O)O\"\nacceptors = chemtools.descriptors.h_bond_acceptors(smiles)\nprint(\"The compound has\", acceptors, \"hydrogen bond acceptor atom(s)\")",
            "use_case": "Assessing solvation behavior for a solubility prediction pipeline.",
            "documentation": f"{DOC_BASE}/descriptors#h_bond_acceptors",
            "origin": "builtin",
        },
        {
            "tool": "canonical_smiles",
            "module": "chemtools.smiles",
            "description": "Converts a SMILES string into its canonical normalized form so equivalent spellings compare equal.",
            "parameters": [_SMILES_PARAM],
            "returns": "Canonical SMILES string.",
            "minimal_example": "import chemtools.smiles\nsmiles = \"OCC\"\ncanonical = chemtools.smiles.canonical_smiles(smiles)\nprint(\"The canonical SMILES form is\", canonical)",
            "use_case": "Deduplicating molecule records gathered from heterogeneous vendor catalogs.",
            "documentation": f"{DOC_BASE}/smiles#canonical_smiles",
            "origin": "builtin",
        },
        {
            "tool": "validate_smiles",
            "module": "chemtools.smiles",
            "description": "Checks whether a SMILES string parses into a valid molecular structure.",
            "parameters": [_param("smiles", "SMILES text", "Candidate SMILES string.")],
            "returns": "True when the SMILES parses, False otherwise.",
            "minimal_example": "import chemtools.smiles\nsmiles = \"C1=CC=CC=C1\"\nis_valid = chemtools.smiles.validate_smiles(smiles)\nprint(\"The SMILES string is valid:\", is_valid)",
            "use_case": "Filtering malformed structures out of a generated molecule stream before property computation.",
            "documentation": f"{DOC_BASE}/smiles#validate_smiles",
            "origin": "builtin",
        },
        {
            "tool": "molecular_formula",
            "module": "chemtools.descriptors",
            "description": "Derives the molecular formula of a compound from its SMILES structure, in Hill order.",
            "parameters": [_SMILES_PARAM],
            "returns": "Molecular formula string such as C9H8O4.",
            "minimal_example": "import chemtools.descriptors\nsmiles = \"CC(=O)Oc1ccccc1C(=O)O\"\nformula = chemtools.descriptors.molecular_formula(smiles)\nprint(\"The molecular formula of the compound is\", formula)",
            "use_case": "Cross-checking elemental composition against mass spectrometry results.",
            "documentation": f"{DOC_BASE}/descriptors#molecular_formula",
            "origin": "builtin",
        },
        {
            "tool": "heavy_atom_count",
            "module": "chemtools.descriptors",
            "description": "Counts the non-hydrogen heavy atoms in a molecular structure.",
            "parameters": [_SMILES_PARAM],
            "returns": "Number of heavy atoms as an integer.",
            "minimal_example": "import chemtools.descriptors\nsmiles = \"CCO\"\ncount = chemtools.descriptors.heavy_atom_count(smiles)\nprint(\"The molecule contains\", count, \"heavy atom(s)\")",
            "use_case": "Normalizing descriptor values by molecule size in a property prediction model.",
            "documentation": f"{DOC_BASE}/descriptors#heavy_atom_count",
            "origin": "builtin",
        },
        {
            "tool": "ring_count",
            "module": "chemtools.descriptors",
            "description": "Counts the rings present in a molecular structure.",
            "parameters": [_SMILES_PARAM],
            "returns": "Number of rings as an integer.",
            "minimal_example": "import chemtools.descriptors\nsmiles = \"c1ccc2ccccc2c1\"\nrings = chemtools.descriptors.ring_count(smiles)\nprint(\"The molecule contains\", rings, \"ring(s)\")",
            "use_case": "Selecting polycyclic scaffolds when triaging aromatic compound series.",
            "documentation": f"{DOC_BASE}/descriptors#ring_count",
            "origin": "builtin",
        },
        {
            "tool": "rotatable_bonds",
            "module": "chemtools.descriptors",
            "description": "Counts rotatable single bonds outside rings, a molecular flexibility descriptor.",
            "parameters": [_SMILES_PARAM],
            "returns": "Number of rotatable bonds as an integer.",
            "minimal_example": "import chemtools.descriptors\nsmiles = \"CCCCO\"\nbonds = chemtools.descriptors.rotatable_bonds(smiles)\nprint(\"The molecule has\", bonds, \"rotatable bond(s)\")",
            "use_case": "Estimating conformational flexibility for oral bioavailability screening.",
            "documentation": f"{DOC_BASE}/descriptors#rotatable_bonds",
            "origin": "builtin",
        },
        {
            "tool": "lipinski_profile",
            "module": "chemtools.rules",
            "description": "Evaluates a compound against Lipinski's Rule of Five drug-likeness criteria: molecular weight, logP, hydrogen bond donors, and hydrogen bond acceptors.",
            "parameters": [_SMILES_PARAM],
            "returns": "Mapping with mol_weight, logp, h_donors, h_acceptors, and a pass flag.",
            "minimal_example": "import chemtools.rules\nsmiles = \"C1=CC=CC=C1C2=CC=CC=C2\"\nprofile = chemtools.rules.lipinski_profile(smiles)\nprint(\"Lipinski drug-likeness profile:\", profile)",
            "use_case": "Assessing drug-likeness of candidate molecules before synthesis prioritization.",
            "documentation": f"{DOC_BASE}/rules#lipinski_profile",
            "origin": "builtin",
        },
        {
            "tool": "descriptor_summary",
            "module": "chemtools.descriptors",
            "description": "Computes a bundle of molecular descriptors (weight, logP, donors, acceptors, rings, heavy atoms) for a compound in one call.",
            "parameters": [_SMILES_PARAM],
            "returns": "Mapping of descriptor name to value.",
            "minimal_example": "import chemtools.descriptors\nsmiles = \"CCO\"\nsummary = chemtools.descriptors.descriptor_summary(smiles)\nprint(\"Molecular descriptor summary:\", summary)",
            "use_case": "Feeding a molecular descriptor computation sub-tool into a solubility prediction pipeline.",
            "documentation": f"{DOC_BASE}/descriptors#descriptor_summary",
            "origin": "builtin",
        },
        {
            "tool": "compound_lookup",
            "module": "chemtools.lookup",
            "description": "Fetches a compound record (IUPAC name, formula, weight, identifiers) from the public compound database by name, SMILES, or numeric compound id, serving a shipped offline cache first.",
            "parameters": [
                _param("identifier", "text", "Compound name, SMILES string, or numeric compound id."),
                _param("namespace", "enum: smiles | name | cid", "Identifier namespace to search."),
            ],
            "returns": "Mapping with iupac_name, formula, weight, and identifiers.",
            "minimal_example": "import chemtools.lookup\nidentifier = \"aspirin\"\nnamespace = \"name\"\nrecord = chemtools.lookup.compound_lookup(identifier, namespace)\nprint(\"The compound record for aspirin is:\", record)",
            "use_case": "Resolving trade names to structures while assembling a reaction dataset.",
            "documentation": f"{DOC_BASE}/lookup#compound_lookup",
            "origin": "builtin",
        },
        {
            "tool": "mock_echo_tool",
            "module": "chemtools.mocks",
            "description": "Echoes a text payload back verbatim; diagnostic mock tool for offline pipeline tests.",
            "parameters": [_param("payload", "text", "Text to echo.")],
            "returns": "The payload, unchanged.",
            "minimal_example": "import chemtools.mocks\npayload = \"probe\"\nresult = chemtools.mocks.mock_echo_tool(payload)\nprint(\"The echoed payload is:\", result)",
            "use_case": "Exercising the execution path without chemistry dependencies in integration tests.",
            "documentation": f"{DOC_BASE}/mocks#mock_echo_tool",
            "origin": "builtin",
        },
        {
            "tool": "mock_flaky_tool",
            "module": "chemtools.mocks",
            "description": "Fails a scripted number of times before echoing the payload; fault-injection mock for self-repair tests.",
            "parameters": [
                _param("payload", "text", "Text to echo once failures are exhausted."),
                _param("fail_times", "count", "How many calls fail before success."),
                _param("counter_file", "file name", "Counter file tracking attempts, relative to the working directory.", required=False),
            ],
            "returns": "The payload once the scripted failures are exhausted.",
            "minimal_example": "import chemtools.mocks\npayload = \"probe\"\nfail_times = 0\nresult = chemtools.mocks.mock_flaky_tool(payload, fail_times)\nprint(\"The flaky mock returned:\", result)",
            "use_case": "Scripting deterministic failure sequences to verify repair-budget enforcement.",
            "documentation": f"{DOC_BASE}/mocks#mock_flaky_tool",
            "origin": "builtin",
        },
    ]


def export_registry_specs(output_path: str | Path) -> int:
    """Write the registry document; returns the number of specs written."""
    records = registry_records()
    document = {"version": "1", "tools": records}
    Path(output_path).write_text(
        json.dumps(document, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    return len(records)

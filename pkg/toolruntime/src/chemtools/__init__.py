"""Function-level cheminformatics sub-tools targeted by generated scripts."""

from .descriptors import (
    descriptor_summary,
    h_bond_acceptors,
    h_bond_donors,
    heavy_atom_count,
    logp,
    molecular_formula,
    molecular_weight,
    ring_count,
    rotatable_bonds,
)
from .export import export_registry_specs, registry_records
from .lookup import NotFound, compound_lookup
from .mocks import mock_echo_tool, mock_fail_tool, mock_flaky_tool
from .rules import lipinski_profile
from .smiles import SmilesError, canonical_smiles, parse_smiles, validate_smiles

__version__ = "0.1.0"

"""Molecular descriptors computed from parsed SMILES graphs.

The logP estimate uses a compact additive atomic-contribution scheme
(aromatic and aliphatic carbon classes, heteroatoms, halogens, polar
hydrogens). It tracks published octanol/water values closely enough for
threshold rules, not for regression-grade prediction.
"""

from __future__ import annotations

from .smiles import ATOMIC_WEIGHTS, Molecule, SmilesError, parse_smiles

# Additive logP contributions per heavy-atom class and polar hydrogen.
LOGP_CONTRIBUTIONS = {
    "C_aromatic_h": 0.337,
    "C_aromatic": 0.296,
    "C_aliphatic": 0.36,
    "N_aromatic": -0.40,
    "N": -0.60,
    "O": -0.40,
    "S_aromatic": 0.41,
    "S": 0.25,
    "P": -0.20,
    "B": -0.10,
    "F": 0.14,
    "Cl": 0.65,
    "Br": 0.89,
    "I": 1.10,
    "polar_H": -0.30,
    "other": 0.0,
}


def _mol(smiles: str) -> Molecule:
    return parse_smiles(smiles)


def molecular_weight(smiles: str) -> float:
    """Standard average molecular weight in g/mol."""
    mol = _mol(smiles)
    total = 0.0
    for symbol, count in mol.element_counts().items():
        weight = ATOMIC_WEIGHTS.get(symbol)
        if weight is None:
            raise SmilesError(smiles, f"no atomic weight for element {symbol!r}")
        total += weight * count
    return round(total, 3)


def molecular_formula(smiles: str) -> str:
    """Molecular formula in Hill order (C, H, then alphabetical)."""
    counts = _mol(smiles).element_counts()

    def fragment(symbol: str) -> str:
        n = counts[symbol]
        return symbol if n == 1 else f"{symbol}{n}"

    parts = []
    if "C" in counts:
        parts.append(fragment("C"))
        if "H" in counts:
            parts.append(fragment("H"))
        rest = sorted(s for s in counts if s not in ("C", "H"))
    else:
        rest = sorted(counts)
    parts.extend(fragment(s) for s in rest)
    return "".join(parts)


def logp(smiles: str) -> float:
    """Estimated octanol/water partition coefficient."""
    mol = _mol(smiles)
    total = 0.0
    for i, atom in enumerate(mol.atoms):
        hydrogens = mol.total_h(i)
        if atom.symbol == "C":
            if atom.aromatic:
                key = "C_aromatic_h" if hydrogens else "C_aromatic"
            else:
                key = "C_aliphatic"
        elif atom.symbol in ("N", "S") and atom.aromatic:
            key = f"{atom.symbol}_aromatic"
        elif atom.symbol in LOGP_CONTRIBUTIONS:
            key = atom.symbol
        else:
            key = "other"
        total += LOGP_CONTRIBUTIONS[key]
        if atom.symbol in ("N", "O", "S") and hydrogens:
            total += hydrogens * LOGP_CONTRIBUTIONS["polar_H"]
    return round(total, 3)


def h_bond_donors(smiles: str) -> int:
    """Nitrogen or oxygen atoms bearing at least one hydrogen."""
    mol = _mol(smiles)
    return sum(
        1
        for i, atom in enumerate(mol.atoms)
        if atom.symbol in ("N", "O") and mol.total_h(i) > 0
    )


def h_bond_acceptors(smiles: str) -> int:
    """Nitrogen and oxygen atom count (the classic rule-of-five measure)."""
    mol = _mol(smiles)
    return sum(1 for atom in mol.atoms if atom.symbol in ("N", "O"))


def heavy_atom_count(smiles: str) -> int:
    return len(_mol(smiles).atoms)


def ring_count(smiles: str) -> int:
    """Number of independent rings (cyclomatic count)."""
    return _mol(smiles).ring_count()


def rotatable_bonds(smiles: str) -> int:
    """Acyclic single bonds whose endpoints both carry other heavy neighbors."""
    mol = _mol(smiles)
    ring = mol.ring_bonds()
    count = 0
    for index, bond in enumerate(mol.bonds):
        if index in ring or bond.order != 1 or bond.aromatic:
            continue
        if mol.heavy_degree(bond.a) >= 2 and mol.heavy_degree(bond.b) >= 2:
            count += 1
    return count


def descriptor_summary(smiles: str) -> dict[str, float | int | str]:
    """One-call bundle of the individual descriptors."""
    return {
        "formula": molecular_formula(smiles),
        "molecular_weight": molecular_weight(smiles),
        "logp": logp(smiles),
        "h_bond_donors": h_bond_donors(smiles),
        "h_bond_acceptors": h_bond_acceptors(smiles),
        "heavy_atoms": heavy_atom_count(smiles),
        "rings": ring_count(smiles),
        "rotatable_bonds": rotatable_bonds(smiles),
    }

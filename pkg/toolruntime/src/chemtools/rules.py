"""Drug-likeness rules built on the descriptor layer."""

from __future__ import annotations

from .descriptors import h_bond_acceptors, h_bond_donors, logp, molecular_weight


def lipinski_profile(smiles: str) -> dict[str, float | int | bool]:
    """Rule-of-five profile: weight, logP, donors, acceptors, and the verdict.

    Passes when molecular weight < 500, logP < 5, hydrogen bond donors < 5,
    and hydrogen bond acceptors < 10.
    """
    weight = molecular_weight(smiles)
    partition = logp(smiles)
    donors = h_bond_donors(smiles)
    acceptors = h_bond_acceptors(smiles)
    return {
        "mol_weight": weight,
        "logp": partition,
        "h_donors": donors,
        "h_acceptors": acceptors,
        "pass": weight < 500.0 and partition < 5.0 and donors < 5 and acceptors < 10,
    }

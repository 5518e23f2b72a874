"""SMILES parsing, hydrogen assignment, and canonicalization tests."""

from __future__ import annotations

import random

import pytest

from chemtools.smiles import (
    Molecule,
    SmilesError,
    canonical_smiles,
    parse_smiles,
    validate_smiles,
    write_smiles,
)

# 30-molecule canonicalization fixture set: organic subset, aromatics,
# kekulized rings, brackets, charges, fused rings, heteroaromatics.
FIXTURE_SET = [
    "O",
    "C",
    "CCO",
    "CO",
    "C=C",
    "C#N",
    "CC(=O)O",
    "c1ccccc1",
    "C1=CC=CC=C1",
    "Cc1ccccc1",
    "Oc1ccccc1",
    "Nc1ccccc1",
    "C1=CC=CC=C1C2=CC=CC=C2",
    "c1ccc2ccccc2c1",
    "C1CCCCC1",
    "C1CCCC1",
    "CC(C)Cc1ccc(cc1)C(C)C(=O)O",
    "CC(=O)Oc1ccccc1C(=O)O",
    "CC(=O)Nc1ccc(O)cc1",
    "Cn1cnc2c1c(=O)n(C)c(=O)n2C",
    "OCC(O)C(O)C(O)C(O)C=O",
    "CN1CCCC1c1cccnc1",
    "NC(=O)N",
    "[NH4+]",
    "[O-]c1ccccc1",
    "C[N+](C)(C)C",
    "c1ccsc1",
    "c1cc[nH]c1",
    "FC(F)(F)c1ccccc1",
    "ClC(Cl)Cl",
]


def hydrogens(smiles: str) -> list[int]:
    mol = parse_smiles(smiles)
    return [mol.total_h(i) for i in range(len(mol.atoms))]


class TestParsing:
    def test_water(self):
        mol = parse_smiles("O")
        assert len(mol.atoms) == 1
        assert mol.total_h(0) == 2

    @pytest.mark.parametrize(
        "smiles,expected",
        [
            ("C", [4]),
            ("CC", [3, 3]),
            ("C=C", [2, 2]),
            ("C#C", [1, 1]),
            ("CCO", [3, 2, 1]),
            ("N", [3]),
            ("c1ccccc1", [1] * 6),  # aromatic CH
            ("C1=CC=CC=C1", [1] * 6),  # kekulized benzene, same hydrogens
            ("n1ccccc1", [0, 1, 1, 1, 1, 1]),  # pyridine nitrogen bears no H
            ("[NH4+]", [4]),
            ("[O-]C", [0, 3]),
        ],
    )
    def test_hydrogen_assignment(self, smiles, expected):
        assert hydrogens(smiles) == expected

    def test_pyrrole_explicit_h(self):
        mol = parse_smiles("c1cc[nH]c1")
        nitrogen = next(i for i, a in enumerate(mol.atoms) if a.symbol == "N")
        assert mol.total_h(nitrogen) == 1

    def test_two_letter_elements(self):
        mol = parse_smiles("ClCCl")
        assert [a.symbol for a in mol.atoms] == ["Cl", "C", "Cl"]

    def test_bracket_charge_and_isotope(self):
        mol = parse_smiles("[13CH3+]")
        atom = mol.atoms[0]
        assert (atom.isotope, atom.charge, atom.explicit_h) == (13, 1, 3)

    def test_ring_closure_percent(self):
        assert parse_smiles("C%10CCCCC%10").ring_count() == 1

    def test_disconnected_components(self):
        mol = parse_smiles("O.O")
        assert len(mol.components()) == 2

    def test_stereo_markers_ignored(self):
        mol = parse_smiles("F/C=C/F")
        assert len(mol.atoms) == 4

    @pytest.mark.parametrize(
        "bad",
        ["", "   ", "C(", "C)", "C1CC", "[Xx]", "C=", "C==C", "[C", "1CC", "C12C"],
    )
    def test_invalid_inputs_rejected(self, bad):
        with pytest.raises(SmilesError):
            parse_smiles(bad)

    def test_error_names_the_input(self):
        with pytest.raises(SmilesError) as exc:
            parse_smiles("C(")
        assert "C(" in str(exc.value)


class TestAromaticityPerception:
    def test_kekulized_benzene_is_aromatic(self):
        mol = parse_smiles("C1=CC=CC=C1")
        assert all(a.aromatic for a in mol.atoms)
        assert all(b.aromatic for b in mol.bonds)

    def test_kekulized_and_aromatic_unify(self):
        assert canonical_smiles("C1=CC=CC=C1") == canonical_smiles("c1ccccc1")

    def test_biphenyl_forms_unify(self):
        assert canonical_smiles("C1=CC=CC=C1C2=CC=CC=C2") == canonical_smiles(
            "c1ccc(cc1)-c1ccccc1"
        )

    def test_cyclohexane_not_aromatized(self):
        assert not any(a.aromatic for a in parse_smiles("C1CCCCC1").atoms)

    def test_cyclohexadiene_not_aromatized(self):
        # 1,3-cyclohexadiene: bond orders do not alternate fully.
        assert not any(a.aromatic for a in parse_smiles("C1=CC=CCC1").atoms)


class TestCanonicalization:
    @pytest.mark.parametrize("smiles", FIXTURE_SET)
    def test_idempotent(self, smiles):
        once = canonical_smiles(smiles)
        assert canonical_smiles(once) == once

    @pytest.mark.parametrize(
        "left,right",
        [
            ("OCC", "CCO"),
            ("C(C)O", "CCO"),
            ("c1ccccc1C", "Cc1ccccc1"),
            ("C(=O)(C)O", "CC(=O)O"),
            ("N(C(N)=O)", "NC(=O)N"),
        ],
    )
    def test_equivalent_spellings_unify(self, left, right):
        assert canonical_smiles(left) == canonical_smiles(right)

    @pytest.mark.parametrize("smiles", FIXTURE_SET)
    def test_invariant_under_random_respelling(self, smiles):
        reference = canonical_smiles(smiles)
        mol = parse_smiles(smiles)
        rng = random.Random(hash(smiles) & 0xFFFF)
        for _ in range(5):
            priorities = list(range(len(mol.atoms)))
            rng.shuffle(priorities)
            respelled = write_smiles(mol, priorities)
            assert canonical_smiles(respelled) == reference, respelled

    def test_written_form_preserves_composition(self):
        for smiles in FIXTURE_SET:
            original = parse_smiles(smiles)
            round_tripped = parse_smiles(canonical_smiles(smiles))
            assert original.element_counts() == round_tripped.element_counts()
            assert original.ring_count() == round_tripped.ring_count()


class TestValidate:
    def test_valid(self):
        assert validate_smiles("C1=CC=CC=C1")

    def test_invalid(self):
        assert not validate_smiles("C(")

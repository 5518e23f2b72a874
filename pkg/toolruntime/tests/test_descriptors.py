"""Descriptor values against hand-computed oracles."""

from __future__ import annotations

import pytest

from chemtools.descriptors import (
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
from chemtools.smiles import SmilesError

BIPHENYL = "C1=CC=CC=C1C2=CC=CC=C2"


class TestMolecularWeight:
    def test_biphenyl(self):
        assert molecular_weight(BIPHENYL) == pytest.approx(154.21, abs=0.01)

    def test_water_hand_sum(self):
        # 2 x 1.008 + 15.999 = 18.015
        assert molecular_weight("O") == pytest.approx(18.02, abs=0.01)

    def test_ethanol_hand_sum(self):
        # 2 x 12.011 + 6 x 1.008 + 15.999 = 46.069
        assert molecular_weight("CCO") == pytest.approx(46.069, abs=0.001)

    def test_empty_input_is_parse_error(self):
        with pytest.raises(SmilesError):
            molecular_weight("")

    @pytest.mark.parametrize(
        "smiles",
        ["C", "O", "N", "CCO", BIPHENYL, "c1ccccc1", "CC(=O)Oc1ccccc1C(=O)O"],
    )
    def test_strictly_positive(self, smiles):
        assert molecular_weight(smiles) > 0.0


class TestFormula:
    @pytest.mark.parametrize(
        "smiles,formula",
        [
            ("CC(=O)Oc1ccccc1C(=O)O", "C9H8O4"),
            (BIPHENYL, "C12H10"),
            ("O", "H2O"),
            ("N", "H3N"),
            ("CCO", "C2H6O"),
            ("Cn1cnc2c1c(=O)n(C)c(=O)n2C", "C8H10N4O2"),
        ],
    )
    def test_hill_order(self, smiles, formula):
        assert molecular_formula(smiles) == formula


class TestHydrogenBonding:
    def test_ethane_no_heteroatoms(self):
        assert h_bond_donors("CC") == 0
        assert h_bond_acceptors("CC") == 0

    def test_ethanol_hand_count(self):
        # One OH group; one oxygen atom.
        assert h_bond_donors("CCO") == 1
        assert h_bond_acceptors("CCO") == 1

    def test_biphenyl_none(self):
        assert h_bond_donors(BIPHENYL) == 0
        assert h_bond_acceptors(BIPHENYL) == 0

    def test_urea(self):
        # Two NH2 groups donate; two nitrogens and one oxygen accept.
        assert h_bond_donors("NC(=O)N") == 2
        assert h_bond_acceptors("NC(=O)N") == 3


class TestLogP:
    def test_biphenyl_near_four(self):
        assert logp(BIPHENYL) == pytest.approx(4.0, abs=0.2)

    def test_benzene_positive(self):
        assert 1.5 < logp("c1ccccc1") < 2.5

    def test_polar_molecule_lower_than_apolar(self):
        assert logp("OCC(O)CO") < logp("CCCCCC")

    def test_kekulized_matches_aromatic_spelling(self):
        assert logp("C1=CC=CC=C1") == logp("c1ccccc1")


class TestCounts:
    @pytest.mark.parametrize(
        "smiles,rings",
        [("CCO", 0), ("C1CCCCC1", 1), ("c1ccc2ccccc2c1", 2), (BIPHENYL, 2)],
    )
    def test_ring_count(self, smiles, rings):
        assert ring_count(smiles) == rings

    @pytest.mark.parametrize("smiles,count", [("CCO", 3), (BIPHENYL, 12), ("O", 1)])
    def test_heavy_atoms(self, smiles, count):
        assert heavy_atom_count(smiles) == count

    @pytest.mark.parametrize(
        "smiles,count",
        [
            ("CCO", 0),  # both bonds end at a terminal heavy atom
            ("CCCCO", 2),
            ("CC", 0),
            ("c1ccccc1", 0),
            (BIPHENYL, 1),  # the aryl-aryl single bond rotates
        ],
    )
    def test_rotatable_bonds(self, smiles, count):
        assert rotatable_bonds(smiles) == count

    def test_summary_bundle_consistent(self):
        summary = descriptor_summary(BIPHENYL)
        assert summary["molecular_weight"] == molecular_weight(BIPHENYL)
        assert summary["logp"] == logp(BIPHENYL)
        assert summary["rings"] == 2
        assert summary["formula"] == "C12H10"

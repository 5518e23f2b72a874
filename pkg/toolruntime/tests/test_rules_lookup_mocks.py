"""Drug-likeness rule, compound lookup, and mock tool tests."""

from __future__ import annotations

import os
import subprocess
import sys

import pytest

from chemtools.descriptors import h_bond_acceptors, h_bond_donors, logp, molecular_weight
from chemtools.lookup import NotFound, compound_lookup
from chemtools.mocks import mock_echo_tool, mock_fail_tool, mock_flaky_tool
from chemtools.rules import lipinski_profile
from chemtools.smiles import SmilesError

BIPHENYL = "C1=CC=CC=C1C2=CC=CC=C2"


class TestLipinski:
    def test_biphenyl_profile(self):
        profile = lipinski_profile(BIPHENYL)
        assert profile["h_donors"] == 0
        assert profile["h_acceptors"] == 0
        assert profile["pass"] is True

    def test_ethane(self):
        profile = lipinski_profile("CC")
        assert profile["h_donors"] == 0 and profile["h_acceptors"] == 0

    def test_ethanol_hand_counts(self):
        profile = lipinski_profile("CCO")
        assert profile["h_donors"] == 1 and profile["h_acceptors"] == 1

    @pytest.mark.parametrize(
        "smiles",
        [BIPHENYL, "CCO", "CC(=O)Oc1ccccc1C(=O)O", "Cn1cnc2c1c(=O)n(C)c(=O)n2C",
         "OCC(O)C(O)C(O)C(O)C=O", "CC(C)Cc1ccc(cc1)C(C)C(=O)O"],
    )
    def test_pass_flag_consistent_with_components(self, smiles):
        profile = lipinski_profile(smiles)
        expected = (
            molecular_weight(smiles) < 500
            and logp(smiles) < 5
            and h_bond_donors(smiles) < 5
            and h_bond_acceptors(smiles) < 10
        )
        assert profile["pass"] == expected

    def test_parse_failure_propagates(self):
        with pytest.raises(SmilesError):
            lipinski_profile("C(")


class TestLookup:
    def test_aspirin_by_name(self):
        record = compound_lookup("aspirin", "name")
        assert record["formula"] == "C9H8O4"
        assert record["identifiers"]["cid"] == 2244

    def test_name_lookup_case_insensitive(self):
        assert compound_lookup("Aspirin", "name") == compound_lookup("aspirin", "name")

    def test_unknown_identifier(self):
        with pytest.raises(NotFound):
            compound_lookup("unobtainium dihydride", "name")

    def test_invalid_smiles_rejected_before_lookup(self):
        with pytest.raises(SmilesError):
            compound_lookup("C(", "smiles")

    def test_smiles_namespace_matches_alternate_spelling(self):
        # OCC and CCO both canonicalize to the cached ethanol entry.
        record = compound_lookup("OCC", "smiles")
        assert record["iupac_name"] == "ethanol"

    def test_kekulized_benzene_hits_aromatic_cache_entry(self):
        record = compound_lookup("C1=CC=CC=C1", "smiles")
        assert record["formula"] == "C6H6"

    def test_cid_lookup(self):
        assert compound_lookup("962", "cid")["iupac_name"] == "oxidane"

    def test_bad_namespace(self):
        with pytest.raises(ValueError):
            compound_lookup("aspirin", "inchi")

    def test_nonnumeric_cid(self):
        with pytest.raises(ValueError):
            compound_lookup("abc", "cid")


class TestMocks:
    def test_echo(self):
        assert mock_echo_tool("x") == "x"

    def test_fail_import_mode_names_module(self):
        with pytest.raises(ImportError) as exc:
            mock_fail_tool("import")
        assert "nonexistent_helper" in str(exc.value)

    def test_fail_value_mode(self):
        with pytest.raises(ValueError):
            mock_fail_tool("value")

    def test_flaky_counter_sequencing(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        with pytest.raises(ValueError):
            mock_flaky_tool("ok", 2)
        with pytest.raises(ValueError):
            mock_flaky_tool("ok", 2)
        assert mock_flaky_tool("ok", 2) == "ok"
        # Counter-file oracle: three attempts recorded.
        assert (tmp_path / "flaky_counter.txt").read_text() == "3"

    def test_flaky_zero_failures_immediate_success(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        assert mock_flaky_tool("ready", 0) == "ready"

"""Compound record lookup with an offline cache and optional live fallback.

The shipped cache covers the compounds exercised by tests and examples, so
CI and sandboxed runs never touch the network. Live lookups against the
public compound database are opt-in.
"""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

from .smiles import SmilesError, canonical_smiles

LIVE_URL = "https://pubchem.ncbi.nlm.nih.gov/rest/pug/compound/{namespace}/{identifier}/property/IUPACName,MolecularFormula,MolecularWeight,CanonicalSMILES/JSON"

NAMESPACES = ("smiles", "name", "cid")


class NotFound(LookupError):
    def __init__(self, identifier: str, namespace: str):
        super().__init__(f"no compound for {namespace}={identifier!r}")
        self.identifier = identifier
        self.namespace = namespace


@lru_cache(maxsize=1)
def _cache_index() -> dict[tuple[str, str], dict]:
    raw = resources.files("chemtools").joinpath("data/compound_cache.json").read_text("utf-8")
    index: dict[tuple[str, str], dict] = {}
    for entry in json.loads(raw)["compounds"]:
        record = {
            "iupac_name": entry["iupac_name"],
            "formula": entry["formula"],
            "weight": entry["weight"],
            "identifiers": {"cid": entry["cid"], "smiles": entry["smiles"]},
        }
        for name in entry["names"]:
            index[("name", name.lower())] = record
        index[("cid", str(entry["cid"]))] = record
        index[("smiles", canonical_smiles(entry["smiles"]))] = record
    return index


def _normalize(identifier: str, namespace: str) -> str:
    if namespace == "name":
        return identifier.strip().lower()
    if namespace == "cid":
        try:
            return str(int(str(identifier).strip()))
        except ValueError as exc:
            raise ValueError(f"cid must be numeric, got {identifier!r}") from exc
    # SMILES inputs are validated and canonicalized before any lookup, so
    # equivalent spellings hit the same cache entry.
    try:
        return canonical_smiles(identifier)
    except SmilesError:
        raise


def compound_lookup(identifier: str, namespace: str, allow_network: bool = False) -> dict:
    """First matching compound record for the identifier.

    Serves the shipped offline cache; when ``allow_network`` is set and the
    cache misses, queries the public database instead.
    """
    if namespace not in NAMESPACES:
        raise ValueError(f"namespace must be one of {NAMESPACES}, got {namespace!r}")
    if not str(identifier).strip():
        raise ValueError("identifier must be non-empty")
    key = _normalize(str(identifier), namespace)
    record = _cache_index().get((namespace, key))
    if record is not None:
        return dict(record)
    if allow_network:
        return _live_lookup(str(identifier), namespace)
    raise NotFound(str(identifier), namespace)


def _live_lookup(identifier: str, namespace: str) -> dict:
    import requests

    url = LIVE_URL.format(namespace=namespace, identifier=identifier)
    try:
        response = requests.get(url, timeout=30)
        response.raise_for_status()
        properties = response.json()["PropertyTable"]["Properties"][0]
    except Exception as exc:
        raise NotFound(identifier, namespace) from exc
    return {
        "iupac_name": properties.get("IUPACName", ""),
        "formula": properties.get("MolecularFormula", ""),
        "weight": float(properties.get("MolecularWeight", 0.0)),
        "identifiers": {
            "cid": properties.get("CID"),
            "smiles": properties.get("CanonicalSMILES", ""),
        },
    }

"""SMILES parsing, molecular graphs, and canonical form generation.

Supports the organic subset plus bracket atoms (isotope, charge, explicit
hydrogens), branches, ring closures, and aromatic lowercase notation.
Stereochemistry markers are accepted and ignored. Kekulized six-membered
carbon/nitrogen rings with alternating bonds are perceived as aromatic so
equivalent spellings normalize to one canonical form.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

ORGANIC_SUBSET = {"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"}
AROMATIC_SYMBOLS = {"b", "c", "n", "o", "p", "s", "se", "as"}

# Smallest-first normal valences used for implicit hydrogen assignment.
VALENCES: dict[str, tuple[int, ...]] = {
    "B": (3,),
    "C": (4,),
    "N": (3, 5),
    "O": (2,),
    "P": (3, 5),
    "S": (2, 4, 6),
    "F": (1,),
    "Cl": (1,),
    "Br": (1,),
    "I": (1,),
}

ATOMIC_WEIGHTS: dict[str, float] = {
    "H": 1.008, "He": 4.003, "Li": 6.94, "Be": 9.012, "B": 10.81, "C": 12.011,
    "N": 14.007, "O": 15.999, "F": 18.998, "Ne": 20.180, "Na": 22.990,
    "Mg": 24.305, "Al": 26.982, "Si": 28.085, "P": 30.974, "S": 32.06,
    "Cl": 35.45, "K": 39.098, "Ca": 40.078, "Ti": 47.867, "Cr": 51.996,
    "Mn": 54.938, "Fe": 55.845, "Co": 58.933, "Ni": 58.693, "Cu": 63.546,
    "Zn": 65.38, "Ga": 69.723, "Ge": 72.630, "As": 74.922, "Se": 78.971,
    "Br": 79.904, "Kr": 83.798, "Ag": 107.868, "Cd": 112.414, "Sn": 118.710,
    "Sb": 121.760, "Te": 127.60, "I": 126.904, "Ba": 137.327, "Pt": 195.084,
    "Au": 196.967, "Hg": 200.592, "Pb": 207.2, "Bi": 208.980,
}


class SmilesError(ValueError):
    """Raised when a SMILES string cannot be parsed; names the input."""

    def __init__(self, smiles: str, reason: str):
        super().__init__(f"cannot parse SMILES {smiles!r}: {reason}")
        self.smiles = smiles
        self.reason = reason


@dataclass
class Atom:
    symbol: str
    aromatic: bool = False
    charge: int = 0
    isotope: int = 0
    explicit_h: int | None = None


@dataclass
class Bond:
    a: int
    b: int
    order: int = 1
    aromatic: bool = False

    def other(self, index: int) -> int:
        return self.b if index == self.a else self.a


@dataclass
class Molecule:
    atoms: list[Atom] = field(default_factory=list)
    bonds: list[Bond] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._neighbors: dict[int, list[int]] | None = None

    def add_atom(self, atom: Atom) -> int:
        self.atoms.append(atom)
        self._neighbors = None
        return len(self.atoms) - 1

    def add_bond(self, a: int, b: int, order: int = 1, aromatic: bool = False) -> None:
        self.bonds.append(Bond(a, b, order, aromatic))
        self._neighbors = None

    def neighbors(self, index: int) -> list[int]:
        if self._neighbors is None:
            table: dict[int, list[int]] = {i: [] for i in range(len(self.atoms))}
            for bond_index, bond in enumerate(self.bonds):
                table[bond.a].append(bond_index)
                table[bond.b].append(bond_index)
            self._neighbors = table
        return self._neighbors[index]

    def bond_between(self, a: int, b: int) -> Bond | None:
        for bond_index in self.neighbors(a):
            bond = self.bonds[bond_index]
            if bond.other(a) == b:
                return bond
        return None

    def heavy_degree(self, index: int) -> int:
        return len(self.neighbors(index))

    def implicit_h(self, index: int) -> int:
        atom = self.atoms[index]
        if atom.explicit_h is not None:
            return 0
        valences = VALENCES.get(atom.symbol)
        if not valences:
            return 0
        bond_sum = sum(
            self.bonds[i].order if not self.bonds[i].aromatic else 1
            for i in self.neighbors(index)
        )
        if atom.aromatic:
            bond_sum += 1  # delocalized contribution
            valences = valences[:1]  # no hypervalent aromatic atoms
        for valence in valences:
            if atom.symbol in ("N", "O", "P", "S"):
                effective = valence + atom.charge
            else:
                effective = valence - abs(atom.charge)
            if effective >= bond_sum:
                return effective - bond_sum
        return 0

    def total_h(self, index: int) -> int:
        atom = self.atoms[index]
        if atom.explicit_h is not None:
            return atom.explicit_h
        return self.implicit_h(index)

    def element_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        hydrogens = 0
        for i, atom in enumerate(self.atoms):
            counts[atom.symbol] = counts.get(atom.symbol, 0) + 1
            hydrogens += self.total_h(i)
        if hydrogens:
            counts["H"] = counts.get("H", 0) + hydrogens
        return counts

    def components(self) -> list[list[int]]:
        seen: set[int] = set()
        result = []
        for start in range(len(self.atoms)):
            if start in seen:
                continue
            stack, component = [start], []
            seen.add(start)
            while stack:
                current = stack.pop()
                component.append(current)
                for bond_index in self.neighbors(current):
                    other = self.bonds[bond_index].other(current)
                    if other not in seen:
                        seen.add(other)
                        stack.append(other)
            result.append(sorted(component))
        return result

    def ring_count(self) -> int:
        return len(self.bonds) - len(self.atoms) + len(self.components())

    def ring_bonds(self) -> set[int]:
        """Indices of bonds participating in at least one cycle."""
        ring: set[int] = set()
        for bond_index in range(len(self.bonds)):
            if self._connected_without(bond_index):
                ring.add(bond_index)
        return ring

    def _connected_without(self, bond_index: int) -> bool:
        bond = self.bonds[bond_index]
        target = bond.b
        seen = {bond.a}
        stack = [bond.a]
        while stack:
            current = stack.pop()
            for i in self.neighbors(current):
                if i == bond_index:
                    continue
                other = self.bonds[i].other(current)
                if other == target:
                    return True
                if other not in seen:
                    seen.add(other)
                    stack.append(other)
        return False


_BRACKET_RE = re.compile(
    r"^(?P<isotope>\d+)?"
    r"(?P<symbol>se|as|b|c|n|o|p|s|[A-Z][a-z]?)"
    r"(?P<chiral>@{1,2}(?:TH\d|AL\d|SP\d|TB\d+|OH\d+)?)?"
    r"(?P<hcount>H\d*)?"
    r"(?P<charge>\+{1,3}|-{1,3}|\+\d+|-\d+)?"
    r"(?::(?P<map>\d+))?$"
)

_TWO_LETTER = ("Cl", "Br")


def parse_smiles(smiles: str) -> Molecule:
    """Parse a SMILES string into a molecular graph."""
    if not isinstance(smiles, str) or not smiles.strip():
        raise SmilesError(str(smiles), "empty input")
    text = smiles.strip()
    mol = Molecule()
    prev: int | None = None
    pending_bond: str | None = None
    branch_stack: list[int] = []
    ring_map: dict[str, tuple[int, str | None]] = {}

    def attach(index: int) -> None:
        nonlocal prev, pending_bond
        if prev is not None:
            _add_parsed_bond(mol, prev, index, pending_bond, text)
        prev = index
        pending_bond = None

    i = 0
    while i < len(text):
        ch = text[i]
        if ch in "-=#:/\\":
            if pending_bond is not None:
                raise SmilesError(text, f"double bond symbol at position {i}")
            pending_bond = ch
            i += 1
        elif ch == "(":
            if prev is None:
                raise SmilesError(text, "branch before any atom")
            branch_stack.append(prev)
            i += 1
        elif ch == ")":
            if not branch_stack:
                raise SmilesError(text, "unmatched closing parenthesis")
            prev = branch_stack.pop()
            i += 1
        elif ch == ".":
            prev = None
            pending_bond = None
            i += 1
        elif ch == "[":
            end = text.find("]", i)
            if end == -1:
                raise SmilesError(text, "unterminated bracket atom")
            index = _parse_bracket(mol, text, text[i + 1 : end])
            attach(index)
            i = end + 1
        elif ch == "%":
            if i + 2 >= len(text) or not text[i + 1 : i + 3].isdigit():
                raise SmilesError(text, f"malformed ring closure at position {i}")
            _close_ring(mol, ring_map, text[i + 1 : i + 3], prev, pending_bond, text)
            pending_bond = None
            i += 3
        elif ch.isdigit():
            _close_ring(mol, ring_map, ch, prev, pending_bond, text)
            pending_bond = None
            i += 1
        else:
            symbol = None
            if text[i : i + 2] in _TWO_LETTER:
                symbol = text[i : i + 2]
                i += 2
            elif ch in "BCNOPSFI":
                symbol = ch
                i += 1
            elif ch in "bcnops":
                symbol = ch
                i += 1
            else:
                raise SmilesError(text, f"unexpected character {ch!r} at position {i}")
            aromatic = symbol.islower()
            index = mol.add_atom(Atom(symbol=symbol.capitalize(), aromatic=aromatic))
            attach(index)

    if branch_stack:
        raise SmilesError(text, "unmatched opening parenthesis")
    if ring_map:
        raise SmilesError(text, f"unclosed ring bond(s): {sorted(ring_map)}")
    if pending_bond is not None:
        raise SmilesError(text, "dangling bond symbol at end of input")
    if not mol.atoms:
        raise SmilesError(text, "no atoms")
    _perceive_kekulized_aromaticity(mol)
    return mol


def _parse_bracket(mol: Molecule, text: str, body: str) -> int:
    match = _BRACKET_RE.match(body)
    if not match:
        raise SmilesError(text, f"malformed bracket atom [{body}]")
    symbol = match.group("symbol")
    aromatic = symbol[0].islower()
    canonical_symbol = symbol.capitalize() if aromatic else symbol
    if not aromatic and symbol not in ATOMIC_WEIGHTS and symbol != "H":
        raise SmilesError(text, f"unknown element {symbol!r}")

    hcount = match.group("hcount")
    explicit_h = 0
    if hcount:
        explicit_h = int(hcount[1:]) if len(hcount) > 1 else 1

    charge_text = match.group("charge") or ""
    charge = 0
    if charge_text:
        if charge_text in ("+", "++", "+++", "-", "--", "---"):
            charge = charge_text.count("+") - charge_text.count("-")
        else:
            charge = int(charge_text)

    isotope = int(match.group("isotope")) if match.group("isotope") else 0
    return mol.add_atom(
        Atom(
            symbol=canonical_symbol,
            aromatic=aromatic,
            charge=charge,
            isotope=isotope,
            explicit_h=explicit_h,
        )
    )


def _add_parsed_bond(
    mol: Molecule, a: int, b: int, symbol: str | None, text: str
) -> None:
    if a == b:
        raise SmilesError(text, "self bond")
    if mol.bond_between(a, b) is not None:
        raise SmilesError(text, f"duplicate bond between atoms {a} and {b}")
    if symbol in (None, "/", "\\"):
        both_aromatic = mol.atoms[a].aromatic and mol.atoms[b].aromatic
        if symbol is None and both_aromatic:
            mol.add_bond(a, b, order=1, aromatic=True)
        else:
            mol.add_bond(a, b, order=1)
    elif symbol == "-":
        mol.add_bond(a, b, order=1)
    elif symbol == "=":
        mol.add_bond(a, b, order=2)
    elif symbol == "#":
        mol.add_bond(a, b, order=3)
    elif symbol == ":":
        mol.add_bond(a, b, order=1, aromatic=True)
    else:  # pragma: no cover - scanner restricts symbols
        raise SmilesError(text, f"unsupported bond symbol {symbol!r}")


def _close_ring(
    mol: Molecule,
    ring_map: dict[str, tuple[int, str | None]],
    label: str,
    prev: int | None,
    pending_bond: str | None,
    text: str,
) -> None:
    if prev is None:
        raise SmilesError(text, "ring closure before any atom")
    if label in ring_map:
        start, start_bond = ring_map.pop(label)
        symbol = pending_bond or start_bond
        _add_parsed_bond(mol, start, prev, symbol, text)
    else:
        ring_map[label] = (prev, pending_bond)


def _perceive_kekulized_aromaticity(mol: Molecule) -> None:
    """Flag alternating-bond six-membered C/N rings as aromatic."""
    rings = _six_membered_rings(mol)
    for ring in rings:
        atoms_ok = all(
            mol.atoms[i].symbol in ("C", "N")
            and mol.atoms[i].charge == 0
            and not mol.atoms[i].aromatic
            for i in ring
        )
        if not atoms_ok:
            continue
        orders = []
        bonds = []
        for k in range(6):
            bond = mol.bond_between(ring[k], ring[(k + 1) % 6])
            if bond is None or bond.aromatic:
                orders = []
                break
            orders.append(bond.order)
            bonds.append(bond)
        if len(orders) != 6:
            continue
        if orders not in ([1, 2, 1, 2, 1, 2], [2, 1, 2, 1, 2, 1]):
            continue
        for i in ring:
            mol.atoms[i].aromatic = True
        for bond in bonds:
            bond.order = 1
            bond.aromatic = True


def _six_membered_rings(mol: Molecule) -> list[list[int]]:
    rings: list[list[int]] = []
    seen: set[frozenset[int]] = set()

    def walk(path: list[int]) -> None:
        current = path[-1]
        for bond_index in mol.neighbors(current):
            other = mol.bonds[bond_index].other(current)
            if other == path[0] and len(path) == 6:
                key = frozenset(path)
                if key not in seen:
                    seen.add(key)
                    rings.append(list(path))
            elif other not in path and len(path) < 6 and other > path[0]:
                walk(path + [other])

    for start in range(len(mol.atoms)):
        walk([start])
    return rings


# ---------------------------------------------------------------------------
# Canonical ranking and writing


def canonical_ranks(mol: Molecule) -> list[int]:
    """Order-invariant atom ranks via iterative neighborhood refinement."""
    n = len(mol.atoms)
    invariants = []
    for i, atom in enumerate(mol.atoms):
        invariants.append(
            (
                atom.symbol,
                atom.aromatic,
                mol.heavy_degree(i),
                mol.total_h(i),
                atom.charge,
                atom.isotope,
            )
        )
    ranks = _dense_ranks(invariants)
    while True:
        ranks = _refine(mol, ranks)
        if len(set(ranks)) == n:
            return ranks
        # Split the smallest tied class and refine again; atoms still tied
        # after refinement are graph-equivalent, so the choice cannot change
        # the written form.
        ranks = _split_first_tie(ranks)


def _refine(mol: Molecule, ranks: list[int]) -> list[int]:
    while True:
        signatures = []
        for i in range(len(mol.atoms)):
            neighborhood = sorted(
                (
                    (
                        "a"
                        if mol.bonds[b].aromatic
                        else str(mol.bonds[b].order)
                    ),
                    ranks[mol.bonds[b].other(i)],
                )
                for b in mol.neighbors(i)
            )
            signatures.append((ranks[i], tuple(neighborhood)))
        new_ranks = _dense_ranks(signatures)
        if new_ranks == ranks:
            return ranks
        ranks = new_ranks


def _dense_ranks(keys: list) -> list[int]:
    order = {key: rank for rank, key in enumerate(sorted(set(keys)))}
    return [order[key] for key in keys]


def _split_first_tie(ranks: list[int]) -> list[int]:
    counts: dict[int, list[int]] = {}
    for i, rank in enumerate(ranks):
        counts.setdefault(rank, []).append(i)
    tied_rank = min(r for r, members in counts.items() if len(members) > 1)
    chosen = counts[tied_rank][0]
    keys = [(ranks[i], 0 if i == chosen else 1) for i in range(len(ranks))]
    return _dense_ranks(keys)


def write_smiles(mol: Molecule, priorities: list[int] | None = None) -> str:
    """Write SMILES visiting atoms in priority order (canonical by default)."""
    if priorities is None:
        priorities = canonical_ranks(mol)
    pieces = []
    for component in mol.components():
        pieces.append(_write_component(mol, component, priorities))
    return ".".join(sorted(pieces))


def _write_component(mol: Molecule, component: list[int], priorities: list[int]) -> str:
    start = min(component, key=lambda i: (priorities[i], i))

    # Pre-pass: build the DFS tree in priority order, collecting back edges.
    children: dict[int, list[tuple[int, int]]] = {i: [] for i in component}
    back_edges: list[tuple[int, int, int]] = []  # (bond_index, from, to)
    visited: set[int] = {start}
    used: set[int] = set()

    def explore(i: int) -> None:
        for bond_index in sorted(
            mol.neighbors(i),
            key=lambda b: (priorities[mol.bonds[b].other(i)], mol.bonds[b].other(i)),
        ):
            if bond_index in used:
                continue
            other = mol.bonds[bond_index].other(i)
            used.add(bond_index)
            if other in visited:
                back_edges.append((bond_index, i, other))
            else:
                visited.add(other)
                children[i].append((bond_index, other))
                explore(other)

    explore(start)

    digits_at: dict[int, list[tuple[int, int]]] = {i: [] for i in component}
    for digit, (bond_index, a, b) in enumerate(back_edges, start=1):
        digits_at[a].append((digit, bond_index))
        digits_at[b].append((digit, bond_index))

    def bond_symbol(bond: Bond) -> str:
        if bond.aromatic:
            return ""
        if bond.order == 2:
            return "="
        if bond.order == 3:
            return "#"
        if mol.atoms[bond.a].aromatic and mol.atoms[bond.b].aromatic:
            return "-"  # single bond between aromatic atoms must be explicit
        return ""

    def atom_token(i: int) -> str:
        atom = mol.atoms[i]
        symbol = atom.symbol.lower() if atom.aromatic else atom.symbol
        total_h = mol.total_h(i)
        needs_bracket = (
            atom.charge != 0
            or atom.isotope != 0
            or atom.symbol not in ORGANIC_SUBSET
            or (atom.explicit_h is not None and _bare_h_mismatch(mol, i))
        )
        if not needs_bracket:
            return symbol
        h_part = "" if total_h == 0 else ("H" if total_h == 1 else f"H{total_h}")
        if atom.charge == 0:
            charge_part = ""
        elif atom.charge in (1, -1):
            charge_part = "+" if atom.charge == 1 else "-"
        else:
            charge_part = f"{atom.charge:+d}"
        isotope_part = str(atom.isotope) if atom.isotope else ""
        return f"[{isotope_part}{symbol}{h_part}{charge_part}]"

    def emit(i: int, parent_bond: Bond | None) -> str:
        text = bond_symbol(parent_bond) if parent_bond is not None else ""
        text += atom_token(i)
        for digit, bond_index in sorted(digits_at[i]):
            bond = mol.bonds[bond_index]
            label = str(digit) if digit < 10 else f"%{digit:02d}"
            text += bond_symbol(bond) + label
        kids = children[i]
        for position, (bond_index, child) in enumerate(kids):
            child_text = emit(child, mol.bonds[bond_index])
            text += f"({child_text})" if position < len(kids) - 1 else child_text
        return text

    return emit(start, None)


def canonical_smiles(smiles: str) -> str:
    """Normalize a SMILES string to its canonical form.

    Idempotent: canonical_smiles(canonical_smiles(s)) == canonical_smiles(s),
    and equivalent spellings of one structure map to the same output.
    """
    return write_smiles(parse_smiles(smiles))


def validate_smiles(smiles: str) -> bool:
    """True when the SMILES string parses into a molecular graph."""
    try:
        parse_smiles(smiles)
        return True
    except SmilesError:
        return False


def _bare_h_mismatch(mol: Molecule, index: int) -> bool:
    """Would the bare (bracket-free) form imply a different hydrogen count?"""
    atom = mol.atoms[index]
    actual = mol.total_h(index)
    valences = VALENCES.get(atom.symbol)
    if not valences:
        return True
    bond_sum = sum(
        mol.bonds[b].order if not mol.bonds[b].aromatic else 1
        for b in mol.neighbors(index)
    )
    if atom.aromatic:
        bond_sum += 1
    for valence in valences:
        if valence >= bond_sum:
            return (valence - bond_sum) != actual
    return actual != 0

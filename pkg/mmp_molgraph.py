"""
Mol2Trans Molecule Graph Module
Parses, canonicalizes and writes molecules in the supported SMILES subset
"""

import logging
import re
from dataclasses import dataclass
from enum import Enum
from functools import cached_property, lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx

from mmp_errors import MoleculeError, SmilesSyntaxError, UnsupportedFeature, ValenceError

logger = logging.getLogger(__name__)


WILDCARD = '*'
ORGANIC_SUBSET = ('Cl', 'Br', 'B', 'C', 'N', 'O', 'P', 'S', 'F', 'I')
AROMATIC_SUBSET = ('b', 'c', 'n', 'o', 'p', 's')

# Standard organic-subset valences; the first entry is the default
VALENCES: Dict[str, Tuple[int, ...]] = {
    'B': (3,),
    'C': (4,),
    'N': (3, 5),
    'O': (2,),
    'P': (3, 5),
    'S': (2, 4, 6),
    'F': (1,),
    'Cl': (1,),
    'Br': (1,),
    'I': (1,),
}

MAX_CHARGE = 2

_BRACKET_RE = re.compile(
    r'^(?P<isotope>\d+)?'
    r'(?P<symbol>\*|[A-Z][a-z]?|[a-z]{1,2})'
    r'(?P<chiral>@+)?'
    r'(?P<hydrogens>H\d*)?'
    r'(?P<charge>\+\+|--|[+-]\d*)?'
    r'(?::(?P<map>\d+))?$'
)


class BondOrder(Enum):
    SINGLE = 'single'
    DOUBLE = 'double'
    TRIPLE = 'triple'
    AROMATIC = 'aromatic'

    @property
    def valence(self) -> int:
        """Contribution to the bond-order sum (aromatic bonds count as 1)"""
        return _BOND_VALENCE[self]


_BOND_VALENCE = {
    BondOrder.SINGLE: 1,
    BondOrder.DOUBLE: 2,
    BondOrder.TRIPLE: 3,
    BondOrder.AROMATIC: 1,
}

_BOND_SYMBOLS = {
    '-': BondOrder.SINGLE,
    '=': BondOrder.DOUBLE,
    '#': BondOrder.TRIPLE,
    ':': BondOrder.AROMATIC,
}


@dataclass(frozen=True)
class Atom:
    """One atom of the graph; explicit_h is set for bracket atoms only"""
    element: str
    aromatic: bool = False
    formal_charge: int = 0
    explicit_h: Optional[int] = None
    map_number: int = 0

    @property
    def is_wildcard(self) -> bool:
        return self.element == WILDCARD


@dataclass(frozen=True)
class Bond:
    begin: int
    end: int
    order: BondOrder
    in_ring: bool = False

    @property
    def endpoints(self) -> Tuple[int, int]:
        return (self.begin, self.end) if self.begin < self.end else (self.end, self.begin)

    def other(self, atom_index: int) -> int:
        return self.end if atom_index == self.begin else self.begin


def _allowed_valences(atom: Atom) -> Tuple[int, ...]:
    """Charge-adjusted valence list for an atom"""
    base = VALENCES[atom.element]
    charge = atom.formal_charge
    if charge == 0:
        return base
    if charge > 0 and atom.element in ('N', 'O', 'P', 'S'):
        adjusted = [v + charge for v in base]
    elif charge < 0 and atom.element == 'B':
        adjusted = [v - charge for v in base]
    elif charge < 0:
        adjusted = [v + charge for v in base]
    else:
        adjusted = [v - charge for v in base]
    return tuple(v for v in adjusted if v >= 0) or (0,)


def bare_hydrogen_count(element: str, aromatic: bool, bond_sum: int) -> Optional[int]:
    """Implicit hydrogens a bare (unbracketed) atom receives, None if over-valent"""
    valences = VALENCES[element]
    total = bond_sum
    if aromatic and total < valences[0]:
        total += 1  # shared pi slot
    for valence in valences:
        if valence >= total:
            return valence - total
    return None


class Molecule:
    """Immutable attributed graph of atoms and bonds.

    Construction validates the bond table, normalizes aromatic bonds that lie
    outside rings to single bonds and computes per-atom hydrogen counts.
    """

    def __init__(self, atoms: Sequence[Atom], bonds: Sequence[Bond],
                 offsets: Optional[Sequence[int]] = None):
        self.atoms: Tuple[Atom, ...] = tuple(atoms)
        n_atoms = len(self.atoms)

        seen_pairs = set()
        for bond in bonds:
            if bond.begin == bond.end:
                raise SmilesSyntaxError(f"bond from atom {bond.begin} to itself")
            if not (0 <= bond.begin < n_atoms and 0 <= bond.end < n_atoms):
                raise SmilesSyntaxError(f"bond endpoint outside atom table: {bond.endpoints}")
            if bond.endpoints in seen_pairs:
                raise SmilesSyntaxError(f"duplicate bond between atoms {bond.endpoints}")
            seen_pairs.add(bond.endpoints)

        graph = nx.Graph()
        graph.add_nodes_from(range(n_atoms))
        graph.add_edges_from(bond.endpoints for bond in bonds)
        bridges = {tuple(sorted(edge)) for edge in nx.bridges(graph)}
        self.connected = n_atoms == 0 or nx.is_connected(graph)

        normalized = []
        for bond in bonds:
            in_ring = bond.endpoints not in bridges
            order = bond.order
            if order is BondOrder.AROMATIC:
                if not (self.atoms[bond.begin].aromatic and self.atoms[bond.end].aromatic):
                    raise SmilesSyntaxError(
                        f"aromatic bond between non-aromatic atoms {bond.endpoints}")
                if not in_ring:
                    order = BondOrder.SINGLE
            normalized.append(Bond(bond.begin, bond.end, order, in_ring))
        self.bonds: Tuple[Bond, ...] = tuple(normalized)

        adjacency: List[List[Tuple[int, int]]] = [[] for _ in range(n_atoms)]
        for index, bond in enumerate(self.bonds):
            adjacency[bond.begin].append((bond.end, index))
            adjacency[bond.end].append((bond.begin, index))
        self._adjacency = tuple(tuple(entries) for entries in adjacency)

        self.implicit_h: Tuple[int, ...] = tuple(
            self._hydrogens(i, offsets[i] if offsets else None) for i in range(n_atoms)
        )

    def _hydrogens(self, index: int, offset: Optional[int]) -> int:
        atom = self.atoms[index]
        if atom.is_wildcard:
            return 0
        bond_sum = self.bond_sum(index)
        if atom.explicit_h is None:
            count = bare_hydrogen_count(atom.element, atom.aromatic, bond_sum)
            if count is None:
                raise ValenceError(
                    f"atom {index} ({atom.element}) exceeds its valence with bond order sum {bond_sum}",
                    offset)
            return count
        total = bond_sum + atom.explicit_h
        if atom.aromatic:
            total += 1
        if total > max(_allowed_valences(atom)):
            raise ValenceError(
                f"atom {index} ({atom.element}, charge {atom.formal_charge}) exceeds its valence",
                offset)
        return atom.explicit_h

    def __len__(self) -> int:
        return len(self.atoms)

    def __repr__(self) -> str:
        return f"Molecule({write_smiles(self)!r})"

    def bond_sum(self, index: int) -> int:
        return sum(self.bonds[b].order.valence for _, b in self._adjacency[index])

    def neighbors(self, index: int) -> Tuple[Tuple[int, int], ...]:
        """(neighbor atom, bond index) pairs of an atom"""
        return self._adjacency[index]

    def degree(self, index: int) -> int:
        return len(self._adjacency[index])

    def bond_between(self, a: int, b: int) -> Optional[int]:
        for neighbor, bond_index in self._adjacency[a]:
            if neighbor == b:
                return bond_index
        return None

    def wildcards(self) -> List[int]:
        return [i for i, atom in enumerate(self.atoms) if atom.is_wildcard]

    @property
    def ring_bonds(self) -> List[int]:
        return [i for i, bond in enumerate(self.bonds) if bond.in_ring]

    @property
    def heavy_atom_count(self) -> int:
        return sum(1 for atom in self.atoms if not atom.is_wildcard)

    @cached_property
    def canonical(self) -> str:
        return _canonical_smiles(self)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def _parse_bracket(content: str, offset: int) -> Atom:
    match = _BRACKET_RE.match(content)
    if match is None:
        if '@' in content:
            raise UnsupportedFeature("stereochemistry is not supported", offset)
        raise SmilesSyntaxError(f"malformed bracket atom [{content}]", offset)
    if match.group('isotope'):
        raise UnsupportedFeature("isotopes are not supported", offset)
    if match.group('chiral'):
        raise UnsupportedFeature("stereochemistry is not supported", offset)

    symbol = match.group('symbol')
    hydrogens = match.group('hydrogens')
    charge_text = match.group('charge')
    map_text = match.group('map')

    h_count = 0
    if hydrogens:
        h_count = int(hydrogens[1:]) if len(hydrogens) > 1 else 1

    charge = 0
    if charge_text:
        sign = 1 if charge_text[0] == '+' else -1
        if charge_text in ('++', '--'):
            charge = 2 * sign
        elif len(charge_text) > 1:
            charge = sign * int(charge_text[1:])
        else:
            charge = sign
    if abs(charge) > MAX_CHARGE:
        raise UnsupportedFeature(f"formal charge {charge:+d} outside [-2, +2]", offset)

    map_number = int(map_text) if map_text else 0

    if symbol == WILDCARD:
        if map_number < 1:
            raise UnsupportedFeature("wildcard atoms must carry a map number", offset)
        if h_count or charge:
            raise SmilesSyntaxError("wildcard atoms cannot carry hydrogens or charge", offset)
        return Atom(WILDCARD, map_number=map_number, explicit_h=0)

    if symbol in AROMATIC_SUBSET:
        element, aromatic = symbol.upper(), True
    elif symbol in VALENCES:
        element, aromatic = symbol, False
    else:
        raise SmilesSyntaxError(f"unknown element '{symbol}'", offset)
    return Atom(element, aromatic=aromatic, formal_charge=charge,
                explicit_h=h_count, map_number=map_number)


def _read_bare_atom(text: str, i: int) -> Tuple[Atom, int]:
    for symbol in ('Cl', 'Br'):
        if text.startswith(symbol, i):
            return Atom(symbol), 2
    ch = text[i]
    if ch in VALENCES:
        return Atom(ch), 1
    if ch in AROMATIC_SUBSET:
        return Atom(ch.upper(), aromatic=True), 1
    if ch == WILDCARD:
        raise UnsupportedFeature("wildcard atoms must be written as [*:n]", i)
    if ch.isalpha():
        raise SmilesSyntaxError(f"unknown element '{ch}'", i)
    raise SmilesSyntaxError(f"unexpected character '{ch}'", i)


@lru_cache(maxsize=65536)
def _parse_cached(text: str) -> Molecule:
    atoms: List[Atom] = []
    offsets: List[int] = []
    # (begin, end, bond symbol or None, offset)
    pending_bonds: List[Tuple[int, int, Optional[str], int]] = []
    branch_stack: List[Tuple[Optional[int], int]] = []
    ring_open: Dict[int, Tuple[int, Optional[str], int]] = {}
    prev: Optional[int] = None
    bond_symbol: Optional[Tuple[str, int]] = None

    i = 0
    length = len(text)
    while i < length:
        ch = text[i]

        if ch == '(':
            if prev is None:
                raise SmilesSyntaxError("branch opened before any atom", i)
            if bond_symbol is not None:
                raise SmilesSyntaxError("bond symbol before '('", bond_symbol[1])
            branch_stack.append((prev, i))
            i += 1
            continue

        if ch == ')':
            if not branch_stack:
                raise SmilesSyntaxError("unbalanced parenthesis", i)
            if bond_symbol is not None:
                raise SmilesSyntaxError("dangling bond symbol", bond_symbol[1])
            if text[i - 1] == '(':
                raise SmilesSyntaxError("empty branch", i)
            prev, _ = branch_stack.pop()
            i += 1
            continue

        if ch in _BOND_SYMBOLS:
            if prev is None or bond_symbol is not None:
                raise SmilesSyntaxError(f"unexpected bond symbol '{ch}'", i)
            bond_symbol = (ch, i)
            i += 1
            continue

        if ch in '/\\':
            raise UnsupportedFeature("directional (stereo) bonds are not supported", i)
        if ch == '.':
            raise UnsupportedFeature("disconnected structures are not supported", i)

        if ch.isdigit() or ch == '%':
            if prev is None:
                raise SmilesSyntaxError("ring closure before any atom", i)
            if ch == '%':
                digits = text[i + 1:i + 3]
                if len(digits) != 2 or not digits.isdigit():
                    raise SmilesSyntaxError("'%' must be followed by two digits", i)
                ring_number, width = int(digits), 3
            else:
                ring_number, width = int(ch), 1
            symbol = bond_symbol[0] if bond_symbol else None
            if ring_number in ring_open:
                other, open_symbol, open_offset = ring_open.pop(ring_number)
                if symbol and open_symbol and symbol != open_symbol:
                    raise SmilesSyntaxError("conflicting ring closure bond symbols", i)
                if other == prev:
                    raise SmilesSyntaxError("ring closure to the same atom", i)
                pending_bonds.append((other, prev, symbol or open_symbol, i))
            else:
                ring_open[ring_number] = (prev, symbol, i)
            bond_symbol = None
            i += width
            continue

        if ch == '[':
            close = text.find(']', i)
            if close < 0:
                raise SmilesSyntaxError("unclosed bracket atom", i)
            atom = _parse_bracket(text[i + 1:close], i)
            width = close + 1 - i
        else:
            atom, width = _read_bare_atom(text, i)

        index = len(atoms)
        atoms.append(atom)
        offsets.append(i)
        if prev is not None:
            symbol_offset = bond_symbol[1] if bond_symbol else i
            pending_bonds.append((prev, index, bond_symbol[0] if bond_symbol else None, symbol_offset))
        elif bond_symbol is not None:
            raise SmilesSyntaxError("bond symbol before the first atom", bond_symbol[1])
        bond_symbol = None
        prev = index
        i += width

    if bond_symbol is not None:
        raise SmilesSyntaxError("dangling bond symbol", bond_symbol[1])
    if branch_stack:
        raise SmilesSyntaxError("unbalanced parenthesis", branch_stack[-1][1])
    if ring_open:
        ring_number, (_, _, open_offset) = min(ring_open.items(), key=lambda item: item[1][2])
        raise SmilesSyntaxError(f"dangling ring closure {ring_number}", open_offset)

    bonds = []
    for begin, end, symbol, offset in pending_bonds:
        both_aromatic = atoms[begin].aromatic and atoms[end].aromatic
        if symbol is None:
            order = BondOrder.AROMATIC if both_aromatic else BondOrder.SINGLE
        else:
            order = _BOND_SYMBOLS[symbol]
            if order is BondOrder.AROMATIC and not both_aromatic:
                raise SmilesSyntaxError("':' bond between non-aromatic atoms", offset)
        bonds.append(Bond(begin, end, order))

    return Molecule(atoms, bonds, offsets)


def byte_offset(text: str, index: int) -> int:
    """UTF-8 byte position of character `index` in `text`"""
    return len(text[:index].encode('utf-8'))


def parse_smiles(text: str) -> Molecule:
    """Parse a SMILES (or single-attachment fragment) string into a Molecule"""
    if not text or text != text.strip():
        raise SmilesSyntaxError("SMILES must be non-empty and whitespace-trimmed", 0)
    try:
        return _parse_cached(text)
    except MoleculeError as e:
        if e.offset is None or text.isascii():
            raise
        raise type(e)(e.detail, byte_offset(text, e.offset)) from e


def heavy_atom_count(mol: Molecule) -> int:
    """Number of non-wildcard atoms; hydrogens are never counted"""
    return mol.heavy_atom_count


def permute_atoms(mol: Molecule, order: Sequence[int]) -> Molecule:
    """Relabel atoms so that new atom k is old atom order[k]"""
    if sorted(order) != list(range(len(mol))):
        raise ValueError("order must be a permutation of the atom indices")
    new_index = {old: new for new, old in enumerate(order)}
    atoms = [mol.atoms[old] for old in order]
    bonds = [Bond(new_index[b.begin], new_index[b.end], b.order) for b in mol.bonds]
    return Molecule(atoms, bonds)


# ---------------------------------------------------------------------------
# Writing
# ---------------------------------------------------------------------------

def _charge_text(charge: int) -> str:
    if charge == 0:
        return ''
    sign = '+' if charge > 0 else '-'
    return sign if abs(charge) == 1 else f"{sign}{abs(charge)}"


def _atom_text(mol: Molecule, index: int) -> str:
    atom = mol.atoms[index]
    if atom.is_wildcard:
        return f"[*:{atom.map_number}]"
    symbol = atom.element.lower() if atom.aromatic else atom.element
    hydrogens = mol.implicit_h[index]
    if atom.formal_charge == 0 and atom.map_number == 0:
        if bare_hydrogen_count(atom.element, atom.aromatic, mol.bond_sum(index)) == hydrogens:
            return symbol
    h_text = '' if hydrogens == 0 else ('H' if hydrogens == 1 else f"H{hydrogens}")
    map_text = f":{atom.map_number}" if atom.map_number else ''
    return f"[{symbol}{h_text}{_charge_text(atom.formal_charge)}{map_text}]"


def _bond_text(mol: Molecule, bond: Bond) -> str:
    if bond.order is BondOrder.DOUBLE:
        return '='
    if bond.order is BondOrder.TRIPLE:
        return '#'
    if bond.order is BondOrder.SINGLE and mol.atoms[bond.begin].aromatic and mol.atoms[bond.end].aromatic:
        return '-'
    return ''


def _ring_label(number: int) -> str:
    return str(number) if number < 10 else f"%{number}"


def _emit(mol: Molecule, ranks: Sequence[int], root: int) -> str:
    """Depth-first SMILES emission visiting neighbors in rank order"""
    n_atoms = len(mol)
    visited = [False] * n_atoms
    children: List[List[Tuple[int, int]]] = [[] for _ in range(n_atoms)]
    ring_bonds_at: List[List[int]] = [[] for _ in range(n_atoms)]
    closure_bonds = set()

    def discover(atom: int, parent_bond: Optional[int]) -> None:
        visited[atom] = True
        for neighbor, bond_index in sorted(mol.neighbors(atom), key=lambda nb: ranks[nb[0]]):
            if bond_index == parent_bond or bond_index in closure_bonds:
                continue
            if visited[neighbor]:
                closure_bonds.add(bond_index)
                ring_bonds_at[neighbor].append(bond_index)
                ring_bonds_at[atom].append(bond_index)
            else:
                children[atom].append((neighbor, bond_index))
                discover(neighbor, bond_index)

    discover(root, None)

    parts: List[str] = []
    open_labels: Dict[int, int] = {}
    free_labels: List[int] = []
    next_label = [1]

    def take_label() -> int:
        if free_labels:
            free_labels.sort()
            return free_labels.pop(0)
        label = next_label[0]
        next_label[0] += 1
        return label

    def write(atom: int) -> None:
        parts.append(_atom_text(mol, atom))
        closing = [b for b in ring_bonds_at[atom] if b in open_labels]
        opening = [b for b in ring_bonds_at[atom] if b not in open_labels]
        for bond_index in closing:
            label = open_labels.pop(bond_index)
            parts.append(_bond_text(mol, mol.bonds[bond_index]) + _ring_label(label))
            free_labels.append(label)
        for bond_index in opening:
            label = take_label()
            open_labels[bond_index] = label
            parts.append(_ring_label(label))
        branches = children[atom]
        for position, (child, bond_index) in enumerate(branches):
            last = position == len(branches) - 1
            if not last:
                parts.append('(')
            parts.append(_bond_text(mol, mol.bonds[bond_index]))
            write(child)
            if not last:
                parts.append(')')

    write(root)
    return ''.join(parts)


def write_smiles(mol: Molecule) -> str:
    """Write a SMILES string following the molecule's own atom order"""
    if len(mol) == 0:
        return ''
    ranks = list(range(len(mol)))
    wildcards = mol.wildcards()
    root = wildcards[0] if wildcards else 0
    return _emit(mol, ranks, root)


# ---------------------------------------------------------------------------
# Canonicalization
# ---------------------------------------------------------------------------

_ORDER_CODES = {BondOrder.SINGLE: 1, BondOrder.DOUBLE: 2, BondOrder.TRIPLE: 3, BondOrder.AROMATIC: 4}


def _dense_ranks(keys: Sequence) -> List[int]:
    ordering = {key: rank for rank, key in enumerate(sorted(set(keys)))}
    return [ordering[key] for key in keys]


def _initial_ranks(mol: Molecule) -> List[int]:
    keys = []
    for i, atom in enumerate(mol.atoms):
        keys.append((
            0 if atom.is_wildcard else 1,
            atom.map_number,
            atom.element,
            atom.aromatic,
            atom.formal_charge,
            mol.degree(i),
            mol.implicit_h[i],
        ))
    return _dense_ranks(keys)


def _refine(mol: Molecule, ranks: List[int]) -> List[int]:
    """Morgan-style neighborhood refinement until the partition is stable"""
    n_classes = len(set(ranks))
    while True:
        keys = []
        for i in range(len(mol)):
            environment = sorted(
                (ranks[j], _ORDER_CODES[mol.bonds[b].order]) for j, b in mol.neighbors(i)
            )
            keys.append((ranks[i], tuple(environment)))
        refined = _dense_ranks(keys)
        refined_classes = len(set(refined))
        if refined_classes == n_classes:
            return refined
        ranks, n_classes = refined, refined_classes


def _tie_representatives(mol: Molecule, members: List[int]) -> List[int]:
    """Drop terminal atoms that are interchangeable with an earlier member"""
    representatives = []
    seen_terminals = set()
    for atom in members:
        if mol.degree(atom) == 1:
            neighbor, bond_index = mol.neighbors(atom)[0]
            key = (neighbor, mol.bonds[bond_index].order)
            if key in seen_terminals:
                continue
            seen_terminals.add(key)
        representatives.append(atom)
    return representatives


def _search(mol: Molecule, ranks: List[int]) -> str:
    ranks = _refine(mol, ranks)
    n_atoms = len(mol)
    if len(set(ranks)) == n_atoms:
        root = ranks.index(0)
        return _emit(mol, ranks, root)

    counts: Dict[int, int] = {}
    for rank in ranks:
        counts[rank] = counts.get(rank, 0) + 1
    tied_rank = min(rank for rank, count in counts.items() if count > 1)
    members = [i for i in range(n_atoms) if ranks[i] == tied_rank]

    best: Optional[str] = None
    for atom in _tie_representatives(mol, members):
        split = [2 * rank for rank in ranks]
        split[atom] -= 1
        candidate = _search(mol, _dense_ranks(split))
        if best is None or candidate < best:
            best = candidate
    return best


def _canonical_smiles(mol: Molecule) -> str:
    if len(mol) == 0:
        return ''
    return _search(mol, _initial_ranks(mol))


def canonical_smiles(mol: Molecule) -> str:
    """Deterministic SMILES identical for all isomorphic inputs"""
    return mol.canonical


def canonicalize(text: str) -> str:
    """Parse and canonicalize a SMILES string"""
    return parse_smiles(text).canonical


# ---------------------------------------------------------------------------
# Corpus files
# ---------------------------------------------------------------------------

@dataclass
class CorpusEntry:
    mol_id: str
    smiles: str
    line_number: int
    molecule: Optional[Molecule] = None
    error: Optional[str] = None
    error_kind: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.molecule is not None


def parse_corpus_lines(lines: Sequence[str]) -> List[CorpusEntry]:
    """Parse corpus records; bad SMILES are kept as rejected entries"""
    entries = []
    for line_number, raw in enumerate(lines, 1):
        line = raw.rstrip('\n').rstrip('\r')
        if not line.strip() or line.lstrip().startswith('#'):
            continue
        fields = line.split('\t')
        smiles = fields[0].strip()
        mol_id = fields[1].strip() if len(fields) > 1 and fields[1].strip() else str(line_number)
        entry = CorpusEntry(mol_id=mol_id, smiles=smiles, line_number=line_number)
        try:
            entry.molecule = parse_smiles(smiles)
            if entry.molecule.wildcards():
                raise UnsupportedFeature("corpus molecules cannot contain attachment points")
        except MoleculeError as e:
            entry.molecule = None
            entry.error = str(e)
            entry.error_kind = type(e).__name__
            logger.debug(f"Rejected line {line_number} ({smiles}): {e}")
        entries.append(entry)
    return entries


def read_corpus(filepath: str) -> List[CorpusEntry]:
    """Read a corpus file: one `<smiles>` or `<smiles>\\t<id>` per line"""
    with open(filepath, 'r', encoding='utf-8') as f:
        lines = f.read().split('\n')
    return parse_corpus_lines(lines)

"""
Mol2Trans Fragmenter
Single-cut fragmentation of molecules into (core, R-group) pairs
"""

import logging
import sys
from collections import deque
from dataclasses import dataclass
from typing import Iterable, List, Set, Tuple

from mmp_errors import ArityError
from mmp_molgraph import Atom, Bond, BondOrder, Molecule

logger = logging.getLogger(__name__)

ATTACHMENT = Atom('*', map_number=1, explicit_h=0)


@dataclass(frozen=True)
class FragmentationConstraints:
    """Heavy-atom bounds on a cut: core and R-group sizes inclusive, ratio strict"""
    max_core_heavy: int = 50
    max_rgroup_heavy: int = 13
    max_rgroup_ratio: float = 0.33

    def __post_init__(self):
        if self.max_core_heavy <= 0 or self.max_rgroup_heavy <= 0:
            raise ValueError("heavy-atom bounds must be positive")
        # 1.0 disables the ratio test: an R-group is always smaller than its parent
        if not 0 < self.max_rgroup_ratio <= 1:
            raise ValueError(f"max_rgroup_ratio must be in (0, 1), got {self.max_rgroup_ratio}")

    @classmethod
    def permissive(cls) -> 'FragmentationConstraints':
        """Constraints with every bound disabled"""
        return cls(max_core_heavy=sys.maxsize, max_rgroup_heavy=sys.maxsize, max_rgroup_ratio=1.0)

    def allow_fragment(self, core_heavy: int, rgroup_heavy: int, parent_heavy: int) -> bool:
        if core_heavy > self.max_core_heavy:
            return False
        if rgroup_heavy > self.max_rgroup_heavy:
            return False
        return rgroup_heavy / parent_heavy < self.max_rgroup_ratio

    def to_dict(self) -> dict:
        return {
            'max_core': self.max_core_heavy,
            'max_rgroup': self.max_rgroup_heavy,
            'max_ratio': self.max_rgroup_ratio,
        }


@dataclass(frozen=True)
class Fragmentation:
    """One cut of a parent molecule; both sides carry a single [*:1]"""
    core: Molecule
    rgroup: Molecule
    cut_bond: int
    rgroup_atom: int
    core_heavy: int
    rgroup_heavy: int
    parent_heavy: int

    @property
    def core_smiles(self) -> str:
        return self.core.canonical

    @property
    def rgroup_smiles(self) -> str:
        return self.rgroup.canonical


def cut_bond_candidates(mol: Molecule) -> List[int]:
    """Acyclic single bonds between two heavy atoms"""
    candidates = []
    for index, bond in enumerate(mol.bonds):
        if bond.order is not BondOrder.SINGLE or bond.in_ring:
            continue
        if mol.atoms[bond.begin].is_wildcard or mol.atoms[bond.end].is_wildcard:
            continue
        candidates.append(index)
    return candidates


def _side_of(mol: Molecule, start: int, cut_bond: int) -> Set[int]:
    """Atoms reachable from `start` without crossing `cut_bond`"""
    seen = {start}
    queue = deque([start])
    while queue:
        atom = queue.popleft()
        for neighbor, bond_index in mol.neighbors(atom):
            if bond_index != cut_bond and neighbor not in seen:
                seen.add(neighbor)
                queue.append(neighbor)
    return seen


def extract_fragment(mol: Molecule, atoms: Iterable[int], anchor: int) -> Molecule:
    """Sub-molecule over `atoms` with [*:1] bonded to `anchor`"""
    kept = sorted(atoms)
    new_index = {old: new for new, old in enumerate(kept)}
    fragment_atoms = [mol.atoms[old] for old in kept] + [ATTACHMENT]
    fragment_bonds = [
        Bond(new_index[b.begin], new_index[b.end], b.order)
        for b in mol.bonds
        if b.begin in new_index and b.end in new_index
    ]
    fragment_bonds.append(Bond(new_index[anchor], len(kept), BondOrder.SINGLE))
    return Molecule(fragment_atoms, fragment_bonds)


def enumerate_cuts(mol: Molecule, constraints: FragmentationConstraints) -> List[Fragmentation]:
    """All single-cut fragmentations satisfying the constraints.

    Order: by cut-bond index, then orientation (R-group on the bond's second
    atom first, then on its first atom).
    """
    parent_heavy = mol.heavy_atom_count
    fragmentations = []
    for bond_index in cut_bond_candidates(mol):
        bond = mol.bonds[bond_index]
        end_side = _side_of(mol, bond.end, bond_index)
        begin_side = set(range(len(mol))) - end_side
        orientations: List[Tuple[Set[int], int, Set[int], int]] = [
            (end_side, bond.end, begin_side, bond.begin),
            (begin_side, bond.begin, end_side, bond.end),
        ]
        for rgroup_atoms, rgroup_anchor, core_atoms, core_anchor in orientations:
            rgroup_heavy = sum(1 for i in rgroup_atoms if not mol.atoms[i].is_wildcard)
            core_heavy = parent_heavy - rgroup_heavy
            if not constraints.allow_fragment(core_heavy, rgroup_heavy, parent_heavy):
                continue
            fragmentations.append(Fragmentation(
                core=extract_fragment(mol, core_atoms, core_anchor),
                rgroup=extract_fragment(mol, rgroup_atoms, rgroup_anchor),
                cut_bond=bond_index,
                rgroup_atom=rgroup_anchor,
                core_heavy=core_heavy,
                rgroup_heavy=rgroup_heavy,
                parent_heavy=parent_heavy,
            ))
    return fragmentations


def attachment_site(fragment: Molecule, role: str) -> Tuple[int, int]:
    """(wildcard index, anchor index) of a single-attachment fragment"""
    wildcards = fragment.wildcards()
    if len(wildcards) != 1:
        raise ArityError(f"{role} must contain exactly one [*:1], found {len(wildcards)} wildcards")
    wildcard = wildcards[0]
    if fragment.atoms[wildcard].map_number != 1:
        raise ArityError(f"{role} attachment must be [*:1], found map number "
                         f"{fragment.atoms[wildcard].map_number}")
    neighbors = fragment.neighbors(wildcard)
    if len(neighbors) != 1:
        raise ArityError(f"{role} attachment must have exactly one neighbor")
    anchor, bond_index = neighbors[0]
    if fragment.bonds[bond_index].order is not BondOrder.SINGLE:
        raise ArityError(f"{role} attachment bond must be single")
    return wildcard, anchor


def reattach(core: Molecule, rgroup: Molecule) -> Molecule:
    """Join two fragments at their [*:1] attachment points with a single bond"""
    core_wildcard, core_anchor = attachment_site(core, 'core')
    rgroup_wildcard, rgroup_anchor = attachment_site(rgroup, 'rgroup')

    atoms: List[Atom] = []
    bonds: List[Bond] = []
    anchors = []
    for fragment, wildcard, anchor in ((core, core_wildcard, core_anchor),
                                       (rgroup, rgroup_wildcard, rgroup_anchor)):
        offset = len(atoms)
        new_index = {}
        for old, atom in enumerate(fragment.atoms):
            if old != wildcard:
                new_index[old] = offset + len(new_index)
                atoms.append(atom)
        for bond in fragment.bonds:
            if bond.begin != wildcard and bond.end != wildcard:
                bonds.append(Bond(new_index[bond.begin], new_index[bond.end], bond.order))
        anchors.append(new_index[anchor])

    bonds.append(Bond(anchors[0], anchors[1], BondOrder.SINGLE))
    return Molecule(atoms, bonds)


def fragment_at(mol: Molecule, cut_bond: int, rgroup_atom: int) -> Fragmentation:
    """The unconstrained fragmentation of one cut, R-group on `rgroup_atom`'s side"""
    bond = mol.bonds[cut_bond]
    if rgroup_atom not in (bond.begin, bond.end):
        raise ValueError(f"atom {rgroup_atom} is not an end of bond {cut_bond}")
    core_atom = bond.other(rgroup_atom)
    rgroup_atoms = _side_of(mol, rgroup_atom, cut_bond)
    if core_atom in rgroup_atoms:
        raise ValueError(f"bond {cut_bond} is in a ring")
    core_atoms = set(range(len(mol))) - rgroup_atoms
    rgroup_heavy = sum(1 for i in rgroup_atoms if not mol.atoms[i].is_wildcard)
    parent_heavy = mol.heavy_atom_count
    return Fragmentation(
        core=extract_fragment(mol, core_atoms, core_atom),
        rgroup=extract_fragment(mol, rgroup_atoms, rgroup_atom),
        cut_bond=cut_bond,
        rgroup_atom=rgroup_atom,
        core_heavy=parent_heavy - rgroup_heavy,
        rgroup_heavy=rgroup_heavy,
        parent_heavy=parent_heavy,
    )

import networkx as nx
import pytest

from mmp_errors import ArityError
from mmp_fragmenter import (
    FragmentationConstraints,
    attachment_site,
    cut_bond_candidates,
    enumerate_cuts,
    fragment_at,
    reattach,
)
from mmp_molgraph import BondOrder, canonicalize, parse_smiles

DEFAULT = FragmentationConstraints()


def brute_force_cuts(mol, constraints):
    """(cut bond, R-group atom, R-group heavy atoms) by deleting every bond in turn"""
    graph = nx.Graph()
    graph.add_nodes_from(range(len(mol)))
    graph.add_edges_from((b.begin, b.end) for b in mol.bonds)
    parent_heavy = sum(1 for a in mol.atoms if not a.is_wildcard)
    found = set()
    for index, bond in enumerate(mol.bonds):
        if bond.order is not BondOrder.SINGLE:
            continue
        if mol.atoms[bond.begin].is_wildcard or mol.atoms[bond.end].is_wildcard:
            continue
        cut = graph.copy()
        cut.remove_edge(bond.begin, bond.end)
        if nx.has_path(cut, bond.begin, bond.end):
            continue
        for rgroup_atom in (bond.end, bond.begin):
            side = nx.node_connected_component(cut, rgroup_atom)
            rgroup_heavy = sum(1 for i in side if not mol.atoms[i].is_wildcard)
            core_heavy = parent_heavy - rgroup_heavy
            if (core_heavy <= constraints.max_core_heavy
                    and rgroup_heavy <= constraints.max_rgroup_heavy
                    and rgroup_heavy / parent_heavy < constraints.max_rgroup_ratio):
                found.add((index, rgroup_atom, rgroup_heavy))
    return found


def test_ethanol_has_no_cut_under_default_bounds():
    # 1/3 is not below 0.33
    assert enumerate_cuts(parse_smiles('CCO'), DEFAULT) == []


def test_permissive_bounds_allow_every_orientation():
    cuts = enumerate_cuts(parse_smiles('CCO'), FragmentationConstraints.permissive())
    assert len(cuts) == 4


def test_phenol_single_cut():
    cuts = enumerate_cuts(parse_smiles('c1ccccc1O'), DEFAULT)
    assert len(cuts) == 1
    cut = cuts[0]
    assert cut.rgroup_smiles == canonicalize('[*:1]O')
    assert cut.core_smiles == canonicalize('[*:1]c1ccccc1')
    assert (cut.core_heavy, cut.rgroup_heavy, cut.parent_heavy) == (6, 1, 7)


def test_ring_bonds_are_never_cut():
    mol = parse_smiles('C1CCCCC1C')
    assert all(not mol.bonds[i].in_ring for i in cut_bond_candidates(mol))
    assert len(cut_bond_candidates(mol)) == 1


def test_double_bonds_are_never_cut():
    mol = parse_smiles('C=CC')
    assert cut_bond_candidates(mol) == [1]


def test_enumeration_matches_brute_force(toy_molecules):
    for mol in toy_molecules[::7][:200]:
        cuts = enumerate_cuts(mol, DEFAULT)
        produced = {(c.cut_bond, c.rgroup_atom, c.rgroup_heavy) for c in cuts}
        assert produced == brute_force_cuts(mol, DEFAULT)
        assert len(produced) == len(cuts)


def test_fragments_reattach_to_parent(toy_molecules):
    for mol in toy_molecules[::13]:
        for cut in enumerate_cuts(mol, DEFAULT):
            assert reattach(cut.core, cut.rgroup).canonical == mol.canonical
            assert reattach(parse_smiles(cut.core_smiles), parse_smiles(cut.rgroup_smiles)).canonical \
                == mol.canonical


def test_cut_order_is_bond_then_orientation():
    cuts = enumerate_cuts(parse_smiles('CCO'), FragmentationConstraints.permissive())
    assert [(c.cut_bond, c.rgroup_atom) for c in cuts] == [(0, 1), (0, 0), (1, 2), (1, 1)]


def test_constraint_validation():
    with pytest.raises(ValueError):
        FragmentationConstraints(max_rgroup_ratio=0)
    with pytest.raises(ValueError):
        FragmentationConstraints(max_core_heavy=0)
    assert DEFAULT.allow_fragment(50, 13, 100)
    assert not DEFAULT.allow_fragment(51, 1, 52)
    assert not DEFAULT.allow_fragment(10, 14, 100)


@pytest.mark.parametrize('text', ['[*:1]C[*:1]', '[*:2]C', '[*:1]=C', 'CC'])
def test_attachment_arity(text):
    with pytest.raises(ArityError):
        attachment_site(parse_smiles(text), 'fragment')


def test_attachment_site():
    wildcard, anchor = attachment_site(parse_smiles('C[*:1]'), 'fragment')
    assert (wildcard, anchor) == (1, 0)


def test_fragment_at():
    mol = parse_smiles('c1ccccc1CC')
    link = next(i for i, b in enumerate(mol.bonds) if {b.begin, b.end} == {5, 6})
    cut = fragment_at(mol, link, 6)
    assert cut.rgroup_smiles == canonicalize('[*:1]CC')
    with pytest.raises(ValueError):
        fragment_at(mol, 0, 0)


def test_phenethyl_alcohol_rgroups():
    groups = {c.rgroup_smiles for c in enumerate_cuts(parse_smiles('OCCc1ccccc1'), DEFAULT)}
    assert canonicalize('[*:1]O') in groups
    assert canonicalize('[*:1]CO') in groups
    # 3/9 is not below 0.33
    assert canonicalize('[*:1]CCO') not in groups


def test_reattach_rejects_two_attachments():
    with pytest.raises(ArityError):
        reattach(parse_smiles('[*:1]C'), parse_smiles('[*:1][*:1]C'))


@pytest.mark.parametrize('tighter', [
    FragmentationConstraints(max_core_heavy=12),
    FragmentationConstraints(max_rgroup_heavy=3),
    FragmentationConstraints(max_rgroup_ratio=0.15),
])
def test_tighter_bounds_give_a_subset(toy_molecules, tighter):
    for mol in toy_molecules[::11]:
        loose = {(c.cut_bond, c.rgroup_atom) for c in enumerate_cuts(mol, DEFAULT)}
        tight = {(c.cut_bond, c.rgroup_atom) for c in enumerate_cuts(mol, tighter)}
        assert tight <= loose

"""
Mol2Trans SMIRKS Engine
Parses `[*:1]LHS>>[*:1]RHS` transformation strings and applies them by
fragment replacement, so only the matched R-group ever changes
"""

import logging
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Set, Tuple

from mmp_errors import MoleculeError, SmilesSyntaxError, ValenceError
from mmp_fragmenter import (
    FragmentationConstraints,
    attachment_site,
    enumerate_cuts,
    fragment_at,
    reattach,
)
from mmp_molgraph import Molecule, byte_offset, parse_smiles

logger = logging.getLogger(__name__)

RULE_SEPARATOR = '>>'


@dataclass(frozen=True)
class TransformRule:
    lhs: Molecule
    rhs: Molecule
    text: str

    @property
    def lhs_smiles(self) -> str:
        return self.lhs.canonical

    @property
    def rhs_smiles(self) -> str:
        return self.rhs.canonical

    @property
    def is_identity(self) -> bool:
        return self.lhs_smiles == self.rhs_smiles

    @property
    def canonical_text(self) -> str:
        return f"{self.lhs_smiles}{RULE_SEPARATOR}{self.rhs_smiles}"


class ApplicationSite(NamedTuple):
    """Where a rule matched: the cut bond and the parent atom on the R-group side"""
    cut_bond: int
    rgroup_atom: int


def _parse_side(text: str, shift: int, role: str) -> Molecule:
    if not text:
        raise SmilesSyntaxError(f"empty {role} side", shift)
    try:
        side = parse_smiles(text)
    except MoleculeError as e:
        offset = None if e.offset is None else e.offset + shift
        raise type(e)(f"{role}: {e.detail}", offset) from e
    attachment_site(side, role)
    return side


def parse_rule(text: str) -> TransformRule:
    """Parse and validate a single-attachment transformation string"""
    if not text or not text.strip():
        raise SmilesSyntaxError("empty transformation string", 0)
    if text.count(RULE_SEPARATOR) != 1:
        raise SmilesSyntaxError(f"transformation must contain exactly one '{RULE_SEPARATOR}'",
                                byte_offset(text, text.find('>')) if '>' in text else None)
    lhs_text, rhs_text = text.split(RULE_SEPARATOR)
    lhs = _parse_side(lhs_text, 0, 'lhs')
    rhs = _parse_side(rhs_text, byte_offset(text, len(lhs_text) + len(RULE_SEPARATOR)), 'rhs')
    return TransformRule(lhs=lhs, rhs=rhs, text=text)


def try_parse_rule(text: str) -> Tuple[Optional[TransformRule], Optional[str]]:
    """(rule, None) or (None, error message) for generated text"""
    try:
        return parse_rule(text), None
    except MoleculeError as e:
        return None, f"{type(e).__name__}: {e}"


def apply_rule(rule: TransformRule, mol: Molecule,
               constraints: Optional[FragmentationConstraints] = None
               ) -> List[Tuple[Molecule, ApplicationSite]]:
    """Replace every removable R-group equal to the rule's LHS with its RHS.

    Products are deduplicated by canonical SMILES; the first site producing
    each one is reported. Sites where reattachment breaks valence are skipped.
    """
    constraints = constraints or FragmentationConstraints()
    wanted = rule.lhs_smiles
    products: List[Tuple[Molecule, ApplicationSite]] = []
    seen: Set[str] = set()
    for fragmentation in enumerate_cuts(mol, constraints):
        if fragmentation.rgroup_smiles != wanted:
            continue
        try:
            product = reattach(fragmentation.core, rule.rhs)
        except ValenceError as e:
            logger.debug(f"Rule {rule.text} failed at bond {fragmentation.cut_bond}: {e}")
            continue
        if product.canonical in seen:
            continue
        seen.add(product.canonical)
        products.append((product, ApplicationSite(fragmentation.cut_bond, fragmentation.rgroup_atom)))
    return products


def apply_rule_products(rule: TransformRule, mol: Molecule,
                        constraints: Optional[FragmentationConstraints] = None) -> List[str]:
    """Canonical SMILES of apply_rule's products"""
    return [product.canonical for product, _ in apply_rule(rule, mol, constraints)]


def core_preserved(source: Molecule, product: Molecule, rule: TransformRule,
                   site: ApplicationSite) -> bool:
    """True iff the product still holds the source's core at the rule's cut"""
    if not 0 <= site.cut_bond < len(source.bonds):
        return False
    try:
        source_core = fragment_at(source, site.cut_bond, site.rgroup_atom).core_smiles
    except ValueError:
        return False
    for fragmentation in enumerate_cuts(product, FragmentationConstraints.permissive()):
        if fragmentation.core_smiles == source_core and fragmentation.rgroup_smiles == rule.rhs_smiles:
            return True
    return False


def rgroup_smiles(mol: Molecule, constraints: Optional[FragmentationConstraints] = None) -> Set[str]:
    """Canonical R-groups removable from a molecule under the constraints"""
    constraints = constraints or FragmentationConstraints()
    return {f.rgroup_smiles for f in enumerate_cuts(mol, constraints)}

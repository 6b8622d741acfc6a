#!/usr/bin/env python3
"""
Mol2Trans Toy Corpus
Deterministic drug-like corpus built from scaffold x substituent enumeration
"""

import argparse
import logging
from pathlib import Path
from typing import List, Optional, Tuple

from mmp_molgraph import heavy_atom_count, parse_smiles

logger = logging.getLogger(__name__)

# `{R}` marks the attachment atom; scaffolds use ring digits 1-2
SCAFFOLDS = [
    'c1ccccc1{R}',
    'Cc1ccc({R})cc1',
    'COc1ccc({R})cc1',
    'Clc1ccc({R})cc1',
    'FC(F)(F)c1ccc({R})cc1',
    'c1ccc2ccccc2c1{R}',
    'c1ccncc1{R}',
    'c1cncnc1{R}',
    'O=C(Nc1ccccc1){R}',
    'CC(C)Cc1ccc({R})cc1',
    'c1ccc(-c2ccccc2)cc1{R}',
    'O=C1CCN(CC1){R}',
    'C1CCN(CC1){R}',
    'C1COCCN1{R}',
    'CC(=O)Nc1ccc({R})cc1',
    'Oc1ccc({R})cc1',
    'NC(=O)c1ccc({R})cc1',
    'c1ccsc1{R}',
    'c1ccoc1{R}',
    'CN1CCN(CC1)c1ccc({R})cc1',
    'CC(C)(C){R}',
    'C1CCC(CC1){R}',
    'COC(=O)c1ccc({R})cc1',
    'N#Cc1ccc({R})cc1',
    'CS(=O)(=O)c1ccc({R})cc1',
    'c1ccc2ncccc2c1{R}',
    'Fc1cccc({R})c1',
    'O=C(O)CCc1ccc({R})cc1',
    'CCOc1ccccc1{R}',
    'Cc1nc(C)cc({R})n1',
    'O=C(c1ccccc1)N1CCC(CC1){R}',
    'CC1(C)CCN(CC1){R}',
]

# Substituents bond through their first atom; rings use digits 7-8
SUBSTITUENTS = [
    'F', 'Cl', 'Br', 'C', 'CC', 'CCC', 'C(C)C', 'O', 'OC', 'OCC',
    'N', 'NC', 'N(C)C', 'C#N', 'C(F)(F)F', 'C(=O)O', 'C(=O)OC', 'C(=O)N', 'C(=O)NC', 'C(C)=O',
    'S(C)(=O)=O', 'S(N)(=O)=O', 'OC(F)(F)F', 'NC(C)=O', 'CO', 'CN', 'C7CC7', 'C7CCCC7', 'C7CCCCC7', 'c7ccccc7',
    'c7ccncc7', 'c7ccco7', 'N7CCOCC7', 'N7CCCC7', 'N7CCN(C)CC7', 'OC7CCCC7', 'Cc7ccccc7', 'Oc7ccccc7',
    'C(=O)c7ccccc7', 'C=C', 'C#C', 'OCCO', 'SC',
]

MAX_HEAVY_ATOMS = 60


def attach(scaffold: str, substituent: str) -> str:
    return scaffold.replace('{R}', substituent)


def toy_corpus(limit: Optional[int] = None) -> List[str]:
    """Canonical, distinct toy molecules in enumeration order"""
    seen = set()
    molecules = []
    for scaffold in SCAFFOLDS:
        for substituent in SUBSTITUENTS:
            mol = parse_smiles(attach(scaffold, substituent))
            if heavy_atom_count(mol) > MAX_HEAVY_ATOMS or mol.canonical in seen:
                continue
            seen.add(mol.canonical)
            molecules.append(mol.canonical)
            if limit is not None and len(molecules) >= limit:
                return molecules
    return molecules


def corpus_lines(limit: Optional[int] = None) -> List[str]:
    """`<smiles>\\t<id>` lines with ids toy0001, toy0002, ..."""
    return [f"{smiles}\ttoy{i:04d}" for i, smiles in enumerate(toy_corpus(limit), 1)]


def write_toy_corpus(filepath: str, limit: Optional[int] = None) -> Tuple[str, int]:
    lines = corpus_lines(limit)
    Path(filepath).parent.mkdir(parents=True, exist_ok=True)
    with open(filepath, 'w', encoding='utf-8') as f:
        f.write('# scaffold x substituent toy corpus\n')
        for line in lines:
            f.write(line + '\n')
    return filepath, len(lines)


def main():
    parser = argparse.ArgumentParser(description='Write the deterministic toy corpus')
    parser.add_argument('output', help='Output corpus file (.smi)')
    parser.add_argument('-n', '--limit', type=int, help='Keep only the first N molecules')
    args = parser.parse_args()

    logging.basicConfig(level=logging.INFO, format='%(levelname)s: %(message)s')
    path, count = write_toy_corpus(args.output, args.limit)
    logger.info(f"Wrote {count} molecules to {path}")
    return 0


if __name__ == "__main__":
    exit(main())

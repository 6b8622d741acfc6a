"""
Mol2Trans MMP Miner
Fragment-and-index mining of matched molecular pairs, frequency caps and splits
"""

import logging
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from mmp_errors import InsufficientData
from mmp_fragmenter import FragmentationConstraints, enumerate_cuts, reattach
from mmp_molgraph import CorpusEntry, Molecule, parse_smiles
from mmp_tables import PathOrBuffer, read_tsv, write_tsv

logger = logging.getLogger(__name__)

PAIR_COLUMNS = ['source', 'target', 'smirks', 'core']
INDEX_COLUMNS = ['core', 'mol_id', 'rgroup']

# Independent random streams per pipeline stage
_CAP_STREAM = 1
_SAMPLE_STREAM = 2
_SPLIT_STREAM = 3


@dataclass(frozen=True, order=True)
class MmpRecord:
    source: str
    target: str
    rule: str
    core: str

    @property
    def lhs(self) -> str:
        return self.rule.split('>>', 1)[0]

    @property
    def rhs(self) -> str:
        return self.rule.split('>>', 1)[1]


@dataclass(frozen=True)
class MiningConfig:
    constraints: FragmentationConstraints = field(default_factory=FragmentationConstraints)
    per_molecule_cap: int = 10
    per_rule_cap: int = 10
    sample_size: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.per_molecule_cap <= 0 or self.per_rule_cap <= 0:
            raise ValueError("caps must be positive")
        if self.sample_size is not None and self.sample_size <= 0:
            raise ValueError("sample size must be positive")


@dataclass
class MiningStats:
    molecules_read: int = 0
    rejected: Dict[str, int] = field(default_factory=dict)
    duplicates: int = 0
    molecules_indexed: int = 0
    index_cores: int = 0
    pairs_before_caps: int = 0
    pairs_after_molecule_cap: int = 0
    pairs_after_rule_cap: int = 0
    pairs_after_sampling: int = 0

    def lines(self) -> List[str]:
        lines = [f"molecules read: {self.molecules_read}"]
        total_rejected = sum(self.rejected.values())
        lines.append(f"molecules rejected: {total_rejected}")
        for reason, count in sorted(self.rejected.items()):
            lines.append(f"  {reason}: {count}")
        lines.append(f"duplicate molecules: {self.duplicates}")
        lines.append(f"molecules indexed: {self.molecules_indexed}")
        lines.append(f"index cores: {self.index_cores}")
        lines.append(f"pairs before caps: {self.pairs_before_caps}")
        lines.append(f"pairs after per-molecule cap: {self.pairs_after_molecule_cap}")
        lines.append(f"pairs after per-rule cap: {self.pairs_after_rule_cap}")
        lines.append(f"pairs after sampling: {self.pairs_after_sampling}")
        return lines


class FragmentIndex:
    """Canonical core -> sorted (mol_id, canonical rgroup) entries"""

    def __init__(self, index: Dict[str, List[Tuple[str, str]]], smiles_by_id: Dict[str, str]):
        self._index = {core: sorted(set(entries)) for core, entries in sorted(index.items())}
        self.smiles_by_id = smiles_by_id

    def __len__(self) -> int:
        return len(self._index)

    def __contains__(self, core: str) -> bool:
        return core in self._index

    def __getitem__(self, core: str) -> List[Tuple[str, str]]:
        return self._index[core]

    def items(self) -> Iterable[Tuple[str, List[Tuple[str, str]]]]:
        return self._index.items()

    def cores(self) -> List[str]:
        return list(self._index)

    def rows(self) -> List[Tuple[str, str, str]]:
        return [(core, mol_id, rgroup) for core, entries in self.items() for mol_id, rgroup in entries]


@dataclass
class MiningResult:
    records: List[MmpRecord]
    index: FragmentIndex
    stats: MiningStats


def _fragment_smiles(smiles: str, constraints: FragmentationConstraints) -> List[Tuple[str, str]]:
    """(core, rgroup) canonical pairs of one molecule; runs in worker processes"""
    mol = parse_smiles(smiles)
    return [(f.core_smiles, f.rgroup_smiles) for f in enumerate_cuts(mol, constraints)]


def build_index(corpus: Sequence[Molecule], constraints: FragmentationConstraints,
                mol_ids: Optional[Sequence[str]] = None, threads: int = 1) -> FragmentIndex:
    """Fragment every molecule once and group the pieces by canonical core.

    Molecule IDs default to each molecule's canonical SMILES. The corpus is
    expected to be canonically deduplicated.
    """
    smiles = [mol.canonical for mol in corpus]
    ids = list(mol_ids) if mol_ids is not None else list(smiles)
    if len(ids) != len(smiles):
        raise ValueError("mol_ids must match the corpus length")

    worker = partial(_fragment_smiles, constraints=constraints)
    if threads > 1 and len(smiles) > 1:
        with ProcessPoolExecutor(max_workers=threads) as executor:
            chunksize = max(1, len(smiles) // (threads * 8))
            pieces = list(tqdm(executor.map(worker, smiles, chunksize=chunksize),
                               total=len(smiles), desc="Fragmenting", unit="mol", disable=None))
    else:
        pieces = [worker(s) for s in tqdm(smiles, desc="Fragmenting", unit="mol", disable=None)]

    index: Dict[str, List[Tuple[str, str]]] = defaultdict(list)
    for mol_id, fragments in zip(ids, pieces):
        for core, rgroup in fragments:
            index[core].append((mol_id, rgroup))
    return FragmentIndex(dict(index), dict(zip(ids, smiles)))


def _rule_text(lhs: str, rhs: str) -> str:
    return f"{lhs}>>{rhs}"


def emit_pairs(index: FragmentIndex) -> List[MmpRecord]:
    """Directed records for every ordered pair of entries sharing a core.

    Records repeating an earlier (source, target, rule) under another core are
    merged into the first one (cores are visited in sorted order).
    """
    records = []
    seen: Set[Tuple[str, str, str]] = set()
    for core, entries in index.items():
        if len(entries) < 2:
            continue
        for id_i, rgroup_i in entries:
            source = index.smiles_by_id[id_i]
            for id_j, rgroup_j in entries:
                if rgroup_i == rgroup_j:
                    continue
                target = index.smiles_by_id[id_j]
                if source == target:
                    continue
                rule = _rule_text(rgroup_i, rgroup_j)
                key = (source, target, rule)
                if key in seen:
                    continue
                seen.add(key)
                records.append(MmpRecord(source, target, rule, core))
    return records


def brute_force_pairs(corpus: Sequence[Molecule], constraints: FragmentationConstraints) -> Set[MmpRecord]:
    """O(N^2) reference pairing: fragment every ordered pair and match cores by string"""
    cuts = [(mol.canonical, [(f.core_smiles, f.rgroup_smiles) for f in enumerate_cuts(mol, constraints)])
            for mol in corpus]
    found: Dict[Tuple[str, str, str], str] = {}
    for source, source_cuts in cuts:
        for target, target_cuts in cuts:
            if source == target:
                continue
            for core_a, rgroup_a in source_cuts:
                for core_b, rgroup_b in target_cuts:
                    if core_a != core_b or rgroup_a == rgroup_b:
                        continue
                    key = (source, target, _rule_text(rgroup_a, rgroup_b))
                    if key not in found or core_a < found[key]:
                        found[key] = core_a
    return {MmpRecord(s, t, r, core) for (s, t, r), core in found.items()}


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream])


def _capped(records: Sequence[MmpRecord], config: MiningConfig) -> Tuple[List[MmpRecord], int]:
    """Caps over one seeded shuffle; returns kept records and the count after the molecule cap"""
    order = _rng(config.seed, _CAP_STREAM).permutation(len(records))

    per_source: Counter = Counter()
    after_molecule = []
    for position in order:
        record = records[position]
        if per_source[record.source] < config.per_molecule_cap:
            per_source[record.source] += 1
            after_molecule.append(position)

    per_rule: Counter = Counter()
    kept = []
    for position in after_molecule:
        record = records[position]
        if per_rule[record.rule] < config.per_rule_cap:
            per_rule[record.rule] += 1
            kept.append(position)

    return [records[i] for i in sorted(kept)], len(after_molecule)


def apply_caps(records: Sequence[MmpRecord], config: MiningConfig) -> List[MmpRecord]:
    """Per-molecule cap, then per-rule cap; survivors keep their input order"""
    kept, _ = _capped(records, config)
    return kept


def sample_records(records: Sequence[MmpRecord], sample_size: Optional[int], seed: int) -> List[MmpRecord]:
    """Seeded uniform sample without replacement, in input order"""
    if sample_size is None:
        return list(records)
    if sample_size >= len(records):
        if sample_size > len(records):
            logger.warning(f"Sample size {sample_size} exceeds the {len(records)} available records; keeping all")
        return list(records)
    chosen = _rng(seed, _SAMPLE_STREAM).choice(len(records), size=sample_size, replace=False)
    return [records[i] for i in sorted(chosen)]


def check_ratios(ratios: Sequence[float]) -> None:
    if len(ratios) != 3:
        raise ValueError(f"expected three split ratios, got {len(ratios)}")
    if any(r < 0 for r in ratios):
        raise ValueError("split ratios must be non-negative")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {sum(ratios)}")


def sample_and_split(records: Sequence[MmpRecord], config: MiningConfig,
                     ratios: Sequence[float] = (0.8, 0.1, 0.1)
                     ) -> Tuple[List[MmpRecord], List[MmpRecord], List[MmpRecord]]:
    """Optional sample, then a split grouped by source molecule"""
    check_ratios(ratios)
    records = sample_records(records, config.sample_size, config.seed)

    sources = sorted({record.source for record in records})
    n_sources = len(sources)
    n_train = int(round(n_sources * ratios[0]))
    n_valid = int(round(n_sources * ratios[1]))
    n_test = n_sources - n_train - n_valid
    if min(n_train, n_valid, n_test) <= 0:
        raise InsufficientData(
            f"{n_sources} source molecules cannot fill train/valid/test at ratios "
            f"{','.join(str(r) for r in ratios)}")

    shuffled = [sources[i] for i in _rng(config.seed, _SPLIT_STREAM).permutation(n_sources)]
    partition = {}
    for position, source in enumerate(shuffled):
        partition[source] = 0 if position < n_train else (1 if position < n_train + n_valid else 2)

    splits: Tuple[List[MmpRecord], List[MmpRecord], List[MmpRecord]] = ([], [], [])
    for record in records:
        splits[partition[record.source]].append(record)
    logger.info(f"Split {n_sources} sources into {n_train}/{n_valid}/{n_test} "
                f"({len(splits[0])}/{len(splits[1])}/{len(splits[2])} records)")
    return splits


def mine_corpus(entries: Sequence[CorpusEntry], config: MiningConfig, threads: int = 1) -> MiningResult:
    """
    Corpus entries -> capped (and optionally sampled) MMP records

    Args:
        entries: Parsed corpus lines; failed entries are counted and skipped
        config: Fragmentation bounds, caps, sample size and seed
        threads: Worker processes used for fragmentation

    Returns:
        MiningResult with the kept records, the fragment index and run stats
    """
    stats = MiningStats(molecules_read=len(entries))
    rejected: Counter = Counter()
    seen: Dict[str, str] = {}
    molecules: List[Molecule] = []
    mol_ids: List[str] = []
    for entry in entries:
        if not entry.ok:
            rejected[entry.error_kind or 'error'] += 1
            continue
        canonical = entry.molecule.canonical
        if canonical in seen:
            stats.duplicates += 1
            logger.debug(f"Line {entry.line_number}: duplicate of {seen[canonical]}")
            continue
        seen[canonical] = entry.mol_id
        molecules.append(entry.molecule)
        mol_ids.append(entry.mol_id)
    stats.rejected = dict(rejected)
    stats.molecules_indexed = len(molecules)

    duplicate_ids = [mol_id for mol_id, count in Counter(mol_ids).items() if count > 1]
    if duplicate_ids:
        logger.warning(f"{len(duplicate_ids)} molecule IDs are repeated; using canonical SMILES as IDs")
        mol_ids = [mol.canonical for mol in molecules]

    index = build_index(molecules, config.constraints, mol_ids, threads)
    stats.index_cores = len(index)

    records = emit_pairs(index)
    stats.pairs_before_caps = len(records)
    records, stats.pairs_after_molecule_cap = _capped(records, config)
    stats.pairs_after_rule_cap = len(records)
    records = sample_records(records, config.sample_size, config.seed)
    stats.pairs_after_sampling = len(records)

    return MiningResult(records, index, stats)


def records_frame(records: Sequence[MmpRecord]) -> pd.DataFrame:
    return pd.DataFrame(
        [(r.source, r.target, r.rule, r.core) for r in records],
        columns=PAIR_COLUMNS,
    )


def write_pairs(records: Sequence[MmpRecord], target: PathOrBuffer) -> None:
    """Pairs TSV: header `source target smirks core`"""
    write_tsv(records_frame(records), target)


def read_pairs(source: PathOrBuffer) -> List[MmpRecord]:
    frame = read_tsv(source, PAIR_COLUMNS)
    return [MmpRecord(*row) for row in frame.itertuples(index=False, name=None)]


def write_index(index: FragmentIndex, target: PathOrBuffer) -> None:
    """Sorted `core<TAB>mol_id<TAB>rgroup` lines"""
    frame = pd.DataFrame(index.rows(), columns=INDEX_COLUMNS)
    write_tsv(frame, target, header=False)


def read_index(source: PathOrBuffer, smiles_by_id: Optional[Dict[str, str]] = None) -> FragmentIndex:
    """Load an index file; without `smiles_by_id`, parents are rebuilt from their first core and R-group"""
    frame = read_tsv(source, INDEX_COLUMNS, header=False)
    index: Dict[str, List[Tuple[str, str]]] = defaultdict(list)
    rebuilt: Dict[str, str] = {}
    for core, mol_id, rgroup in frame.itertuples(index=False, name=None):
        index[core].append((mol_id, rgroup))
        if smiles_by_id is None and mol_id not in rebuilt:
            rebuilt[mol_id] = reattach(parse_smiles(core), parse_smiles(rgroup)).canonical
    return FragmentIndex(dict(index), rebuilt if smiles_by_id is None else smiles_by_id)


def split_paths(prefix: str) -> Tuple[str, str, str]:
    return tuple(f"{prefix}.{name}.tsv" for name in ('train', 'valid', 'test'))


def write_splits(splits: Sequence[Sequence[MmpRecord]], prefix: str) -> Tuple[str, str, str]:
    """Write `<prefix>.{train,valid,test}.tsv`; returns the three paths"""
    paths = split_paths(prefix)
    Path(prefix).parent.mkdir(parents=True, exist_ok=True)
    for records, path in zip(splits, paths):
        write_pairs(records, path)
    return paths

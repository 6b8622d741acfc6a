"""
Mol2Trans Evaluation Harness
Validity / existence, coverage, search-size sweep and task accuracy metrics
"""

import logging
from collections import OrderedDict, defaultdict
from dataclasses import astuple, dataclass, fields, is_dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from mmp_beam_search import Candidate, SearchConfig, decode_sources, replace_specified
from mmp_errors import DecodeOverflow, FormatError, GroupMismatch, Mol2TransError, MoleculeError, ShapeError
from mmp_fragmenter import FragmentationConstraints, reattach
from mmp_miner import FragmentIndex, MmpRecord, read_pairs
from mmp_molgraph import parse_smiles
from mmp_seq2seq import Checkpoint
from mmp_smirks import apply_rule_products, try_parse_rule
from mmp_tables import PathOrBuffer, read_tsv, write_csv_report

logger = logging.getLogger(__name__)

DEFAULT_KS = (1, 10, 20, 50, 100)
COVERAGE_KS = (1, 10, 20, 30, 40, 50)
SWEEP_KS = (1, 5, 10, 50, 100, 200, 500, 1000)
PREDICTION_COLUMNS = ['source', 'rank', 'prediction']
EXIST_UNIVERSE_LINE = '# exist_universe=all_mined_molecules'


@dataclass(frozen=True)
class ValidExistRow:
    k: int
    percent_valid: float
    percent_exist: float


@dataclass(frozen=True)
class CoverageRow:
    k: int
    coverage_rate: float
    avg_covered: float


@dataclass(frozen=True)
class SweepRow:
    k: int
    n_existing: int
    n_novel: int


@dataclass(frozen=True)
class AccuracyRow:
    k: int
    removal_acc: float
    replacement_acc: float
    overall_acc: float


def columns_of(row_type) -> List[str]:
    return [f.name for f in fields(row_type)]


@dataclass
class EvalReport:
    valid_exist: List[ValidExistRow]
    coverage: List[CoverageRow]
    sweep: List[SweepRow]

    def check(self) -> None:
        """Raise ValueError when a row breaks the metric bounds"""
        for row in self.valid_exist:
            if not (0 <= row.percent_valid <= 1 and 0 <= row.percent_exist <= 1):
                raise ValueError(f"metric out of [0, 1]: {row}")
        for row in self.coverage:
            if not 0 <= row.coverage_rate <= 1 or row.avg_covered > row.k:
                raise ValueError(f"coverage row out of bounds: {row}")
        previous = None
        for row in self.sweep:
            if previous and (row.n_existing < previous.n_existing or row.n_novel < previous.n_novel):
                raise ValueError(f"sweep counts decrease between k={previous.k} and k={row.k}")
            previous = row


class KnownSet:
    """Every molecule of the mined dataset plus each source's known matched targets"""

    def __init__(self, molecules: Set[str], targets_by_source: Mapping[str, Set[str]]):
        self.molecules = set(molecules)
        self.targets_by_source = {source: set(targets) for source, targets in targets_by_source.items()}

    @classmethod
    def from_records(cls, records: Iterable[MmpRecord]) -> 'KnownSet':
        molecules: Set[str] = set()
        targets: Dict[str, Set[str]] = defaultdict(set)
        for record in records:
            molecules.update((record.source, record.target))
            targets[record.source].add(record.target)
        return cls(molecules, targets)

    @classmethod
    def from_index(cls, index: FragmentIndex) -> 'KnownSet':
        """Uncapped known targets: every molecule sharing a core with the source"""
        smiles_cache: Dict[Tuple[str, str], str] = {}
        molecules: Set[str] = set()
        targets: Dict[str, Set[str]] = defaultdict(set)
        for core, entries in index.items():
            core_mol = parse_smiles(core)
            members = []
            for _, rgroup in entries:
                key = (core, rgroup)
                if key not in smiles_cache:
                    smiles_cache[key] = reattach(core_mol, parse_smiles(rgroup)).canonical
                members.append((smiles_cache[key], rgroup))
            molecules.update(smiles for smiles, _ in members)
            for source, rgroup_a in members:
                for target, rgroup_b in members:
                    if source != target and rgroup_a != rgroup_b:
                        targets[source].add(target)
        return cls(molecules, targets)

    def __contains__(self, smiles: str) -> bool:
        return smiles in self.molecules

    def __len__(self) -> int:
        return len(self.molecules)

    def known_targets(self, source: str) -> Set[str]:
        return self.targets_by_source.get(source, set())


# ---------------------------------------------------------------------------
# Pure scoring
# ---------------------------------------------------------------------------

def _distinct_products(candidates: Sequence[Candidate]) -> List[str]:
    return list(OrderedDict.fromkeys(p for c in candidates for p in c.products))


def score_valid_exist(candidates_by_source: Sequence[Sequence[Candidate]], ks: Sequence[int],
                      known: KnownSet) -> List[ValidExistRow]:
    """
    %Valid and %Exist per k, both averaged over sources

    A source with no candidates counts as 0 %Valid. Sources without any valid
    product are left out of the %Exist average.

    Args:
        candidates_by_source: Ranked candidates of each source
        ks: Cutoffs; each row looks at the first k candidates
        known: Molecules a product must be in to count as existing

    Returns:
        One row per k, in the order given
    """
    rows = []
    for k in ks:
        valid_fractions = []
        exist_fractions = []
        for candidates in candidates_by_source:
            top = list(candidates)[:k]
            valid_fractions.append(sum(1 for c in top if c.valid) / len(top) if top else 0.0)
            products = _distinct_products(top)
            if products:
                exist_fractions.append(sum(1 for p in products if p in known) / len(products))
        rows.append(ValidExistRow(
            k=k,
            percent_valid=float(np.mean(valid_fractions)) if valid_fractions else 0.0,
            percent_exist=float(np.mean(exist_fractions)) if exist_fractions else 0.0,
        ))
    return rows


def score_coverage(products_by_source: Mapping[str, Iterable[str]], groups: Mapping[int, Sequence[str]],
                   known: KnownSet) -> List[CoverageRow]:
    """
    Coverage rate and mean covered count per known-target group

    Args:
        products_by_source: Distinct generated products of each source
        groups: Known-target count -> sources with exactly that many targets
        known: Known targets of every source

    Returns:
        One row per non-empty group, by ascending count
    """
    rows = []
    for k, sources in sorted(groups.items()):
        if not sources:
            logger.warning(f"Coverage group k={k} is empty; skipped")
            continue
        covered_counts = []
        for source in sources:
            targets = known.known_targets(source)
            if len(targets) != k:
                raise GroupMismatch(f"source {source} has {len(targets)} known targets, not {k}")
            covered_counts.append(len(set(products_by_source.get(source, ())) & targets))
        rows.append(CoverageRow(
            k=k,
            coverage_rate=float(np.mean([count > 0 for count in covered_counts])),
            avg_covered=float(np.mean(covered_counts)),
        ))
    return rows


def score_sweep(candidates_by_source: Sequence[Sequence[Candidate]], ks: Sequence[int],
                known: KnownSet) -> List[SweepRow]:
    """
    Existing vs novel distinct valid products at each search size, summed over sources

    Args:
        candidates_by_source: Ranked candidates of each source
        ks: Search sizes
        known: Molecules counted as existing

    Returns:
        One row per search size, in the order given
    """
    rows = []
    for k in ks:
        existing = novel = 0
        for candidates in candidates_by_source:
            for product in _distinct_products(list(candidates)[:k]):
                if product in known:
                    existing += 1
                else:
                    novel += 1
        rows.append(SweepRow(k=k, n_existing=existing, n_novel=novel))
    return rows


def score_task_accuracy(records: Sequence[MmpRecord], suggestions: Mapping[str, Sequence[Candidate]],
                        completions: Mapping[Tuple[str, str], Sequence[Candidate]],
                        ks: Sequence[int]) -> List[AccuracyRow]:
    """
    Removal, replacement and overall accuracy per k over gold records

    Args:
        records: Gold pairs
        suggestions: Source -> its free decode
        completions: (source, gold LHS) -> the decode forced on that LHS
        ks: Cutoffs

    Returns:
        One row per k
    """
    def parsed(candidates: Sequence[Candidate]) -> List[Optional[Tuple[str, str]]]:
        out = []
        for candidate in candidates:
            rule, _ = try_parse_rule(candidate.rule_text)
            out.append((rule.lhs_smiles, rule.rhs_smiles) if rule else None)
        return out

    parsed_suggestions = {source: parsed(c) for source, c in suggestions.items()}
    parsed_completions = {key: parsed(c) for key, c in completions.items()}

    rows = []
    for k in ks:
        removal = replacement = overall = 0
        for record in records:
            gold_lhs, gold_rhs = record.lhs, record.rhs
            top = [p for p in parsed_suggestions.get(record.source, [])[:k] if p]
            removal += any(lhs == gold_lhs for lhs, _ in top)
            overall += (gold_lhs, gold_rhs) in top
            forced = [p for p in parsed_completions.get((record.source, gold_lhs), [])[:k] if p]
            replacement += any(rhs == gold_rhs for _, rhs in forced)
        n = max(len(records), 1)
        rows.append(AccuracyRow(k, removal / n, replacement / n, overall / n))
    return rows


# ---------------------------------------------------------------------------
# Source selection
# ---------------------------------------------------------------------------

def unique_sources(records: Iterable[MmpRecord]) -> List[str]:
    return list(OrderedDict.fromkeys(record.source for record in records))


def build_coverage_groups(test_sources: Sequence[str], known: KnownSet, ks: Sequence[int] = COVERAGE_KS,
                          per_group: int = 100, seed: int = 0) -> Dict[int, List[str]]:
    """Test sources grouped by exact known-target count, at most `per_group` each"""
    by_count: Dict[int, List[str]] = defaultdict(list)
    for source in sorted(set(test_sources)):
        by_count[len(known.known_targets(source))].append(source)
    groups = {}
    rng = np.random.default_rng(seed)
    for k in ks:
        members = by_count.get(k, [])
        if len(members) > per_group:
            members = sorted(members[i] for i in rng.choice(len(members), size=per_group, replace=False))
        elif len(members) < per_group:
            logger.warning(f"Coverage group k={k} has {len(members)} sources (wanted {per_group})")
        groups[k] = members
    return groups


def select_sweep_subset(test_sources: Sequence[str], known: KnownSet, n_targets: int = 50) -> List[str]:
    """Sources with exactly `n_targets` known targets, else every test source"""
    sources = sorted(set(test_sources))
    subset = [s for s in sources if len(known.known_targets(s)) == n_targets]
    if not subset:
        logger.warning(f"No test source has exactly {n_targets} known targets; sweeping all {len(sources)}")
        return sources
    return subset


# ---------------------------------------------------------------------------
# Decoding protocols
# ---------------------------------------------------------------------------

def _decode_all(checkpoint: Checkpoint, sources: Sequence[str], config: SearchConfig,
                constraints: Optional[FragmentationConstraints], threads: int) -> List[List[Candidate]]:
    """Suggestions per source; a source whose decode overflows gets no candidates"""
    molecules = [parse_smiles(source) for source in sources]
    results: List[List[Candidate]] = []
    chunk = max(threads * 4, 1)
    for start in tqdm(range(0, len(molecules), chunk), desc="Decoding", unit="chunk", disable=None):
        batch = molecules[start:start + chunk]
        try:
            results.extend(decode_sources(checkpoint, batch, config, constraints, threads))
        except (DecodeOverflow, ShapeError):
            for mol in batch:
                try:
                    results.extend(decode_sources(checkpoint, [mol], config, constraints, 1))
                except (DecodeOverflow, ShapeError) as e:
                    logger.warning(f"{mol.canonical}: {e}")
                    results.append([])
    return results


def search_config(checkpoint: Checkpoint, beam_size: int, top_k: int, temperature: float) -> SearchConfig:
    return SearchConfig(beam_size=beam_size, temperature=temperature, top_k=min(top_k, beam_size),
                        max_steps=checkpoint.model_config.max_tgt_len)


def valid_exist_table(checkpoint: Checkpoint, test_sources: Sequence[str], ks: Sequence[int],
                      beam_size: int, known: KnownSet, temperature: float = 0.3,
                      constraints: Optional[FragmentationConstraints] = None,
                      threads: int = 1) -> List[ValidExistRow]:
    if max(ks) > beam_size:
        raise ValueError(f"largest k {max(ks)} exceeds beam size {beam_size}")
    config = search_config(checkpoint, beam_size, max(ks), temperature)
    candidates = _decode_all(checkpoint, test_sources, config, constraints, threads)
    return score_valid_exist(candidates, ks, known)


def coverage_by_group(checkpoint: Checkpoint, groups: Mapping[int, Sequence[str]], beam_size: int,
                      known: KnownSet, temperature: float = 0.3,
                      constraints: Optional[FragmentationConstraints] = None,
                      threads: int = 1) -> List[CoverageRow]:
    sources = sorted({source for members in groups.values() for source in members})
    for k, members in groups.items():
        for source in members:
            if len(known.known_targets(source)) != k:
                raise GroupMismatch(f"source {source} has {len(known.known_targets(source))} known targets, not {k}")
    config = search_config(checkpoint, beam_size, beam_size, temperature)
    candidates = _decode_all(checkpoint, sources, config, constraints, threads)
    products = {source: set(_distinct_products(c)) for source, c in zip(sources, candidates)}
    return score_coverage(products, groups, known)


def search_size_sweep(checkpoint: Checkpoint, sources: Sequence[str], ks: Sequence[int], beam_size: int,
                      known: KnownSet, temperature: float = 0.3,
                      constraints: Optional[FragmentationConstraints] = None,
                      threads: int = 1) -> List[SweepRow]:
    if max(ks) > beam_size:
        raise ValueError(f"largest k {max(ks)} exceeds beam size {beam_size}")
    config = search_config(checkpoint, beam_size, max(max(ks), 1), temperature)
    candidates = _decode_all(checkpoint, sources, config, constraints, threads)
    return score_sweep(candidates, ks, known)


def task_accuracy(checkpoint: Checkpoint, test_records: Sequence[MmpRecord], ks: Sequence[int],
                  beam_size: int, temperature: float = 0.3,
                  constraints: Optional[FragmentationConstraints] = None,
                  threads: int = 1) -> List[AccuracyRow]:
    if max(ks) > beam_size:
        raise ValueError(f"largest k {max(ks)} exceeds beam size {beam_size}")
    config = search_config(checkpoint, beam_size, max(ks), temperature)
    sources = unique_sources(test_records)
    suggestions = dict(zip(sources, _decode_all(checkpoint, sources, config, constraints, threads)))

    completions: Dict[Tuple[str, str], List[Candidate]] = {}
    pairs = list(OrderedDict.fromkeys((r.source, r.lhs) for r in test_records))
    for source, lhs in tqdm(pairs, desc="Forced decoding", unit="pair", disable=None):
        try:
            completions[(source, lhs)] = replace_specified(checkpoint, source, lhs, config)
        except Mol2TransError as e:
            logger.warning(f"{source} with {lhs}: {e}")
            completions[(source, lhs)] = []
    return score_task_accuracy(test_records, suggestions, completions, ks)


# ---------------------------------------------------------------------------
# External predictions
# ---------------------------------------------------------------------------

def read_predictions(source: PathOrBuffer) -> List[Tuple[str, List[str]]]:
    """(source, predictions in rank order) in file order of first appearance"""
    frame = read_tsv(source, PREDICTION_COLUMNS)
    grouped: Dict[str, List[Tuple[int, str]]] = OrderedDict()
    for row_number, (src, rank_text, prediction) in enumerate(frame.itertuples(index=False, name=None)):
        line_number = row_number + 2
        try:
            rank = int(rank_text)
        except ValueError:
            raise FormatError(f"rank '{rank_text}' is not an integer", line_number)
        if rank < 1:
            raise FormatError(f"rank must be >= 1, got {rank}", line_number)
        try:
            parse_smiles(src)
        except MoleculeError as e:
            raise FormatError(f"source '{src}' does not parse: {e}", line_number)
        grouped.setdefault(src, []).append((rank, prediction))
    return [(src, [p for _, p in sorted(items, key=lambda item: item[0])]) for src, items in grouped.items()]


def prediction_candidates(source: str, predictions: Sequence[str],
                          constraints: Optional[FragmentationConstraints] = None) -> List[Candidate]:
    """Rules are applied to the source; whole molecules are valid when they parse"""
    mol = parse_smiles(source)
    candidates = []
    for prediction in predictions:
        if '>>' in prediction:
            rule, error = try_parse_rule(prediction)
            products = apply_rule_products(rule, mol, constraints) if rule else []
            candidates.append(Candidate(prediction, 0.0, products, rule is not None, error))
            continue
        try:
            candidates.append(Candidate(prediction, 0.0, [parse_smiles(prediction).canonical], True))
        except MoleculeError as e:
            candidates.append(Candidate(prediction, 0.0, [], False, f"{type(e).__name__}: {e}"))
    return candidates


def score_external_predictions(source: PathOrBuffer, known: KnownSet, ks: Sequence[int],
                               constraints: Optional[FragmentationConstraints] = None) -> List[ValidExistRow]:
    """
    Score a `source rank prediction` TSV produced by another model

    Args:
        source: Path or stream of the predictions file
        known: Molecules counted as existing
        ks: Cutoffs
        constraints: Bounds used when a prediction is a transformation

    Returns:
        %Valid / %Exist rows, one per k
    """
    grouped = read_predictions(source)
    candidates = [prediction_candidates(src, predictions, constraints) for src, predictions in grouped]
    return score_valid_exist(candidates, ks, known)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def load_known_set(pairs_paths: Sequence[str]) -> KnownSet:
    records: List[MmpRecord] = []
    for path in pairs_paths:
        records.extend(read_pairs(path))
    known = KnownSet.from_records(records)
    logger.info(f"Known set: {len(known)} molecules from {len(records)} records")
    return known


def sibling_split_paths(test_path: str) -> List[str]:
    """`x.train.tsv` / `x.valid.tsv` next to `x.test.tsv`, when present"""
    name = Path(test_path).name
    if not name.endswith('.test.tsv'):
        return [test_path]
    prefix = str(Path(test_path).with_name(name[:-len('.test.tsv')]))
    paths = [f"{prefix}.{part}.tsv" for part in ('train', 'valid', 'test')]
    return [p for p in paths if Path(p).exists()]


def write_report(rows: Sequence, columns: Sequence[str], path: PathOrBuffer,
                 config_lines: Optional[List[str]] = None) -> None:
    """CSV of metric rows (dataclasses or tuples) under `#` provenance lines"""
    rows = [astuple(row) if is_dataclass(row) else tuple(row) for row in rows]
    frame = pd.DataFrame(rows, columns=list(columns))
    write_csv_report(frame, path, list(config_lines or []) + [EXIST_UNIVERSE_LINE])

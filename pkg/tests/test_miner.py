import io
from collections import Counter

import pytest

from mmp_errors import FormatError, InsufficientData
from mmp_fragmenter import FragmentationConstraints
from mmp_miner import (
    MiningConfig,
    MmpRecord,
    apply_caps,
    brute_force_pairs,
    build_index,
    check_ratios,
    emit_pairs,
    mine_corpus,
    read_index,
    read_pairs,
    sample_and_split,
    sample_records,
    write_index,
    write_pairs,
    write_splits,
)
from mmp_molgraph import canonicalize, parse_corpus_lines, parse_smiles


def test_index_pairs_match_brute_force(toy_molecules, uncapped_records):
    expected = brute_force_pairs(toy_molecules[:120], FragmentationConstraints())
    assert set(uncapped_records) == expected
    assert len(uncapped_records) == len(expected)


def test_records_are_directed_and_non_identity(uncapped_records):
    keys = {(r.source, r.target, r.rule) for r in uncapped_records}
    for record in uncapped_records:
        assert record.source != record.target
        assert record.lhs != record.rhs
        reverse_rule = f"{record.rhs}>>{record.lhs}"
        assert (record.target, record.source, reverse_rule) in keys


def test_small_series():
    molecules = [parse_smiles(s) for s in ('c1ccccc1O', 'c1ccccc1N', 'c1ccccc1C')]
    records = emit_pairs(build_index(molecules, FragmentationConstraints()))
    assert len(records) == 6
    phenol = canonicalize('c1ccccc1O')
    rules = {r.rule for r in records if r.source == phenol}
    assert rules == {f"{canonicalize('[*:1]O')}>>{canonicalize('[*:1]N')}",
                     f"{canonicalize('[*:1]O')}>>{canonicalize('[*:1]C')}"}


def test_molecule_cap(make_records):
    records = make_records(5, per_source=4)
    kept = apply_caps(records, MiningConfig(per_molecule_cap=2))
    assert len(kept) == 10
    assert max(Counter(r.source for r in kept).values()) == 2


def test_rule_cap():
    records = [MmpRecord(f"S{i}", f"T{i}", '[*:1]C>>[*:1]N', '[*:1]c1ccccc1') for i in range(7)]
    kept = apply_caps(records, MiningConfig(per_rule_cap=3))
    assert len(kept) == 3
    assert kept == [r for r in records if r in kept]


def test_caps_are_seeded(make_records):
    records = make_records(20, per_source=5)
    first = apply_caps(records, MiningConfig(per_molecule_cap=2, seed=4))
    second = apply_caps(records, MiningConfig(per_molecule_cap=2, seed=4))
    assert first == second


def test_sampling(make_records):
    records = make_records(10, per_source=3)
    sample = sample_records(records, 7, seed=1)
    assert len(sample) == 7
    assert sample == sample_records(records, 7, seed=1)
    assert sample_records(records, 100, seed=1) == records
    assert sample_records(records, None, seed=1) == records


def test_split_by_source(make_records):
    records = make_records(100, per_source=3)
    train, valid, test = sample_and_split(records, MiningConfig(seed=3))
    source_sets = [{r.source for r in part} for part in (train, valid, test)]
    assert [len(s) for s in source_sets] == [80, 10, 10]
    assert not (source_sets[0] & source_sets[1] or source_sets[0] & source_sets[2]
                or source_sets[1] & source_sets[2])
    assert sorted(train + valid + test) == sorted(records)
    assert (train, valid, test) == sample_and_split(records, MiningConfig(seed=3))


def test_split_needs_three_sources(make_records):
    with pytest.raises(InsufficientData):
        sample_and_split(make_records(2), MiningConfig())


@pytest.mark.parametrize('ratios', [(0.5, 0.5, 0.5), (0.8, 0.2), (1.2, -0.1, -0.1)])
def test_bad_ratios(ratios):
    with pytest.raises(ValueError):
        check_ratios(ratios)


def test_mine_corpus_stats():
    entries = parse_corpus_lines([
        'c1ccccc1O\ta',
        'Oc1ccccc1\tb',
        'c1ccccc1N\tc',
        'c1ccccc1C\td',
        'C1CC\te',
        'CC.O\tf',
    ])
    result = mine_corpus(entries, MiningConfig(), threads=1)
    stats = result.stats
    assert stats.molecules_read == 6
    assert stats.rejected == {'SmilesSyntaxError': 1, 'UnsupportedFeature': 1}
    assert stats.duplicates == 1
    assert stats.molecules_indexed == 3
    assert stats.pairs_before_caps == 6
    assert stats.pairs_after_sampling == len(result.records) == 6
    assert any('pairs before caps: 6' == line for line in stats.lines())


def test_mining_is_reproducible():
    entries = parse_corpus_lines([f"{s}" for s in (
        'c1ccccc1O', 'c1ccccc1N', 'c1ccccc1C', 'c1ccccc1F', 'c1ccccc1Cl', 'c1ccccc1Br')])
    config = MiningConfig(per_molecule_cap=2, per_rule_cap=1, seed=7)
    outputs = []
    for _ in range(2):
        buffer = io.StringIO()
        write_pairs(mine_corpus(entries, config, threads=1).records, buffer)
        outputs.append(buffer.getvalue())
    assert outputs[0] == outputs[1]


def test_pairs_file_round_trip(mined, tmp_path):
    path = str(tmp_path / 'pairs.tsv')
    write_pairs(mined.records, path)
    with open(path, encoding='utf-8') as f:
        assert f.readline() == 'source\ttarget\tsmirks\tcore\n'
    assert read_pairs(path) == mined.records


def test_pairs_file_errors():
    with pytest.raises(FormatError) as excinfo:
        read_pairs(io.StringIO('src\ttarget\tsmirks\tcore\n'))
    assert excinfo.value.line_number == 1
    with pytest.raises(FormatError) as excinfo:
        read_pairs(io.StringIO('source\ttarget\tsmirks\tcore\nCO\tCN\t[*:1]O>>[*:1]N\t[*:1]C\nCO\t\tx\ty\n'))
    assert excinfo.value.line_number == 3


def test_index_file_round_trip(tmp_path):
    molecules = [parse_smiles(s) for s in ('c1ccccc1O', 'c1ccccc1N')]
    index = build_index(molecules, FragmentationConstraints())
    path = str(tmp_path / 'index.tsv')
    write_index(index, path)
    restored = read_index(path)
    assert restored.rows() == index.rows()
    assert emit_pairs(restored) == emit_pairs(index)


def test_index_file_with_corpus_ids(tmp_path):
    molecules = [parse_smiles(s) for s in ('c1ccccc1O', 'c1ccccc1N', 'c1ccccc1C')]
    index = build_index(molecules, FragmentationConstraints(), mol_ids=['phenol', 'aniline', 'toluene'])
    path = str(tmp_path / 'index.tsv')
    write_index(index, path)
    restored = read_index(path)
    assert restored.smiles_by_id == {'phenol': canonicalize('Oc1ccccc1'),
                                     'aniline': canonicalize('Nc1ccccc1'),
                                     'toluene': canonicalize('Cc1ccccc1')}
    assert emit_pairs(restored) == emit_pairs(index)


def test_write_splits(make_records, tmp_path):
    splits = sample_and_split(make_records(10), MiningConfig())
    paths = write_splits(splits, str(tmp_path / 'toy'))
    assert [p.rsplit('.', 2)[1] for p in paths] == ['train', 'valid', 'test']
    assert [read_pairs(p) for p in paths] == list(splits)

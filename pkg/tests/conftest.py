import sys
from pathlib import Path

import pytest
import torch

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from mmp_fragmenter import FragmentationConstraints  # noqa: E402
from mmp_miner import MiningConfig, MmpRecord, build_index, emit_pairs, mine_corpus  # noqa: E402
from mmp_molgraph import parse_corpus_lines, parse_smiles  # noqa: E402
from mmp_seq2seq import Checkpoint, ModelConfig, TrainConfig, build_model, parameter_state  # noqa: E402
from mmp_toy_corpus import corpus_lines, toy_corpus  # noqa: E402
from mmp_vocab import EOS, Vocabulary  # noqa: E402


@pytest.fixture(scope='session')
def tiny_model_config():
    return ModelConfig(d_model=16, n_heads=2, n_encoder_layers=1, n_decoder_layers=1,
                       d_ffn=32, max_src_len=80, max_tgt_len=48, dropout=0.0)


@pytest.fixture(scope='session')
def toy_smiles():
    return toy_corpus()


@pytest.fixture(scope='session')
def toy_molecules(toy_smiles):
    return [parse_smiles(s) for s in toy_smiles]


@pytest.fixture(scope='session')
def mined():
    """Mining result over the first 300 toy molecules with default settings"""
    entries = parse_corpus_lines(corpus_lines(300))
    return mine_corpus(entries, MiningConfig(), threads=1)


@pytest.fixture(scope='session')
def uncapped_records(toy_molecules):
    index = build_index(toy_molecules[:120], FragmentationConstraints())
    return emit_pairs(index)


@pytest.fixture
def corpus_file(tmp_path):
    path = tmp_path / 'toy.smi'
    path.write_text('\n'.join(corpus_lines(200)) + '\n', encoding='utf-8')
    return str(path)


@pytest.fixture
def make_records():
    """Synthetic pair records: distinct sources, `per_source` distinct rules each"""
    def factory(n_sources, per_source=2):
        records = []
        for i in range(n_sources):
            for j in range(per_source):
                records.append(MmpRecord(f"S{i:03d}", f"T{i:03d}_{j}",
                                         f"[*:1]C{i}>>[*:1]N{j}", '[*:1]c1ccccc1'))
        return records
    return factory


@pytest.fixture
def eos_checkpoint(tiny_model_config):
    """Untrained tiny checkpoint whose decoder strongly prefers EOS"""
    def factory(texts, bias=8.0, seed=0):
        vocabulary = Vocabulary.build(texts)
        model = build_model(tiny_model_config, len(vocabulary), seed)
        with torch.no_grad():
            model.projection.bias[EOS] = bias
        return Checkpoint(tiny_model_config, TrainConfig(), vocabulary, parameter_state(model))
    return factory


@pytest.fixture
def dienone():
    """Hydroxyphenyl / catechol dienone: 21 heavy atoms, catechol R-group of 8"""
    return 'O=C(C=Cc1ccc(O)cc1)C=Cc1ccc(O)c(O)c1'

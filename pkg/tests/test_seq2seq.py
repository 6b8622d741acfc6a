import csv
import math

import pytest
import torch

from mmp_beam_search import SearchConfig, beam_decode
from mmp_errors import CheckpointError, InsufficientData, ShapeError
from mmp_miner import MmpRecord
from mmp_seq2seq import (
    Checkpoint,
    ModelConfig,
    TrainConfig,
    batch_loss,
    build_model,
    collate,
    evaluate_loss,
    gradient_check,
    load_checkpoint,
    make_examples,
    parameter_state,
    save_checkpoint,
    train,
    vocabulary_path,
)
from mmp_vocab import PAD, Vocabulary

RECORDS = [
    MmpRecord('Oc1ccccc1', 'Nc1ccccc1', '[*:1]O>>[*:1]N', '[*:1]c1ccccc1'),
    MmpRecord('Nc1ccccc1', 'Cc1ccccc1', '[*:1]N>>[*:1]C', '[*:1]c1ccccc1'),
    MmpRecord('Cc1ccccc1', 'Clc1ccccc1', '[*:1]C>>[*:1]Cl', '[*:1]c1ccccc1'),
    MmpRecord('Clc1ccccc1', 'Oc1ccccc1', '[*:1]Cl>>[*:1]O', '[*:1]c1ccccc1'),
]


@pytest.fixture
def vocab():
    return Vocabulary.build([r.source for r in RECORDS] + [r.rule for r in RECORDS])


@pytest.fixture
def batch(vocab, tiny_model_config):
    examples, dropped = make_examples(RECORDS, vocab, tiny_model_config)
    assert dropped == 0
    return collate(examples)


def test_collate_shifts_targets(batch):
    src, tgt_in, tgt_out = batch
    assert src.shape[0] == tgt_in.shape[0] == tgt_out.shape[0] == 4
    assert torch.equal(tgt_in[:, 1:][tgt_out[:, 1:] != PAD], tgt_out[:, :-1][tgt_out[:, 1:] != PAD])


def test_long_records_are_dropped(vocab):
    config = ModelConfig(d_model=16, n_heads=2, max_src_len=8, max_tgt_len=48)
    examples, dropped = make_examples(RECORDS, vocab, config)
    assert dropped == 4 and examples == []


def test_forward_shape(vocab, batch, tiny_model_config):
    model = build_model(tiny_model_config, len(vocab))
    src, tgt_in, _ = batch
    assert model(src, tgt_in).shape == (4, tgt_in.shape[1], len(vocab))


def test_decoder_is_causal(vocab, batch, tiny_model_config):
    model = build_model(tiny_model_config, len(vocab)).double().eval()
    src, tgt_in, _ = batch
    changed = tgt_in.clone()
    changed[:, 3:] = 4
    with torch.no_grad():
        before = model(src, tgt_in)[:, :3]
        after = model(src, changed)[:, :3]
    assert torch.allclose(before, after, atol=1e-12)


def test_source_padding_is_ignored(vocab, batch, tiny_model_config):
    model = build_model(tiny_model_config, len(vocab)).double().eval()
    src, tgt_in, _ = batch
    padded = torch.cat([src, torch.full((src.shape[0], 5), PAD, dtype=torch.long)], dim=1)
    with torch.no_grad():
        assert torch.allclose(model(src, tgt_in), model(padded, tgt_in), atol=1e-9)


def test_shape_errors(vocab, tiny_model_config):
    model = build_model(tiny_model_config, len(vocab))
    with pytest.raises(ShapeError):
        model.encode(torch.ones(1, tiny_model_config.max_src_len + 1, dtype=torch.long))
    with pytest.raises(ShapeError):
        model.encode(torch.full((1, 3), len(vocab), dtype=torch.long))
    with pytest.raises(ShapeError):
        model.encode(torch.ones(3, dtype=torch.long))


def test_zero_parameters_give_uniform_loss(vocab, batch, tiny_model_config):
    model = build_model(tiny_model_config, len(vocab))
    with torch.no_grad():
        for parameter in model.parameters():
            parameter.zero_()
    loss = float(batch_loss(model, *batch))
    assert loss == pytest.approx(math.log(len(vocab)), rel=1e-6)


def test_gradient_check(vocab, batch, tiny_model_config):
    model = build_model(tiny_model_config, len(vocab), seed=3)
    assert gradient_check(model, batch, eps=1e-4, samples_per_tensor=4) < 1e-3


def test_gradient_check_fails_on_a_frozen_parameter(vocab, batch, tiny_model_config):
    model = build_model(tiny_model_config, len(vocab), seed=3)
    model.decoder_layers[0].self_attention.w_v.weight.requires_grad_(False)
    assert gradient_check(model, batch, samples_per_tensor=1) == math.inf


def test_gradient_check_fails_on_a_non_finite_gradient(vocab, batch, tiny_model_config):
    model = build_model(tiny_model_config, len(vocab), seed=3)
    with torch.no_grad():
        model.projection.weight[0, 0] = math.nan
    assert gradient_check(model, batch, samples_per_tensor=1) == math.inf


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(d_model=10, n_heads=4)
    with pytest.raises(ValueError):
        ModelConfig(dropout=1.0)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)


def test_checkpoint_round_trip(vocab, batch, tiny_model_config, tmp_path):
    model = build_model(tiny_model_config, len(vocab), seed=5)
    checkpoint = Checkpoint(tiny_model_config, TrainConfig(seed=5), vocab, parameter_state(model), 3, 0.25)
    path = str(tmp_path / 'model.ckpt')
    save_checkpoint(path, checkpoint)
    restored = load_checkpoint(path)

    assert restored.model_config == tiny_model_config
    assert restored.train_config == TrainConfig(seed=5)
    assert (restored.epoch, restored.best_valid_loss) == (3, 0.25)
    assert restored.vocabulary == vocab
    assert list(restored.state) == list(checkpoint.state)
    for name, tensor in checkpoint.state.items():
        assert torch.equal(restored.state[name], tensor)
    src, tgt_in, _ = batch
    with torch.no_grad():
        assert torch.equal(restored.model(src, tgt_in), checkpoint.model(src, tgt_in))


def _saved(vocab, tiny_model_config, tmp_path):
    model = build_model(tiny_model_config, len(vocab))
    path = str(tmp_path / 'model.ckpt')
    save_checkpoint(path, Checkpoint(tiny_model_config, TrainConfig(), vocab, parameter_state(model)))
    return path


def test_checkpoint_version_rejected(vocab, tiny_model_config, tmp_path):
    path = _saved(vocab, tiny_model_config, tmp_path)
    data = bytearray(open(path, 'rb').read())
    data[4:6] = (2).to_bytes(2, 'little')
    open(path, 'wb').write(bytes(data))
    with pytest.raises(CheckpointError, match='version'):
        load_checkpoint(path)


@pytest.mark.parametrize('corrupt', ['magic', 'truncated', 'trailing'])
def test_corrupt_checkpoints(vocab, tiny_model_config, tmp_path, corrupt):
    path = _saved(vocab, tiny_model_config, tmp_path)
    data = open(path, 'rb').read()
    if corrupt == 'magic':
        data = b'XXXX' + data[4:]
    elif corrupt == 'truncated':
        data = data[:-10]
    else:
        data = data + b'\0'
    open(path, 'wb').write(data)
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_vocabulary_mismatch(vocab, tiny_model_config, tmp_path):
    path = _saved(vocab, tiny_model_config, tmp_path)
    Vocabulary(['C', 'O']).save(vocabulary_path(path))
    with pytest.raises(CheckpointError, match='fingerprint'):
        load_checkpoint(path)


def test_train_one_epoch_and_resume(tiny_model_config, tmp_path):
    log_path = str(tmp_path / 'model.ckpt.log')
    config = TrainConfig(batch_size=2, max_epochs=1, seed=1)
    first = train(RECORDS, RECORDS, tiny_model_config, config, log_path=log_path)
    assert first.epoch == 1
    assert math.isfinite(first.best_valid_loss)

    second = train(RECORDS, RECORDS, tiny_model_config, config, resume=first, log_path=log_path)
    assert second.epoch in (1, 2)
    assert second.best_valid_loss <= first.best_valid_loss
    with open(log_path, newline='') as f:
        rows = list(csv.reader(f))
    assert rows[0] == ['epoch', 'train_loss', 'valid_loss']
    assert [row[0] for row in rows[1:]] == ['1', '2']


def test_training_is_reproducible(tiny_model_config):
    config = TrainConfig(batch_size=2, max_epochs=2, seed=9)
    a = train(RECORDS, RECORDS, tiny_model_config, config)
    b = train(RECORDS, RECORDS, tiny_model_config, config)
    assert a.best_valid_loss == b.best_valid_loss
    assert all(torch.equal(a.state[name], b.state[name]) for name in a.state)


def test_train_needs_examples(tiny_model_config):
    with pytest.raises(InsufficientData):
        train(RECORDS, [], tiny_model_config, TrainConfig(max_epochs=1))


@pytest.mark.slow
def test_overfit_small_dataset(mined):
    # one rule per source so the mapping is learnable exactly
    first_rule = {}
    for record in mined.records:
        first_rule.setdefault(record.source, record)
    records = list(first_rule.values())[:64]
    config = ModelConfig(dropout=0.0)
    checkpoint = train(records, records, config,
                       TrainConfig(batch_size=8, learning_rate=1e-3, early_stop_patience_epochs=500,
                                   max_epochs=500, seed=0))
    vocab = checkpoint.vocabulary
    examples, _ = make_examples(records, vocab, config)
    assert evaluate_loss(checkpoint.model, examples) < 0.01

    greedy = SearchConfig(beam_size=1, temperature=1.0, top_k=1, max_steps=config.max_tgt_len)
    hits = sum(beam_decode(checkpoint, r.source, greedy)[0].rule_text == r.rule for r in records)
    assert hits >= 0.95 * len(records)

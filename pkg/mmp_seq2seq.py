"""
Mol2Trans Sequence Model
Desk-scale encoder-decoder transformer mapping source SMILES to transformation
strings, its training loop and the versioned checkpoint format
"""

import copy
import csv
import logging
import math
import struct
from dataclasses import asdict, dataclass, fields
from functools import cached_property
from pathlib import Path
from typing import BinaryIO, Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from tqdm import tqdm

from mmp_errors import CheckpointError, InsufficientData, ShapeError
from mmp_miner import MmpRecord
from mmp_vocab import BOS, EOS, PAD, Vocabulary, tokenize

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b'MMPK'
CHECKPOINT_FORMAT_VERSION = 1
FINGERPRINT_BYTES = 32


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 64
    n_heads: int = 4
    n_encoder_layers: int = 2
    n_decoder_layers: int = 2
    d_ffn: int = 256
    max_src_len: int = 160
    max_tgt_len: int = 96
    dropout: float = 0.1

    def __post_init__(self):
        for name in ('d_model', 'n_heads', 'n_encoder_layers', 'n_decoder_layers',
                     'd_ffn', 'max_src_len', 'max_tgt_len'):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model {self.d_model} is not divisible by n_heads {self.n_heads}")
        if not 0 <= self.dropout < 1:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    learning_rate: float = 5e-4
    early_stop_patience_epochs: int = 2
    max_epochs: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.batch_size <= 0 or self.learning_rate <= 0:
            raise ValueError("batch_size and learning_rate must be positive")
        if self.early_stop_patience_epochs <= 0 or self.max_epochs <= 0:
            raise ValueError("patience and max_epochs must be positive")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------

class PositionalEncoding(nn.Module):
    """Fixed sinusoidal position table added to scaled embeddings"""

    def __init__(self, d_model: int, max_len: int, dropout: float):
        super().__init__()
        self.dropout = nn.Dropout(dropout)
        pe = torch.zeros(max_len, d_model)
        position = torch.arange(0, max_len, dtype=torch.float).unsqueeze(1)
        div_term = torch.exp(torch.arange(0, d_model, 2).float() * (-math.log(10000.0) / d_model))
        pe[:, 0::2] = torch.sin(position * div_term)
        pe[:, 1::2] = torch.cos(position * div_term[:d_model // 2])
        # not a parameter and not serialized
        self.register_buffer('pe', pe.unsqueeze(0), persistent=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.dropout(x + self.pe[:, :x.shape[1], :])


class MultiHeadAttention(nn.Module):
    def __init__(self, d_model: int, n_heads: int, dropout: float):
        super().__init__()
        self.n_heads = n_heads
        self.d_k = d_model // n_heads
        self.w_q = nn.Linear(d_model, d_model)
        self.w_k = nn.Linear(d_model, d_model)
        self.w_v = nn.Linear(d_model, d_model)
        self.w_o = nn.Linear(d_model, d_model)
        self.dropout = nn.Dropout(dropout)

    def _split(self, x: torch.Tensor) -> torch.Tensor:
        # (batch, len, d_model) -> (batch, heads, len, d_k)
        return x.view(x.shape[0], x.shape[1], self.n_heads, self.d_k).transpose(1, 2)

    def forward(self, q: torch.Tensor, k: torch.Tensor, v: torch.Tensor,
                blocked: Optional[torch.Tensor]) -> torch.Tensor:
        """`blocked` broadcasts to (batch, heads, q_len, k_len); True entries are not attended"""
        query, key, value = self._split(self.w_q(q)), self._split(self.w_k(k)), self._split(self.w_v(v))
        scores = query @ key.transpose(-2, -1) / math.sqrt(self.d_k)
        if blocked is not None:
            scores = scores.masked_fill(blocked, float('-inf'))
        weights = self.dropout(torch.softmax(scores, dim=-1))
        output = (weights @ value).transpose(1, 2).contiguous()
        return self.w_o(output.view(output.shape[0], output.shape[1], -1))


class FeedForward(nn.Module):
    def __init__(self, d_model: int, d_ffn: int, dropout: float):
        super().__init__()
        self.linear1 = nn.Linear(d_model, d_ffn)
        self.linear2 = nn.Linear(d_ffn, d_model)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.linear2(self.dropout(F.gelu(self.linear1(x))))


class EncoderBlock(nn.Module):
    """Pre-norm self-attention and feed-forward sublayers"""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.norm_attention = nn.LayerNorm(config.d_model)
        self.self_attention = MultiHeadAttention(config.d_model, config.n_heads, config.dropout)
        self.norm_feed_forward = nn.LayerNorm(config.d_model)
        self.feed_forward = FeedForward(config.d_model, config.d_ffn, config.dropout)
        self.dropout = nn.Dropout(config.dropout)

    def forward(self, x: torch.Tensor, src_blocked: torch.Tensor) -> torch.Tensor:
        h = self.norm_attention(x)
        x = x + self.dropout(self.self_attention(h, h, h, src_blocked))
        return x + self.dropout(self.feed_forward(self.norm_feed_forward(x)))


class DecoderBlock(nn.Module):
    """Pre-norm causal self-attention, cross-attention and feed-forward sublayers"""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.norm_self_attention = nn.LayerNorm(config.d_model)
        self.self_attention = MultiHeadAttention(config.d_model, config.n_heads, config.dropout)
        self.norm_cross_attention = nn.LayerNorm(config.d_model)
        self.cross_attention = MultiHeadAttention(config.d_model, config.n_heads, config.dropout)
        self.norm_feed_forward = nn.LayerNorm(config.d_model)
        self.feed_forward = FeedForward(config.d_model, config.d_ffn, config.dropout)
        self.dropout = nn.Dropout(config.dropout)

    def forward(self, x: torch.Tensor, memory: torch.Tensor, src_blocked: torch.Tensor,
                tgt_blocked: torch.Tensor) -> torch.Tensor:
        h = self.norm_self_attention(x)
        x = x + self.dropout(self.self_attention(h, h, h, tgt_blocked))
        h = self.norm_cross_attention(x)
        x = x + self.dropout(self.cross_attention(h, memory, memory, src_blocked))
        return x + self.dropout(self.feed_forward(self.norm_feed_forward(x)))


class Seq2SeqTransformer(nn.Module):
    """Encoder-decoder transformer over one shared token vocabulary"""

    def __init__(self, config: ModelConfig, vocab_size: int):
        super().__init__()
        self.config = config
        self.vocab_size = vocab_size
        self.src_embedding = nn.Embedding(vocab_size, config.d_model)
        self.tgt_embedding = nn.Embedding(vocab_size, config.d_model)
        self.src_position = PositionalEncoding(config.d_model, config.max_src_len, config.dropout)
        self.tgt_position = PositionalEncoding(config.d_model, config.max_tgt_len, config.dropout)
        self.encoder_layers = nn.ModuleList([EncoderBlock(config) for _ in range(config.n_encoder_layers)])
        self.encoder_norm = nn.LayerNorm(config.d_model)
        self.decoder_layers = nn.ModuleList([DecoderBlock(config) for _ in range(config.n_decoder_layers)])
        self.decoder_norm = nn.LayerNorm(config.d_model)
        self.projection = nn.Linear(config.d_model, vocab_size)
        self.reset_parameters()

    def reset_parameters(self) -> None:
        """Uniform(+-1/sqrt(fan_in)) weights, zero biases, unit LayerNorm gains"""
        for module in self.modules():
            if isinstance(module, nn.Linear):
                bound = 1.0 / math.sqrt(module.in_features)
                nn.init.uniform_(module.weight, -bound, bound)
                nn.init.zeros_(module.bias)
            elif isinstance(module, nn.Embedding):
                bound = 1.0 / math.sqrt(module.embedding_dim)
                nn.init.uniform_(module.weight, -bound, bound)
            elif isinstance(module, nn.LayerNorm):
                nn.init.ones_(module.weight)
                nn.init.zeros_(module.bias)

    def _check(self, ids: torch.Tensor, max_len: int, role: str) -> None:
        if ids.dim() != 2:
            raise ShapeError(f"{role} ids must be (batch, length), got shape {tuple(ids.shape)}")
        if ids.shape[1] > max_len:
            raise ShapeError(f"{role} length {ids.shape[1]} exceeds the configured maximum {max_len}")
        if ids.numel() and (int(ids.min()) < 0 or int(ids.max()) >= self.vocab_size):
            raise ShapeError(f"{role} token id outside vocabulary of size {self.vocab_size}")

    def encode(self, src: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """(memory, src_blocked) for a padded batch of source ids"""
        self._check(src, self.config.max_src_len, 'source')
        src_blocked = (src == PAD)[:, None, None, :]
        x = self.src_position(self.src_embedding(src) * math.sqrt(self.config.d_model))
        for layer in self.encoder_layers:
            x = layer(x, src_blocked)
        return self.encoder_norm(x), src_blocked

    def decode_logits(self, tgt_in: torch.Tensor, memory: torch.Tensor,
                      src_blocked: torch.Tensor) -> torch.Tensor:
        """Next-token scores for every target position: (batch, length, vocab)"""
        self._check(tgt_in, self.config.max_tgt_len, 'target')
        length = tgt_in.shape[1]
        causal = torch.triu(torch.ones(length, length, dtype=torch.bool, device=tgt_in.device), diagonal=1)
        x = self.tgt_position(self.tgt_embedding(tgt_in) * math.sqrt(self.config.d_model))
        for layer in self.decoder_layers:
            x = layer(x, memory, src_blocked, causal)
        return self.projection(self.decoder_norm(x))

    def forward(self, src: torch.Tensor, tgt_in: torch.Tensor) -> torch.Tensor:
        memory, src_blocked = self.encode(src)
        return self.decode_logits(tgt_in, memory, src_blocked)


def build_model(config: ModelConfig, vocab_size: int, seed: int = 0) -> Seq2SeqTransformer:
    """Seeded model construction"""
    torch.manual_seed(seed)
    return Seq2SeqTransformer(config, vocab_size)


# ---------------------------------------------------------------------------
# Examples and batches
# ---------------------------------------------------------------------------

@dataclass
class Example:
    src_ids: List[int]
    tgt_ids: List[int]


def encode_source(text: str, vocab: Vocabulary) -> List[int]:
    return [BOS] + vocab.encode(tokenize(text)) + [EOS]


def make_examples(records: Sequence[MmpRecord], vocab: Vocabulary,
                  config: ModelConfig) -> Tuple[List[Example], int]:
    """Encode records; those exceeding the length bounds are dropped and counted"""
    examples = []
    dropped = 0
    unknown = 0
    for record in records:
        src_tokens = tokenize(record.source)
        tgt_tokens = tokenize(record.rule)
        if len(src_tokens) + 2 > config.max_src_len or len(tgt_tokens) + 2 > config.max_tgt_len:
            dropped += 1
            continue
        unknown += vocab.count_unknown(src_tokens) + vocab.count_unknown(tgt_tokens)
        examples.append(Example(
            src_ids=[BOS] + vocab.encode(src_tokens) + [EOS],
            tgt_ids=vocab.encode(tgt_tokens) + [EOS],
        ))
    if dropped:
        logger.warning(f"Dropped {dropped} records exceeding length bounds "
                       f"(source {config.max_src_len}, target {config.max_tgt_len})")
    if unknown:
        logger.info(f"{unknown} tokens outside the vocabulary mapped to <unk>")
    return examples, dropped


def collate(examples: Sequence[Example]) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """(src, decoder input = BOS + gold, decoder output = gold + EOS), PAD-filled"""
    src_len = max(len(e.src_ids) for e in examples)
    tgt_len = max(len(e.tgt_ids) for e in examples)
    src = torch.full((len(examples), src_len), PAD, dtype=torch.long)
    tgt_in = torch.full((len(examples), tgt_len), PAD, dtype=torch.long)
    tgt_out = torch.full((len(examples), tgt_len), PAD, dtype=torch.long)
    for row, example in enumerate(examples):
        src[row, :len(example.src_ids)] = torch.tensor(example.src_ids)
        gold = example.tgt_ids
        tgt_in[row, :len(gold)] = torch.tensor([BOS] + gold[:-1])
        tgt_out[row, :len(gold)] = torch.tensor(gold)
    return src, tgt_in, tgt_out


def batch_loss(model: Seq2SeqTransformer, src: torch.Tensor, tgt_in: torch.Tensor,
               tgt_out: torch.Tensor, reduction: str = 'mean') -> torch.Tensor:
    """Token-level cross-entropy with PAD positions masked out"""
    logits = model(src, tgt_in)
    return F.cross_entropy(logits.reshape(-1, logits.shape[-1]), tgt_out.reshape(-1),
                           ignore_index=PAD, reduction=reduction)


def _batches(examples: Sequence[Example], batch_size: int,
             order: Optional[Sequence[int]] = None) -> List[List[Example]]:
    order = range(len(examples)) if order is None else order
    ordered = [examples[i] for i in order]
    return [ordered[i:i + batch_size] for i in range(0, len(ordered), batch_size)]


def evaluate_loss(model: Seq2SeqTransformer, examples: Sequence[Example], batch_size: int = 64) -> float:
    """Loss per target token on gold prefixes, in eval mode"""
    was_training = model.training
    model.eval()
    total, tokens = 0.0, 0
    with torch.no_grad():
        for batch in _batches(examples, batch_size):
            src, tgt_in, tgt_out = collate(batch)
            total += float(batch_loss(model, src, tgt_in, tgt_out, reduction='sum'))
            tokens += int((tgt_out != PAD).sum())
    model.train(was_training)
    return total / max(tokens, 1)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

@dataclass
class Checkpoint:
    model_config: ModelConfig
    train_config: TrainConfig
    vocabulary: Vocabulary
    state: Dict[str, torch.Tensor]
    epoch: int = 0
    best_valid_loss: float = float('inf')

    @property
    def fingerprint(self) -> bytes:
        return self.vocabulary.fingerprint

    @cached_property
    def model(self) -> Seq2SeqTransformer:
        """Eval-mode model holding the checkpoint parameters (built once)"""
        model = Seq2SeqTransformer(self.model_config, len(self.vocabulary))
        load_parameters(model, self.state)
        model.eval()
        return model


def parameter_state(model: nn.Module) -> Dict[str, torch.Tensor]:
    """Detached float32 copies of the parameters in declaration order"""
    return {name: p.detach().to(torch.float32).clone() for name, p in model.named_parameters()}


def load_parameters(model: nn.Module, state: Dict[str, torch.Tensor]) -> None:
    expected = dict(model.named_parameters())
    if list(expected) != list(state):
        missing = sorted(set(expected) - set(state))
        extra = sorted(set(state) - set(expected))
        raise CheckpointError(f"parameter names do not match the model (missing {missing}, extra {extra})")
    with torch.no_grad():
        for name, parameter in expected.items():
            if tuple(parameter.shape) != tuple(state[name].shape):
                raise CheckpointError(
                    f"parameter {name} has shape {tuple(state[name].shape)}, "
                    f"model expects {tuple(parameter.shape)}")
            parameter.copy_(state[name].to(parameter.dtype))


def vocabulary_path(checkpoint_path: str) -> str:
    return f"{checkpoint_path}.vocab"


def _config_block(checkpoint: Checkpoint) -> bytes:
    lines = []
    for prefix, config in (('model', checkpoint.model_config), ('train', checkpoint.train_config)):
        for key, value in asdict(config).items():
            lines.append(f"{prefix}.{key}={value!r}")
    lines.append(f"epoch={checkpoint.epoch}")
    lines.append(f"best_valid_loss={checkpoint.best_valid_loss!r}")
    lines.append(f"vocab_size={len(checkpoint.vocabulary)}")
    return ('\n'.join(lines) + '\n').encode('utf-8')


def _parse_config_block(text: str) -> Dict[str, str]:
    values = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, sep, value = line.partition('=')
        if not sep:
            raise CheckpointError(f"malformed config line in checkpoint: {line!r}")
        values[key] = value
    return values


def _build_config(cls, values: Dict[str, str], prefix: str):
    kwargs = {}
    for f in fields(cls):
        key = f"{prefix}.{f.name}"
        if key not in values:
            raise CheckpointError(f"checkpoint config is missing {key}")
        raw = values[key]
        try:
            kwargs[f.name] = float(raw) if f.type in (float, 'float') else int(raw)
        except ValueError:
            raise CheckpointError(f"bad value for {key} in checkpoint: {raw!r}")
    try:
        return cls(**kwargs)
    except ValueError as e:
        raise CheckpointError(f"invalid {prefix} config in checkpoint: {e}")


def save_checkpoint(path: str, checkpoint: Checkpoint) -> None:
    """Binary checkpoint plus its `<path>.vocab` sidecar"""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    config_block = _config_block(checkpoint)
    with open(path, 'wb') as f:
        f.write(struct.pack('<4sH', CHECKPOINT_MAGIC, CHECKPOINT_FORMAT_VERSION))
        f.write(struct.pack('<I', len(config_block)))
        f.write(config_block)
        f.write(checkpoint.fingerprint)
        f.write(struct.pack('<I', len(checkpoint.state)))
        for name, tensor in checkpoint.state.items():
            encoded = name.encode('utf-8')
            f.write(struct.pack('<H', len(encoded)))
            f.write(encoded)
            f.write(struct.pack('<B', tensor.dim()))
            f.write(struct.pack(f'<{tensor.dim()}I', *tensor.shape))
            f.write(np.ascontiguousarray(tensor.detach().cpu().numpy(), dtype='<f4').tobytes())
    checkpoint.vocabulary.save(vocabulary_path(path))
    logger.info(f"Saved checkpoint {path} (epoch {checkpoint.epoch}, "
                f"best valid loss {checkpoint.best_valid_loss:.6f})")


def _read_exact(f: BinaryIO, size: int, what: str) -> bytes:
    data = f.read(size)
    if len(data) != size:
        raise CheckpointError(f"checkpoint truncated while reading {what}")
    return data


def load_checkpoint(path: str, vocabulary: Optional[Vocabulary] = None) -> Checkpoint:
    """Read a checkpoint; the vocabulary defaults to the sidecar file and must match the stored fingerprint"""
    try:
        f = open(path, 'rb')
    except OSError as e:
        raise CheckpointError(f"cannot open checkpoint {path}: {e}")
    with f:
        magic, version = struct.unpack('<4sH', _read_exact(f, 6, 'header'))
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path} is not a checkpoint (bad magic bytes)")
        if version != CHECKPOINT_FORMAT_VERSION:
            raise CheckpointError(f"unsupported checkpoint format version {version}")
        (block_size,) = struct.unpack('<I', _read_exact(f, 4, 'config size'))
        try:
            config_text = _read_exact(f, block_size, 'config block').decode('utf-8')
        except UnicodeDecodeError:
            raise CheckpointError("checkpoint config block is not valid UTF-8")
        fingerprint = _read_exact(f, FINGERPRINT_BYTES, 'vocabulary fingerprint')
        (n_tensors,) = struct.unpack('<I', _read_exact(f, 4, 'tensor count'))
        state: Dict[str, torch.Tensor] = {}
        for _ in range(n_tensors):
            (name_size,) = struct.unpack('<H', _read_exact(f, 2, 'tensor name size'))
            name = _read_exact(f, name_size, 'tensor name').decode('utf-8', errors='replace')
            (ndim,) = struct.unpack('<B', _read_exact(f, 1, f'{name} rank'))
            shape = struct.unpack(f'<{ndim}I', _read_exact(f, 4 * ndim, f'{name} shape'))
            count = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(_read_exact(f, 4 * count, f'{name} data'), dtype='<f4')
            state[name] = torch.from_numpy(data.astype(np.float32).reshape(shape))
        if f.read(1):
            raise CheckpointError("unexpected trailing bytes after the last tensor")

    values = _parse_config_block(config_text)
    model_config = _build_config(ModelConfig, values, 'model')
    train_config = _build_config(TrainConfig, values, 'train')

    if vocabulary is None:
        vocabulary = Vocabulary.load(vocabulary_path(path))
    if vocabulary.fingerprint != fingerprint:
        raise CheckpointError("vocabulary fingerprint does not match the checkpoint")

    try:
        epoch = int(values.get('epoch', '0'))
        best_valid_loss = float(values.get('best_valid_loss', 'inf'))
    except ValueError:
        raise CheckpointError("bad epoch counter in checkpoint")

    checkpoint = Checkpoint(model_config, train_config, vocabulary, state, epoch, best_valid_loss)
    # validates names and shapes against the configuration
    checkpoint.model
    return checkpoint


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def _append_log(log_path: Optional[str], epoch: int, train_loss: float, valid_loss: float) -> None:
    if not log_path:
        return
    path = Path(log_path)
    new_file = not path.exists() or path.stat().st_size == 0
    with open(path, 'a', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        if new_file:
            writer.writerow(['epoch', 'train_loss', 'valid_loss'])
        writer.writerow([epoch, f"{train_loss:.6f}", f"{valid_loss:.6f}"])


def train(train_records: Sequence[MmpRecord], valid_records: Sequence[MmpRecord],
          model_config: ModelConfig, train_config: TrainConfig,
          vocabulary: Optional[Vocabulary] = None, resume: Optional[Checkpoint] = None,
          log_path: Optional[str] = None) -> Checkpoint:
    """
    Training on gold prefixes with early stopping on validation loss

    When resuming, parameters and the epoch counter come from `resume`; the
    optimizer state starts fresh.

    Args:
        train_records: Pairs to fit
        valid_records: Pairs for the per-epoch validation loss
        model_config: Model shape; replaced by the resumed checkpoint's
        train_config: Optimizer, batch and stopping settings
        vocabulary: Token vocabulary; built from the training records when omitted
        resume: Checkpoint to continue from
        log_path: CSV receiving one `epoch,train_loss,valid_loss` row per epoch

    Returns:
        Checkpoint of the epoch with the best validation loss
    """
    if resume is not None:
        vocabulary = resume.vocabulary
        model_config = resume.model_config
    elif vocabulary is None:
        vocabulary = Vocabulary.build(
            [r.source for r in train_records] + [r.rule for r in train_records])

    train_examples, _ = make_examples(train_records, vocabulary, model_config)
    valid_examples, _ = make_examples(valid_records, vocabulary, model_config)
    if not train_examples:
        raise InsufficientData("no training records left after length filtering")
    if not valid_examples:
        raise InsufficientData("no validation records left after length filtering")

    model = build_model(model_config, len(vocabulary), train_config.seed)
    start_epoch = 1
    best_loss = float('inf')
    best_epoch = 0
    if resume is not None:
        load_parameters(model, resume.state)
        start_epoch = resume.epoch + 1
        best_loss = resume.best_valid_loss
        best_epoch = resume.epoch
        logger.info(f"Resuming from epoch {resume.epoch} (best valid loss {best_loss:.6f})")
    best_state = parameter_state(model)

    optimizer = torch.optim.Adam(model.parameters(), lr=train_config.learning_rate)
    logger.info(f"Training on {len(train_examples)} examples, validating on {len(valid_examples)}; "
                f"vocabulary {len(vocabulary)} tokens, "
                f"{sum(p.numel() for p in model.parameters())} parameters")

    stale_epochs = 0
    last_epoch = start_epoch + train_config.max_epochs - 1
    for epoch in tqdm(range(start_epoch, last_epoch + 1), desc="Training", unit="epoch", disable=None):
        model.train()
        order = np.random.default_rng([train_config.seed, epoch]).permutation(len(train_examples))
        total, tokens = 0.0, 0
        for batch in _batches(train_examples, train_config.batch_size, order):
            src, tgt_in, tgt_out = collate(batch)
            optimizer.zero_grad()
            loss = batch_loss(model, src, tgt_in, tgt_out, reduction='sum')
            n_tokens = int((tgt_out != PAD).sum())
            (loss / n_tokens).backward()
            optimizer.step()
            total += float(loss)
            tokens += n_tokens
        train_loss = total / tokens
        valid_loss = evaluate_loss(model, valid_examples, train_config.batch_size)
        _append_log(log_path, epoch, train_loss, valid_loss)
        logger.info(f"Epoch {epoch}: train loss {train_loss:.6f}, valid loss {valid_loss:.6f}")

        if valid_loss < best_loss:
            best_loss, best_epoch = valid_loss, epoch
            best_state = parameter_state(model)
            stale_epochs = 0
        else:
            stale_epochs += 1
            if stale_epochs >= train_config.early_stop_patience_epochs:
                logger.info(f"Early stopping after epoch {epoch}; best epoch {best_epoch}")
                break

    return Checkpoint(model_config, train_config, vocabulary, best_state, best_epoch, best_loss)


def gradient_check(model: Seq2SeqTransformer, batch: Tuple[torch.Tensor, torch.Tensor, torch.Tensor],
                   eps: float = 1e-4, samples_per_tensor: int = 4, seed: int = 0,
                   floor: float = 1e-4) -> float:
    """Max relative error between autograd and central differences.

    Runs in double precision and eval mode on a copy of the model, sampling
    entries of every parameter tensor. Infinite when any parameter (frozen
    included) gets no gradient or a non-finite one.
    """
    model = copy.deepcopy(model).double().eval()
    src, tgt_in, tgt_out = batch

    def loss_value() -> float:
        with torch.no_grad():
            return float(batch_loss(model, src, tgt_in, tgt_out))

    model.zero_grad()
    batch_loss(model, src, tgt_in, tgt_out).backward()

    for name, parameter in model.named_parameters():
        grad = parameter.grad
        if grad is None or not bool(torch.isfinite(grad).all()):
            logger.warning(f"Parameter {name} has no finite gradient")
            return float('inf')

    rng = np.random.default_rng(seed)
    worst = 0.0
    for name, parameter in model.named_parameters():
        flat = parameter.data.view(-1)
        grad = parameter.grad.view(-1)
        n_samples = min(samples_per_tensor, flat.numel())
        for i in rng.choice(flat.numel(), size=n_samples, replace=False):
            original = float(flat[i])
            flat[i] = original + eps
            plus = loss_value()
            flat[i] = original - eps
            minus = loss_value()
            flat[i] = original
            numeric = (plus - minus) / (2 * eps)
            analytic = float(grad[i])
            error = abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)
            if error > worst:
                logger.debug(f"{name}[{i}]: analytic {analytic:.3e}, numeric {numeric:.3e}")
                worst = error
    return worst

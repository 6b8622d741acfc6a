"""
Mol2Trans Beam Search
Temperature-scaled beam search with an optional forced decoder prefix, and the
two suggestion modes built on it
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, IO, Iterable, List, Optional, Sequence, Tuple, Union

import pandas as pd
import torch

from mmp_errors import DecodeOverflow, FragmentNotFound, ShapeError
from mmp_fragmenter import FragmentationConstraints, attachment_site
from mmp_molgraph import Molecule, parse_smiles
from mmp_seq2seq import Checkpoint
from mmp_smirks import RULE_SEPARATOR, apply_rule_products, rgroup_smiles, try_parse_rule
from mmp_tables import write_tsv
from mmp_vocab import BOS, EOS, PAD, UNK, detokenize, tokenize

logger = logging.getLogger(__name__)

GENERATION_COLUMNS = ['source', 'rank', 'score', 'smirks', 'products']

StepFunction = Callable[[List[Tuple[int, ...]]], torch.Tensor]


@dataclass(frozen=True)
class SearchConfig:
    beam_size: int = 100
    temperature: float = 0.3
    top_k: int = 100
    max_steps: int = 96
    forced_prefix: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        if not self.beam_size >= self.top_k >= 1:
            raise ValueError(f"need beam_size >= top_k >= 1, got beam {self.beam_size}, k {self.top_k}")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")


@dataclass
class Candidate:
    rule_text: str
    score: float
    products: List[str] = field(default_factory=list)
    rule_ok: bool = False
    error: Optional[str] = None

    @property
    def valid(self) -> bool:
        return bool(self.products)


@dataclass(frozen=True)
class Hypothesis:
    """Finished sequence: token ids after BOS (EOS excluded)"""
    ids: Tuple[int, ...]
    logprob: float
    length: int

    @property
    def score(self) -> float:
        return self.logprob / self.length


def beam_search(step_fn: StepFunction, config: SearchConfig, bos_id: int = BOS, eos_id: int = EOS,
                banned_ids: Sequence[int] = (PAD, BOS, UNK),
                prefix_ids: Sequence[int] = ()) -> List[Hypothesis]:
    """
    Beam search over `step_fn(prefixes) -> last-position logits (n, vocab)`

    Finished hypotheses share the beam: each step keeps the best
    `beam_size - finished` expansions. Forced prefix tokens are fed but not
    scored.

    Args:
        step_fn: Next-token logits for a batch of token-id prefixes
        config: Beam size, temperature and step limit
        bos_id: Token every prefix starts with
        eos_id: Token that finishes a hypothesis
        banned_ids: Tokens never generated
        prefix_ids: Forced tokens fed after BOS

    Returns:
        Finished hypotheses ranked by length-normalized score
    """
    start = (bos_id,) + tuple(prefix_ids)
    live: List[Tuple[Tuple[int, ...], float]] = [(start, 0.0)]
    finished: List[Hypothesis] = []
    steps = len(prefix_ids)
    banned = list(banned_ids)

    while live and len(finished) < config.beam_size and steps < config.max_steps:
        logits = step_fn([sequence for sequence, _ in live]).to(torch.float64)
        logprobs = torch.log_softmax(logits / config.temperature, dim=-1)
        if banned:
            logprobs[:, banned] = float('-inf')
        totals = torch.tensor([score for _, score in live], dtype=torch.float64)[:, None] + logprobs

        vocab_size = totals.shape[1]
        flat = totals.reshape(-1)
        ranked_values, ranked_index = torch.sort(flat, descending=True, stable=True)
        n_keep = config.beam_size - len(finished)
        survivors = []
        for value, index in zip(ranked_values.tolist()[:n_keep], ranked_index.tolist()[:n_keep]):
            if value == float('-inf'):
                break
            row, token = divmod(index, vocab_size)
            sequence = live[row][0]
            if token == eos_id:
                generated = len(sequence) - len(start) + 1
                finished.append(Hypothesis(sequence[1:], value, generated))
            else:
                survivors.append((sequence + (token,), value))
        live = survivors
        steps += 1

    if live:
        logger.debug(f"Dropped {len(live)} hypotheses without EOS after {steps} steps")
    if not finished:
        raise DecodeOverflow(f"no hypothesis reached EOS within {config.max_steps} steps")
    return sorted(finished, key=lambda h: (-h.score, h.ids))


def _checkpoint_step_fn(checkpoint: Checkpoint, source_text: str) -> StepFunction:
    model = checkpoint.model
    vocabulary = checkpoint.vocabulary
    tokens = tokenize(source_text)
    if len(tokens) + 2 > checkpoint.model_config.max_src_len:
        raise ShapeError(f"source of {len(tokens)} tokens exceeds max_src_len "
                         f"{checkpoint.model_config.max_src_len}")
    src = torch.tensor([[BOS] + vocabulary.encode(tokens) + [EOS]], dtype=torch.long)
    with torch.no_grad():
        memory, src_blocked = model.encode(src)

    def step(prefixes: List[Tuple[int, ...]]) -> torch.Tensor:
        tgt = torch.tensor(prefixes, dtype=torch.long)
        n = tgt.shape[0]
        with torch.no_grad():
            logits = model.decode_logits(tgt, memory.expand(n, -1, -1), src_blocked.expand(n, -1, -1, -1))
        return logits[:, -1, :]

    return step


def _source_text(source: Union[Molecule, str]) -> str:
    return source.canonical if isinstance(source, Molecule) else parse_smiles(source).canonical


def beam_decode(checkpoint: Checkpoint, source: Union[Molecule, str], config: SearchConfig) -> List[Candidate]:
    """Ranked, deduplicated rule candidates for one source (products not computed)"""
    if config.max_steps > checkpoint.model_config.max_tgt_len:
        raise ValueError(f"max_steps {config.max_steps} exceeds max_tgt_len "
                         f"{checkpoint.model_config.max_tgt_len}")
    vocabulary = checkpoint.vocabulary
    prefix_tokens = list(config.forced_prefix or ())
    prefix_ids = vocabulary.encode(prefix_tokens)
    hypotheses = beam_search(_checkpoint_step_fn(checkpoint, _source_text(source)), config,
                             prefix_ids=prefix_ids)

    prefix_text = detokenize(prefix_tokens)
    best = {}
    for hypothesis in hypotheses:
        # forced tokens are reported as given, even when outside the vocabulary
        generated = vocabulary.decode(hypothesis.ids[len(prefix_ids):])
        text = prefix_text + detokenize(generated)
        if text not in best or hypothesis.score > best[text]:
            best[text] = hypothesis.score
    ranked = sorted(best.items(), key=lambda item: (-item[1], item[0]))
    return [Candidate(rule_text=text, score=score) for text, score in ranked[:config.top_k]]


def attach_products(candidates: Iterable[Candidate], source: Molecule,
                    constraints: Optional[FragmentationConstraints] = None) -> List[Candidate]:
    """Parse each candidate rule and apply it; unparseable rules stay with an error"""
    candidates = list(candidates)
    for candidate in candidates:
        rule, error = try_parse_rule(candidate.rule_text)
        if rule is None:
            candidate.rule_ok, candidate.error, candidate.products = False, error, []
            continue
        candidate.rule_ok = True
        candidate.products = apply_rule_products(rule, source, constraints)
    return candidates


def suggest_replacements(checkpoint: Checkpoint, source: Union[Molecule, str], config: SearchConfig,
                         constraints: Optional[FragmentationConstraints] = None) -> List[Candidate]:
    """Model-chosen fragment and replacement"""
    mol = source if isinstance(source, Molecule) else parse_smiles(source)
    config = replace(config, forced_prefix=None)
    return attach_products(beam_decode(checkpoint, mol, config), mol, constraints)


def replace_specified(checkpoint: Checkpoint, source: Union[Molecule, str],
                      fragment: Union[Molecule, str], config: SearchConfig) -> List[Candidate]:
    """
    Replacements for a user-chosen fragment, forced as the rule's LHS

    The chosen fragment overrides the mining size bounds: any R-group cut at
    an acyclic single bond may be replaced, and products are attached at
    every such cut without bounds. Raises FragmentNotFound when the fragment
    is not an R-group of the source.

    Args:
        checkpoint: Trained model and vocabulary
        source: Molecule or SMILES to edit
        fragment: `[*:1]`-marked R-group to replace
        config: Search settings; any forced prefix is replaced by `fragment>>`

    Returns:
        Ranked candidates, each rule starting with the canonical fragment
    """
    mol = source if isinstance(source, Molecule) else parse_smiles(source)
    fragment_mol = fragment if isinstance(fragment, Molecule) else parse_smiles(fragment)
    attachment_site(fragment_mol, 'fragment')
    lhs = fragment_mol.canonical
    unbounded = FragmentationConstraints.permissive()
    if lhs not in rgroup_smiles(mol, unbounded):
        raise FragmentNotFound(f"fragment {lhs} is not a removable R-group of {mol.canonical}")
    config = replace(config, forced_prefix=tuple(tokenize(lhs + RULE_SEPARATOR)))
    return attach_products(beam_decode(checkpoint, mol, config), mol, unbounded)


def decode_sources(checkpoint: Checkpoint, sources: Sequence[Molecule], config: SearchConfig,
                   constraints: Optional[FragmentationConstraints] = None, threads: int = 1,
                   fragment: Optional[Molecule] = None) -> List[List[Candidate]]:
    """Decode many sources concurrently; results keep the input order"""
    checkpoint.model  # build once before sharing across threads

    def run(mol: Molecule) -> List[Candidate]:
        if fragment is not None:
            return replace_specified(checkpoint, mol, fragment, config)
        return suggest_replacements(checkpoint, mol, config, constraints)

    if threads > 1 and len(sources) > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            return list(executor.map(run, sources))
    return [run(mol) for mol in sources]


def generation_frame(rows: Iterable[Tuple[str, Sequence[Candidate]]]) -> pd.DataFrame:
    records = []
    for source, candidates in rows:
        for rank, candidate in enumerate(candidates, 1):
            records.append((source, rank, f"{candidate.score:.6f}", candidate.rule_text,
                            '|'.join(candidate.products)))
    return pd.DataFrame(records, columns=GENERATION_COLUMNS)


def write_generation(rows: Iterable[Tuple[str, Sequence[Candidate]]], stream: IO[str]) -> None:
    """Generation TSV: `source rank score smirks products`, products `|`-joined"""
    write_tsv(generation_frame(rows), stream)

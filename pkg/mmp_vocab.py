"""
Mol2Trans Tokenizer and Vocabulary
Splits SMILES / SMIRKS text into model tokens and maps them to ids
"""

import hashlib
import logging
from pathlib import Path
from typing import Iterable, List, Sequence

from mmp_errors import CheckpointError, TokenError

logger = logging.getLogger(__name__)

PAD, BOS, EOS, UNK = 0, 1, 2, 3
SPECIAL_TOKENS = ['<pad>', '<bos>', '<eos>', '<unk>']

_TWO_LETTER = ('Cl', 'Br', '>>')


def tokenize(text: str) -> List[str]:
    """Split text into tokens; bracket atoms, Cl/Br, `>>` and `%nn` stay whole"""
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == '[':
            close = text.find(']', i + 1)
            if close < 0 or '[' in text[i + 1:close]:
                raise TokenError(f"unclosed bracket at offset {i} in '{text}'")
            tokens.append(text[i:close + 1])
            i = close + 1
            continue
        if ch == '%' and text[i + 1:i + 3].isdigit() and len(text[i + 1:i + 3]) == 2:
            tokens.append(text[i:i + 3])
            i += 3
            continue
        pair = text[i:i + 2]
        if pair in _TWO_LETTER:
            tokens.append(pair)
            i += 2
            continue
        tokens.append(ch)
        i += 1
    return tokens


def detokenize(tokens: Iterable[str]) -> str:
    return ''.join(tokens)


class Vocabulary:
    """Special tokens at ids 0-3 followed by corpus tokens"""

    def __init__(self, tokens: Sequence[str]):
        tokens = list(tokens)
        if len(set(tokens)) != len(tokens):
            raise ValueError("vocabulary tokens must be unique")
        clashes = set(tokens) & set(SPECIAL_TOKENS)
        if clashes:
            raise ValueError(f"corpus tokens clash with special tokens: {sorted(clashes)}")
        self.tokens: List[str] = SPECIAL_TOKENS + tokens
        self._ids = {token: i for i, token in enumerate(self.tokens)}

    @classmethod
    def build(cls, texts: Iterable[str]) -> 'Vocabulary':
        """Sorted token set of the given texts"""
        seen = set()
        for text in texts:
            seen.update(tokenize(text))
        return cls(sorted(seen - set(SPECIAL_TOKENS)))

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def token_id(self, token: str) -> int:
        return self._ids.get(token, UNK)

    def encode(self, tokens: Sequence[str]) -> List[int]:
        return [self._ids.get(token, UNK) for token in tokens]

    def count_unknown(self, tokens: Sequence[str]) -> int:
        return sum(1 for token in tokens if token not in self._ids)

    def decode(self, ids: Iterable[int]) -> List[str]:
        """Ids to tokens, dropping special tokens and stopping at EOS"""
        tokens = []
        for token_id in ids:
            if token_id == EOS:
                break
            if token_id in (PAD, BOS):
                continue
            tokens.append(self.tokens[token_id])
        return tokens

    @property
    def fingerprint(self) -> bytes:
        """SHA-256 over the full token list (32 bytes)"""
        return hashlib.sha256('\n'.join(self.tokens).encode('utf-8')).digest()

    def save(self, filepath: str) -> None:
        """One token per line, special tokens included"""
        Path(filepath).parent.mkdir(parents=True, exist_ok=True)
        with open(filepath, 'w', encoding='utf-8') as f:
            for token in self.tokens:
                f.write(token + '\n')

    @classmethod
    def load(cls, filepath: str) -> 'Vocabulary':
        try:
            with open(filepath, 'r', encoding='utf-8') as f:
                lines = f.read().split('\n')
        except OSError as e:
            raise CheckpointError(f"cannot read vocabulary file {filepath}: {e}")
        if lines and lines[-1] == '':
            lines.pop()
        if lines[:len(SPECIAL_TOKENS)] != SPECIAL_TOKENS:
            raise CheckpointError(f"vocabulary file {filepath} does not start with the special tokens")
        return cls(lines[len(SPECIAL_TOKENS):])

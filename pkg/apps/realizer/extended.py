# ============================================================================
# apps/realizer/extended.py - Vocabulary extended with copyable source tokens
# ============================================================================

from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np

from apps.corpus.services import KeyphraseBank
from apps.corpus.vocabulary import UNK_ID, Vocabulary


class ExtendedVocabulary:
    """Base vocabulary followed by source-only tokens in first-appearance order (input, then bank)"""

    def __init__(self, base: Vocabulary, oov_tokens: Sequence[str]):
        self.base = base
        self.oov: List[str] = list(oov_tokens)
        self._oov_ids: Dict[str, int] = {t: len(base) + i for i, t in enumerate(self.oov)}

    def __len__(self) -> int:
        return len(self.base) + len(self.oov)

    def id(self, token: str) -> int:
        if token in self.base:
            return self.base.id(token)
        return self._oov_ids.get(token, UNK_ID)

    def encode(self, tokens: Sequence[str]) -> List[int]:
        return [self.id(t) for t in tokens]

    def token(self, idx: int) -> str:
        if idx < len(self.base):
            return self.base.token(idx)
        return self.oov[idx - len(self.base)]

    def decode(self, ids: Sequence[int]) -> List[str]:
        return [self.token(i) for i in ids]

    def input_id(self, idx: int) -> int:
        """Id fed back to the embedding table; source-only tokens become UNK"""
        return idx if idx < len(self.base) else UNK_ID


def build_extended_vocab(vocab: Vocabulary, input_tokens: Sequence[str], bank: KeyphraseBank) -> ExtendedVocabulary:
    seen = set()
    oov = []
    sources = list(input_tokens)
    for k in bank.content_indices:
        sources.extend(bank.entry_tokens(k))
    for token in sources:
        if token not in vocab and token not in seen:
            seen.add(token)
            oov.append(token)
    return ExtendedVocabulary(vocab, oov)


def input_scatter(ext: ExtendedVocabulary, input_tokens: Sequence[str]) -> np.ndarray:
    """L x V' matrix mapping each input position onto its extended id"""
    matrix = np.zeros((len(input_tokens), len(ext)))
    for i, token in enumerate(input_tokens):
        matrix[i, ext.id(token)] = 1.0
    return matrix


def bank_scatter(ext: ExtendedVocabulary, bank: KeyphraseBank) -> np.ndarray:
    """|M| x V' matrix spreading each phrase uniformly over its tokens; sentinel rows are zero"""
    matrix = np.zeros((len(bank), len(ext)))
    for k in bank.content_indices:
        tokens = bank.entry_tokens(k)
        for token in tokens:
            matrix[k, ext.id(token)] += 1.0 / len(tokens)
    return matrix


@dataclass
class CopySources:
    """Per-sample constants of the copy mechanism"""
    ext: ExtendedVocabulary
    input_matrix: np.ndarray
    bank_matrix: np.ndarray


def build_copy_sources(vocab: Vocabulary, input_tokens: Sequence[str], bank: KeyphraseBank) -> CopySources:
    ext = build_extended_vocab(vocab, input_tokens, bank)
    return CopySources(ext, input_scatter(ext, input_tokens), bank_scatter(ext, bank))

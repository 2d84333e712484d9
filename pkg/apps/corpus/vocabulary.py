# ============================================================================
# apps/corpus/vocabulary.py - Token <-> id mapping
# ============================================================================

import logging
from collections import Counter
from typing import Dict, Iterable, Iterator, List, Sequence

from config import VOCAB_SIZE
from shared.errors import VocabularyError
from .schemas import Sample

logger = logging.getLogger(__name__)

PAD = "<pad>"
UNK = "<unk>"
BOS = "<bos>"
EOS = "<eos>"
SNT = "<snt>"
RESERVED = [PAD, UNK, BOS, EOS, SNT]
PAD_ID, UNK_ID, BOS_ID, EOS_ID, SNT_ID = range(len(RESERVED))
MIN_VOCAB_SIZE = len(RESERVED) + 1


class Vocabulary:
    """Bijective token/id map; ids 0..4 are the reserved tokens"""

    def __init__(self, tokens: Sequence[str]):
        if list(tokens[:len(RESERVED)]) != RESERVED:
            raise VocabularyError("vocabulary must start with the reserved tokens")
        self.id_to_token: List[str] = list(tokens)
        self.token_to_id: Dict[str, int] = {}
        for idx, token in enumerate(self.id_to_token):
            if token in self.token_to_id:
                raise VocabularyError(f"duplicate token {token!r}")
            self.token_to_id[token] = idx

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def __iter__(self) -> Iterator[str]:
        return iter(self.id_to_token)

    def id(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def token(self, idx: int) -> str:
        return self.id_to_token[idx]

    def encode(self, tokens: Iterable[str]) -> List[int]:
        return [self.id(t) for t in tokens]

    def decode(self, ids: Iterable[int]) -> List[str]:
        return [self.id_to_token[i] for i in ids]

    def to_list(self) -> List[str]:
        return list(self.id_to_token)


def sample_tokens(sample: Sample) -> Iterator[str]:
    yield from sample.topic
    if sample.passages:
        yield from sample.passages
    for phrase in sample.bank:
        yield from phrase.tokens
    for target in sample.targets:
        yield from target.tokens


def build_vocabulary(samples: Sequence[Sample], max_size: int = VOCAB_SIZE) -> Vocabulary:
    """Frequency-ranked vocabulary, ties broken lexicographically, reserved tokens first"""
    if not samples:
        raise VocabularyError("cannot build a vocabulary from no samples")
    if max_size < MIN_VOCAB_SIZE:
        raise VocabularyError(f"max_size {max_size} cannot hold the {len(RESERVED)} reserved tokens")

    counts = Counter()
    for sample in samples:
        counts.update(t for t in sample_tokens(sample) if t not in RESERVED)

    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    kept = [token for token, _ in ranked[:max_size - len(RESERVED)]]
    logger.info(f"Vocabulary: {len(counts)} distinct tokens, kept {len(kept)} (+{len(RESERVED)} reserved)")
    return Vocabulary(RESERVED + kept)

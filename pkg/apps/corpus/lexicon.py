# ============================================================================
# apps/corpus/lexicon.py - Stopword list and content-word tests
# ============================================================================

import os
import re
from functools import lru_cache
from typing import FrozenSet, Iterable, List

import yaml

_WORD_CHAR = re.compile(r"[0-9a-z]")


@lru_cache(maxsize=1)
def stopwords() -> FrozenSet[str]:
    """Load the shipped stopword list once"""
    path = os.path.join(os.path.dirname(__file__), "stopwords.yaml")
    with open(path, "r") as f:
        data = yaml.safe_load(f)
    return frozenset(str(w).lower() for w in data.get("stopwords", []))


def is_content_word(token: str) -> bool:
    word = token.lower()
    return word not in stopwords() and bool(_WORD_CHAR.search(word))


def content_words(tokens: Iterable[str]) -> List[str]:
    """Content words in first-occurrence order, lowercased, without repeats"""
    seen = set()
    words = []
    for token in tokens:
        word = token.lower()
        if word not in seen and is_content_word(word):
            seen.add(word)
            words.append(word)
    return words

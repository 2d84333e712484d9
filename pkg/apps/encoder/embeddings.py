# ============================================================================
# apps/encoder/embeddings.py - Pretrained vector file loader
# ============================================================================

import logging

import numpy as np

from apps.corpus.vocabulary import Vocabulary
from apps.numcore.params import ModelParams
from shared.errors import ShapeError

logger = logging.getLogger(__name__)


def load_embeddings(path: str, vocab: Vocabulary, params: ModelParams) -> int:
    """Overwrite embedding rows for words found in a text vector file; returns rows replaced"""
    table = params["embedding"]
    width = table.shape[1]
    replaced = 0
    with open(path, "r", encoding="utf-8") as f:
        for line_num, line in enumerate(f, 1):
            parts = line.rstrip().split(" ")
            if len(parts) < 2:
                continue
            word, values = parts[0], parts[1:]
            if len(values) != width:
                raise ShapeError(f"{path} line {line_num}: vector has {len(values)} values, embedding width is {width}")
            if word not in vocab:
                continue
            table.values[vocab.id(word)] = np.asarray(values, dtype=np.float64)
            replaced += 1
    logger.info(f"Loaded {replaced} pretrained vectors from {path} ({len(vocab)} vocabulary entries)")
    return replaced

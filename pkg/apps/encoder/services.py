# ============================================================================
# apps/encoder/services.py - Input statement and keyphrase bank encoding
# ============================================================================

import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np

from apps.corpus.services import KeyphraseBank
from apps.corpus.vocabulary import Vocabulary
from apps.numcore import ops
from apps.numcore.params import ModelParams, ParamSpec, lstm_specs
from apps.numcore.recurrent import State, run_lstm
from apps.numcore.tensor import Array
from shared.errors import ShapeError

logger = logging.getLogger(__name__)


@dataclass
class EncoderState:
    """Per-token states h_i (L x H) and the bridged initial decoder state"""
    hidden_seq: Array
    final_state: State

    @property
    def input_length(self) -> int:
        return self.hidden_seq.shape[0]


@dataclass
class KeyphraseMemory:
    """Encoded bank; row k of matrix_E is h^e_k, sentinels included"""
    entry_encodings: Array
    bank: KeyphraseBank

    @property
    def matrix_E(self) -> Array:
        return self.entry_encodings

    @property
    def size(self) -> int:
        return self.entry_encodings.shape[0]

    @property
    def start_index(self) -> int:
        return 0

    @property
    def end_index(self) -> int:
        return self.size - 1

    @property
    def content_mask(self) -> np.ndarray:
        mask = np.ones(self.size, dtype=bool)
        mask[[self.start_index, self.end_index]] = False
        return mask

    @property
    def has_content(self) -> bool:
        return self.size > 2


def param_specs(vocab_size: int, embed_size: int, hidden_size: int,
                title_encoder: bool = False) -> Dict[str, ParamSpec]:
    if hidden_size % 2:
        raise ShapeError(f"hidden size must be even for the bidirectional readers, got {hidden_size}")
    half = hidden_size // 2
    specs = {
        "embedding": ParamSpec((vocab_size, embed_size)),
        "sentinel.start": ParamSpec((embed_size,)),
        "sentinel.end": ParamSpec((embed_size,)),
    }
    if title_encoder:
        specs["title.W"] = ParamSpec((embed_size, hidden_size))
        specs["title.b"] = ParamSpec((hidden_size,), "zeros")
    else:
        specs.update(lstm_specs("encoder.fwd", embed_size, half))
        specs.update(lstm_specs("encoder.bwd", embed_size, half))
        specs["encoder.bridge_h.W"] = ParamSpec((hidden_size, hidden_size))
        specs["encoder.bridge_h.b"] = ParamSpec((hidden_size,), "zeros")
        specs["encoder.bridge_c.W"] = ParamSpec((hidden_size, hidden_size))
        specs["encoder.bridge_c.b"] = ParamSpec((hidden_size,), "zeros")
    specs.update(lstm_specs("reader.fwd", embed_size, half))
    specs.update(lstm_specs("reader.bwd", embed_size, half))
    return specs


def _bidirectional(inputs: Sequence[Array], params: ModelParams, prefix: str):
    fwd_out, fwd_states = run_lstm(inputs, params.lstm(f"{prefix}.fwd"))
    bwd_out, bwd_states = run_lstm(inputs, params.lstm(f"{prefix}.bwd"), reverse=True)
    rows = [ops.concat([f, b]) for f, b in zip(fwd_out, bwd_out)]
    return ops.stack(rows), fwd_states[-1], bwd_states[0]


def encode_input(token_ids: Sequence[int], params: ModelParams) -> EncoderState:
    """biLSTM over the (already truncated) input; the bridge maps both directions' final states"""
    if not token_ids:
        raise ShapeError("cannot encode an empty input")
    embedding = params["embedding"]
    inputs = [ops.take_row(embedding, i) for i in token_ids]
    hidden_seq, (fwd_h, fwd_c), (bwd_h, bwd_c) = _bidirectional(inputs, params, "encoder")
    h0 = ops.add(ops.matmul(ops.concat([fwd_h, bwd_h]), params["encoder.bridge_h.W"]), params["encoder.bridge_h.b"])
    c0 = ops.add(ops.matmul(ops.concat([fwd_c, bwd_c]), params["encoder.bridge_c.W"]), params["encoder.bridge_c.b"])
    return EncoderState(hidden_seq, (h0, c0))


def encode_title(token_ids: Sequence[int], params: ModelParams) -> EncoderState:
    """Summed-embedding title encoder: h_i = emb_i W, initial h = tanh(sum + b), c = sum + b"""
    if not token_ids:
        raise ShapeError("cannot encode an empty title")
    hidden_seq = ops.matmul(ops.take_rows(params["embedding"], token_ids), params["title.W"])
    total = ops.add(ops.reduce_sum(hidden_seq, axis=0), params["title.b"])
    return EncoderState(hidden_seq, (ops.tanh(total), total))


def phrase_vector(token_ids: Sequence[int], params: ModelParams) -> Array:
    """e_k: sum of the phrase's word embeddings"""
    return ops.reduce_sum(ops.take_rows(params["embedding"], token_ids), axis=0)


def encode_keyphrase_bank(bank: KeyphraseBank, vocab: Vocabulary, params: ModelParams) -> KeyphraseMemory:
    entries: List[Array] = [params["sentinel.start"]]
    for k in bank.content_indices:
        entries.append(phrase_vector(vocab.encode(bank.entry_tokens(k)), params))
    entries.append(params["sentinel.end"])
    encodings, _, _ = _bidirectional(entries, params, "reader")
    return KeyphraseMemory(encodings, bank)

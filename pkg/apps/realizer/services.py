# ============================================================================
# apps/realizer/services.py - Style-controlled word decoder with copying
# ============================================================================

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from apps.corpus.vocabulary import BOS_ID, PAD_ID
from apps.encoder.services import EncoderState, KeyphraseMemory
from apps.numcore import ops
from apps.numcore.params import ModelParams, ParamSpec, lstm_specs
from apps.numcore.recurrent import State, stacked_lstm_step
from apps.numcore.tensor import Array, constant
from shared.errors import ShapeError
from .extended import CopySources

logger = logging.getLogger(__name__)

GATE_GENERATE, GATE_COPY_INPUT, GATE_COPY_BANK = range(3)


@dataclass
class StepOutput:
    dist: Array
    attn_input: Array
    attn_bank: Array
    gate: Array


@dataclass
class GenerationState:
    """Decoder trajectory: layer states plus per-step records"""
    layer_states: List[State]
    sentence_index_map: List[int] = field(default_factory=list)
    attn_input: List[np.ndarray] = field(default_factory=list)
    attn_bank: List[np.ndarray] = field(default_factory=list)
    gates: List[np.ndarray] = field(default_factory=list)
    tokens: List[int] = field(default_factory=list)

    @property
    def z(self) -> Array:
        return self.layer_states[-1][0]

    def record(self, sentence_index: int, token: int, out: StepOutput) -> None:
        self.sentence_index_map.append(sentence_index)
        self.tokens.append(token)
        self.attn_input.append(out.attn_input.values.copy())
        self.attn_bank.append(out.attn_bank.values.copy())
        self.gates.append(out.gate.values.copy())


def param_specs(vocab_size: int, embed_size: int, hidden_size: int, num_layers: int,
                style_dims: int) -> Dict[str, ParamSpec]:
    specs = {
        "realizer.W_ws": ParamSpec((hidden_size, hidden_size)),
        "realizer.W_ww": ParamSpec((embed_size, hidden_size)),
    }
    for layer in range(num_layers):
        specs.update(lstm_specs(f"realizer.l{layer}", hidden_size, hidden_size))
    specs.update({
        "realizer.W_wa": ParamSpec((hidden_size, hidden_size)),
        "realizer.W_we": ParamSpec((hidden_size, hidden_size)),
        "realizer.W_o": ParamSpec((3 * hidden_size + style_dims, vocab_size)),
        "realizer.b_o": ParamSpec((vocab_size,), "zeros"),
        "realizer.W_gate": ParamSpec((3 * hidden_size + embed_size, 3)),
        "realizer.b_gate": ParamSpec((3,), "zeros"),
    })
    return specs


def realizer_layers(params: ModelParams):
    layers = []
    while f"realizer.l{len(layers)}.W" in params:
        layers.append(params.lstm(f"realizer.l{len(layers)}"))
    return layers


def initial_generation_state(init: State, params: ModelParams) -> GenerationState:
    return GenerationState([init] * len(realizer_layers(params)))


def realize_step(z_prev: Sequence[State], y_prev_embedding: Array, plan_state: Array, params: ModelParams,
                 dropout_rate: float = 0.0, rng: Optional[np.random.Generator] = None,
                 training: bool = False) -> List[State]:
    """z_t = g(z_{t-1}, tanh(W_ws s_J(t) + W_ww y_{t-1})); the plan enters the first layer only"""
    fused = ops.tanh(ops.add(ops.matmul(plan_state, params["realizer.W_ws"]),
                             ops.matmul(y_prev_embedding, params["realizer.W_ww"])))
    return stacked_lstm_step(fused, z_prev, realizer_layers(params), dropout_rate, rng, training)


def generation_mask(vocab_size: int) -> np.ndarray:
    mask = np.ones(vocab_size, dtype=bool)
    mask[[PAD_ID, BOS_ID]] = False
    return mask


def mix_distributions(gate: Array, generation: Array, copy_input: Array, copy_bank: Optional[Array]) -> Array:
    """gate_gen * P_gen + gate_x * P_copy_input + gate_bank * P_copy_bank over the extended vocabulary"""
    dist = ops.add(ops.mul(ops.pick(gate, GATE_GENERATE), generation),
                   ops.mul(ops.pick(gate, GATE_COPY_INPUT), copy_input))
    if copy_bank is not None:
        dist = ops.add(dist, ops.mul(ops.pick(gate, GATE_COPY_BANK), copy_bank))
    return dist


def output_distribution(z: Array, y_prev_embedding: Array, encoder_state: EncoderState,
                        memory: KeyphraseMemory, style_vector: np.ndarray, sources: CopySources,
                        params: ModelParams, logit_scale: float = 1.0) -> StepOutput:
    """Dual attention, style-conditioned generation softmax and the 3-way copy gate"""
    hidden_seq = encoder_state.hidden_seq
    if sources.input_matrix.shape[0] != encoder_state.input_length:
        raise ShapeError(f"copy map covers {sources.input_matrix.shape[0]} positions, "
                         f"encoder produced {encoder_state.input_length}")
    E = memory.matrix_E

    attn_input = ops.softmax(ops.matmul(hidden_seq, ops.matmul(params["realizer.W_wa"], z)))
    context_input = ops.matmul(attn_input, hidden_seq)
    bank_scores = ops.matmul(E, ops.matmul(params["realizer.W_we"], z))
    attn_bank = ops.softmax(bank_scores)
    context_bank = ops.matmul(attn_bank, E)

    features = [z, context_input, context_bank]
    if len(style_vector):
        features.append(constant(style_vector))
    logits = ops.tanh(ops.add(ops.matmul(ops.concat(features), params["realizer.W_o"]), params["realizer.b_o"]))
    if logit_scale != 1.0:
        logits = ops.scale(logits, logit_scale)
    vocab_size = params["realizer.b_o"].shape[0]
    generation = ops.softmax(logits, mask=generation_mask(vocab_size))
    n_oov = len(sources.ext) - vocab_size
    if n_oov:
        generation = ops.concat([generation, constant(np.zeros(n_oov))])

    gate_logits = ops.add(ops.matmul(ops.concat([z, context_input, context_bank, y_prev_embedding]),
                                     params["realizer.W_gate"]), params["realizer.b_gate"])
    gate = ops.softmax(gate_logits, mask=np.array([True, True, memory.has_content]))

    copy_input = ops.matmul(attn_input, constant(sources.input_matrix))
    copy_bank = None
    if memory.has_content:
        content_attn = ops.softmax(bank_scores, mask=memory.content_mask)
        copy_bank = ops.matmul(content_attn, constant(sources.bank_matrix))
    dist = mix_distributions(gate, generation, copy_input, copy_bank)
    return StepOutput(dist, attn_input, attn_bank, gate)


def generation_loss(step_dists: Sequence[Array], gold_ids: Sequence[int]) -> Array:
    """Negative log-likelihood of the gold extended ids, summed over steps"""
    if len(step_dists) != len(gold_ids):
        raise ShapeError(f"{len(step_dists)} step distributions for {len(gold_ids)} gold tokens")
    total = constant(0.0)
    for dist, gold in zip(step_dists, gold_ids):
        total = ops.add(total, ops.log(ops.pick(dist, gold)))
    return ops.neg(total)

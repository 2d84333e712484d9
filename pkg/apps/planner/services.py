# ============================================================================
# apps/planner/services.py - Sentence-level content planning decoder
# ============================================================================

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from apps.encoder.services import KeyphraseMemory
from apps.numcore import ops
from apps.numcore.params import ModelParams, ParamSpec, lstm_specs
from apps.numcore.recurrent import State, stacked_lstm_step
from apps.numcore.tensor import Array, constant
from shared.errors import PlanError, ShapeError
from .schemas import PlanEntry, PlanLimits

logger = logging.getLogger(__name__)


@dataclass
class PlanState:
    """Selection history after consuming v_0..v_j; q is always counts x E"""
    usage_counts: np.ndarray
    q: Optional[Array]
    sentence_index: int
    layer_states: List[State]
    s: Optional[Array] = None
    m: Optional[Array] = None


@dataclass
class PlanStep:
    """Plan of one sentence"""
    v: np.ndarray
    s: Array
    m: Array
    style_dist: Optional[Array] = None
    style_onehot: Optional[np.ndarray] = None

    @property
    def style(self) -> int:
        return int(np.argmax(self.style_onehot)) if self.style_onehot is not None else 0

    @property
    def selection(self) -> List[int]:
        return [int(k) for k in np.flatnonzero(self.v)]


@dataclass
class TeacherForcedPlan:
    """Scores for J+1 steps (last one targets <END>) and the J sentence steps"""
    scores: List[Array] = field(default_factory=list)
    steps: List[PlanStep] = field(default_factory=list)


def param_specs(hidden_size: int, num_layers: int, global_bits: int, n_styles: int) -> Dict[str, ParamSpec]:
    specs: Dict[str, ParamSpec] = {}
    for layer in range(num_layers):
        input_size = hidden_size + global_bits if layer == 0 else hidden_size
        specs.update(lstm_specs(f"planner.l{layer}", input_size, hidden_size))
    specs["planner.W_c"] = ParamSpec((hidden_size, hidden_size))
    specs["planner.w_v"] = ParamSpec((hidden_size,))
    if n_styles >= 2:
        specs["planner.W_s"] = ParamSpec((2 * hidden_size + global_bits, hidden_size))
        specs["planner.w_s"] = ParamSpec((hidden_size, n_styles))
    return specs


def planner_layers(params: ModelParams):
    layers = []
    while f"planner.l{len(layers)}.W" in params:
        layers.append(params.lstm(f"planner.l{len(layers)}"))
    return layers


def initial_plan_state(memory: KeyphraseMemory, init: State, num_layers: int) -> PlanState:
    return PlanState(np.zeros(memory.size), None, 0, [init] * num_layers)


def one_hot(size: int, indices: Sequence[int]) -> np.ndarray:
    v = np.zeros(size)
    v[list(indices)] = 1.0
    return v


def plan_step(state: PlanState, prev_v: np.ndarray, memory: KeyphraseMemory, params: ModelParams,
              global_bit: Optional[int] = None, dropout_rate: float = 0.0,
              rng: Optional[np.random.Generator] = None, training: bool = False) -> Tuple[Array, PlanState]:
    """Consume prev_v as m_j, advance s_j, and score every bank entry for the next sentence.

    Returns the selection probabilities and the new state (whose .s is s_j and .m is m_j).
    """
    prev_v = np.asarray(prev_v, dtype=np.float64)
    if prev_v.shape != (memory.size,):
        raise ShapeError(f"selection vector has shape {prev_v.shape}, bank has {memory.size} entries")
    if not np.all((prev_v == 0.0) | (prev_v == 1.0)):
        raise PlanError("selection vector must be binary")

    E = memory.matrix_E
    counts = state.usage_counts + prev_v
    m = ops.matmul(constant(prev_v), E)
    if global_bit is not None:
        m = ops.concat([m, constant([float(global_bit)])])
    q = ops.matmul(constant(counts), E)

    layer_states = stacked_lstm_step(m, state.layer_states, planner_layers(params),
                                     dropout_rate, rng, training)
    s = layer_states[-1][0]
    bias = ops.matmul(s, params["planner.w_v"])
    scores = ops.sigmoid(ops.add(ops.matmul(E, ops.matmul(q, params["planner.W_c"])), bias))
    return scores, PlanState(counts, q, state.sentence_index + 1, layer_states, s, m)


def predict_style(m: Array, s: Array, params: ModelParams, n_styles: int) -> Tuple[Array, np.ndarray]:
    """softmax(tanh([m; s] W_s) w_s) and its one-hot argmax (ties go to the lowest id)"""
    if n_styles < 2:
        raise ValueError(f"style prediction needs at least 2 styles, got {n_styles}")
    hidden = ops.tanh(ops.matmul(ops.concat([m, s]), params["planner.W_s"]))
    dist = ops.softmax(ops.matmul(hidden, params["planner.w_s"]))
    return dist, one_hot(n_styles, [int(np.argmax(dist.values))])


def selection_loss(scores: Sequence[Array], gold: Sequence[np.ndarray]) -> Array:
    """Binary cross-entropy summed over steps and bank entries"""
    if len(scores) != len(gold):
        raise ShapeError(f"{len(scores)} score vectors for {len(gold)} gold selections")
    total = constant(0.0)
    for p, y in zip(scores, gold):
        y = constant(y)
        pos = ops.mul(y, ops.log(p))
        neg_part = ops.mul(ops.sub(1.0, y), ops.log(ops.sub(1.0, p)))
        total = ops.add(total, ops.reduce_sum(ops.add(pos, neg_part)))
    return ops.neg(total)


def style_loss(style_dists: Sequence[Array], gold_styles: Sequence[int]) -> Array:
    """Cross-entropy -sum_j log t_j[gold_j]"""
    if len(style_dists) != len(gold_styles):
        raise ShapeError(f"{len(style_dists)} style distributions for {len(gold_styles)} gold styles")
    total = constant(0.0)
    for dist, gold in zip(style_dists, gold_styles):
        total = ops.add(total, ops.log(ops.pick(dist, gold)))
    return ops.neg(total)


def gold_selection_vectors(memory: KeyphraseMemory, selections: Sequence[Sequence[int]]) -> List[np.ndarray]:
    """v*_1..v*_J followed by the one-hot <END> target of the terminating step"""
    vectors = [one_hot(memory.size, sel) for sel in selections]
    vectors.append(one_hot(memory.size, [memory.end_index]))
    return vectors


def teacher_forced_plan(memory: KeyphraseMemory, init: State, params: ModelParams,
                        selections: Sequence[Sequence[int]], n_styles: int = 0,
                        global_bit: Optional[int] = None, dropout_rate: float = 0.0,
                        rng: Optional[np.random.Generator] = None, training: bool = False) -> TeacherForcedPlan:
    """Run the planner on gold selections; styles are predicted from the gold m_j"""
    layers = planner_layers(params)
    state = initial_plan_state(memory, init, len(layers))
    result = TeacherForcedPlan()
    prev_v = one_hot(memory.size, [memory.start_index])
    scores, state = plan_step(state, prev_v, memory, params, global_bit, dropout_rate, rng, training)
    result.scores.append(scores)
    for selection in selections:
        v = one_hot(memory.size, selection)
        scores, state = plan_step(state, v, memory, params, global_bit, dropout_rate, rng, training)
        result.scores.append(scores)
        step = PlanStep(v, state.s, state.m)
        if n_styles >= 2:
            step.style_dist, step.style_onehot = predict_style(state.m, state.s, params, n_styles)
        result.steps.append(step)
    return result


def infer_plan(memory: KeyphraseMemory, init: State, params: ModelParams, limits: Optional[PlanLimits] = None,
               n_styles: int = 0, global_bit: Optional[int] = None) -> List[PlanStep]:
    """Predict sentence plans until <END> scores above the threshold or the sentence cap is hit"""
    limits = limits or PlanLimits()
    layers = planner_layers(params)
    state = initial_plan_state(memory, init, len(layers))
    scores, state = plan_step(state, one_hot(memory.size, [memory.start_index]), memory, params, global_bit)

    if not memory.has_content:
        logger.warning("Keyphrase bank has no content entries; empty plan")
        return []

    content = memory.content_mask
    steps: List[PlanStep] = []
    while len(steps) < limits.max_sentences:
        probs = scores.values
        if probs[memory.end_index] > limits.threshold:
            break
        v = ((probs > limits.threshold) & content).astype(np.float64)
        if not v.any():
            v[int(np.argmax(np.where(content, probs, -np.inf)))] = 1.0
        scores, state = plan_step(state, v, memory, params, global_bit)
        step = PlanStep(v, state.s, state.m)
        if n_styles >= 2:
            step.style_dist, step.style_onehot = predict_style(state.m, state.s, params, n_styles)
        steps.append(step)
    logger.debug(f"Inferred plan with {len(steps)} sentences")
    return steps


def plan_to_entries(steps: Sequence[PlanStep]) -> List[PlanEntry]:
    """JSON plan entries; selections drop the <START> offset"""
    return [PlanEntry(selection=[k - 1 for k in step.selection if k > 0], style=step.style) for step in steps]

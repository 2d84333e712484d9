# ============================================================================
# apps/numcore/recurrent.py - LSTM cell and stacked/bidirectional runners
# ============================================================================

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from shared.errors import ShapeError
from . import ops
from .tensor import Array, constant

State = Tuple[Array, Array]


@dataclass
class LSTMWeights:
    """Fused gate weights over [x; h_prev]; gate order is input, forget, candidate, output"""
    W: Array
    b: Array

    @property
    def hidden_size(self) -> int:
        return self.W.shape[1] // 4

    @property
    def input_size(self) -> int:
        return self.W.shape[0] - self.hidden_size


def lstm_bias_init(hidden_size: int, forget_bias: float) -> np.ndarray:
    bias = np.zeros(4 * hidden_size)
    bias[hidden_size:2 * hidden_size] = forget_bias
    return bias


def zero_state(hidden_size: int) -> State:
    return constant(np.zeros(hidden_size)), constant(np.zeros(hidden_size))


def lstm_cell_step(x: Array, h_prev: Array, c_prev: Array, weights: LSTMWeights) -> State:
    d_h = weights.hidden_size
    if weights.W.shape[1] != 4 * d_h or weights.b.shape != (4 * d_h,):
        raise ShapeError(f"LSTM weights malformed: W {weights.W.shape}, b {weights.b.shape}")
    if x.shape != (weights.input_size,):
        raise ShapeError(f"LSTM input has shape {x.shape}, cell expects ({weights.input_size},)")
    if h_prev.shape != (d_h,) or c_prev.shape != (d_h,):
        raise ShapeError(f"LSTM state shapes {h_prev.shape}/{c_prev.shape}, cell expects ({d_h},)")

    gates = ops.add(ops.matmul(ops.concat([x, h_prev]), weights.W), weights.b)
    i = ops.sigmoid(ops.slice_range(gates, 0, d_h))
    f = ops.sigmoid(ops.slice_range(gates, d_h, 2 * d_h))
    g = ops.tanh(ops.slice_range(gates, 2 * d_h, 3 * d_h))
    o = ops.sigmoid(ops.slice_range(gates, 3 * d_h, 4 * d_h))
    c = ops.add(ops.mul(f, c_prev), ops.mul(i, g))
    h = ops.mul(o, ops.tanh(c))
    return h, c


def stacked_lstm_step(x: Array, states: Sequence[State], layers: Sequence[LSTMWeights],
                      dropout_rate: float = 0.0, rng: Optional[np.random.Generator] = None,
                      training: bool = False) -> List[State]:
    """One time step through stacked layers; dropout applies between layers only"""
    if len(states) != len(layers):
        raise ShapeError(f"{len(states)} states for {len(layers)} layers")
    new_states: List[State] = []
    layer_input = x
    for depth, (weights, (h_prev, c_prev)) in enumerate(zip(layers, states)):
        if depth > 0:
            layer_input = ops.dropout(layer_input, dropout_rate, rng, training)
        h, c = lstm_cell_step(layer_input, h_prev, c_prev, weights)
        new_states.append((h, c))
        layer_input = h
    return new_states


def run_lstm(inputs: Sequence[Array], weights: LSTMWeights, initial: Optional[State] = None,
             reverse: bool = False) -> Tuple[List[Array], List[State]]:
    """Run one layer over a sequence; outputs are returned in input order"""
    h, c = initial if initial is not None else zero_state(weights.hidden_size)
    order = range(len(inputs) - 1, -1, -1) if reverse else range(len(inputs))
    outputs: List[Optional[Array]] = [None] * len(inputs)
    states: List[Optional[State]] = [None] * len(inputs)
    for t in order:
        h, c = lstm_cell_step(inputs[t], h, c, weights)
        outputs[t] = h
        states[t] = (h, c)
    return outputs, states

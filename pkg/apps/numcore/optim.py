# ============================================================================
# apps/numcore/optim.py - AdaGrad and global-norm clipping
# ============================================================================

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Tuple

import numpy as np

from config import ACCUMULATOR_INIT, CLIP_NORM, LEARNING_RATE
from shared.errors import NumericError, ShapeError
from .tensor import Array

logger = logging.getLogger(__name__)


@dataclass
class OptimState:
    """Per-parameter AdaGrad accumulators plus the step hyperparameters"""
    accumulators: Dict[str, np.ndarray] = field(default_factory=dict)
    learning_rate: float = LEARNING_RATE
    clip_norm: float = CLIP_NORM
    acc_init: float = ACCUMULATOR_INIT
    steps: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be nonnegative, got {self.learning_rate}")
        if self.clip_norm <= 0:
            raise ValueError(f"clip_norm must be positive, got {self.clip_norm}")

    @classmethod
    def for_params(cls, params: Mapping[str, Array], learning_rate: float = LEARNING_RATE,
                   acc_init: float = ACCUMULATOR_INIT, clip_norm: float = CLIP_NORM) -> "OptimState":
        accumulators = {name: np.full(p.shape, acc_init) for name, p in params.items()}
        return cls(accumulators, learning_rate, clip_norm, acc_init)


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))


def clip_global_norm(grads: Mapping[str, np.ndarray], max_norm: float) -> Tuple[Dict[str, np.ndarray], float]:
    """Scale all gradients together so their joint L2 norm is at most max_norm"""
    if max_norm <= 0:
        raise ValueError(f"max_norm must be positive, got {max_norm}")
    norm = global_norm(grads)
    if norm <= max_norm:
        return {name: g for name, g in grads.items()}, norm
    factor = max_norm / norm
    return {name: g * factor for name, g in grads.items()}, norm


def adagrad_update(params: Mapping[str, Array], grads: Mapping[str, np.ndarray], opt: OptimState) -> None:
    """acc <- acc + g^2; p <- p - lr * g / sqrt(acc), in place"""
    for name, g in grads.items():
        p = params[name]
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, parameter has {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for {name}")
        acc = opt.accumulators.get(name)
        if acc is None:
            acc = np.full(p.shape, opt.acc_init)
        elif acc.shape != p.shape:
            raise ShapeError(f"accumulator for {name} has shape {acc.shape}, parameter has {p.shape}")
        acc = acc + g * g
        opt.accumulators[name] = acc
        p.values -= opt.learning_rate * g / np.sqrt(acc)
    opt.steps += 1

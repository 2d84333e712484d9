# ============================================================================
# apps/numcore/params.py - Named trainable arrays
# ============================================================================

import logging
from dataclasses import dataclass
from typing import Dict, Iterator, Mapping, Optional, Tuple

import numpy as np

from config import FORGET_BIAS, INIT_SCALE
from shared.errors import ShapeError
from shared.utils import make_rng
from .recurrent import LSTMWeights, lstm_bias_init
from .tensor import Array, parameter

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ParamSpec:
    shape: Tuple[int, ...]
    init: str = "uniform"  # uniform | zeros | lstm_bias


def lstm_specs(prefix: str, input_size: int, hidden_size: int) -> Dict[str, ParamSpec]:
    return {
        f"{prefix}.W": ParamSpec((input_size + hidden_size, 4 * hidden_size)),
        f"{prefix}.b": ParamSpec((4 * hidden_size,), "lstm_bias"),
    }


class ModelParams:
    """Ordered registry of every trainable array of the model"""

    def __init__(self, arrays: Mapping[str, Array]):
        self._arrays: Dict[str, Array] = dict(arrays)

    @classmethod
    def initialize(cls, specs: Mapping[str, ParamSpec], seed: int,
                   scale: float = INIT_SCALE, forget_bias: float = FORGET_BIAS) -> "ModelParams":
        """Uniform [-scale, scale] init drawn in registry order from one seeded generator"""
        rng = make_rng(seed)
        arrays: Dict[str, Array] = {}
        for name, spec in specs.items():
            if spec.init == "zeros":
                values = np.zeros(spec.shape)
            elif spec.init == "lstm_bias":
                values = lstm_bias_init(spec.shape[0] // 4, forget_bias)
            else:
                values = rng.uniform(-scale, scale, size=spec.shape)
            arrays[name] = parameter(values, name=name)
        logger.info(f"Initialised {len(arrays)} parameter arrays ({sum(a.size for a in arrays.values())} values)")
        return cls(arrays)

    def __getitem__(self, name: str) -> Array:
        return self._arrays[name]

    def __contains__(self, name: str) -> bool:
        return name in self._arrays

    def __iter__(self) -> Iterator[str]:
        return iter(self._arrays)

    def __len__(self) -> int:
        return len(self._arrays)

    def items(self):
        return self._arrays.items()

    def names(self):
        return list(self._arrays)

    def lstm(self, prefix: str) -> LSTMWeights:
        return LSTMWeights(self._arrays[f"{prefix}.W"], self._arrays[f"{prefix}.b"])

    def shapes(self) -> Dict[str, Tuple[int, ...]]:
        return {name: a.shape for name, a in self._arrays.items()}

    @property
    def num_values(self) -> int:
        return sum(a.size for a in self._arrays.values())

    def zero_grad(self) -> None:
        for a in self._arrays.values():
            a.grad = np.zeros_like(a.values)

    def grads(self) -> Dict[str, np.ndarray]:
        return {name: (a.grad if a.grad is not None else np.zeros_like(a.values))
                for name, a in self._arrays.items()}

    def snapshot(self) -> Dict[str, np.ndarray]:
        return {name: a.values.copy() for name, a in self._arrays.items()}

    def load_values(self, values: Mapping[str, np.ndarray], strict: bool = True) -> None:
        for name, array in self._arrays.items():
            if name not in values:
                if strict:
                    raise ShapeError(f"missing values for parameter {name}")
                continue
            incoming = np.asarray(values[name], dtype=np.float64)
            if incoming.shape != array.shape:
                raise ShapeError(f"{name}: expected shape {array.shape}, got {incoming.shape}")
            array.values = incoming.copy()

    def get(self, name: str) -> Optional[Array]:
        return self._arrays.get(name)

# ============================================================================
# apps/numcore/tensor.py - Array values and the define-by-run tape
# ============================================================================

import contextvars
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from shared.errors import PlanGenError, ShapeError

logger = logging.getLogger(__name__)

_ACTIVE_TAPE: contextvars.ContextVar[Optional["Tape"]] = contextvars.ContextVar("active_tape", default=None)


class Array:
    """Dense float64 array with an optional gradient buffer"""

    __slots__ = ("values", "requires_grad", "grad", "name")

    def __init__(self, values, requires_grad: bool = False, name: Optional[str] = None):
        self.values = np.array(values, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.values.shape

    @property
    def size(self) -> int:
        return int(self.values.size)

    def item(self) -> float:
        if self.values.size != 1:
            raise ShapeError(f"item() needs a single value, got shape {self.shape}")
        return float(self.values.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.values

    def __repr__(self) -> str:
        label = f" {self.name}" if self.name else ""
        return f"<Array{label} shape={self.shape} requires_grad={self.requires_grad}>"


def constant(values) -> Array:
    return Array(values, requires_grad=False)


def parameter(values, name: Optional[str] = None) -> Array:
    return Array(values, requires_grad=True, name=name)


@dataclass
class Node:
    """One executed primitive: output, inputs and the local vector-Jacobian product"""
    op: str
    output: Array
    inputs: Tuple[Array, ...]
    backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tape:
    """Ordered record of executed ops; execution order is a topological order"""

    def __init__(self):
        self.nodes: List[Node] = []
        self._token = None

    def __enter__(self) -> "Tape":
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _ACTIVE_TAPE.reset(self._token)
        self._token = None

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, node: Node) -> None:
        self.nodes.append(node)

    def leaves(self) -> List[Array]:
        """requires_grad inputs that no recorded op produced, in first-use order"""
        produced = {id(node.output) for node in self.nodes}
        seen = set()
        leaves = []
        for node in self.nodes:
            for inp in node.inputs:
                key = id(inp)
                if inp.requires_grad and key not in produced and key not in seen:
                    seen.add(key)
                    leaves.append(inp)
        return leaves


def active_tape() -> Optional[Tape]:
    return _ACTIVE_TAPE.get()


def backprop_tape(tape: Tape, loss: Array) -> Dict[int, np.ndarray]:
    """Reverse pass over the tape; populates .grad on every requires_grad leaf"""
    if loss.values.size != 1:
        raise ShapeError(f"loss must be a scalar, got shape {loss.shape}")
    if not loss.requires_grad:
        raise PlanGenError("loss is not reachable from the tape")

    leaves = tape.leaves()
    for leaf in leaves:
        leaf.grad = np.zeros_like(leaf.values)

    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.values)}
    for node in reversed(tape.nodes):
        upstream = grads.pop(id(node.output), None)
        if upstream is None:
            continue
        for inp, local in zip(node.inputs, node.backward(upstream)):
            if local is None or not inp.requires_grad:
                continue
            key = id(inp)
            if key in grads:
                grads[key] = grads[key] + local
            else:
                grads[key] = local

    for leaf in leaves:
        if id(leaf) in grads:
            leaf.grad = grads[id(leaf)].reshape(leaf.values.shape)
    if not leaves and id(loss) in grads:
        loss.grad = grads[id(loss)]
    return grads

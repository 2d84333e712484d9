from .tensor import Array, Tape, backprop_tape, constant, parameter
from .params import ModelParams, ParamSpec

__all__ = ["Array", "Tape", "backprop_tape", "constant", "parameter", "ModelParams", "ParamSpec"]

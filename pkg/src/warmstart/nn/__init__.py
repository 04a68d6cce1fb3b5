"""Self-contained differentiable-computation kernel (tensors, layers, Adam)."""

from . import tensor
from .tensor import Tensor, set_nan_guard
from .layers import Dense, MLP, LSTM, LstmCell, Module, glorot_uniform
from .optim import Adam
from .gradcheck import gradient_check
from .checkpoint import save_checkpoint, load_checkpoint, state_dict, load_state_dict

__all__ = [
    "tensor", "Tensor", "set_nan_guard", "Dense", "MLP", "LSTM", "LstmCell",
    "Module", "glorot_uniform", "Adam", "gradient_check",
    "save_checkpoint", "load_checkpoint", "state_dict", "load_state_dict",
]

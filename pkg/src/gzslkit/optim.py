"""Named parameter collections, fan-in initialization, and Adam."""

from __future__ import annotations

import math

import numpy as np

from .autodiff import Tensor
from .errors import ShapeError, TrainingDivergedError, UsageError
from .rng import Rng


class ParameterSet:
    """Ordered name -> Tensor map holding one network's trainable weights."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, tensor: Tensor) -> Tensor:
        if name in self._params:
            raise UsageError(f"duplicate parameter name {name!r}")
        tensor.requires_grad = True
        self._params[name] = tensor
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self):
        return list(self._params)

    def items(self):
        return self._params.items()

    def tensors(self):
        return list(self._params.values())

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.value.copy() for name, p in self._params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for name, p in self._params.items():
            arr = np.asarray(state[name], dtype=p.value.dtype)
            if arr.shape != p.value.shape:
                raise ShapeError(f"parameter {name!r}: stored shape {arr.shape} != {p.value.shape}")
            p.value = np.ascontiguousarray(arr)


def init_linear(params: ParameterSet, name: str, fan_in: int, fan_out: int,
                rng: Rng, dtype=np.float32) -> tuple[Tensor, Tensor]:
    """Symmetric uniform fan-in init: W, b ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
    bound = 1.0 / math.sqrt(fan_in)
    w = params.add(f"{name}.w", Tensor(rng.uniform(-bound, bound, (fan_in, fan_out), dtype=dtype), dtype=dtype))
    b = params.add(f"{name}.b", Tensor(rng.uniform(-bound, bound, (fan_out,), dtype=dtype), dtype=dtype))
    return w, b


class Adam:
    """Standard Adam with bias correction over one ParameterSet.

    The step counter is shared across all parameters of the instance; moment
    buffers are allocated lazily with the parameter's own shape and dtype.
    """

    def __init__(self, params: ParameterSet, lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0:
            raise UsageError(f"learning rate must be positive, got {lr}")
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {name: np.zeros_like(p.value) for name, p in params.items()}
        self._v = {name: np.zeros_like(p.value) for name, p in params.items()}

    def zero_grad(self) -> None:
        self.params.zero_grad()

    def step(self) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                g = np.zeros_like(p.value)
            elif g.shape != p.value.shape:
                raise ShapeError(f"gradient shape {g.shape} != parameter {name!r} shape {p.value.shape}")
            if not np.all(np.isfinite(g)):
                raise TrainingDivergedError(f"non-finite gradient for parameter {name!r} at step {self.t}")
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            m_hat = m / bc1
            v_hat = v / bc2
            p.value = p.value - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

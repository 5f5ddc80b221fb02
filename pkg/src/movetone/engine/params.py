"""Named parameter registry with adaptive-moment optimization state."""

from __future__ import annotations

import numpy as np

from movetone.engine.tensor import Tensor


class ParameterStore:
    """Unique-named trainable tensors plus their optimizer moments.

    Shapes are fixed at creation; the optimizer keeps first/second moment
    accumulators per parameter and a shared step counter.
    """

    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self._params: dict[str, Tensor] = {}
        self._moment1: dict[str, np.ndarray] = {}
        self._moment2: dict[str, np.ndarray] = {}
        self.step_count = 0

    def __contains__(self, name):
        return name in self._params

    def __getitem__(self, name) -> Tensor:
        return self._params[name]

    def names(self):
        return list(self._params)

    def create(self, name: str, data: np.ndarray) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name: {name}")
        tensor = Tensor(np.asarray(data, dtype=self.dtype), requires_grad=True)
        self._params[name] = tensor
        self._moment1[name] = np.zeros(tensor.shape, dtype=self.dtype)
        self._moment2[name] = np.zeros(tensor.shape, dtype=self.dtype)
        return tensor

    def uniform(self, name: str, shape, fan_in: int, rng: np.random.Generator) -> Tensor:
        """Symmetric uniform init in +-sqrt(1/fan_in)."""
        bound = float(np.sqrt(1.0 / max(1, fan_in)))
        return self.create(name, rng.uniform(-bound, bound, size=shape))

    def zeros(self, name: str, shape) -> Tensor:
        return self.create(name, np.zeros(shape))

    def zero_grad(self):
        for p in self._params.values():
            p.grad = None

    def adam_step(self, lr=3e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        """One adaptive-moment update over every parameter with a gradient."""
        self.step_count += 1
        t = self.step_count
        corr1 = 1.0 - beta1**t
        corr2 = 1.0 - beta2**t
        for name, p in self._params.items():
            if p.grad is None:
                continue
            g = p.grad
            m = self._moment1[name]
            v = self._moment2[name]
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * g * g
            p.data -= lr * (m / corr1) / (np.sqrt(v / corr2) + eps)

    def state_dict(self):
        """Arrays only; suitable for exact serialization."""
        state = {"step_count": self.step_count, "params": {}, "moment1": {}, "moment2": {}}
        for name, p in self._params.items():
            state["params"][name] = p.data
            state["moment1"][name] = self._moment1[name]
            state["moment2"][name] = self._moment2[name]
        return state

    def load_state_dict(self, state):
        self.step_count = int(state["step_count"])
        for name, p in self._params.items():
            incoming = state["params"][name]
            if incoming.shape != p.shape:
                raise ValueError(f"parameter {name} shape changed: {p.shape} -> {incoming.shape}")
            p.data = np.asarray(incoming, dtype=self.dtype).copy()
            self._moment1[name] = np.asarray(state["moment1"][name], dtype=self.dtype).copy()
            self._moment2[name] = np.asarray(state["moment2"][name], dtype=self.dtype).copy()

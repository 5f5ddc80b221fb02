"""Finite-difference verification of reverse-mode gradients.

Checks run at double precision with central differences; the relative error
is |analytic - numeric| / max(1, |analytic|, |numeric|) so that near-zero
gradients are judged on an absolute scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from movetone.engine.params import ParameterStore


class ProbeError(RuntimeError):
    """The loss was non-finite at a probe point."""


@dataclass
class GradientReport:
    step: float
    per_parameter: dict[str, float] = field(default_factory=dict)

    @property
    def max_relative_error(self) -> float:
        return max(self.per_parameter.values(), default=0.0)

    def worst(self):
        if not self.per_parameter:
            return None
        return max(self.per_parameter, key=self.per_parameter.get)


def check_gradients(fn, store: ParameterStore, h: float = 1e-5) -> GradientReport:
    """Compare reverse-mode gradients of scalar-valued ``fn`` against central
    finite differences (f(p+h) - f(p-h)) / 2h for every parameter element.

    ``fn`` takes no arguments and must be deterministic; it reads parameters
    from ``store``.
    """
    if store.dtype != np.float64:
        raise ValueError("gradient checks require a float64 parameter store")
    store.zero_grad()
    loss = fn()
    if not np.isfinite(loss.data):
        raise ProbeError("non-finite loss at the probe point")
    loss.backward()
    analytic = {
        name: (store[name].grad.copy() if store[name].grad is not None else np.zeros(store[name].shape))
        for name in store.names()
    }

    report = GradientReport(step=h)
    for name in store.names():
        param = store[name]
        flat = param.data.reshape(-1)
        numeric = np.zeros_like(flat)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            up = float(fn().data)
            flat[i] = keep - h
            down = float(fn().data)
            flat[i] = keep
            if not (np.isfinite(up) and np.isfinite(down)):
                raise ProbeError(f"non-finite loss while probing {name}[{i}]")
            numeric[i] = (up - down) / (2.0 * h)
        a = analytic[name].reshape(-1)
        denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(numeric)))
        report.per_parameter[name] = float(np.max(np.abs(a - numeric) / denom, initial=0.0))
    return report

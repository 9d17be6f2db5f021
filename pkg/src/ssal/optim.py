"""Named parameter collections and the adaptive-moment optimizer."""

from __future__ import annotations

import numpy as np

from .autograd import Tensor
from .errors import ShapeError


class ParamStore:
    """Ordered name -> Tensor map for one model (student or teacher)."""

    def __init__(self, entries: dict[str, Tensor] | None = None, role: str = "student"):
        if role not in ("student", "teacher"):
            raise ValueError(f"unknown role '{role}'")
        self.entries: dict[str, Tensor] = dict(entries or {})
        self.role = role

    def __getitem__(self, name: str) -> Tensor:
        return self.entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def names(self) -> list[str]:
        return list(self.entries.keys())

    def items(self):
        return self.entries.items()

    def add(self, name: str, tensor: Tensor):
        if name in self.entries:
            raise ValueError(f"duplicate parameter '{name}'")
        self.entries[name] = tensor

    def num_values(self) -> int:
        return sum(t.data.size for t in self.entries.values())

    def clone(self, role: str | None = None, requires_grad: bool | None = None) -> "ParamStore":
        out = ParamStore(role=role or self.role)
        for name, t in self.entries.items():
            rg = t.requires_grad if requires_grad is None else requires_grad
            out.add(name, Tensor(t.data.copy(), requires_grad=rg))
        return out

    def assert_aligned(self, other: "ParamStore"):
        if self.names() != other.names():
            raise ShapeError(
                f"parameter stores not aligned: {self.names()} vs {other.names()}"
            )
        for name in self.entries:
            a, b = self.entries[name].data.shape, other.entries[name].data.shape
            if a != b:
                raise ShapeError(f"parameter '{name}' shape mismatch: {a} vs {b}")

    def gradients(self) -> dict[str, np.ndarray]:
        out = {}
        for name, t in self.entries.items():
            out[name] = t.grad if t.grad is not None else np.zeros_like(t.data)
        return out

    def zero_grads(self):
        for t in self.entries.values():
            t.grad = None


class Adam:
    """Adaptive-moment estimation with bias correction; state kept per parameter."""

    def __init__(self, params: ParamStore, lr: float = 1e-4, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = float(lr)
        self.beta1, self.beta2 = float(betas[0]), float(betas[1])
        self.eps = float(eps)
        self.step_count = 0
        self.m = {name: np.zeros_like(t.data) for name, t in params.items()}
        self.v = {name: np.zeros_like(t.data) for name, t in params.items()}

    def step(self, grads: dict[str, np.ndarray]):
        if set(grads.keys()) != set(self.params.names()):
            raise ShapeError(
                f"gradient names {sorted(grads)} do not match parameters {sorted(self.params.names())}"
            )
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        for name, p in self.params.items():
            g = grads[name]
            if g.shape != p.data.shape:
                raise ShapeError(f"gradient for '{name}' has shape {g.shape}, expected {p.data.shape}")
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def adam_step(opt: Adam, grads: dict[str, np.ndarray]) -> ParamStore:
    """Apply one optimizer step and return the (mutated) parameter store."""
    opt.step(grads)
    return opt.params

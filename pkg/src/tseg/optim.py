"""Parameters and the Adam update."""

import numpy as np

from . import _kernels as K
from .autodiff import Tensor
from .errors import ContractError


class Parameter:
    """A trainable tensor with its Adam moment buffers."""

    __slots__ = ("tensor", "adam_m", "adam_v", "step_count", "name")

    def __init__(self, data, name=""):
        self.tensor = Tensor(np.asarray(data), requires_grad=True)
        self.adam_m = np.zeros_like(self.tensor.data)
        self.adam_v = np.zeros_like(self.tensor.data)
        self.step_count = 0
        self.name = name

    @property
    def data(self):
        return self.tensor.data

    @property
    def grad(self):
        return self.tensor.grad

    @property
    def shape(self):
        return self.tensor.data.shape

    def zero_grad(self):
        self.tensor.zero_grad()

    def astype(self, dtype):
        """Copy with data cast to dtype and fresh optimizer state."""
        p = Parameter(self.tensor.data.astype(dtype), name=self.name)
        return p

    def __repr__(self):
        return f"Parameter({self.name or 'unnamed'}, shape={self.shape})"


def adam_step(params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Standard Adam with bias correction; clears gradients afterwards.

    Every parameter must hold a populated gradient. Step counts are
    per-parameter so freshly added parameters bias-correct correctly.
    """
    for p in params:
        if p.tensor.grad is None:
            raise ContractError(f"adam_step: parameter {p.name!r} has no gradient")
    for p in params:
        p.step_count += 1
        K.adam_update(
            p.tensor.data, p.tensor.grad, p.adam_m, p.adam_v,
            p.step_count, lr, beta1, beta2, eps,
        )
        p.zero_grad()

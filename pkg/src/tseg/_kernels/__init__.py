"""Kernel backend selection.

Two interchangeable backends provide the numeric hot paths: ``c`` (compiled
extension, used when importable) and ``numpy`` (reference implementation).
Selection happens at import, honoring the ``TSEG_BACKEND`` environment
variable (``auto``/``c``/``numpy``), and can be switched at runtime with
:func:`use_backend` (not thread-safe; switch only between runs).
"""

import os

from ..errors import ConfigError
from . import numpy_backend

_BACKENDS = {"numpy": numpy_backend}

try:
    from . import c_backend

    _BACKENDS["c"] = c_backend
except ImportError:  # extension not built; numpy fallback stays active
    c_backend = None

_env = os.environ.get("TSEG_BACKEND", "auto").lower()
if _env == "auto":
    _active = _BACKENDS.get("c", numpy_backend)
elif _env in _BACKENDS:
    _active = _BACKENDS[_env]
else:
    raise ConfigError(
        f"TSEG_BACKEND={_env!r} not available; choices: auto, {', '.join(sorted(_BACKENDS))}"
    )


def available_backends():
    return sorted(_BACKENDS)


def backend_name():
    return _active.name


def use_backend(name):
    """Switch the active backend; returns the previously active name."""
    global _active
    if name not in _BACKENDS:
        raise ConfigError(f"unknown backend {name!r}; choices: {', '.join(sorted(_BACKENDS))}")
    prev = _active.name
    _active = _BACKENDS[name]
    return prev


def matmul(a, b, trans_a=False, trans_b=False):
    return _active.matmul(a, b, trans_a, trans_b)


def bmm(a, b, trans_a=False, trans_b=False):
    return _active.bmm(a, b, trans_a, trans_b)


def softmax_fwd(x):
    return _active.softmax_fwd(x)


def softmax_bwd(y, gy):
    return _active.softmax_bwd(y, gy)


def layer_norm_fwd(x, gain, bias, eps):
    return _active.layer_norm_fwd(x, gain, bias, eps)


def layer_norm_bwd(x, gain, mean, rstd, gy):
    return _active.layer_norm_bwd(x, gain, mean, rstd, gy)


def gelu_fwd(x):
    return _active.gelu_fwd(x)


def gelu_bwd(x, gy):
    return _active.gelu_bwd(x, gy)


def sigmoid_fwd(x):
    return _active.sigmoid_fwd(x)


def sigmoid_bwd(y, gy):
    return _active.sigmoid_bwd(y, gy)


def bce_fwd(probs, labels, clamp):
    return _active.bce_fwd(probs, labels, clamp)


def bce_bwd(probs, labels, clamp):
    return _active.bce_bwd(probs, labels, clamp)


def adam_update(param, grad, m, v, t, lr, beta1, beta2, eps):
    _active.adam_update(param, grad, m, v, t, lr, beta1, beta2, eps)

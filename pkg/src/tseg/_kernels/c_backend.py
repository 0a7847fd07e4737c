"""Shape/contiguity adapter around the compiled kernels.

The .pyx kernels work on flat or 2-D contiguous buffers; this wrapper
restores the any-leading-dims interface the autodiff layer uses.
"""

import numpy as np

from . import _ckernels as _ck

name = "c"


def _c(x):
    return np.ascontiguousarray(x)


def matmul(a, b, trans_a=False, trans_b=False):
    return _ck.matmul(_c(a), _c(b), trans_a, trans_b)


def bmm(a, b, trans_a=False, trans_b=False):
    return _ck.bmm(_c(a), _c(b), trans_a, trans_b)


def softmax_fwd(x):
    x = _c(x)
    r = x.reshape(-1, x.shape[-1])
    return _ck.softmax_fwd2d(r).reshape(x.shape)


def softmax_bwd(y, gy):
    y = _c(y)
    return _ck.softmax_bwd2d(
        y.reshape(-1, y.shape[-1]), _c(gy).reshape(-1, y.shape[-1])
    ).reshape(y.shape)


def layer_norm_fwd(x, gain, bias, eps):
    x = _c(x)
    lead = x.shape[:-1]
    y, mean, rstd = _ck.layer_norm_fwd2d(
        x.reshape(-1, x.shape[-1]), _c(gain), _c(bias), float(eps)
    )
    return y.reshape(x.shape), mean.reshape(lead), rstd.reshape(lead)


def layer_norm_bwd(x, gain, mean, rstd, gy):
    x = _c(x)
    gx, ggain, gbias = _ck.layer_norm_bwd2d(
        x.reshape(-1, x.shape[-1]),
        _c(gain),
        _c(mean).reshape(-1),
        _c(rstd).reshape(-1),
        _c(gy).reshape(-1, x.shape[-1]),
    )
    return gx.reshape(x.shape), ggain, gbias


def gelu_fwd(x):
    x = _c(x)
    return _ck.gelu_fwd1d(x.reshape(-1)).reshape(x.shape)


def gelu_bwd(x, gy):
    x = _c(x)
    return _ck.gelu_bwd1d(x.reshape(-1), _c(gy).reshape(-1)).reshape(x.shape)


def sigmoid_fwd(x):
    x = _c(x)
    return _ck.sigmoid_fwd1d(x.reshape(-1)).reshape(x.shape)


def sigmoid_bwd(y, gy):
    y = _c(y)
    return _ck.sigmoid_bwd1d(y.reshape(-1), _c(gy).reshape(-1)).reshape(y.shape)


def bce_fwd(probs, labels, clamp):
    return float(_ck.bce_fwd1d(_c(probs).reshape(-1), _c(labels).reshape(-1), clamp))


def bce_bwd(probs, labels, clamp):
    probs = _c(probs)
    return _ck.bce_bwd1d(
        probs.reshape(-1), _c(labels).reshape(-1), clamp
    ).reshape(probs.shape)


def adam_update(param, grad, m, v, t, lr, beta1, beta2, eps):
    _ck.adam_update1d(
        param.reshape(-1), _c(grad).reshape(-1), m.reshape(-1), v.reshape(-1),
        t, lr, beta1, beta2, eps,
    )

"""Reference kernel implementations on top of numpy.

Every function here has a twin in the compiled backend (``_ckernels``); the
two must agree to float tolerance on random inputs (see tests). This module
is the fallback selected at import when the extension is unavailable, and it
also serves all float64 work regardless of backend.
"""

import numpy as np
from scipy.special import erf

name = "numpy"

_INV_SQRT2 = 0.7071067811865476
_INV_SQRT_2PI = 0.3989422804014327


def matmul(a, b, trans_a=False, trans_b=False):
    if trans_a:
        a = a.T
    if trans_b:
        b = b.T
    return a @ b


def bmm(a, b, trans_a=False, trans_b=False):
    if trans_a:
        a = a.swapaxes(-1, -2)
    if trans_b:
        b = b.swapaxes(-1, -2)
    return np.matmul(a, b)


def softmax_fwd(x):
    m = x.max(axis=-1, keepdims=True)
    e = np.exp(x - m)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_bwd(y, gy):
    dot = (y * gy).sum(axis=-1, keepdims=True)
    return y * (gy - dot)


def layer_norm_fwd(x, gain, bias, eps):
    mean = x.mean(axis=-1, keepdims=True)
    xc = x - mean
    var = (xc * xc).mean(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    y = xc * rstd * gain + bias
    return y, mean.squeeze(-1), rstd.squeeze(-1)


def layer_norm_bwd(x, gain, mean, rstd, gy):
    d = x.shape[-1]
    xhat = (x - mean[..., None]) * rstd[..., None]
    gyh = gy * gain
    a = gyh.mean(axis=-1, keepdims=True)
    b = (gyh * xhat).mean(axis=-1, keepdims=True)
    gx = rstd[..., None] * (gyh - a - xhat * b)
    lead = tuple(range(x.ndim - 1))
    ggain = (gy * xhat).sum(axis=lead)
    gbias = gy.sum(axis=lead)
    return gx, ggain, gbias


def gelu_fwd(x):
    return 0.5 * x * (1.0 + erf(x * _INV_SQRT2))


def gelu_bwd(x, gy):
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    pdf = np.exp(-0.5 * x * x) * _INV_SQRT_2PI
    return gy * (cdf + x * pdf)


def sigmoid_fwd(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def sigmoid_bwd(y, gy):
    return y * (1.0 - y) * gy


def bce_fwd(probs, labels, clamp):
    p = np.clip(probs, clamp, 1.0 - clamp)
    losses = -(labels * np.log(p) + (1.0 - labels) * np.log1p(-p))
    return float(losses.mean())


def bce_bwd(probs, labels, clamp):
    p = np.clip(probs, clamp, 1.0 - clamp)
    g = (p - labels) / (p * (1.0 - p)) / probs.size
    # clipping is a hard min/max: no gradient flows to clipped entries
    g[(probs < clamp) | (probs > 1.0 - clamp)] = 0.0
    return g.astype(probs.dtype, copy=False)


def adam_update(param, grad, m, v, t, lr, beta1, beta2, eps):
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * (grad * grad)
    mhat = m / (1.0 - beta1**t)
    vhat = v / (1.0 - beta2**t)
    param -= lr * mhat / (np.sqrt(vhat) + eps)

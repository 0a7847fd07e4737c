# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernel implementations.

GEMM is delegated to the BLAS scipy links against; the remaining kernels are
fused single-pass loops over contiguous buffers. Float32 and float64 are both
supported through a fused type so the gradient-check path can stay on the
compiled backend.
"""

from libc.math cimport erf, exp, log, log1p, sqrt

import numpy as np

from scipy.linalg.cython_blas cimport dgemm, sgemm

ctypedef fused real:
    float
    double


cdef inline double _d(real x) noexcept nogil:
    return <double> x


# ---------------------------------------------------------------------------
# GEMM
# ---------------------------------------------------------------------------

cdef void _gemm(real* a, real* b, real* c,
                int m, int n, int k,
                int a_rowlen, int b_rowlen,
                bint trans_a, bint trans_b) noexcept nogil:
    # Row-major C(m,n) = opA(m,k) . opB(k,n) via column-major BLAS:
    # compute C^T = opB^T . opA^T by swapping the operand slots.
    cdef char ta = 84 if trans_b else 78  # 'T' / 'N'
    cdef char tb = 84 if trans_a else 78
    cdef int M = n, N = m, K = k
    cdef int lda = b_rowlen, ldb = a_rowlen, ldc = n
    cdef float onef = 1.0, zerof = 0.0
    cdef double oned = 1.0, zerod = 0.0
    if real is float:
        sgemm(&ta, &tb, &M, &N, &K, &onef, <float*> b, &lda,
              <float*> a, &ldb, &zerof, <float*> c, &ldc)
    else:
        dgemm(&ta, &tb, &M, &N, &K, &oned, <double*> b, &lda,
              <double*> a, &ldb, &zerod, <double*> c, &ldc)


def matmul(real[:, ::1] a, real[:, ::1] b, bint trans_a=False, bint trans_b=False):
    cdef int m = a.shape[1] if trans_a else a.shape[0]
    cdef int k = a.shape[0] if trans_a else a.shape[1]
    cdef int k2 = b.shape[1] if trans_b else b.shape[0]
    cdef int n = b.shape[0] if trans_b else b.shape[1]
    if k != k2:
        raise ValueError("inner dimensions disagree")
    out = np.empty((m, n), dtype=np.float32 if real is float else np.float64)
    cdef real[:, ::1] c = out
    with nogil:
        _gemm(&a[0, 0], &b[0, 0], &c[0, 0], m, n, k,
              a.shape[1], b.shape[1], trans_a, trans_b)
    return out


def bmm(real[:, :, ::1] a, real[:, :, ::1] b, bint trans_a=False, bint trans_b=False):
    cdef int nb = a.shape[0]
    cdef int m = a.shape[2] if trans_a else a.shape[1]
    cdef int k = a.shape[1] if trans_a else a.shape[2]
    cdef int k2 = b.shape[2] if trans_b else b.shape[1]
    cdef int n = b.shape[1] if trans_b else b.shape[2]
    if nb != b.shape[0] or k != k2:
        raise ValueError("batched matmul dimensions disagree")
    out = np.empty((nb, m, n), dtype=np.float32 if real is float else np.float64)
    cdef real[:, :, ::1] c = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(nb):
            _gemm(&a[i, 0, 0], &b[i, 0, 0], &c[i, 0, 0], m, n, k,
                  a.shape[2], b.shape[2], trans_a, trans_b)
    return out


# ---------------------------------------------------------------------------
# Softmax over the last axis of a 2-D buffer
# ---------------------------------------------------------------------------

def softmax_fwd2d(real[:, ::1] x):
    cdef Py_ssize_t r = x.shape[0], c = x.shape[1]
    out = np.empty((r, c), dtype=np.float32 if real is float else np.float64)
    cdef real[:, ::1] y = out
    cdef Py_ssize_t i, j
    cdef double m, s, e
    with nogil:
        for i in range(r):
            m = _d(x[i, 0])
            for j in range(1, c):
                if _d(x[i, j]) > m:
                    m = _d(x[i, j])
            s = 0.0
            for j in range(c):
                e = exp(_d(x[i, j]) - m)
                y[i, j] = <real> e
                s += e
            for j in range(c):
                y[i, j] = <real> (_d(y[i, j]) / s)
    return out


def softmax_bwd2d(real[:, ::1] y, real[:, ::1] gy):
    cdef Py_ssize_t r = y.shape[0], c = y.shape[1]
    out = np.empty((r, c), dtype=np.float32 if real is float else np.float64)
    cdef real[:, ::1] gx = out
    cdef Py_ssize_t i, j
    cdef double dot
    with nogil:
        for i in range(r):
            dot = 0.0
            for j in range(c):
                dot += _d(y[i, j]) * _d(gy[i, j])
            for j in range(c):
                gx[i, j] = <real> (_d(y[i, j]) * (_d(gy[i, j]) - dot))
    return out


# ---------------------------------------------------------------------------
# Layer normalization over the last axis of a 2-D buffer
# ---------------------------------------------------------------------------

def layer_norm_fwd2d(real[:, ::1] x, real[::1] gain, real[::1] bias, double eps):
    cdef Py_ssize_t r = x.shape[0], d = x.shape[1]
    dt = np.float32 if real is float else np.float64
    out = np.empty((r, d), dtype=dt)
    mean_out = np.empty(r, dtype=dt)
    rstd_out = np.empty(r, dtype=dt)
    cdef real[:, ::1] y = out
    cdef real[::1] mean = mean_out, rstd = rstd_out
    cdef Py_ssize_t i, j
    cdef double mu, var, xc, rs
    with nogil:
        for i in range(r):
            mu = 0.0
            for j in range(d):
                mu += _d(x[i, j])
            mu /= d
            var = 0.0
            for j in range(d):
                xc = _d(x[i, j]) - mu
                var += xc * xc
            var /= d
            rs = 1.0 / sqrt(var + eps)
            mean[i] = <real> mu
            rstd[i] = <real> rs
            for j in range(d):
                y[i, j] = <real> ((_d(x[i, j]) - mu) * rs * _d(gain[j]) + _d(bias[j]))
    return out, mean_out, rstd_out


def layer_norm_bwd2d(real[:, ::1] x, real[::1] gain, real[::1] mean,
                     real[::1] rstd, real[:, ::1] gy):
    cdef Py_ssize_t r = x.shape[0], d = x.shape[1]
    dt = np.float32 if real is float else np.float64
    gx_out = np.empty((r, d), dtype=dt)
    ggain_out = np.zeros(d, dtype=dt)
    gbias_out = np.zeros(d, dtype=dt)
    cdef real[:, ::1] gx = gx_out
    cdef real[::1] ggain = ggain_out, gbias = gbias_out
    cdef Py_ssize_t i, j
    cdef double mu, rs, xhat, gyh, a, b
    with nogil:
        for i in range(r):
            mu = _d(mean[i])
            rs = _d(rstd[i])
            a = 0.0
            b = 0.0
            for j in range(d):
                xhat = (_d(x[i, j]) - mu) * rs
                gyh = _d(gy[i, j]) * _d(gain[j])
                a += gyh
                b += gyh * xhat
                ggain[j] = <real> (_d(ggain[j]) + _d(gy[i, j]) * xhat)
                gbias[j] = <real> (_d(gbias[j]) + _d(gy[i, j]))
            a /= d
            b /= d
            for j in range(d):
                xhat = (_d(x[i, j]) - mu) * rs
                gyh = _d(gy[i, j]) * _d(gain[j])
                gx[i, j] = <real> (rs * (gyh - a - xhat * b))
    return gx_out, ggain_out, gbias_out


# ---------------------------------------------------------------------------
# Elementwise kernels (flattened buffers)
# ---------------------------------------------------------------------------

DEF INV_SQRT2 = 0.7071067811865476
DEF INV_SQRT_2PI = 0.3989422804014327


def gelu_fwd1d(real[::1] x):
    cdef Py_ssize_t n = x.shape[0], i
    out = np.empty(n, dtype=np.float32 if real is float else np.float64)
    cdef real[::1] y = out
    cdef double v
    with nogil:
        for i in range(n):
            v = _d(x[i])
            y[i] = <real> (0.5 * v * (1.0 + erf(v * INV_SQRT2)))
    return out


def gelu_bwd1d(real[::1] x, real[::1] gy):
    cdef Py_ssize_t n = x.shape[0], i
    out = np.empty(n, dtype=np.float32 if real is float else np.float64)
    cdef real[::1] gx = out
    cdef double v, cdf, pdf
    with nogil:
        for i in range(n):
            v = _d(x[i])
            cdf = 0.5 * (1.0 + erf(v * INV_SQRT2))
            pdf = exp(-0.5 * v * v) * INV_SQRT_2PI
            gx[i] = <real> (_d(gy[i]) * (cdf + v * pdf))
    return out


def sigmoid_fwd1d(real[::1] x):
    cdef Py_ssize_t n = x.shape[0], i
    out = np.empty(n, dtype=np.float32 if real is float else np.float64)
    cdef real[::1] y = out
    cdef double v, e
    with nogil:
        for i in range(n):
            v = _d(x[i])
            if v >= 0.0:
                y[i] = <real> (1.0 / (1.0 + exp(-v)))
            else:
                e = exp(v)
                y[i] = <real> (e / (1.0 + e))
    return out


def sigmoid_bwd1d(real[::1] y, real[::1] gy):
    cdef Py_ssize_t n = y.shape[0], i
    out = np.empty(n, dtype=np.float32 if real is float else np.float64)
    cdef real[::1] gx = out
    cdef double v
    with nogil:
        for i in range(n):
            v = _d(y[i])
            gx[i] = <real> (v * (1.0 - v) * _d(gy[i]))
    return out


def bce_fwd1d(real[::1] probs, real[::1] labels, double clamp):
    cdef Py_ssize_t n = probs.shape[0], i
    cdef double acc = 0.0, p, y
    with nogil:
        for i in range(n):
            p = _d(probs[i])
            if p < clamp:
                p = clamp
            elif p > 1.0 - clamp:
                p = 1.0 - clamp
            y = _d(labels[i])
            acc += y * log(p) + (1.0 - y) * log1p(-p)
    return -acc / n


def bce_bwd1d(real[::1] probs, real[::1] labels, double clamp):
    cdef Py_ssize_t n = probs.shape[0], i
    out = np.empty(n, dtype=np.float32 if real is float else np.float64)
    cdef real[::1] g = out
    cdef double p, y
    with nogil:
        for i in range(n):
            p = _d(probs[i])
            if p < clamp or p > 1.0 - clamp:
                g[i] = <real> 0.0
            else:
                y = _d(labels[i])
                g[i] = <real> ((p - y) / (p * (1.0 - p)) / n)
    return out


def adam_update1d(real[::1] param, real[::1] grad, real[::1] m, real[::1] v,
                  long t, double lr, double beta1, double beta2, double eps):
    cdef Py_ssize_t n = param.shape[0], i
    cdef double mi, vi, mhat, vhat, bc1, bc2
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    with nogil:
        for i in range(n):
            mi = beta1 * _d(m[i]) + (1.0 - beta1) * _d(grad[i])
            vi = beta2 * _d(v[i]) + (1.0 - beta2) * _d(grad[i]) * _d(grad[i])
            m[i] = <real> mi
            v[i] = <real> vi
            mhat = mi / bc1
            vhat = vi / bc2
            param[i] = <real> (_d(param[i]) - lr * mhat / (sqrt(vhat) + eps))

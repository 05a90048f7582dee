"""Hot numeric kernels: numba-jitted loops with a pure-numpy fallback.

The jitted path is used when numba imports cleanly; set ``CIVICML_NUMBA=0``
to force the numpy path (the two agree to float tolerance, see
``benchmarks/bench_kernels.py`` for a speed comparison). Matrix products are
left to BLAS in the calling code; the kernels here cover the fused
elementwise/reduction loops where numpy allocates too many temporaries.

All kernels expect C-contiguous float64 arrays.
"""

import math
import os

import numpy as np
from scipy.special import erf

_SQRT1_2 = 0.7071067811865476
_INV_SQRT_2PI = 0.3989422804014327

USE_NUMBA = os.environ.get("CIVICML_NUMBA", "1").lower() not in ("0", "false", "no")

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False


# ---------------------------------------------------------------------------
# pure-numpy implementations
# ---------------------------------------------------------------------------

def gelu_fwd_np(x):
    """Exact GELU x * Phi(x)."""
    return 0.5 * x * (1.0 + erf(x * _SQRT1_2))


def gelu_bwd_np(x, dy):
    """d/dx [x * Phi(x)] = Phi(x) + x * phi(x), times upstream dy."""
    phi = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return dy * (0.5 * (1.0 + erf(x * _SQRT1_2)) + x * phi)


def layer_norm_fwd_np(x, gain, bias, eps):
    """Row-wise layer norm over the last axis of a 2-d array.

    Returns (y, xhat, rstd); xhat and rstd are cached for the backward pass.
    """
    mu = x.mean(axis=1, keepdims=True)
    var = np.mean((x - mu) ** 2, axis=1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * rstd
    return xhat * gain + bias, xhat, rstd[:, 0]


def layer_norm_bwd_np(dy, xhat, rstd, gain):
    """Gradients of layer_norm_fwd: returns (dx, dgain, dbias)."""
    dg = (dy * xhat).sum(axis=0)
    db = dy.sum(axis=0)
    dxhat = dy * gain
    m1 = dxhat.mean(axis=1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=1, keepdims=True)
    dx = rstd[:, None] * (dxhat - m1 - xhat * m2)
    return dx, dg, db


def masked_softmax_np(scores, valid):
    """Softmax over the last axis of (B, H, L, L) scores.

    Key positions where ``valid[b, j]`` is False contribute probability 0
    (additive -inf before the softmax).
    """
    neg = np.where(valid[:, None, None, :], 0.0, -np.inf)
    s = scores + neg
    s = s - s.max(axis=-1, keepdims=True)
    p = np.exp(s)
    p /= p.sum(axis=-1, keepdims=True)
    return p


def softmax_bwd_np(p, dp):
    """Jacobian-vector product of row softmax: p * (dp - sum(p * dp))."""
    inner = (p * dp).sum(axis=-1, keepdims=True)
    return p * (dp - inner)


def adam_step_np(param, grad, m, v, lr, beta1, beta2, eps, bc1, bc2):
    """One in-place Adam update on flat views; bc1/bc2 are 1-beta^t corrections."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    param -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def embedding_grad_np(ids, dx, out):
    """Scatter-add rows of dx (T, e) into out (v, e) at row indices ids (T,)."""
    np.add.at(out, ids, dx)


# ---------------------------------------------------------------------------
# numba twins
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def gelu_fwd_nb(x):
        out = np.empty_like(x)
        r, c = x.shape
        for i in range(r):
            for j in range(c):
                v = x[i, j]
                out[i, j] = 0.5 * v * (1.0 + math.erf(v * _SQRT1_2))
        return out

    @njit(cache=True)
    def gelu_bwd_nb(x, dy):
        out = np.empty_like(x)
        r, c = x.shape
        for i in range(r):
            for j in range(c):
                v = x[i, j]
                phi = _INV_SQRT_2PI * math.exp(-0.5 * v * v)
                out[i, j] = dy[i, j] * (0.5 * (1.0 + math.erf(v * _SQRT1_2)) + v * phi)
        return out

    @njit(cache=True)
    def layer_norm_fwd_nb(x, gain, bias, eps):
        r, c = x.shape
        y = np.empty_like(x)
        xhat = np.empty_like(x)
        rstd = np.empty(r, dtype=x.dtype)
        for i in range(r):
            mu = 0.0
            for j in range(c):
                mu += x[i, j]
            mu /= c
            var = 0.0
            for j in range(c):
                d = x[i, j] - mu
                var += d * d
            var /= c
            rs = 1.0 / math.sqrt(var + eps)
            rstd[i] = rs
            for j in range(c):
                h = (x[i, j] - mu) * rs
                xhat[i, j] = h
                y[i, j] = h * gain[j] + bias[j]
        return y, xhat, rstd

    @njit(cache=True)
    def layer_norm_bwd_nb(dy, xhat, rstd, gain):
        r, c = dy.shape
        dx = np.empty_like(dy)
        dg = np.zeros(c, dtype=dy.dtype)
        db = np.zeros(c, dtype=dy.dtype)
        for i in range(r):
            m1 = 0.0
            m2 = 0.0
            for j in range(c):
                d = dy[i, j]
                h = xhat[i, j]
                dg[j] += d * h
                db[j] += d
                dxh = d * gain[j]
                m1 += dxh
                m2 += dxh * h
            m1 /= c
            m2 /= c
            rs = rstd[i]
            for j in range(c):
                dx[i, j] = rs * (dy[i, j] * gain[j] - m1 - xhat[i, j] * m2)
        return dx, dg, db

    @njit(cache=True)
    def masked_softmax_nb(scores, valid):
        b, h, l, _ = scores.shape
        p = np.empty_like(scores)
        for bi in range(b):
            for hi in range(h):
                for i in range(l):
                    mx = -np.inf
                    for j in range(l):
                        if valid[bi, j] and scores[bi, hi, i, j] > mx:
                            mx = scores[bi, hi, i, j]
                    z = 0.0
                    for j in range(l):
                        if valid[bi, j]:
                            e = math.exp(scores[bi, hi, i, j] - mx)
                            p[bi, hi, i, j] = e
                            z += e
                        else:
                            p[bi, hi, i, j] = 0.0
                    for j in range(l):
                        p[bi, hi, i, j] /= z
        return p

    @njit(cache=True)
    def softmax_bwd_nb(p, dp):
        b, h, l, _ = p.shape
        ds = np.empty_like(p)
        for bi in range(b):
            for hi in range(h):
                for i in range(l):
                    inner = 0.0
                    for j in range(l):
                        inner += p[bi, hi, i, j] * dp[bi, hi, i, j]
                    for j in range(l):
                        ds[bi, hi, i, j] = p[bi, hi, i, j] * (dp[bi, hi, i, j] - inner)
        return ds

    @njit(cache=True)
    def adam_step_nb(param, grad, m, v, lr, beta1, beta2, eps, bc1, bc2):
        n = param.shape[0]
        for i in range(n):
            g = grad[i]
            m[i] = beta1 * m[i] + (1.0 - beta1) * g
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g
            param[i] -= lr * (m[i] / bc1) / (math.sqrt(v[i] / bc2) + eps)

    @njit(cache=True)
    def embedding_grad_nb(ids, dx, out):
        t, e = dx.shape
        for i in range(t):
            r = ids[i]
            for j in range(e):
                out[r, j] += dx[i, j]


if USE_NUMBA and HAVE_NUMBA:
    ACTIVE = "numba"
    gelu_fwd = gelu_fwd_nb
    gelu_bwd = gelu_bwd_nb
    layer_norm_fwd = layer_norm_fwd_nb
    layer_norm_bwd = layer_norm_bwd_nb
    masked_softmax = masked_softmax_nb
    softmax_bwd = softmax_bwd_nb
    adam_step = adam_step_nb
    embedding_grad = embedding_grad_nb
else:
    ACTIVE = "numpy"
    gelu_fwd = gelu_fwd_np
    gelu_bwd = gelu_bwd_np
    layer_norm_fwd = layer_norm_fwd_np
    layer_norm_bwd = layer_norm_bwd_np
    masked_softmax = masked_softmax_np
    softmax_bwd = softmax_bwd_np
    adam_step = adam_step_np
    embedding_grad = embedding_grad_np

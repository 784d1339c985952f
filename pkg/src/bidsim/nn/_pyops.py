"""Numpy reference implementation of the dense-layer kernels.

The compiled extension ``bidsim.nn._kernels`` provides the same functions
with identical semantics; ``bidsim.nn.backend`` picks one at import time.
All arrays are float64 and C-contiguous.  Normalization uses population
(biased) statistics and adds ``eps`` inside the square root.
"""

import numpy as np

ACT_LINEAR, ACT_RELU, ACT_TANH = 0, 1, 2
NORM_NONE, NORM_LAYER, NORM_BATCH = 0, 1, 2


def layer_forward(x, w, b, act, norm, train, eps, momentum,
                  run_mean, run_var, zh, y, inv_std):
    """y = act(normalize(x @ w + b)).

    Fills the caller-owned caches: ``zh`` (post-normalization
    pre-activation), ``y`` (output) and ``inv_std`` (1/sqrt(var+eps),
    per row for layer norm, per column for batch norm).  In train mode
    batch norm also updates ``run_mean``/``run_var`` in place with
    ``momentum`` weight on the fresh batch statistics.
    """
    np.matmul(x, w, out=zh)
    zh += b
    if norm == NORM_LAYER:
        mu = zh.mean(axis=1, keepdims=True)
        var = zh.var(axis=1, keepdims=True)
        inv_std[:] = 1.0 / np.sqrt(var + eps).ravel()
        zh -= mu
        zh *= inv_std[:, None]
    elif norm == NORM_BATCH:
        if train:
            mu = zh.mean(axis=0)
            var = zh.var(axis=0)
            run_mean *= 1.0 - momentum
            run_mean += momentum * mu
            run_var *= 1.0 - momentum
            run_var += momentum * var
            inv_std[:] = 1.0 / np.sqrt(var + eps)
            zh -= mu
        else:
            inv_std[:] = 1.0 / np.sqrt(run_var + eps)
            zh -= run_mean
        zh *= inv_std
    if act == ACT_RELU:
        np.maximum(zh, 0.0, out=y)
    elif act == ACT_TANH:
        np.tanh(zh, out=y)
    else:
        y[:] = zh


def layer_backward(dy, x, w, zh, y, inv_std, act, norm, train,
                   want_dw, want_dx, dw, db, dx, scratch):
    """Reverse-mode step matching :func:`layer_forward`.

    ``scratch`` is a (batch, out) work buffer; ``dw``/``db`` (when
    ``want_dw``) and ``dx`` (when ``want_dx``) receive the gradients.
    ``dy`` is left untouched.
    """
    g = scratch
    if act == ACT_RELU:
        np.multiply(dy, zh > 0.0, out=g)
    elif act == ACT_TANH:
        np.multiply(dy, 1.0 - y * y, out=g)
    else:
        g[:] = dy
    if norm == NORM_LAYER:
        # d/dz of zhat = (z-mu)*inv: inv*(g - mean(g) - zhat*mean(g*zhat))
        mg = g.mean(axis=1, keepdims=True)
        mgz = (g * zh).mean(axis=1, keepdims=True)
        g -= mg
        g -= zh * mgz
        g *= inv_std[:, None]
    elif norm == NORM_BATCH:
        if train:
            mg = g.mean(axis=0)
            mgz = (g * zh).mean(axis=0)
            g -= mg
            g -= zh * mgz
        g *= inv_std
    if want_dw:
        np.matmul(x.T, g, out=dw)
        np.sum(g, axis=0, out=db)
    if want_dx:
        np.matmul(g, w.T, out=dx)


def adam_update(p, g, m, v, t, lr, b1, b2, eps):
    """One bias-corrected Adam step on flat parameter/gradient views."""
    m *= b1
    m += (1.0 - b1) * g
    v *= b2
    v += (1.0 - b2) * (g * g)
    mhat = m / (1.0 - b1 ** t)
    vhat = v / (1.0 - b2 ** t)
    p -= lr * mhat / (np.sqrt(vhat) + eps)


def soft_update_arrays(dst, src, tau):
    """dst <- tau*src + (1-tau)*dst, elementwise."""
    dst *= 1.0 - tau
    dst += tau * src

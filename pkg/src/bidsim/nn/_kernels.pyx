# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled dense-layer kernels: BLAS matmuls plus fused elementwise loops.

Mirrors bidsim.nn._pyops function-for-function; the matrix products go
through the same BLAS numpy uses (via scipy's cython_blas bridge) and the
bias/normalization/activation/optimizer arithmetic runs in single fused
passes instead of chains of numpy temporaries.
"""

from libc.math cimport sqrt, tanh

from scipy.linalg.cython_blas cimport dgemm

ACT_LINEAR, ACT_RELU, ACT_TANH = 0, 1, 2
NORM_NONE, NORM_LAYER, NORM_BATCH = 0, 1, 2

DEF C_ACT_LINEAR = 0
DEF C_ACT_RELU = 1
DEF C_ACT_TANH = 2
DEF C_NORM_NONE = 0
DEF C_NORM_LAYER = 1
DEF C_NORM_BATCH = 2


cdef void _gemm_xw(double[:, ::1] x, double[:, ::1] w, double[:, ::1] out) noexcept nogil:
    # out (B,n) = x (B,k) @ w (k,n), row-major buffers.  Column-major BLAS
    # sees transposes, so compute out^T = w^T @ x^T by swapping operands.
    cdef int b = x.shape[0], k = x.shape[1], n = w.shape[1]
    cdef double one = 1.0, zero = 0.0
    dgemm("N", "N", &n, &b, &k, &one, &w[0, 0], &n, &x[0, 0], &k, &zero, &out[0, 0], &n)


cdef void _gemm_xt_g(double[:, ::1] x, double[:, ::1] g, double[:, ::1] out) noexcept nogil:
    # out (k,n) = x^T (k,B) @ g (B,n): weight gradients.
    cdef int b = x.shape[0], k = x.shape[1], n = g.shape[1]
    cdef double one = 1.0, zero = 0.0
    dgemm("N", "T", &n, &k, &b, &one, &g[0, 0], &n, &x[0, 0], &k, &zero, &out[0, 0], &n)


cdef void _gemm_g_wt(double[:, ::1] g, double[:, ::1] w, double[:, ::1] out) noexcept nogil:
    # out (B,k) = g (B,n) @ w^T (n,k): input gradients.
    cdef int b = g.shape[0], n = g.shape[1], k = w.shape[0]
    cdef double one = 1.0, zero = 0.0
    dgemm("T", "N", &k, &b, &n, &one, &w[0, 0], &n, &g[0, 0], &n, &zero, &out[0, 0], &k)


def layer_forward(double[:, ::1] x, double[:, ::1] w, double[::1] b,
                  int act, int norm, int train, double eps, double momentum,
                  double[::1] run_mean, double[::1] run_var,
                  double[:, ::1] zh, double[:, ::1] y, double[::1] inv_std):
    """y = act(normalize(x @ w + b)); see the numpy reference for details."""
    cdef Py_ssize_t rows = x.shape[0], cols = w.shape[1]
    cdef Py_ssize_t i, j
    cdef double m, var, d, inv, s, v
    with nogil:
        _gemm_xw(x, w, zh)
        for i in range(rows):
            for j in range(cols):
                zh[i, j] += b[j]
        if norm == C_NORM_LAYER:
            for i in range(rows):
                s = 0.0
                for j in range(cols):
                    s += zh[i, j]
                m = s / cols
                var = 0.0
                for j in range(cols):
                    d = zh[i, j] - m
                    var += d * d
                var /= cols
                inv = 1.0 / sqrt(var + eps)
                inv_std[i] = inv
                for j in range(cols):
                    zh[i, j] = (zh[i, j] - m) * inv
        elif norm == C_NORM_BATCH:
            if train:
                for j in range(cols):
                    s = 0.0
                    for i in range(rows):
                        s += zh[i, j]
                    m = s / rows
                    var = 0.0
                    for i in range(rows):
                        d = zh[i, j] - m
                        var += d * d
                    var /= rows
                    run_mean[j] = (1.0 - momentum) * run_mean[j] + momentum * m
                    run_var[j] = (1.0 - momentum) * run_var[j] + momentum * var
                    inv = 1.0 / sqrt(var + eps)
                    inv_std[j] = inv
                    for i in range(rows):
                        zh[i, j] = (zh[i, j] - m) * inv
            else:
                for j in range(cols):
                    inv = 1.0 / sqrt(run_var[j] + eps)
                    inv_std[j] = inv
                    m = run_mean[j]
                    for i in range(rows):
                        zh[i, j] = (zh[i, j] - m) * inv
        if act == C_ACT_RELU:
            for i in range(rows):
                for j in range(cols):
                    v = zh[i, j]
                    y[i, j] = v if v > 0.0 else 0.0
        elif act == C_ACT_TANH:
            for i in range(rows):
                for j in range(cols):
                    y[i, j] = tanh(zh[i, j])
        else:
            for i in range(rows):
                for j in range(cols):
                    y[i, j] = zh[i, j]


def layer_backward(double[:, :] dy, double[:, ::1] x, double[:, ::1] w,
                   double[:, ::1] zh, double[:, ::1] y, double[::1] inv_std,
                   int act, int norm, int train, int want_dw, int want_dx,
                   double[:, ::1] dw, double[::1] db, double[:, ::1] dx,
                   double[:, ::1] scratch):
    """Gradient step matching layer_forward; dy is left untouched."""
    cdef Py_ssize_t rows = dy.shape[0], cols = dy.shape[1]
    cdef Py_ssize_t i, j
    cdef double mg, mgz, sg, sgz, s, inv
    with nogil:
        if act == C_ACT_RELU:
            for i in range(rows):
                for j in range(cols):
                    scratch[i, j] = dy[i, j] if zh[i, j] > 0.0 else 0.0
        elif act == C_ACT_TANH:
            for i in range(rows):
                for j in range(cols):
                    scratch[i, j] = dy[i, j] * (1.0 - y[i, j] * y[i, j])
        else:
            for i in range(rows):
                for j in range(cols):
                    scratch[i, j] = dy[i, j]
        if norm == C_NORM_LAYER:
            for i in range(rows):
                sg = 0.0
                sgz = 0.0
                for j in range(cols):
                    sg += scratch[i, j]
                    sgz += scratch[i, j] * zh[i, j]
                mg = sg / cols
                mgz = sgz / cols
                inv = inv_std[i]
                for j in range(cols):
                    scratch[i, j] = (scratch[i, j] - mg - zh[i, j] * mgz) * inv
        elif norm == C_NORM_BATCH:
            if train:
                for j in range(cols):
                    sg = 0.0
                    sgz = 0.0
                    for i in range(rows):
                        sg += scratch[i, j]
                        sgz += scratch[i, j] * zh[i, j]
                    mg = sg / rows
                    mgz = sgz / rows
                    inv = inv_std[j]
                    for i in range(rows):
                        scratch[i, j] = (scratch[i, j] - mg - zh[i, j] * mgz) * inv
            else:
                for j in range(cols):
                    inv = inv_std[j]
                    for i in range(rows):
                        scratch[i, j] *= inv
        if want_dw:
            _gemm_xt_g(x, scratch, dw)
            for j in range(cols):
                s = 0.0
                for i in range(rows):
                    s += scratch[i, j]
                db[j] = s
        if want_dx:
            _gemm_g_wt(scratch, w, dx)


def adam_update(double[::1] p, double[::1] g, double[::1] m, double[::1] v,
                long t, double lr, double b1, double b2, double eps):
    """One fused bias-corrected Adam step over flat parameter views."""
    cdef Py_ssize_t n = p.shape[0]
    cdef Py_ssize_t k
    cdef double c1 = 1.0 - b1 ** t
    cdef double c2 = 1.0 - b2 ** t
    cdef double mk, vk
    with nogil:
        for k in range(n):
            mk = b1 * m[k] + (1.0 - b1) * g[k]
            vk = b2 * v[k] + (1.0 - b2) * g[k] * g[k]
            m[k] = mk
            v[k] = vk
            p[k] -= lr * (mk / c1) / (sqrt(vk / c2) + eps)


def soft_update_arrays(double[::1] dst, double[::1] src, double tau):
    """dst <- tau*src + (1-tau)*dst, fused."""
    cdef Py_ssize_t n = dst.shape[0]
    cdef Py_ssize_t k
    cdef double keep = 1.0 - tau
    with nogil:
        for k in range(n):
            dst[k] = keep * dst[k] + tau * src[k]

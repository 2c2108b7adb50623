# cython: boundscheck=False, wraparound=False, cdivision=True
"""Cython versions of the recurrent and conv/pool hot kernels.

Same contracts as np_kernels.py.  The sequential LSTM recurrence keeps
BLAS for the hidden-to-hidden products (dgemv) and fuses the gate math;
the conv/pool kernels are straight C loops.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, tanh as ctanh
from scipy.linalg.cython_blas cimport dgemv

cnp.import_array()


cdef inline double _sig(double x) nogil:
    cdef double e
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


def sigmoid(x):
    arr = np.asarray(x, dtype=np.float64)
    shape = arr.shape
    flat = np.ascontiguousarray(arr.reshape(-1))
    out = np.empty(flat.shape[0])
    cdef double[::1] xf = flat
    cdef double[::1] of = out
    cdef Py_ssize_t i, n = xf.shape[0]
    for i in range(n):
        of[i] = _sig(xf[i])
    return out.reshape(shape)


cdef void _gemv_rowmajor(double[:, ::1] a, double[::1] x, double[::1] y,
                         bint transpose, double beta) nogil:
    # y = op(a) @ x + beta * y for a C-contiguous (rows, cols) matrix.
    # Fortran BLAS sees the buffer as the (cols, rows) transpose, so the
    # trans flag is inverted.
    cdef int m = <int>a.shape[1]   # fortran rows
    cdef int n = <int>a.shape[0]   # fortran cols
    cdef int lda = m, inc = 1
    cdef double one = 1.0
    cdef char* op_t = b'T'
    cdef char* op_n = b'N'
    if transpose:
        dgemv(op_n, &m, &n, &one, &a[0, 0], &lda, &x[0], &inc, &beta, &y[0], &inc)
    else:
        dgemv(op_t, &m, &n, &one, &a[0, 0], &lda, &x[0], &inc, &beta, &y[0], &inc)


def lstm_forward(ax, u_mat, b, mask):
    ax = np.ascontiguousarray(ax, dtype=np.float64)
    u_mat = np.ascontiguousarray(u_mat, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    mask = np.ascontiguousarray(mask, dtype=np.uint8)

    cdef Py_ssize_t steps = ax.shape[0]
    cdef Py_ssize_t width = ax.shape[1]
    cdef Py_ssize_t hidden = width // 4

    hs = np.empty((steps, hidden))
    cs = np.empty((steps, hidden))
    gates = np.zeros((steps, width))
    a_buf = np.empty(width)
    h_buf = np.zeros(hidden)

    cdef double[:, ::1] axv = ax, hv = hs, cv = cs, gv = gates
    cdef double[:, ::1] uv = u_mat
    cdef double[::1] bv = b, av = a_buf, hbuf = h_buf
    cdef unsigned char[::1] mv = mask
    cdef Py_ssize_t t, j
    cdef double i_g, f_g, g_g, o_g, c_new, c_prev, h_prev

    for t in range(steps):
        if mv[t]:
            for j in range(width):
                av[j] = axv[t, j] + bv[j]
            _gemv_rowmajor(uv, hbuf, av, False, 1.0)
            for j in range(hidden):
                i_g = _sig(av[j])
                f_g = _sig(av[hidden + j])
                g_g = ctanh(av[2 * hidden + j])
                o_g = _sig(av[3 * hidden + j])
                c_prev = cv[t - 1, j] if t > 0 else 0.0
                c_new = f_g * c_prev + i_g * g_g
                cv[t, j] = c_new
                hv[t, j] = o_g * ctanh(c_new)
                hbuf[j] = hv[t, j]
                gv[t, j] = i_g
                gv[t, hidden + j] = f_g
                gv[t, 2 * hidden + j] = g_g
                gv[t, 3 * hidden + j] = o_g
        else:
            for j in range(hidden):
                h_prev = hv[t - 1, j] if t > 0 else 0.0
                c_prev = cv[t - 1, j] if t > 0 else 0.0
                hv[t, j] = h_prev
                cv[t, j] = c_prev
                hbuf[j] = h_prev
    return hs, cs, gates


def lstm_backward(u_mat, mask, hs, cs, gates, gh):
    u_mat = np.ascontiguousarray(u_mat, dtype=np.float64)
    mask = np.ascontiguousarray(mask, dtype=np.uint8)
    hs = np.ascontiguousarray(hs, dtype=np.float64)
    cs = np.ascontiguousarray(cs, dtype=np.float64)
    gates = np.ascontiguousarray(gates, dtype=np.float64)
    gh = np.ascontiguousarray(gh, dtype=np.float64)

    cdef Py_ssize_t steps = hs.shape[0]
    cdef Py_ssize_t hidden = hs.shape[1]
    cdef Py_ssize_t width = 4 * hidden

    da = np.zeros((steps, width))
    dh_next = np.zeros(hidden)
    dc_next = np.zeros(hidden)

    cdef double[:, ::1] dav = da, hv = hs, cv = cs, gv = gates, ghv = gh
    cdef double[:, ::1] uv = u_mat
    cdef double[::1] dhv = dh_next, dcv = dc_next
    cdef unsigned char[::1] mv = mask
    cdef Py_ssize_t t, j
    cdef double dh, dc, do_g, tc, i_g, f_g, g_g, o_g, c_prev

    for t in range(steps - 1, -1, -1):
        if not mv[t]:
            for j in range(hidden):
                dhv[j] = ghv[t, j] + dhv[j]
            continue
        for j in range(hidden):
            dh = ghv[t, j] + dhv[j]
            i_g = gv[t, j]
            f_g = gv[t, hidden + j]
            g_g = gv[t, 2 * hidden + j]
            o_g = gv[t, 3 * hidden + j]
            c_prev = cv[t - 1, j] if t > 0 else 0.0
            tc = ctanh(cv[t, j])
            do_g = dh * tc
            dc = dh * o_g * (1.0 - tc * tc) + dcv[j]
            dav[t, j] = dc * g_g * i_g * (1.0 - i_g)
            dav[t, hidden + j] = dc * c_prev * f_g * (1.0 - f_g)
            dav[t, 2 * hidden + j] = dc * i_g * (1.0 - g_g * g_g)
            dav[t, 3 * hidden + j] = do_g * o_g * (1.0 - o_g)
            dcv[j] = dc * f_g
        _gemv_rowmajor(uv, dav[t], dhv, True, 0.0)
    return da


def conv_pool_forward(x, k):
    x = np.ascontiguousarray(x, dtype=np.float64)
    k = np.ascontiguousarray(k, dtype=np.float64)
    cdef Py_ssize_t channels = x.shape[0]
    cdef Py_ssize_t height = x.shape[1]
    cdef Py_ssize_t width = x.shape[2]
    cdef Py_ssize_t filters = k.shape[0]
    if k.shape[1] != channels:
        raise ValueError(
            f"conv2d_maxpool: input has {channels} channels, kernels expect {k.shape[1]}")

    cdef Py_ssize_t oh = (height + 1) // 2
    cdef Py_ssize_t ow = (width + 1) // 2
    conv = np.zeros((filters, height, width))
    out = np.empty((filters, oh, ow))
    argmax = np.empty((filters, oh, ow), dtype=np.int64)

    cdef double[:, :, ::1] xv = x, convv = conv, outv = out
    cdef double[:, :, :, ::1] kv = k
    cdef long long[:, :, ::1] amv = argmax
    cdef Py_ssize_t f, c, h, w, i, j, ph, pw, r, s, best_idx
    cdef Py_ssize_t ih, iw
    cdef double acc, best, val

    for f in range(filters):
        for h in range(height):
            for w in range(width):
                acc = 0.0
                for c in range(channels):
                    for i in range(3):
                        ih = h + i - 1
                        if ih < 0 or ih >= height:
                            continue
                        for j in range(3):
                            iw = w + j - 1
                            if iw < 0 or iw >= width:
                                continue
                            acc += xv[c, ih, iw] * kv[f, c, i, j]
                convv[f, h, w] = acc
        for ph in range(oh):
            for pw in range(ow):
                best = -1e308
                best_idx = -1
                for r in range(2):
                    ih = ph * 2 + r
                    if ih >= height:
                        continue
                    for s in range(2):
                        iw = pw * 2 + s
                        if iw >= width:
                            continue
                        val = convv[f, ih, iw]
                        if val > best:
                            best = val
                            best_idx = ih * width + iw
                outv[f, ph, pw] = best
                amv[f, ph, pw] = best_idx
    return out, argmax


def conv_pool_backward(x, k, argmax, gout):
    x = np.ascontiguousarray(x, dtype=np.float64)
    k = np.ascontiguousarray(k, dtype=np.float64)
    argmax = np.ascontiguousarray(argmax, dtype=np.int64)
    gout = np.ascontiguousarray(gout, dtype=np.float64)

    cdef Py_ssize_t channels = x.shape[0]
    cdef Py_ssize_t height = x.shape[1]
    cdef Py_ssize_t width = x.shape[2]
    cdef Py_ssize_t filters = k.shape[0]
    cdef Py_ssize_t oh = gout.shape[1]
    cdef Py_ssize_t ow = gout.shape[2]

    gconv = np.zeros((filters, height, width))
    gx = np.zeros((channels, height, width))
    gk = np.zeros((filters, channels, 3, 3))

    cdef double[:, :, ::1] xv = x, gconvv = gconv, gxv = gx, goutv = gout
    cdef double[:, :, :, ::1] kv = k, gkv = gk
    cdef long long[:, :, ::1] amv = argmax
    cdef Py_ssize_t f, c, h, w, i, j, ph, pw, ih, iw
    cdef long long flat
    cdef double g

    for f in range(filters):
        for ph in range(oh):
            for pw in range(ow):
                flat = amv[f, ph, pw]
                gconvv[f, flat // width, flat % width] += goutv[f, ph, pw]

    for f in range(filters):
        for h in range(height):
            for w in range(width):
                g = gconvv[f, h, w]
                if g == 0.0:
                    continue
                for c in range(channels):
                    for i in range(3):
                        ih = h + i - 1
                        if ih < 0 or ih >= height:
                            continue
                        for j in range(3):
                            iw = w + j - 1
                            if iw < 0 or iw >= width:
                                continue
                            gkv[f, c, i, j] += g * xv[c, ih, iw]
                            gxv[c, ih, iw] += g * kv[f, c, i, j]
    return gx, gk

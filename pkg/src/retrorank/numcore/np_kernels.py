"""Pure-numpy reference kernels for the recurrent and conv/pool hot loops.

The Cython module `_ckernels` implements the same four functions; whichever
is active is chosen in `kernels.py`.  Contracts shared by both backends:

lstm_forward(ax, u_mat, b, mask) -> (hs, cs, gates)
    ax    (T, 4H)  precomputed input products X @ W.T
    u_mat (4H, H)  hidden-to-hidden weights, gate order [i, f, g, o]
    b     (4H,)    bias
    mask  (T,)     uint8; 0 marks padding steps, which copy state through
    hs/cs (T, H)   hidden and cell state after each step
    gates (T, 4H)  post-activation gates, zeros at masked steps

lstm_backward(u_mat, mask, hs, cs, gates, gh) -> da
    gh (T, H) incoming gradient for every step's hidden output; returns
    da (T, 4H), the gradient at the pre-activation gates.  Weight and
    input gradients are batched matmuls done by the caller.

conv_pool_forward(x, k) -> (out, argmax)
    3x3 convolution with zero padding 1, then 2x2/stride-2 max pooling
    (a trailing odd row/column pools over the remaining strip).  argmax
    stores, per pooled cell, the flat conv-grid index of its max, ties
    to the lowest index.

conv_pool_backward(x, k, argmax, gout) -> (gx, gk)
"""

from __future__ import annotations

import numpy as np


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function (never overflows)."""
    x = np.asarray(x)
    t = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + t), t / (1.0 + t))


def lstm_forward(ax, u_mat, b, mask):
    steps, width = ax.shape
    hidden = width // 4
    hs = np.empty((steps, hidden))
    cs = np.empty((steps, hidden))
    gates = np.zeros((steps, width))
    h = np.zeros(hidden)
    c = np.zeros(hidden)
    for t in range(steps):
        if mask[t]:
            a = ax[t] + u_mat @ h + b
            i = sigmoid(a[:hidden])
            f = sigmoid(a[hidden:2 * hidden])
            g = np.tanh(a[2 * hidden:3 * hidden])
            o = sigmoid(a[3 * hidden:])
            c = f * c + i * g
            h = o * np.tanh(c)
            gates[t, :hidden] = i
            gates[t, hidden:2 * hidden] = f
            gates[t, 2 * hidden:3 * hidden] = g
            gates[t, 3 * hidden:] = o
        hs[t] = h
        cs[t] = c
    return hs, cs, gates


def lstm_backward(u_mat, mask, hs, cs, gates, gh):
    steps, hidden = hs.shape
    da = np.zeros((steps, 4 * hidden))
    dh_next = np.zeros(hidden)
    dc_next = np.zeros(hidden)
    for t in range(steps - 1, -1, -1):
        dh = gh[t] + dh_next
        if not mask[t]:
            dh_next = dh
            continue
        i = gates[t, :hidden]
        f = gates[t, hidden:2 * hidden]
        g = gates[t, 2 * hidden:3 * hidden]
        o = gates[t, 3 * hidden:]
        c_prev = cs[t - 1] if t > 0 else np.zeros(hidden)
        tc = np.tanh(cs[t])
        do = dh * tc
        dc = dh * o * (1.0 - tc * tc) + dc_next
        da[t, :hidden] = dc * g * i * (1.0 - i)
        da[t, hidden:2 * hidden] = dc * c_prev * f * (1.0 - f)
        da[t, 2 * hidden:3 * hidden] = dc * i * (1.0 - g * g)
        da[t, 3 * hidden:] = do * o * (1.0 - o)
        dc_next = dc * f
        dh_next = u_mat.T @ da[t]
    return da


def _windows(padded):
    # (C, H, W, 3, 3) sliding views over the zero-padded input
    return np.lib.stride_tricks.sliding_window_view(padded, (3, 3), axis=(1, 2))


def conv_pool_forward(x, k):
    channels, height, width = x.shape
    filters = k.shape[0]
    if k.shape[1] != channels:
        raise ValueError(
            f"conv2d_maxpool: input has {channels} channels, kernels expect {k.shape[1]}")
    padded = np.zeros((channels, height + 2, width + 2))
    padded[:, 1:-1, 1:-1] = x
    conv = np.einsum("chwij,fcij->fhw", _windows(padded), k, optimize=True)

    oh = (height + 1) // 2
    ow = (width + 1) // 2
    stuffed = np.full((filters, oh * 2, ow * 2), -np.inf)
    stuffed[:, :height, :width] = conv
    cells = stuffed.reshape(filters, oh, 2, ow, 2).transpose(0, 1, 3, 2, 4)
    cells = cells.reshape(filters, oh, ow, 4)
    local = cells.argmax(axis=3)
    rows = (np.arange(oh)[None, :, None] * 2 + local // 2)
    cols = (np.arange(ow)[None, None, :] * 2 + local % 2)
    argmax = (rows * width + cols).astype(np.int64)
    out = np.take_along_axis(
        conv.reshape(filters, -1), argmax.reshape(filters, -1), axis=1
    ).reshape(filters, oh, ow)
    return out, argmax


def conv_pool_backward(x, k, argmax, gout):
    channels, height, width = x.shape
    filters = k.shape[0]
    gconv = np.zeros((filters, height * width))
    np.put_along_axis(gconv, argmax.reshape(filters, -1), gout.reshape(filters, -1), axis=1)
    gconv = gconv.reshape(filters, height, width)

    padded = np.zeros((channels, height + 2, width + 2))
    padded[:, 1:-1, 1:-1] = x
    gk = np.einsum("fhw,chwij->fcij", gconv, _windows(padded), optimize=True)

    gx_padded = np.zeros_like(padded)
    for i in range(3):
        for j in range(3):
            gx_padded[:, i:i + height, j:j + width] += np.einsum(
                "fhw,fc->chw", gconv, k[:, :, i, j])
    return gx_padded[:, 1:-1, 1:-1], gk

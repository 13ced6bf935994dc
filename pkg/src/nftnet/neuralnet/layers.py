"""Layer kernels with hand-written forward and backward passes.

The public functions take ``(features, length)`` or ``(batch, features,
length)`` arrays. The ``*_seq_*`` variants work sequence-major,
``(length, batch, features)``, which lets every layer run as one matrix
product and the recurrence index contiguous ``(batch, features)`` slabs; the
model keeps this layout end to end.
All kernels are dtype-generic so the same code serves float32 training and
the float64 shadow mode.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

from ..errors import InvalidArgument

__all__ = [
    "LEAKY_SLOPE",
    "to_seq",
    "from_seq",
    "conv_seq_forward",
    "conv_seq_backward",
    "convt_seq_forward",
    "convt_seq_backward",
    "lstm_seq_forward",
    "lstm_seq_backward",
    "conv1d_forward",
    "conv1d_backward",
    "conv_transpose1d_forward",
    "conv_transpose1d_backward",
    "lstm_forward",
    "lstm_backward",
    "activation",
    "activation_backward",
]

LEAKY_SLOPE = 0.2


def _as_batch(x):
    x = np.asarray(x)
    if x.ndim == 2:
        return x[None], True
    if x.ndim != 3:
        raise InvalidArgument(f"expected (features, length) or (batch, features, length), got shape {x.shape}")
    return x, False


def to_seq(x):
    """``(B, F, L)`` or ``(F, L)`` -> contiguous ``(L, B, F)``."""
    xb, _ = _as_batch(x)
    return np.ascontiguousarray(xb.transpose(2, 0, 1))


def from_seq(x, single=False):
    """Inverse of :func:`to_seq`."""
    out = np.ascontiguousarray(x.transpose(1, 2, 0))
    return out[0] if single else out


def _public(seq_fn, x, *args, **kw):
    xb, single = _as_batch(x)
    y, cache = seq_fn(to_seq(xb), *args, **kw)
    return from_seq(y, single), (cache, single)


# ---------------------------------------------------------------- strided conv


def conv_seq_forward(x, weight, bias, circular: bool = True):
    """Sequence-major strided convolution, ``x`` of shape (L, B, F_in)."""
    g, f, k = weight.shape
    n, b_, fx = x.shape
    if k != 3 or fx != f:
        raise InvalidArgument(f"conv weight {weight.shape} does not match {fx} input features")
    if n % 2:
        raise InvalidArgument("conv input length must be even")
    even = x[0::2]
    odd = x[1::2]
    left = np.roll(odd, 1, axis=0)
    if not circular:
        left[0] = 0
    # taps[j, b, k*F + f] = x[2j + k - 1, b, f]
    taps = np.concatenate([left, even, odd], axis=2).reshape(-1, 3 * f)
    wmat = weight.transpose(2, 1, 0).reshape(3 * f, g)
    y = taps @ wmat
    y += bias
    return y.reshape(n // 2, b_, g), (taps, weight, circular)


def conv_seq_backward(dy, cache):
    taps, weight, circular = cache
    g, f, _ = weight.shape
    half, b_, _ = dy.shape
    dy2 = dy.reshape(-1, g)
    wmat = weight.transpose(2, 1, 0).reshape(3 * f, g)
    dw = (taps.T @ dy2).reshape(3, f, g).transpose(2, 1, 0)
    db = dy2.sum(axis=0)
    dt = (dy2 @ wmat.T).reshape(half, b_, 3, f)
    dx = np.empty((2 * half, b_, f), dtype=dy.dtype)
    dx[0::2] = dt[:, :, 1]
    nxt = np.roll(dt[:, :, 0], -1, axis=0)
    if not circular:
        nxt[-1] = 0
    dx[1::2] = dt[:, :, 2] + nxt
    return dx, np.ascontiguousarray(dw), db


def conv1d_forward(x, weight, bias, circular: bool = True):
    """Stride-2, kernel-3 convolution with one sample of padding per side.

    Parameters
    ----------
    x : ndarray, shape (F_in, L) or (B, F_in, L)
    weight : ndarray, shape (F_out, F_in, 3)
    bias : ndarray, shape (F_out,)
    circular : bool
        Wrap-around padding (default) or zero padding.

    Returns
    -------
    y : ndarray, shape (F_out, L/2) or (B, F_out, L/2)
        ``y[g, j] = bias[g] + sum_{f,k} weight[g, f, k] * x_pad[f, 2j + k]``.
    cache : tuple
        Saved tensors for :func:`conv1d_backward`.
    """
    return _public(conv_seq_forward, x, weight, bias, circular)


def conv1d_backward(dy, cache):
    """Gradients ``(dx, dweight, dbias)`` of :func:`conv1d_forward`."""
    inner, single = cache
    dx, dw, db = conv_seq_backward(to_seq(dy), inner)
    return from_seq(dx, single), dw, db


# ---------------------------------------------------------------- transposed conv


def convt_seq_forward(x, weight, bias):
    """Sequence-major transposed convolution, ``x`` of shape (L, B, F_in)."""
    f_in, f_out, k = weight.shape
    n, b_, fx = x.shape
    if k != 3 or fx != f_in:
        raise InvalidArgument(f"transposed conv weight {weight.shape} does not match {fx} input features")
    wcat = weight.transpose(0, 2, 1).reshape(f_in, 3 * f_out)
    p = (x.reshape(-1, f_in) @ wcat).reshape(n, b_, 3, f_out)
    y = np.empty((2 * n, b_, f_out), dtype=p.dtype)
    y[0::2] = p[:, :, 1]
    y[1::2] = p[:, :, 2]
    y[1:-1:2] += p[1:, :, 0]
    y += bias
    return y, (x, weight)


def convt_seq_backward(dy, cache):
    x, weight = cache
    f_in, f_out, _ = weight.shape
    n, b_, _ = x.shape
    dp = np.empty((n, b_, 3, f_out), dtype=dy.dtype)
    dp[:, :, 1] = dy[0::2]
    dp[:, :, 2] = dy[1::2]
    dp[0, :, 0] = 0
    dp[1:, :, 0] = dy[1:-1:2]
    dp = dp.reshape(-1, 3 * f_out)
    wcat = weight.transpose(0, 2, 1).reshape(f_in, 3 * f_out)
    dw = (x.reshape(-1, f_in).T @ dp).reshape(f_in, 3, f_out).transpose(0, 2, 1)
    dx = (dp @ wcat.T).reshape(n, b_, f_in)
    db = dy.reshape(-1, f_out).sum(axis=0)
    return dx, np.ascontiguousarray(dw), db


def conv_transpose1d_forward(x, weight, bias):
    """Stride-2, kernel-3 transposed convolution, padding 1, output padding 1.

    Input ``j`` feeds outputs ``2j + k - 1`` for taps ``k = 0, 1, 2``; the
    output index ``-1`` is cropped, so the length exactly doubles.

    Parameters
    ----------
    x : ndarray, shape (F_in, L) or (B, F_in, L)
    weight : ndarray, shape (F_in, F_out, 3)
    bias : ndarray, shape (F_out,)
    """
    return _public(convt_seq_forward, x, weight, bias)


def conv_transpose1d_backward(dy, cache):
    inner, single = cache
    dx, dw, db = convt_seq_backward(to_seq(dy), inner)
    return from_seq(dx, single), dw, db


# ---------------------------------------------------------------- LSTM


def _lstm_fwd_loop(xp, whh_t):
    # sigmoid(z) = (1 + tanh(z / 2)) / 2, so one vectorised tanh serves all four
    # gates once the i, f, o pre-activations are halved (exact in binary floats)
    n, b_, g4 = xp.shape
    f = g4 // 4
    dt = xp.dtype
    half = np.full(g4, 0.5, dtype=dt)
    half[2 * f:3 * f] = 1
    shift = np.full(g4, 0.5, dtype=dt)
    shift[2 * f:3 * f] = 0
    xp = xp * half
    whh_s = whh_t * half
    hs = np.zeros((n + 1, b_, f), dtype=dt)
    cs = np.zeros((n + 1, b_, f), dtype=dt)
    gates = np.empty((n, b_, g4), dtype=dt)
    tc = np.empty((n, b_, f), dtype=dt)
    z = np.empty((b_, g4), dtype=dt)
    tmp = np.empty((b_, f), dtype=dt)
    for t in range(n):
        np.dot(hs[t], whh_s, out=z)
        z += xp[t]
        gt = gates[t]
        np.tanh(z, out=gt)
        gt *= half
        gt += shift
        np.multiply(gt[:, f:2 * f], cs[t], out=cs[t + 1])
        np.multiply(gt[:, :f], gt[:, 2 * f:3 * f], out=tmp)
        cs[t + 1] += tmp
        np.tanh(cs[t + 1], out=tc[t])
        np.multiply(gt[:, 3 * f:], tc[t], out=hs[t + 1])
    return hs, cs, gates, tc


@nb.njit(cache=True, fastmath=True)
def _lstm_bwd_kernel(dh_out, gates, cs, tc, whh):
    n, b_, f = dh_out.shape
    dz = np.empty((n, b_, 4 * f), dtype=dh_out.dtype)
    dh_next = np.zeros((b_, f), dtype=dh_out.dtype)
    dc_next = np.zeros((b_, f), dtype=dh_out.dtype)
    for t in range(n - 1, -1, -1):
        for b in range(b_):
            for k in range(f):
                ig = gates[t, b, k]
                fg = gates[t, b, f + k]
                gg = gates[t, b, 2 * f + k]
                og = gates[t, b, 3 * f + k]
                th = tc[t, b, k]
                dh = dh_out[t, b, k] + dh_next[b, k]
                dc = dc_next[b, k] + dh * og * (1 - th * th)
                dc_next[b, k] = dc * fg
                dz[t, b, k] = dc * gg * ig * (1 - ig)
                dz[t, b, f + k] = dc * cs[t, b, k] * fg * (1 - fg)
                dz[t, b, 2 * f + k] = dc * ig * (1 - gg * gg)
                dz[t, b, 3 * f + k] = dh * th * og * (1 - og)
        dh_next = np.dot(dz[t], whh)
    return dz


def lstm_seq_forward(x, w_ih, w_hh, b_ih, b_hh):
    """Sequence-major LSTM, ``x`` of shape (L, B, F)."""
    n, b_, f = x.shape
    if w_ih.shape != (4 * f, f) or w_hh.shape != (4 * f, f):
        raise InvalidArgument(f"LSTM weights {w_ih.shape}, {w_hh.shape} do not match {f} features")
    x = np.ascontiguousarray(x)
    xp = (x.reshape(n * b_, f) @ w_ih.T).reshape(n, b_, 4 * f)
    xp += b_ih + b_hh
    hs, cs, gates, tc = _lstm_fwd_loop(xp, np.ascontiguousarray(w_hh.T))
    return hs[1:], (x, hs, cs, gates, tc, w_ih, w_hh)


def lstm_seq_backward(dh, cache):
    x, hs, cs, gates, tc, w_ih, w_hh = cache
    n, b_, f = x.shape
    dz = _lstm_bwd_kernel(np.ascontiguousarray(dh), gates, cs, tc, np.ascontiguousarray(w_hh))
    dz2 = dz.reshape(n * b_, 4 * f)
    dw_ih = dz2.T @ x.reshape(n * b_, f)
    dw_hh = dz2.T @ hs[:-1].reshape(n * b_, f)
    db = dz2.sum(axis=0)
    dx = (dz2 @ w_ih).reshape(n, b_, f)
    return dx, dw_ih, dw_hh, db, db.copy()


def lstm_forward(x, w_ih, w_hh, b_ih, b_hh):
    """Unidirectional LSTM along the length axis, zero initial state.

    Gates are ordered (input, forget, cell, output) in the rows of the
    ``(4F, F)`` weight matrices; both bias vectors are added.

    Parameters
    ----------
    x : ndarray, shape (F, L) or (B, F, L)

    Returns
    -------
    h : ndarray, same shape as ``x``
    cache : tuple
    """
    return _public(lstm_seq_forward, x, w_ih, w_hh, b_ih, b_hh)


def lstm_backward(dh, cache):
    """Gradients ``(dx, dw_ih, dw_hh, db_ih, db_hh)``."""
    inner, single = cache
    dx, *grads = lstm_seq_backward(to_seq(dh), inner)
    return (from_seq(dx, single), *grads)


# ---------------------------------------------------------------- activations


def activation(x, kind: str):
    """Elementwise ``"leaky_relu"`` (slope 0.2) or ``"tanh"``."""
    if kind == "leaky_relu":
        return np.where(x >= 0, x, x * x.dtype.type(LEAKY_SLOPE))
    if kind == "tanh":
        return np.tanh(x)
    raise InvalidArgument(f"unknown activation {kind!r}")


def activation_backward(dy, x, y, kind: str):
    """Gradient through :func:`activation` given its input ``x`` and output ``y``."""
    if kind == "leaky_relu":
        return np.where(x >= 0, dy, dy * dy.dtype.type(LEAKY_SLOPE))
    if kind == "tanh":
        return dy * (1 - y * y)
    raise InvalidArgument(f"unknown activation {kind!r}")

"""Slow, independent reference implementations used only by the tests."""

import numpy as np


def direct_dft(x):
    """O(n^2) DFT by explicit summation."""
    x = np.asarray(x, dtype=complex)
    n = x.size
    j = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(j, j) / n) @ x


def direct_linear_surrogate(q, t, dt, lam):
    """``-dt * sum_u conj(q_u) exp(-2 i lam t_u)`` by explicit summation."""
    return -dt * np.exp(-2j * np.outer(lam, t)) @ np.conj(q)


def rk4_scattering(qfun, t0, t1, lam, steps):
    """Integrate the Zakharov-Shabat system with fixed-step RK4.

    Works in the interaction picture ``v = diag(e^{i lam t}, e^{-i lam t}) psi``
    so that ``v(t0) = (1, 0)`` and ``(a, b) = v(t1)``.
    """
    lam = np.asarray(lam, dtype=float)
    h = (t1 - t0) / steps
    v1 = np.ones(lam.shape, dtype=complex)
    v2 = np.zeros(lam.shape, dtype=complex)

    def f(t, x1, x2):
        q = qfun(t)
        e = np.exp(2j * lam * t)
        return q * e * x2, -np.conj(q) * np.conj(e) * x1

    t = t0
    for _ in range(steps):
        k1 = f(t, v1, v2)
        k2 = f(t + h / 2, v1 + h / 2 * k1[0], v2 + h / 2 * k1[1])
        k3 = f(t + h / 2, v1 + h / 2 * k2[0], v2 + h / 2 * k2[1])
        k4 = f(t + h, v1 + h * k3[0], v2 + h * k3[1])
        v1 = v1 + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        v2 = v2 + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        t = t0 + (_ + 1) * h
    return v1, v2


def conv_loop(x, w, b, circular=True):
    """Stride-2 kernel-3 convolution by nested loops, ``x`` of shape (F, L)."""
    f_in, n = x.shape
    g_out = w.shape[0]
    pad = np.zeros((f_in, n + 2))
    pad[:, 1:-1] = x
    if circular:
        pad[:, 0] = x[:, -1]
        pad[:, -1] = x[:, 0]
    y = np.zeros((g_out, n // 2))
    for g in range(g_out):
        for j in range(n // 2):
            acc = b[g]
            for f in range(f_in):
                for k in range(3):
                    acc += w[g, f, k] * pad[f, 2 * j + k]
            y[g, j] = acc
    return y


def conv_transpose_loop(x, w, b):
    """Transposed convolution (stride 2, kernel 3, padding 1, output padding 1)."""
    f_in, n = x.shape
    f_out = w.shape[1]
    full = np.zeros((f_out, 2 * n + 2))
    for f in range(f_in):
        for i in range(n):
            for k in range(3):
                full[:, 2 * i + k] += x[f, i] * w[f, :, k]
    # drop one sample of padding on the left; output padding extends the right
    return full[:, 1:2 * n + 1] + b[:, None]


def _sig(z):
    return 1.0 / (1.0 + np.exp(-z))


def lstm_loop(x, w_ih, w_hh, b_ih, b_hh):
    """Scalar-clear LSTM over the columns of ``x`` (F, L)."""
    f, n = x.shape
    h = np.zeros(f)
    c = np.zeros(f)
    out = np.zeros((f, n))
    for t in range(n):
        z = w_ih @ x[:, t] + b_ih + w_hh @ h + b_hh
        i, fg, g, o = _sig(z[:f]), _sig(z[f:2 * f]), np.tanh(z[2 * f:3 * f]), _sig(z[3 * f:])
        c = fg * c + i * g
        h = o * np.tanh(c)
        out[:, t] = h
    return out


def central_difference(fun, x, eps):
    """Gradient of scalar ``fun`` at ``x`` by central differences."""
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        up = fun(x)
        flat[i] = old - eps
        dn = fun(x)
        flat[i] = old
        gf[i] = (up - dn) / (2 * eps)
    return g

"""Layer primitives with hand-written backward passes.

All functions accept an optional leading batch axis. Backward functions take
the forward inputs they need explicitly instead of hiding them in state.
"""

from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeMismatchError


def dense_forward(x, W, b):
    """``y = x @ W.T + b`` for x of shape (in,) or (B, in)."""
    if x.shape[-1] != W.shape[1] or b.shape != (W.shape[0],):
        raise ShapeMismatchError(
            f"dense: input {x.shape} incompatible with weight {W.shape} / bias {b.shape}"
        )
    return x @ W.T + b


def dense_backward(x, W, grad_y):
    """Returns ``(grad_x, grad_W, grad_b)``."""
    x2 = x.reshape(-1, W.shape[1])
    g2 = grad_y.reshape(-1, W.shape[0])
    return grad_y @ W, g2.T @ x2, g2.sum(axis=0)


def _as_batch(x):
    return (x[None], True) if x.ndim == 2 else (x, False)


def _windows(x, k):
    """(B, C, T) -> zero-padded im2col matrix of shape (B*T, C*k)."""
    B, C, T = x.shape
    pad = (k - 1) // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    win = sliding_window_view(xp, k, axis=2)  # (B, C, T, k)
    return win.transpose(0, 2, 1, 3).reshape(B * T, C * k)


def _check_conv(x, K, b):
    if K.ndim != 3 or K.shape[2] % 2 == 0:
        raise ShapeMismatchError(f"conv1d kernel must be (Cout, Cin, odd k), got {K.shape}")
    if x.shape[-2] != K.shape[1] or b.shape != (K.shape[0],):
        raise ShapeMismatchError(
            f"conv1d: input {x.shape} incompatible with kernel {K.shape} / bias {b.shape}"
        )


def conv1d_forward(x, K, b):
    """Stride-1 'same' cross-correlation: (Cin, T) -> (Cout, T)."""
    _check_conv(x, K, b)
    xb, single = _as_batch(x)
    B, _, T = xb.shape
    cout, _, k = K.shape
    y = _windows(xb, k) @ K.reshape(cout, -1).T + b
    y = y.reshape(B, T, cout).transpose(0, 2, 1)
    return np.ascontiguousarray(y[0] if single else y)


def conv1d_backward(x, K, grad_y):
    """Returns ``(grad_x, grad_K, grad_b)``."""
    xb, single = _as_batch(x)
    gb, _ = _as_batch(grad_y)
    B, cin, T = xb.shape
    cout, _, k = K.shape
    pad = (k - 1) // 2
    g2 = gb.transpose(0, 2, 1).reshape(B * T, cout)
    grad_K = (g2.T @ _windows(xb, k)).reshape(K.shape)
    grad_b = g2.sum(axis=0)
    gcols = (g2 @ K.reshape(cout, -1)).reshape(B, T, cin, k)
    gxp = np.zeros((B, cin, T + 2 * pad), dtype=gcols.dtype)
    for j in range(k):
        gxp[:, :, j:j + T] += gcols[:, :, :, j].transpose(0, 2, 1)
    gx = gxp[:, :, pad:pad + T]
    return np.ascontiguousarray(gx[0] if single else gx), grad_K, grad_b


@lru_cache(maxsize=64)
def interp_matrix(t_in, t_out, dtype="float64"):
    """Align-corners linear interpolation as a (t_out, t_in) matrix."""
    if t_out < 2 or t_in < 2:
        raise ValueError(f"interpolation needs lengths >= 2, got {t_in} -> {t_out}")
    if t_out < t_in:
        raise ValueError(f"upsampling only: {t_in} -> {t_out}")
    j = np.arange(t_out, dtype=np.int64)
    num = j * (t_in - 1)
    i0 = np.minimum(num // (t_out - 1), t_in - 2)
    w = (num - i0 * (t_out - 1)) / (t_out - 1)
    M = np.zeros((t_out, t_in))
    M[j, i0] = 1.0 - w
    M[j, i0 + 1] += w
    M = M.astype(dtype)
    M.flags.writeable = False
    return M


def interp_upsample(x, t_out):
    M = interp_matrix(x.shape[-1], t_out, x.dtype.name)
    return x @ M.T


def interp_backward(grad_y, t_in):
    M = interp_matrix(t_in, grad_y.shape[-1], grad_y.dtype.name)
    return grad_y @ M


def relu(x):
    return np.maximum(x, 0)


def relu_backward(x, grad_y):
    return grad_y * (x > 0)


def sigmoid(x):
    """Logistic function, kept strictly inside (0, 1) in the input's dtype."""
    ex = np.exp(-np.abs(x))
    y = np.where(x >= 0, 1.0 / (1.0 + ex), ex / (1.0 + ex)).astype(x.dtype, copy=False)
    top = np.nextafter(x.dtype.type(1), x.dtype.type(0))
    return np.clip(y, np.finfo(x.dtype).tiny, top)


def sigmoid_backward(y, grad_y):
    return grad_y * y * (1 - y)

"""Numba implementations of the hot kernels.

Same signatures and output layouts as ``cpu.py``. Parallel loops are
arranged so each output element is written by exactly one thread and
accumulated in a fixed order, which keeps results bit-reproducible
run to run regardless of thread count.
"""
import numpy as np
from numba import njit, prange

BACKEND_NAME = "numba"

_JIT = dict(parallel=True, fastmath=True, cache=True, nogil=True)


@njit(**_JIT)
def _im2col(x, kh, kw, stride, pt, pl, oh, ow, col):
    n, h, w, ci = x.shape
    for nn in prange(n):
        for ohh in range(oh):
            for oww in range(ow):
                r = (nn * oh + ohh) * ow + oww
                c = 0
                for i in range(kh):
                    ih = ohh * stride + i - pt
                    for j in range(kw):
                        iw = oww * stride + j - pl
                        if 0 <= ih < h and 0 <= iw < w:
                            for cc in range(ci):
                                col[r, c] = x[nn, ih, iw, cc]
                                c += 1
                        else:
                            for cc in range(ci):
                                col[r, c] = 0.0
                                c += 1


@njit(**_JIT)
def _col2im(dcol, n, h, w, ci, kh, kw, stride, pt, pl, oh, ow, dx):
    for nn in prange(n):
        for ohh in range(oh):
            for oww in range(ow):
                r = (nn * oh + ohh) * ow + oww
                c = 0
                for i in range(kh):
                    ih = ohh * stride + i - pt
                    for j in range(kw):
                        iw = oww * stride + j - pl
                        if 0 <= ih < h and 0 <= iw < w:
                            for cc in range(ci):
                                dx[nn, ih, iw, cc] += dcol[r, c]
                                c += 1
                        else:
                            c += ci


@njit(cache=True, nogil=True)
def _add_bias(y, bias):
    rows, co = y.shape
    for r in range(rows):
        for c in range(co):
            y[r, c] += bias[c]


def _col_buffer(x, kh, kw, stride, pads):
    pt, pb, pl, pr = pads
    n, h, w, ci = x.shape
    oh = (h + pt + pb - kh) // stride + 1
    ow = (w + pl + pr - kw) // stride + 1
    col = np.empty((n * oh * ow, kh * kw * ci), dtype=x.dtype)
    _im2col(x, kh, kw, stride, pt, pl, oh, ow, col)
    return col, oh, ow


def im2col(x, kh, kw, stride, pads):
    col, oh, ow = _col_buffer(x, kh, kw, stride, pads)
    return col, oh, ow


def conv2d_forward(x, k, bias, stride, pads):
    kh, kw, ci, co = k.shape
    n = x.shape[0]
    col, oh, ow = _col_buffer(x, kh, kw, stride, pads)
    y = col @ k.reshape(kh * kw * ci, co)
    _add_bias(y, bias)
    return y.reshape(n, oh, ow, co), col


def conv2d_backward(x, k, dy, stride, pads, need_dx, col=None):
    kh, kw, ci, co = k.shape
    n, oh, ow, _ = dy.shape
    dy2 = dy.reshape(n * oh * ow, co)
    if col is None:
        col, _, _ = _col_buffer(x, kh, kw, stride, pads)
    dk = (col.T @ dy2).reshape(kh, kw, ci, co)
    db = dy2.sum(axis=0, dtype=np.float64).astype(dy.dtype)
    dx = None
    if need_dx:
        pt, pb, pl, pr = pads
        dcol = dy2 @ k.reshape(kh * kw * ci, co).T
        dx = np.zeros_like(x)
        _col2im(dcol, n, x.shape[1], x.shape[2], ci, kh, kw, stride, pt, pl, oh, ow, dx)
    return dk, db, dx


@njit(**_JIT)
def _maxpool_fwd(x, window, stride, y, idx):
    n, h, w, c = x.shape
    oh, ow = y.shape[1], y.shape[2]
    for nn in prange(n):
        for ohh in range(oh):
            for oww in range(ow):
                for cc in range(c):
                    best = x[nn, ohh * stride, oww * stride, cc]
                    arg = np.uint8(0)
                    for i in range(window):
                        for j in range(window):
                            v = x[nn, ohh * stride + i, oww * stride + j, cc]
                            if v > best:
                                best = v
                                arg = np.uint8(i * window + j)
                    y[nn, ohh, oww, cc] = best
                    idx[nn, ohh, oww, cc] = arg


def maxpool_forward(x, window, stride):
    n, h, w, c = x.shape
    oh = (h - window) // stride + 1
    ow = (w - window) // stride + 1
    y = np.empty((n, oh, ow, c), dtype=x.dtype)
    idx = np.empty((n, oh, ow, c), dtype=np.uint8)
    _maxpool_fwd(x, window, stride, y, idx)
    return y, idx


@njit(**_JIT)
def _maxpool_bwd(dy, idx, window, stride, dx):
    n, oh, ow, c = dy.shape
    for nn in prange(n):
        for ohh in range(oh):
            for oww in range(ow):
                for cc in range(c):
                    a = idx[nn, ohh, oww, cc]
                    i = a // window
                    j = a % window
                    dx[nn, ohh * stride + i, oww * stride + j, cc] += dy[nn, ohh, oww, cc]


def maxpool_backward(dy, idx, h, w, window, stride):
    n, _, _, c = dy.shape
    dx = np.zeros((n, h, w, c), dtype=dy.dtype)
    _maxpool_bwd(dy, idx, window, stride, dx)
    return dx


@njit(**_JIT)
def _bn_sums(x, sums, sqs):
    n, h, w, c = x.shape
    for nn in prange(n):
        for hh in range(h):
            for ww in range(w):
                for cc in range(c):
                    v = np.float64(x[nn, hh, ww, cc])
                    sums[nn, cc] += v
                    sqs[nn, cc] += v * v


def bn_stats(x):
    n, h, w, c = x.shape
    sums = np.zeros((n, c), dtype=np.float64)
    sqs = np.zeros((n, c), dtype=np.float64)
    _bn_sums(x, sums, sqs)
    m = float(n * h * w)
    mean = sums.sum(axis=0) / m
    var = sqs.sum(axis=0) / m - mean * mean
    np.maximum(var, 0.0, out=var)
    return mean.astype(x.dtype), var.astype(x.dtype)


@njit(**_JIT)
def _affine_channels(x, a, b, out):
    n, h, w, c = x.shape
    for nn in prange(n):
        for hh in range(h):
            for ww in range(w):
                for cc in range(c):
                    out[nn, hh, ww, cc] = x[nn, hh, ww, cc] * a[cc] + b[cc]


def bn_apply(x, mean, inv_std, gamma, beta):
    a = (inv_std * gamma).astype(x.dtype)
    b = (beta - mean * inv_std * gamma).astype(x.dtype)
    out = np.empty_like(x)
    _affine_channels(x, a, b, out)
    return out


@njit(**_JIT)
def _bn_bwd_sums(dy, x, mean, inv_std, s1, s2):
    n, h, w, c = dy.shape
    for nn in prange(n):
        for hh in range(h):
            for ww in range(w):
                for cc in range(c):
                    d = np.float64(dy[nn, hh, ww, cc])
                    xh = np.float64((x[nn, hh, ww, cc] - mean[cc]) * inv_std[cc])
                    s1[nn, cc] += d
                    s2[nn, cc] += d * xh


@njit(**_JIT)
def _bn_bwd_apply(dy, x, mean, inv_std, gamma, s1, s2, m, dx):
    n, h, w, c = dy.shape
    for nn in prange(n):
        for hh in range(h):
            for ww in range(w):
                for cc in range(c):
                    xh = (x[nn, hh, ww, cc] - mean[cc]) * inv_std[cc]
                    dx[nn, hh, ww, cc] = (gamma[cc] * inv_std[cc] / m) * (
                        m * dy[nn, hh, ww, cc] - s1[cc] - xh * s2[cc]
                    )


def bn_backward(dy, x, mean, inv_std, gamma):
    n, h, w, c = dy.shape
    s1p = np.zeros((n, c), dtype=np.float64)
    s2p = np.zeros((n, c), dtype=np.float64)
    _bn_bwd_sums(dy, x, mean, inv_std, s1p, s2p)
    dbeta = s1p.sum(axis=0)
    dgamma = s2p.sum(axis=0)
    m = float(n * h * w)
    dx = np.empty_like(dy)
    _bn_bwd_apply(
        dy, x, mean, inv_std, gamma,
        dbeta.astype(dy.dtype), dgamma.astype(dy.dtype), dy.dtype.type(m), dx,
    )
    return dx, dgamma.astype(dy.dtype), dbeta.astype(dy.dtype)


@njit(**_JIT)
def _relu(x, out):
    flat = x.reshape(-1)
    o = out.reshape(-1)
    for i in prange(flat.size):
        v = flat[i]
        o[i] = v if v > 0 else 0.0


def relu_forward(x):
    out = np.empty_like(x)
    _relu(np.ascontiguousarray(x), out)
    return out


@njit(**_JIT)
def _relu_bwd(dy, y, out):
    d = dy.reshape(-1)
    yy = y.reshape(-1)
    o = out.reshape(-1)
    for i in prange(d.size):
        o[i] = d[i] if yy[i] > 0 else 0.0


def relu_backward(dy, y):
    out = np.empty_like(dy)
    _relu_bwd(np.ascontiguousarray(dy), np.ascontiguousarray(y), out)
    return out


@njit(**_JIT)
def _dropout_bits(x, bits, scale, out):
    for i in prange(x.size):
        keep = (bits[i >> 6] >> np.uint64(i & 63)) & np.uint64(1)
        out[i] = x[i] * scale if keep else 0.0


def dropout_apply_bits(x, bits, scale):
    out = np.empty_like(x)
    _dropout_bits(
        np.ascontiguousarray(x).reshape(-1), bits, x.dtype.type(scale), out.reshape(-1)
    )
    return out


@njit(**_JIT)
def _dropout_u32(x, draws, threshold, scale, out):
    for i in prange(x.size):
        out[i] = x[i] * scale if draws[i] >= threshold else 0.0


def dropout_apply_u32(x, draws, threshold, scale):
    out = np.empty_like(x)
    _dropout_u32(
        np.ascontiguousarray(x).reshape(-1),
        draws,
        np.uint32(threshold),
        x.dtype.type(scale),
        out.reshape(-1),
    )
    return out


@njit(**_JIT)
def _cwt_direct(f, scales, factors, omega0, out_re, out_im):
    n = f.shape[0]
    pi4 = np.pi ** -0.25
    for si in range(scales.shape[0]):
        a = scales[si]
        fac = factors[si]
        for b in prange(n):
            acc_re = 0.0
            acc_im = 0.0
            for t in range(n):
                u = (t - b) / a
                env = pi4 * np.exp(-0.5 * u * u) * f[t]
                acc_re += env * np.cos(omega0 * u)
                acc_im -= env * np.sin(omega0 * u)
            out_re[si, b] = fac * acc_re
            out_im[si, b] = fac * acc_im


def cwt_direct_rows(f, scales, factors, omega0, n_out):
    out_re = np.empty((scales.shape[0], n_out), dtype=np.float64)
    out_im = np.empty_like(out_re)
    _cwt_direct(f, scales, factors, float(omega0), out_re, out_im)
    return out_re + 1j * out_im

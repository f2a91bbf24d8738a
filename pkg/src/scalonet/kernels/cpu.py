"""Pure-numpy implementations of the hot kernels.

Every function here has a numba twin in ``jit.py`` with the same
signature and the same output layout; tests assert the two backends
agree. Convolutions are expressed as im2col plus one BLAS matmul so
the fallback stays usable for real training runs.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BACKEND_NAME = "numpy"


def _pad_input(x, pads):
    pt, pb, pl, pr = pads
    if pt == pb == pl == pr == 0:
        return x
    return np.pad(x, ((0, 0), (pt, pb), (pl, pr), (0, 0)))


def im2col(x, kh, kw, stride, pads):
    """Gather conv patches into a (N*OH*OW, KH*KW*Ci) matrix.

    Column order is (kh, kw, ci) with ci fastest, matching
    ``kernel.reshape(kh*kw*ci, co)`` for a (KH, KW, Ci, Co) kernel.
    """
    xp = _pad_input(x, pads)
    n, hp, wp, ci = xp.shape
    oh = (hp - kh) // stride + 1
    ow = (wp - kw) // stride + 1
    v = sliding_window_view(xp, (kh, kw), axis=(1, 2))  # N,OH',OW',Ci,KH,KW
    v = v[:, ::stride, ::stride]
    col = np.ascontiguousarray(v.transpose(0, 1, 2, 4, 5, 3))
    return col.reshape(n * oh * ow, kh * kw * ci), oh, ow


def conv2d_forward(x, k, bias, stride, pads):
    """Cross-correlation. Returns (y, col); col is reusable by backward."""
    kh, kw, ci, co = k.shape
    n = x.shape[0]
    col, oh, ow = im2col(x, kh, kw, stride, pads)
    y = col @ k.reshape(kh * kw * ci, co)
    y += bias
    return y.reshape(n, oh, ow, co), col


def conv2d_backward(x, k, dy, stride, pads, need_dx, col=None):
    kh, kw, ci, co = k.shape
    n, oh, ow, _ = dy.shape
    dy2 = dy.reshape(n * oh * ow, co)
    if col is None:
        col, _, _ = im2col(x, kh, kw, stride, pads)
    dk = (col.T @ dy2).reshape(kh, kw, ci, co)
    db = dy2.sum(axis=0, dtype=np.float64).astype(dy.dtype)
    dx = None
    if need_dx:
        pt, pb, pl, pr = pads
        hp = x.shape[1] + pt + pb
        wp = x.shape[2] + pl + pr
        dcol = (dy2 @ k.reshape(kh * kw * ci, co).T).reshape(n, oh, ow, kh, kw, ci)
        dxp = np.zeros((n, hp, wp, ci), dtype=dy.dtype)
        for i in range(kh):
            for j in range(kw):
                dxp[:, i : i + oh * stride : stride, j : j + ow * stride : stride] += dcol[
                    :, :, :, i, j
                ]
        dx = dxp[:, pt : hp - pb, pl : wp - pr]
        if dx.base is not None:
            dx = np.ascontiguousarray(dx)
    return dk, db, dx


def maxpool_forward(x, window, stride):
    """Returns (y, idx); idx holds the first-occurrence argmax per window
    encoded as i*window + j (row-major within the window)."""
    n, h, w, c = x.shape
    oh = (h - window) // stride + 1
    ow = (w - window) // stride + 1
    y = None
    idx = np.zeros((n, oh, ow, c), dtype=np.uint8)
    for i in range(window):
        for j in range(window):
            cand = x[:, i : i + oh * stride : stride, j : j + ow * stride : stride]
            if y is None:
                y = cand.copy()
            else:
                better = cand > y
                np.copyto(y, cand, where=better)
                idx[better] = i * window + j
    return y, idx


def maxpool_backward(dy, idx, h, w, window, stride):
    n, oh, ow, c = dy.shape
    dx = np.zeros((n, h, w, c), dtype=dy.dtype)
    for i in range(window):
        for j in range(window):
            sel = idx == i * window + j
            target = dx[:, i : i + oh * stride : stride, j : j + ow * stride : stride]
            target[sel] += dy[sel]
    return dx


def bn_stats(x):
    """Per-channel mean and biased variance over (N, H, W), float64 accumulate."""
    mean = x.mean(axis=(0, 1, 2), dtype=np.float64)
    var = np.square(x.astype(np.float64) - mean).mean(axis=(0, 1, 2))
    return mean.astype(x.dtype), var.astype(x.dtype)


def bn_apply(x, mean, inv_std, gamma, beta):
    a = (inv_std * gamma).astype(x.dtype)
    b = (beta - mean * inv_std * gamma).astype(x.dtype)
    return x * a + b


def bn_backward(dy, x, mean, inv_std, gamma):
    """Backward through train-mode batch normalization.

    xhat is recomputed from the cached layer input instead of stored.
    """
    m = float(dy.shape[0] * dy.shape[1] * dy.shape[2])
    xhat = (x - mean) * inv_std
    dbeta = dy.sum(axis=(0, 1, 2), dtype=np.float64)
    dgamma = (dy.astype(np.float64) * xhat).sum(axis=(0, 1, 2))
    s1 = dbeta.astype(dy.dtype)
    s2 = dgamma.astype(dy.dtype)
    dx = (gamma * inv_std / m) * (m * dy - s1 - xhat * s2)
    return dx.astype(dy.dtype), dgamma.astype(dy.dtype), dbeta.astype(dy.dtype)


def relu_forward(x):
    return np.maximum(x, 0)


def relu_backward(dy, y):
    return dy * (y > 0)


def dropout_apply_bits(x, bits, scale):
    """Keep unit i iff bit (i % 64) of word (i // 64) is set; scale survivors."""
    flat = x.reshape(-1)
    i = np.arange(flat.size, dtype=np.int64)
    keep = (bits[i >> 6] >> (i & 63).astype(np.uint64)) & np.uint64(1)
    out = flat * (keep.astype(x.dtype) * x.dtype.type(scale))
    return out.reshape(x.shape)


def dropout_apply_u32(x, draws, threshold, scale):
    """Keep unit i iff draws[i] >= threshold; scale survivors."""
    keep = draws.reshape(x.shape) >= np.uint32(threshold)
    return x * (keep.astype(x.dtype) * x.dtype.type(scale))


def cwt_direct_rows(f, scales, factors, omega0, n_out):
    """Full Riemann-sum CWT rows: out[s, b] = factors[s] * sum_t f[t] conj(psi((t-b)/a)).

    O(S * n^2); this is the reference quadrature path.
    """
    n = f.shape[0]
    t = np.arange(n, dtype=np.float64)
    out = np.empty((scales.shape[0], n_out), dtype=np.complex128)
    pi4 = np.pi ** -0.25
    block = max(1, int(2**22) // max(n, 1))
    for si in range(scales.shape[0]):
        a = scales[si]
        for b0 in range(0, n_out, block):
            b1 = min(b0 + block, n_out)
            u = (t[None, :] - t[b0:b1, None]) / a
            env = pi4 * np.exp(-0.5 * u * u)
            re = env * np.cos(omega0 * u)
            im = -env * np.sin(omega0 * u)
            out[si, b0:b1] = factors[si] * ((re @ f) + 1j * (im @ f))
    return out

"""Layer engine with exact backpropagation.

Tensors are plain numpy arrays, NHWC for feature maps and (N, F) for
dense activations. Training arithmetic is float32; every layer also
runs in float64, which the gradient-check tests use for tight
finite-difference tolerances.

Each layer caches what its backward pass needs during a train-mode
forward; ``backward`` consumes the cache and writes parameter
gradients into ``Param.grad``.
"""
from __future__ import annotations

import numpy as np

from scalonet import kernels
from scalonet.errors import DataError


class Param:
    """A named parameter array with its gradient and a frozen flag."""

    __slots__ = ("name", "value", "grad", "frozen")

    def __init__(self, name, value, frozen=False):
        self.name = name
        self.value = value
        self.grad = None
        self.frozen = frozen


class Layer:
    kind = "layer"

    def __init__(self, name):
        self.name = name
        self.input_grad = True  # model may clear this on the first layer

    def params(self):
        return []

    def state(self):
        """Non-trainable arrays that must persist in checkpoints."""
        return []

    def forward(self, x, train=False, rng=None):
        raise NotImplementedError

    def backward(self, dy):
        raise NotImplementedError

    def out_shape(self, shape):
        return shape


def _kaiming_uniform(rng, shape, fan_in, dtype):
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def _same_pads(size, kernel, stride):
    out = -(-size // stride)
    total = max(0, (out - 1) * stride + kernel - size)
    return total // 2, total - total // 2


class Conv2D(Layer):
    kind = "conv2d"

    def __init__(self, in_channels, filters, kernel=3, stride=1, padding="same",
                 rng=None, dtype=np.float32, frozen=False, name="conv"):
        super().__init__(name)
        if padding not in ("same", "valid"):
            raise DataError(f"unknown padding {padding!r}")
        self.in_channels = in_channels
        self.filters = filters
        self.kernel_size = kernel
        self.stride = stride
        self.padding = padding
        fan_in = kernel * kernel * in_channels
        kval = _kaiming_uniform(rng, (kernel, kernel, in_channels, filters), fan_in, dtype)
        self.kernel = Param(f"{name}/kernel", kval, frozen)
        self.bias = Param(f"{name}/bias", np.zeros(filters, dtype=dtype), frozen)
        self._cache = None

    def params(self):
        return [self.kernel, self.bias]

    def _pads(self, h, w):
        if self.padding == "valid":
            return (0, 0, 0, 0)
        pt, pb = _same_pads(h, self.kernel_size, self.stride)
        pl, pr = _same_pads(w, self.kernel_size, self.stride)
        return (pt, pb, pl, pr)

    def forward(self, x, train=False, rng=None):
        if x.shape[3] != self.in_channels:
            raise DataError(
                f"{self.name}: expected {self.in_channels} input channels, got {x.shape[3]}"
            )
        pads = self._pads(x.shape[1], x.shape[2])
        y, col = kernels.conv2d_forward(x, self.kernel.value, self.bias.value,
                                        self.stride, pads)
        if train:
            self._cache = (x, pads, col)
        return y

    def backward(self, dy):
        x, pads, col = self._cache
        self._cache = None
        dk, db, dx = kernels.conv2d_backward(
            x, self.kernel.value, dy, self.stride, pads, self.input_grad, col
        )
        self.kernel.grad = dk
        self.bias.grad = db
        return dx

    def out_shape(self, shape):
        h, w, _ = shape
        pt, pb, pl, pr = self._pads(h, w)
        oh = (h + pt + pb - self.kernel_size) // self.stride + 1
        ow = (w + pl + pr - self.kernel_size) // self.stride + 1
        return (oh, ow, self.filters)


class BatchNorm(Layer):
    kind = "batchnorm"

    def __init__(self, channels, momentum=0.9, eps=1e-5,
                 dtype=np.float32, frozen=False, name="bn"):
        super().__init__(name)
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.gamma = Param(f"{name}/gamma", np.ones(channels, dtype=dtype), frozen)
        self.beta = Param(f"{name}/beta", np.zeros(channels, dtype=dtype), frozen)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self._cache = None

    def params(self):
        return [self.gamma, self.beta]

    def state(self):
        return [(f"{self.name}/running_mean", self.running_mean),
                (f"{self.name}/running_var", self.running_var)]

    def set_state(self, name, value):
        if name.endswith("running_mean"):
            self.running_mean = value
        else:
            self.running_var = value

    def forward(self, x, train=False, rng=None):
        if train:
            if x.shape[0] < 2:
                raise DataError(f"{self.name}: batch of 1 in train mode")
            mean, var = kernels.bn_stats(x)
            inv_std = (1.0 / np.sqrt(var.astype(np.float64) + self.eps)).astype(x.dtype)
            m = x.dtype.type(self.momentum)
            self.running_mean = m * self.running_mean + (1 - m) * mean
            self.running_var = m * self.running_var + (1 - m) * var
            self._cache = (x, mean, inv_std)
            return kernels.bn_apply(x, mean, inv_std, self.gamma.value, self.beta.value)
        inv_std = (1.0 / np.sqrt(self.running_var.astype(np.float64) + self.eps)).astype(x.dtype)
        return kernels.bn_apply(x, self.running_mean, inv_std,
                                self.gamma.value, self.beta.value)

    def backward(self, dy):
        x, mean, inv_std = self._cache
        self._cache = None
        dx, dgamma, dbeta = kernels.bn_backward(dy, x, mean, inv_std, self.gamma.value)
        self.gamma.grad = dgamma
        self.beta.grad = dbeta
        return dx


class ReLU(Layer):
    kind = "relu"

    def __init__(self, name="relu"):
        super().__init__(name)
        self._y = None

    def forward(self, x, train=False, rng=None):
        y = kernels.relu_forward(x)
        if train:
            self._y = y
        return y

    def backward(self, dy):
        y = self._y
        self._y = None
        return kernels.relu_backward(dy, y)


class Dropout(Layer):
    """Inverted dropout: survivors are scaled by 1/(1-rate) at train time,
    inference is the identity."""

    kind = "dropout"

    def __init__(self, rate, name="dropout"):
        super().__init__(name)
        if not 0.0 <= rate < 1.0:
            raise DataError("dropout rate must satisfy 0 <= rate < 1")
        self.rate = rate
        self._mask = None

    def forward(self, x, train=False, rng=None):
        if not train or self.rate == 0.0:
            return x
        scale = 1.0 / (1.0 - self.rate)
        if self.rate == 0.5:
            n_words = (x.size + 63) // 64
            bits = rng.integers(0, 2**64 - 1, size=n_words, dtype=np.uint64, endpoint=True)
            self._mask = ("bits", bits, scale)
            return kernels.dropout_apply_bits(x, bits, scale)
        draws = rng.integers(0, 2**32 - 1, size=x.size, dtype=np.uint32, endpoint=True)
        threshold = int(round(self.rate * 2**32))
        self._mask = ("u32", draws, threshold, scale)
        return kernels.dropout_apply_u32(x, draws, threshold, scale)

    def backward(self, dy):
        mask = self._mask
        self._mask = None
        if mask is None:
            return dy
        if mask[0] == "bits":
            _, bits, scale = mask
            return kernels.dropout_apply_bits(dy, bits, scale)
        _, draws, threshold, scale = mask
        return kernels.dropout_apply_u32(dy, draws, threshold, scale)


class MaxPool2D(Layer):
    kind = "maxpool"

    def __init__(self, window=2, stride=None, name="pool"):
        super().__init__(name)
        self.window = window
        self.stride = stride if stride is not None else window
        self._cache = None

    def forward(self, x, train=False, rng=None):
        if x.shape[1] < self.window or x.shape[2] < self.window:
            raise DataError(f"{self.name}: spatial dims smaller than the pooling window")
        y, idx = kernels.maxpool_forward(x, self.window, self.stride)
        if train:
            self._cache = (idx, x.shape[1], x.shape[2])
        return y

    def backward(self, dy):
        idx, h, w = self._cache
        self._cache = None
        return kernels.maxpool_backward(dy, idx, h, w, self.window, self.stride)

    def out_shape(self, shape):
        h, w, c = shape
        oh = (h - self.window) // self.stride + 1
        ow = (w - self.window) // self.stride + 1
        return (oh, ow, c)


class GlobalAvgPool(Layer):
    kind = "gap"

    def __init__(self, name="gap"):
        super().__init__(name)
        self._hw = None

    def forward(self, x, train=False, rng=None):
        if train:
            self._hw = (x.shape[1], x.shape[2])
        return x.mean(axis=(1, 2), dtype=np.float64).astype(x.dtype)

    def backward(self, dy):
        h, w = self._hw
        self._hw = None
        scale = dy.dtype.type(1.0 / (h * w))
        return np.broadcast_to((dy * scale)[:, None, None, :],
                               (dy.shape[0], h, w, dy.shape[1])).copy()

    def out_shape(self, shape):
        return (shape[2],)


class Flatten(Layer):
    kind = "flatten"

    def __init__(self, name="flatten"):
        super().__init__(name)
        self._shape = None

    def forward(self, x, train=False, rng=None):
        if train:
            self._shape = x.shape
        return np.ascontiguousarray(x).reshape(x.shape[0], -1)

    def backward(self, dy):
        shape = self._shape
        self._shape = None
        return dy.reshape(shape)

    def out_shape(self, shape):
        return (int(np.prod(shape)),)


class Dense(Layer):
    kind = "dense"

    def __init__(self, in_features, units, rng=None, dtype=np.float32,
                 frozen=False, name="dense"):
        super().__init__(name)
        self.in_features = in_features
        self.units = units
        wval = _kaiming_uniform(rng, (in_features, units), in_features, dtype)
        self.weight = Param(f"{name}/weight", wval, frozen)
        self.bias = Param(f"{name}/bias", np.zeros(units, dtype=dtype), frozen)
        self._x = None

    def params(self):
        return [self.weight, self.bias]

    def forward(self, x, train=False, rng=None):
        if x.shape[1] != self.in_features:
            raise DataError(
                f"{self.name}: expected {self.in_features} features, got {x.shape[1]}"
            )
        if train:
            self._x = x
        return x @ self.weight.value + self.bias.value

    def backward(self, dy):
        x = self._x
        self._x = None
        self.weight.grad = x.T @ dy
        self.bias.grad = dy.sum(axis=0, dtype=np.float64).astype(dy.dtype)
        if not self.input_grad:
            return None
        return dy @ self.weight.value.T

    def out_shape(self, shape):
        return (self.units,)


class Rescale(Layer):
    """Affine range shift; maps [0, 1] inputs onto [-1, 1] by default."""

    kind = "rescale"

    def __init__(self, scale=2.0, offset=-1.0, name="rescale"):
        super().__init__(name)
        self.scale = scale
        self.offset = offset

    def forward(self, x, train=False, rng=None):
        return x * x.dtype.type(self.scale) + x.dtype.type(self.offset)

    def backward(self, dy):
        return dy * dy.dtype.type(self.scale)


class Softmax(Layer):
    kind = "softmax"

    def __init__(self, name="softmax"):
        super().__init__(name)
        self._p = None

    def forward(self, x, train=False, rng=None):
        p = softmax(x)
        if train:
            self._p = p
        return p

    def backward(self, dy):
        p = self._p
        self._p = None
        dot = (dy * p).sum(axis=1, keepdims=True)
        return p * (dy - dot)


def softmax(z):
    """Row-stabilized softmax; rows sum to 1 within float tolerance."""
    z = np.asarray(z)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def one_hot(labels, num_classes, dtype=np.float32):
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() >= num_classes:
        raise DataError("invalid label index")
    out = np.zeros((labels.size, num_classes), dtype=dtype)
    out[np.arange(labels.size), labels] = 1
    return out


def cross_entropy(p, labels):
    """Mean -log p[true class]; probabilities clamped to >= 1e-12."""
    p = np.asarray(p)
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() >= p.shape[1]:
        raise DataError("invalid label index")
    row_sums = p.sum(axis=1)
    if np.any(np.abs(row_sums - 1.0) > 1e-5):
        raise DataError("cross_entropy expects probability rows summing to 1")
    picked = np.clip(p[np.arange(labels.size), labels], 1e-12, None)
    return float(-np.log(picked).mean())


def softmax_ce_grad(p, y_onehot):
    """Combined softmax + cross-entropy gradient at the logits: (p - y) / N."""
    return (p - y_onehot) / p.dtype.type(p.shape[0])


class Adam:
    """Adam with bias correction; frozen parameters are never touched."""

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = [p for p in params if not p.frozen]
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1**self.t
        bc2 = 1.0 - b2**self.t
        for i, p in enumerate(self.params):
            g = p.grad
            if g.shape != p.value.shape:
                raise DataError(f"gradient shape mismatch for {p.name}")
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * (g * g)
            m_hat = self.m[i] / bc1
            v_hat = self.v[i] / bc2
            p.value -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.value.dtype)

    def state_arrays(self):
        out = []
        for i, p in enumerate(self.params):
            out.append((f"adam/m/{p.name}", self.m[i]))
            out.append((f"adam/v/{p.name}", self.v[i]))
        return out

"""Hot-kernel dispatch.

The active backend is chosen once at import time (see ``scalonet.accel``).
``get_backend`` exposes both implementations for tests and benchmarks.
"""
from scalonet.accel import BACKEND, USE_NUMBA
from scalonet.kernels import cpu as _cpu

if USE_NUMBA:
    from scalonet.kernels import jit as _impl
else:
    _impl = _cpu

im2col = _impl.im2col
conv2d_forward = _impl.conv2d_forward
conv2d_backward = _impl.conv2d_backward
maxpool_forward = _impl.maxpool_forward
maxpool_backward = _impl.maxpool_backward
bn_stats = _impl.bn_stats
bn_apply = _impl.bn_apply
bn_backward = _impl.bn_backward
relu_forward = _impl.relu_forward
relu_backward = _impl.relu_backward
dropout_apply_bits = _impl.dropout_apply_bits
dropout_apply_u32 = _impl.dropout_apply_u32
cwt_direct_rows = _impl.cwt_direct_rows


def get_backend(name):
    """Return the kernel module for 'numpy' or 'numba' (tests/benchmarks)."""
    if name == "numpy":
        return _cpu
    if name == "numba":
        from scalonet.kernels import jit

        return jit
    raise ValueError(f"unknown backend {name!r}")


__all__ = [
    "BACKEND",
    "get_backend",
    "im2col",
    "conv2d_forward",
    "conv2d_backward",
    "maxpool_forward",
    "maxpool_backward",
    "bn_stats",
    "bn_apply",
    "bn_backward",
    "relu_forward",
    "relu_backward",
    "dropout_apply_bits",
    "dropout_apply_u32",
    "cwt_direct_rows",
]

"""Backend selection for the hot numeric kernels.

The package ships two implementations of every hot kernel: a numba
``@njit`` version and a pure-numpy fallback. The numba path is the
default whenever numba imports; setting the environment variable
``SCALONET_NO_NUMBA=1`` before import forces the numpy path.

``benchmarks/bench_kernels.py`` times both paths side by side.
"""
import os

_TRUTHY = {"1", "true", "yes", "on"}


def numba_disabled_by_env() -> bool:
    return os.environ.get("SCALONET_NO_NUMBA", "").strip().lower() in _TRUTHY


try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not numba_disabled_by_env()
BACKEND = "numba" if USE_NUMBA else "numpy"

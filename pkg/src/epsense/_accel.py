"""Backend selection for the hot kernels.

Numba is used when it imports and ``EPSENSE_DISABLE_NUMBA`` is unset (or 0).
Setting ``EPSENSE_DISABLE_NUMBA=1`` forces the vectorised numpy path, which is
also what runs when numba is missing.
"""

import os

_FLAG = "EPSENSE_DISABLE_NUMBA"


def _disabled_by_env() -> bool:
    return os.environ.get(_FLAG, "").strip().lower() not in ("", "0", "false", "no")


try:
    if _disabled_by_env():
        raise ImportError(f"numba disabled by {_FLAG}")
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        def decorator(func):
            return func

        if len(args) == 1 and callable(args[0]):
            return args[0]
        return decorator


BACKEND = "numba" if NUMBA_AVAILABLE else "numpy"

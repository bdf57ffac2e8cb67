"""Backend selection for the hot numeric kernels.

The compiled Cython core (`cfarnet._core`) is preferred; the pure numpy
fallback (`cfarnet._core_py`) is used when the extension is unavailable or
when the environment variable CFARNET_PURE_PYTHON is set. Both expose the
same functions; `BACKEND` names the one in use.
"""

import os

if os.environ.get("CFARNET_PURE_PYTHON"):
    from cfarnet import _core_py as _impl
else:
    try:
        from cfarnet import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        from cfarnet import _core_py as _impl

BACKEND = _impl.BACKEND
batch_features = _impl.batch_features
mmd_biased = _impl.mmd_biased
mmd_biased_grad = _impl.mmd_biased_grad
pairwise_abs_gaps = _impl.pairwise_abs_gaps

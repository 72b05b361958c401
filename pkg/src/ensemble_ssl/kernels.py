"""Backend selection for the pooling kernels.

The compiled extension is used when it imports; set ``ENSEMBLE_SSL_PURE=1``
to force the numpy fallback.
"""
import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("ENSEMBLE_SSL_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"


def _as_ids(ids):
    return np.ascontiguousarray(ids, dtype=np.int64)


def pool_forward(emb, ids, impl=None):
    impl = impl or _impl
    return impl.pool_forward(np.ascontiguousarray(emb, dtype=np.float64), _as_ids(ids))


def pool_backward(d_pooled, ids, inv_counts, grad_emb, impl=None):
    """Accumulate the pooling gradient into ``grad_emb`` in place."""
    impl = impl or _impl
    impl.pool_backward(
        np.ascontiguousarray(d_pooled, dtype=np.float64),
        _as_ids(ids),
        np.ascontiguousarray(inv_counts, dtype=np.float64),
        grad_emb,
    )


def use(name: str) -> None:
    """Switch the process-wide backend (``"python"`` or ``"cython"``)."""
    global _impl, BACKEND
    impls = implementations()
    if name not in impls:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(impls)}")
    _impl, BACKEND = impls[name], name


def implementations():
    """All importable backends, keyed by name (for tests and benchmarks)."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels as compiled
    except ImportError:
        pass
    else:
        out["cython"] = compiled
    return out

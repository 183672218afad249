"""Backend selection: compiled kernels with a pure-Python fallback.

The compiled extension is optional; everything works without it, just
slower.  KBASSOC_BACKEND=c or =python forces a choice, otherwise the
compiled kernels are used when importable.
"""

from __future__ import annotations

import os

import numpy as np

from .core import Association, InvalidInputError

try:
    from . import _ckernels
except ImportError:
    _ckernels = None

HAVE_C = _ckernels is not None

_ENV_VAR = "KBASSOC_BACKEND"


def available_backends():
    return ("c", "python") if HAVE_C else ("python",)


def resolve(backend=None):
    """Pick the backend name to use for one call."""
    if backend is None:
        backend = os.environ.get(_ENV_VAR) or None
    if backend is None:
        return "c" if HAVE_C else "python"
    backend = str(backend).lower()
    if backend not in ("c", "python"):
        raise InvalidInputError(f"unknown backend {backend!r}")
    if backend == "c" and not HAVE_C:
        raise InvalidInputError("compiled backend requested but not built")
    return backend


class _CKernelFacade:
    """Adapts the raw compiled entry points to the driver's data types."""

    @staticmethod
    def kbest(matrix, membership, priors, k, early_stop, lookahead, sparse,
              check_duals):
        totals, row_to, parents, stats = _ckernels.kbest_csr(
            matrix.indptr, matrix.cols, matrix.costs,
            matrix.n_rows, matrix.n_cols,
            np.ascontiguousarray(membership, dtype=np.uint8),
            np.ascontiguousarray(priors, dtype=np.float64),
            int(k), bool(early_stop), bool(lookahead), bool(sparse),
            bool(check_duals), matrix.max_abs_cost(),
        )
        entries = []
        for i in range(totals.size):
            h = int(parents[i])
            entries.append((float(totals[i]),
                            Association(row_to[i], float(totals[i]) - float(priors[h]),
                                        parent_hypothesis=h)))
        return entries, stats

    @staticmethod
    def gibbs(matrix, n_sweeps, uniforms):
        return _ckernels.gibbs_csr(
            matrix.indptr, matrix.cols, matrix.costs,
            matrix.n_rows, matrix.n_cols, int(n_sweeps),
            np.ascontiguousarray(uniforms, dtype=np.float64),
        )


def kernels():
    if not HAVE_C:
        raise InvalidInputError("compiled backend is not available")
    return _CKernelFacade

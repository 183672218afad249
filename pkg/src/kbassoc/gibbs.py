"""Gibbs-sampling baseline over miss-enabled associations.

Starts from the all-miss association and resamples one row at a time,
choosing among "miss" (weight 1) and every currently unclaimed allowed
column (weight exp(-cost)).  One association is recorded after each full
sweep.  The chain targets the posterior the deterministic solvers rank
by, so the recorded samples concentrate on low-cost associations without
ever solving anything exactly.

Randomness is pregenerated as one flat uniform stream per call, so the
compiled and pure-Python backends consume identical numbers and produce
identical sample paths for a given seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend as _backend
from .core import MISS, InvalidInputError

# exp() argument clamp keeping weights finite for extreme costs.
_EXP_CLAMP = 700.0


@dataclass
class SampleSummary:
    """Recorded sweep outcomes plus the deduplicated association set."""

    row_to: np.ndarray        # (n_sweeps, M) int32, one row per sweep
    costs: np.ndarray         # (n_sweeps,) association cost per sweep
    unique_row_to: np.ndarray  # (U, M) first-seen order
    unique_costs: np.ndarray   # (U,)
    unique_counts: np.ndarray  # (U,)

    @property
    def n_unique(self):
        return int(self.unique_costs.size)

    def likelihood_ratio(self, reference_nll):
        """Total likelihood of the unique set relative to a reference.

        sum over unique associations of exp(reference_nll - cost); with
        the optimal cost as reference this is >= 1 exactly when the
        optimum was visited, and grows as more probable associations are
        discovered.
        """
        return float(np.sum(np.exp(reference_nll - self.unique_costs)))


def _gibbs_python(matrix, n_sweeps, uniforms):
    m, n = matrix.n_rows, matrix.n_cols
    weights = np.exp(np.minimum(-matrix.costs, _EXP_CLAMP))
    row_to = np.full(m, MISS, dtype=np.int32)
    col_to = np.full(n, MISS, dtype=np.int32)
    cur_cost = np.zeros(m)
    out = np.empty((n_sweeps, m), dtype=np.int32)
    out_costs = np.empty(n_sweeps)
    pos = 0
    for s in range(n_sweeps):
        for r in range(m):
            lo, hi = int(matrix.indptr[r]), int(matrix.indptr[r + 1])
            total = 1.0
            for k in range(lo, hi):
                c = int(matrix.cols[k])
                if col_to[c] == MISS or col_to[c] == r:
                    total += weights[k]
            target = uniforms[pos] * total
            pos += 1
            acc = 1.0
            pick = MISS
            pick_cost = 0.0
            if target >= acc:
                for k in range(lo, hi):
                    c = int(matrix.cols[k])
                    if col_to[c] == MISS or col_to[c] == r:
                        acc += weights[k]
                        if target < acc:
                            pick = c
                            pick_cost = float(matrix.costs[k])
                            break
            old = int(row_to[r])
            if old != MISS and old != pick:
                col_to[old] = MISS
            if pick != MISS:
                col_to[pick] = r
            row_to[r] = pick
            cur_cost[r] = pick_cost
        out[s] = row_to
        total_cost = 0.0
        for r in range(m):
            total_cost += cur_cost[r]
        out_costs[s] = total_cost
    return out, out_costs


def gibbs_sample(matrix, n_sweeps, seed, *, backend=None):
    """Run the sampler for n_sweeps full sweeps; one sample per sweep."""
    n_sweeps = int(n_sweeps)
    if n_sweeps < 1:
        raise InvalidInputError("n_sweeps must be >= 1")
    rng = np.random.default_rng(seed)
    uniforms = rng.random(n_sweeps * matrix.n_rows)
    name = _backend.resolve(backend)
    if name == "c":
        samples, costs = _backend.kernels().gibbs(matrix, n_sweeps, uniforms)
    else:
        samples, costs = _gibbs_python(matrix, n_sweeps, uniforms)
    seen = {}
    order = []
    for s in range(n_sweeps):
        key = tuple(int(c) for c in samples[s])
        if key in seen:
            seen[key][1] += 1
        else:
            seen[key] = [float(costs[s]), 1]
            order.append(key)
    uniq = np.asarray(order, dtype=np.int32).reshape(len(order), matrix.n_rows)
    ucosts = np.asarray([seen[k][0] for k in order])
    ucounts = np.asarray([seen[k][1] for k in order], dtype=np.int64)
    return SampleSummary(samples, costs, uniq, ucosts, ucounts)

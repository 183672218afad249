"""Brute-force reference solvers.

These enumerate every feasible association by recursion over rows, so
they are exponential and guarded by a hard size limit.  They exist to
cross-check the real solvers, never to be fast.
"""

from __future__ import annotations

import math

import numpy as np

from .core import MISS, Association, SparseCostMatrix, TooLargeError

# Upper limit on the number of enumerated associations.
MAX_ENUMERATION = 10_000_000


def association_count(n_rows, n_cols):
    """Number of miss-enabled associations of a fully dense M x N matrix.

    Counts all ways to choose k rows, k columns and a bijection between
    them, for every k.  For a sparse matrix this is an upper bound.
    """
    total = 0
    for k in range(min(n_rows, n_cols) + 1):
        total += math.comb(n_rows, k) * math.comb(n_cols, k) * math.factorial(k)
    return total


def _check_size(matrix, row_subset):
    m = len(row_subset)
    bound = association_count(m, matrix.n_cols)
    if bound > MAX_ENUMERATION:
        raise TooLargeError(
            f"{m}x{matrix.n_cols} could have {bound} associations "
            f"(limit {MAX_ENUMERATION})"
        )


def enumerate_associations(matrix, row_subset=None, forbidden=None, fixed=None):
    """Yield (row_to, cost) for every feasible association.

    ``row_subset`` restricts which rows may match (others are forced to
    miss), ``forbidden`` maps row -> set of banned columns (MISS bans the
    miss option), ``fixed`` maps row -> required column or MISS.  These
    mirror the constraint surface of the real solvers so enumeration can
    referee their partition logic.
    """
    rows = list(range(matrix.n_rows)) if row_subset is None else sorted(row_subset)
    _check_size(matrix, rows)
    forbidden = {int(r): set(v) for r, v in (forbidden or {}).items()}
    fixed = {int(r): int(c) for r, c in (fixed or {}).items()}
    row_to = np.full(matrix.n_rows, MISS, dtype=np.int32)
    for r, c in fixed.items():
        row_to[r] = c

    base = 0.0
    used = set()
    for r, c in fixed.items():
        if c != MISS:
            base += matrix.pair_cost(r, c)
            used.add(c)

    free_rows = [r for r in rows if r not in fixed]

    def rec(k, cost):
        if k == len(free_rows):
            yield row_to.copy(), cost
            return
        r = free_rows[k]
        banned = forbidden.get(r, ())
        if MISS not in banned:
            row_to[r] = MISS
            yield from rec(k + 1, cost)
        ci, xi = matrix.row(r)
        for j, x in zip(ci, xi):
            j = int(j)
            if j in used or j in banned:
                continue
            used.add(j)
            row_to[r] = j
            yield from rec(k + 1, cost + float(x))
            used.remove(j)
        row_to[r] = MISS

    yield from rec(0, base)


def kbest_bruteforce(matrix, k, row_subset=None, forbidden=None, fixed=None):
    """The k lowest-cost associations by full enumeration.

    Returns a list of Associations sorted by cost; fewer than k when the
    problem has fewer feasible associations.  Ties are broken by the
    row_to tuple so the output is deterministic.
    """
    scored = [
        (cost, tuple(int(c) for c in rt))
        for rt, cost in enumerate_associations(matrix, row_subset, forbidden, fixed)
    ]
    scored.sort(key=lambda t: (t[0], t[1]))
    out = []
    for cost, rt in scored[:k]:
        out.append(Association(np.asarray(rt, dtype=np.int32), cost))
    return out


def kbest_bruteforce_mimo(matrix, hypotheses, k):
    """k-best across a hypothesis bank by per-hypothesis enumeration.

    Enumerates each hypothesis's row subset separately, offsets costs by
    the hypothesis prior, then merges.  Ties break by (total, hypothesis
    index, row_to) for determinism.
    """
    scored = []
    for h in range(hypotheses.n_hypotheses):
        rows = np.nonzero(hypotheses.membership[h])[0]
        prior = float(hypotheses.priors[h])
        for rt, cost in enumerate_associations(matrix, row_subset=rows):
            scored.append((prior + cost, h, tuple(int(c) for c in rt), cost))
    scored.sort(key=lambda t: (t[0], t[1], t[2]))
    out = []
    for total, h, rt, cost in scored[:k]:
        out.append(
            (Association(np.asarray(rt, dtype=np.int32), cost, parent_hypothesis=h),
             total)
        )
    return out

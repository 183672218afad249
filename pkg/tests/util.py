"""Shared helpers for the test suite."""

import numpy as np

from kbassoc import SparseCostMatrix


def random_matrix(rng, m, n, density=1.0, lo=-2.0, hi=1.0):
    """Random cost matrix; density < 1 drops entries at random."""
    dense = rng.uniform(lo, hi, (m, n))
    if density >= 1.0:
        return SparseCostMatrix.from_dense(dense)
    mask = rng.random((m, n)) < density
    pairs = [(i, j, float(dense[i, j]))
             for i in range(m) for j in range(n) if mask[i, j]]
    return SparseCostMatrix.from_pairs(m, n, pairs)


def totals_of(output):
    return np.asarray(output.total_costs)


def assoc_cost_list(assocs):
    return sorted(a.cost for a in assocs)


def assert_ranked_equivalent(got, exp, recompute, tol=1e-7):
    """Compare two ranked (cost, identity) lists as k-best outputs.

    Ties at the cutoff cost may exceed the remaining slots, in which case
    any subset of the boundary tie class is a correct answer: everything
    strictly cheaper must match exactly, boundary entries must be
    distinct identities whose recomputed cost equals the cutoff.
    recompute(identity) returns the true cost, or None if infeasible.
    """
    __tracebackhide__ = True
    assert len(got) == len(exp), f"{len(got)} solutions, expected {len(exp)}"
    if not exp:
        return
    kth = exp[-1][0]
    got_low = sorted(t for t in got if t[0] < kth - tol)
    exp_low = sorted(t for t in exp if t[0] < kth - tol)
    assert got_low == exp_low
    got_hi = [t for t in got if t[0] >= kth - tol]
    exp_hi = [t for t in exp if t[0] >= kth - tol]
    assert len(got_hi) == len(exp_hi)
    for cost, ident in got_hi:
        true_cost = recompute(ident)
        assert true_cost is not None, f"{ident} is not feasible"
        assert abs(true_cost - cost) <= tol
        assert abs(true_cost - kth) <= tol, \
            f"{ident} costs {true_cost}, boundary is {kth}"
    idents = [t[1] for t in got]
    assert len(set(idents)) == len(idents), "duplicate solutions emitted"

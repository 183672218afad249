"""Benchmark workloads and reproducible instance generators.

Every generator derives its randomness from an explicit seed so the
non-timing columns of any benchmark CSV are bit-for-bit reproducible;
wall-clock columns are measured with ``time.perf_counter`` around the
solver call only (never around generation or I/O), after one untimed
warmup call per configuration.
"""

from __future__ import annotations

import csv
import statistics
import time

import numpy as np

from . import backend as _backend
from .core import HypothesisSet, InvalidInputError, SparseCostMatrix
from .gibbs import gibbs_sample
from .kbest import SolverConfig, kbest_mimo, kbest_single

DEFAULT_CONFIGS = ("v1", "v2", "v3", "v4")


def instance_rng(seed, *key):
    """Independent generator for one benchmark instance."""
    return np.random.default_rng([int(seed)] + [int(x) for x in key])


def gen_random_dense(size, rng):
    """Dense size x size matrix, costs uniform on (-2, -1).

    All-negative costs keep every miss out of the low-cost solutions, so
    these instances exercise the assignment machinery rather than the
    miss handling.
    """
    size = int(size)
    return SparseCostMatrix.from_dense(rng.uniform(-2.0, -1.0, (size, size)))


def gate_matrix(matrix, s):
    """Keep the s lowest-cost entries of each row, in column order.

    Ties prefer the earlier column.  Rows with at most s entries are
    unchanged, so s >= n_cols returns an equivalent matrix.
    """
    s = int(s)
    if s < 1:
        raise InvalidInputError("gate size must be >= 1")
    rows = []
    for i in range(matrix.n_rows):
        ci, xi = matrix.row(i)
        if ci.size > s:
            keep = np.sort(np.argsort(xi, kind="stable")[:s])
            ci, xi = ci[keep], xi[keep]
        rows.append(list(zip(ci.tolist(), xi.tolist())))
    return SparseCostMatrix.from_rows(matrix.n_rows, matrix.n_cols, rows)


def ranked_solutions(output):
    """(total, row_to) pairs for solution-set comparisons."""
    return [(float(t), tuple(int(c) for c in a.row_to))
            for t, a in zip(output.total_costs, output.associations)]


def same_solution_set(a, b, tol=1e-9):
    """Whether two ranked outputs hold the same solutions.

    Compared as sets: sorted by (total, assignment), totals within tol,
    assignments exactly equal.
    """
    if len(a) != len(b):
        return False
    for (ta, ra), (tb, rb) in zip(sorted(a), sorted(b)):
        if ra != rb or abs(ta - tb) > tol:
            return False
    return True


def solution_weight_ratio(totals):
    """Posterior mass of a ranked solution list relative to its best.

    sum_i exp(total_0 - total_i); equals 1 for a single solution and
    grows toward the count as the tail flattens.
    """
    totals = np.asarray(totals, dtype=np.float64)
    if totals.size == 0:
        return 0.0
    return float(np.sum(np.exp(totals[0] - totals)))


def min_sufficient_gate(matrix, k, *, gated_config=None, ref_config=None,
                        reference=None, backend=None, tol=1e-9):
    """Smallest per-row gate that preserves the full k-best solution set.

    Scans s upward from 1, solving the gated problem each time, until
    the ranked output matches the ungated reference.  s = n_cols always
    matches, so the scan terminates.
    """
    if gated_config is None:
        gated_config = SolverConfig.v4()
    if reference is None:
        ref = kbest_single(matrix, k, ref_config, backend=backend)
        reference = ranked_solutions(ref)
    for s in range(1, max(matrix.n_cols, 1) + 1):
        got = kbest_single(gate_matrix(matrix, s), k, gated_config,
                           backend=backend)
        if same_solution_set(ranked_solutions(got), reference, tol):
            return s
    return matrix.n_cols


def make_chain(size, k, rng, *, config=None, backend=None):
    """Two-stage problem: k-best of one matrix feeds a second as hypotheses.

    The distinct matched (row, column) pairs across the first stage's
    solutions become the rows of the second matrix; each first-stage
    solution is a hypothesis whose membership marks its own pairs and
    whose prior is its total cost.
    """
    mat1 = gen_random_dense(size, rng)
    out1 = kbest_single(mat1, k, config, backend=backend)
    pairs = sorted({p for a in out1 for p in a.matched_pairs()})
    index = {p: i for i, p in enumerate(pairs)}
    membership = np.zeros((len(out1), len(pairs)), dtype=np.uint8)
    for h, a in enumerate(out1):
        for p in a.matched_pairs():
            membership[h, index[p]] = 1
    hyps = HypothesisSet(membership, out1.total_costs)
    mat2 = SparseCostMatrix.from_dense(
        rng.uniform(-2.0, -1.0, (len(pairs), int(size))))
    return mat1, out1, mat2, hyps, pairs


def _timed(fn):
    t0 = time.perf_counter()
    result = fn()
    return result, (time.perf_counter() - t0) * 1e3


def run_dense_bench(sizes, k, trials, seed, *, configs=DEFAULT_CONFIGS,
                    gate_for=None, backend=None):
    """Time single-problem k-best across sizes and feature configurations.

    The same instances are reused for every configuration.  gate_for
    maps a configuration name to a per-row gate applied to its input
    (the sparse per-row-gated workload the heap-based searches target).
    """
    gate_for = dict(gate_for or {})
    rows = []
    for size in sizes:
        mats = [gen_random_dense(size, instance_rng(seed, size, t))
                for t in range(trials)]
        for name in configs:
            cfg = SolverConfig.from_name(name)
            s = gate_for.get(name)
            inputs = [gate_matrix(m, s) if s else m for m in mats]
            kbest_single(inputs[0], k, cfg, backend=backend)   # warmup
            for t, m in enumerate(inputs):
                out, ms = _timed(lambda: kbest_single(m, k, cfg,
                                                      backend=backend))
                rows.append({
                    "kind": "dense", "size": int(size), "config": name,
                    "gate": int(s) if s else 0, "trial": t, "ms": ms,
                    "solutions": len(out),
                    "best_total": float(out.total_costs[0]),
                })
    return rows


def run_mimo_bench(sizes, k, trials, seed, *, config=None, backend=None):
    """Time the hypothesis-bank solver on chained two-stage problems."""
    rows = []
    for size in sizes:
        warm = make_chain(size, min(k, 10), instance_rng(seed, size, 0),
                          config=config, backend=backend)
        kbest_mimo(warm[2], warm[3], min(k, 10), config, backend=backend)
        for t in range(trials):
            rng = instance_rng(seed, size, t)
            _, out1, mat2, hyps, pairs = make_chain(size, k, rng,
                                                    config=config,
                                                    backend=backend)
            out, ms = _timed(lambda: kbest_mimo(mat2, hyps, k, config,
                                                backend=backend,
                                                with_stats=True))
            rows.append({
                "kind": "mimo", "size": int(size), "trial": t, "ms": ms,
                "hypotheses": hyps.n_hypotheses, "stage2_rows": len(pairs),
                "solutions": len(out),
                "best_total": float(out.total_costs[0]),
                "peak_live": int(out.stats["peak_live"]),
            })
    return rows


def run_gibbs_bench(trials, seed, *, size=100, det_ks=(10, 1000),
                    sample_counts=(10, 10_000), config=None, backend=None):
    """Posterior mass captured per unit work: exact k-best vs sampling.

    Both methods run on the same instances.  ``ratio`` is each method's
    summed solution likelihood relative to the best solution *it*
    obtained (for the exact solver that best is the global optimum, so
    the two readings coincide there); ``ratio_vs_opt`` re-references the
    sampler to the optimum, which collapses toward zero whenever the
    chain never comes near the best association.
    """
    rows = []
    for t in range(trials):
        rng = instance_rng(seed, size, t)
        mat = gen_random_dense(size, rng)
        best_nll = None
        for k in det_ks:
            out, ms = _timed(lambda: kbest_single(mat, k, config,
                                                  backend=backend))
            if best_nll is None:
                best_nll = float(out.total_costs[0])
            ratio = solution_weight_ratio(out.total_costs)
            rows.append({
                "kind": "gibbs-bench", "size": int(size), "trial": t,
                "method": "kbest", "param": int(k),
                "ratio": ratio, "ratio_vs_opt": ratio,
                "unique": len(out), "ms": ms,
            })
        for n in sample_counts:
            sub_seed = int(instance_rng(seed, size, t, n).integers(2**31))
            summary, ms = _timed(lambda: gibbs_sample(mat, n, sub_seed,
                                                      backend=backend))
            best_sampled = float(np.min(summary.unique_costs))
            rows.append({
                "kind": "gibbs-bench", "size": int(size), "trial": t,
                "method": "gibbs", "param": int(n),
                "ratio": summary.likelihood_ratio(best_sampled),
                "ratio_vs_opt": summary.likelihood_ratio(best_nll),
                "unique": summary.n_unique, "ms": ms,
            })
    return rows


def run_gate_sweep(trials, seed, *, size=100, k=200, gate=30,
                   ref_config=None, gated_config=None, backend=None):
    """Does a fixed gate preserve the exact k-best set, and how small
    could it have been?"""
    if gated_config is None:
        gated_config = SolverConfig.v4()
    rows = []
    for t in range(trials):
        mat = gen_random_dense(size, instance_rng(seed, size, t))
        reference = ranked_solutions(
            kbest_single(mat, k, ref_config, backend=backend))
        gated = ranked_solutions(
            kbest_single(gate_matrix(mat, gate), k, gated_config,
                         backend=backend))
        s_star = min_sufficient_gate(mat, k, gated_config=gated_config,
                                     reference=reference, backend=backend)
        rows.append({
            "kind": "gate", "size": int(size), "trial": t, "k": int(k),
            "gate": int(gate),
            "gate_exact": int(same_solution_set(gated, reference)),
            "s_star": int(s_star),
        })
    return rows


def run_backend_bench(sizes, k, trials, seed, *, config=None):
    """Compiled kernels vs the pure-Python lane on identical instances."""
    backends = _backend.available_backends()
    rows = []
    for size in sizes:
        mats = [gen_random_dense(size, instance_rng(seed, size, t))
                for t in range(trials)]
        for name in backends:
            kbest_single(mats[0], k, config, backend=name)   # warmup
            for t, m in enumerate(mats):
                out, ms = _timed(lambda: kbest_single(m, k, config,
                                                      backend=name))
                rows.append({
                    "kind": "backend", "size": int(size), "backend": name,
                    "trial": t, "ms": ms, "solutions": len(out),
                    "best_total": float(out.total_costs[0]),
                })
    return rows


def summarize(rows, keys, value="ms"):
    """Mean and median of one column grouped by the given keys."""
    groups = {}
    for row in rows:
        groups.setdefault(tuple(row[k] for k in keys), []).append(row[value])
    out = []
    for gkey in sorted(groups, key=str):
        vals = groups[gkey]
        summary = dict(zip(keys, gkey))
        summary.update({
            "n": len(vals),
            f"mean_{value}": statistics.fmean(vals),
            f"median_{value}": statistics.median(vals),
        })
        out.append(summary)
    return out


def write_csv(rows, stream_or_path):
    """Write homogeneous dict rows as CSV with a header line."""
    rows = list(rows)
    if not rows:
        raise InvalidInputError("no rows to write")
    fields = list(rows[0].keys())
    for row in rows:
        if list(row.keys()) != fields:
            raise InvalidInputError("rows have inconsistent columns")
    if hasattr(stream_or_path, "write"):
        _write_csv_stream(rows, fields, stream_or_path)
    else:
        with open(stream_or_path, "w", encoding="ascii", newline="") as fh:
            _write_csv_stream(rows, fields, fh)


def _write_csv_stream(rows, fields, fh):
    writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)

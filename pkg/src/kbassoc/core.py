"""Shared data-association types.

A data-association problem is described by a sparse matrix of pairing
costs between M rows (tracks, or measurements from one sensor) and N
columns (measurements from another sensor).  Each stored entry holds the
negative log of a likelihood ratio folded together with the miss
probabilities of both participants, so a full association is scored by
summing its matched entries and misses cost nothing.  Pairs absent from
the structure are infeasible, not merely expensive: there is no infinity
sentinel anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

# Column value meaning "this row pairs with nothing".  Also used for
# columns that no row claims.
MISS = -1


class InvalidInputError(ValueError):
    """An input violates a documented precondition."""


class InfeasibleError(RuntimeError):
    """A requested association, pair or augmenting path does not exist."""


class TooLargeError(InvalidInputError):
    """A brute-force routine was asked to enumerate too large a problem."""


def _as_int(x, name):
    if not isinstance(x, (int, np.integer)):
        raise InvalidInputError(f"{name} must be an integer, got {x!r}")
    return int(x)


class SparseCostMatrix:
    """Immutable CSR-style cost matrix with implicit miss handling.

    Row i stores column indices ``cols[indptr[i]:indptr[i+1]]`` in strictly
    increasing order with matching ``costs``.  Entries may be any finite
    float; costs >= 0 are kept, never auto-pruned.  The underlying arrays
    are marked read-only so instances can be shared freely, including
    across worker processes.
    """

    __slots__ = ("n_rows", "n_cols", "indptr", "cols", "costs")

    def __init__(self, n_rows, n_cols, indptr, cols, costs):
        n_rows = _as_int(n_rows, "n_rows")
        n_cols = _as_int(n_cols, "n_cols")
        if n_rows < 0 or n_cols < 0:
            raise InvalidInputError("matrix dimensions must be non-negative")
        indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        cols = np.ascontiguousarray(cols, dtype=np.int32)
        costs = np.ascontiguousarray(costs, dtype=np.float64)
        if indptr.shape != (n_rows + 1,):
            raise InvalidInputError("indptr must have length n_rows + 1")
        if indptr[0] != 0 or indptr[-1] != cols.size or np.any(np.diff(indptr) < 0):
            raise InvalidInputError("indptr must be a monotone prefix of nnz")
        if cols.shape != costs.shape:
            raise InvalidInputError("cols and costs must have equal length")
        if cols.size and (cols.min() < 0 or cols.max() >= max(n_cols, 1)):
            raise InvalidInputError("column index out of range")
        if not np.all(np.isfinite(costs)):
            raise InvalidInputError("costs must be finite")
        for i in range(n_rows):
            ci = cols[indptr[i]:indptr[i + 1]]
            if ci.size > 1 and np.any(np.diff(ci) <= 0):
                raise InvalidInputError(
                    f"row {i} has duplicate or unsorted column indices"
                )
        for arr in (indptr, cols, costs):
            arr.setflags(write=False)
        self.n_rows = n_rows
        self.n_cols = n_cols
        self.indptr = indptr
        self.cols = cols
        self.costs = costs

    @classmethod
    def from_dense(cls, dense):
        """Build from a fully dense 2-D array; every entry is stored."""
        dense = np.asarray(dense, dtype=np.float64)
        if dense.ndim != 2:
            raise InvalidInputError("dense cost array must be 2-D")
        m, n = dense.shape
        indptr = np.arange(m + 1, dtype=np.int64) * n
        cols = np.tile(np.arange(n, dtype=np.int32), m)
        return cls(m, n, indptr, cols, dense.ravel())

    @classmethod
    def from_rows(cls, n_rows, n_cols, rows):
        """Build from per-row iterables of ``(col, cost)`` pairs."""
        rows = list(rows)
        if len(rows) != n_rows:
            raise InvalidInputError("from_rows needs one entry list per row")
        indptr = np.zeros(n_rows + 1, dtype=np.int64)
        all_cols, all_costs = [], []
        for i, entries in enumerate(rows):
            entries = sorted((int(c), float(x)) for c, x in entries)
            all_cols.extend(c for c, _ in entries)
            all_costs.extend(x for _, x in entries)
            indptr[i + 1] = indptr[i] + len(entries)
        return cls(n_rows, n_cols,
                   indptr,
                   np.asarray(all_cols, dtype=np.int32),
                   np.asarray(all_costs, dtype=np.float64))

    @classmethod
    def from_pairs(cls, n_rows, n_cols, pairs):
        """Build from ``(row, col, cost)`` triples in any order.

        Duplicate ``(row, col)`` pairs are an error.
        """
        per_row = [[] for _ in range(n_rows)]
        seen = set()
        for r, c, x in pairs:
            r = _as_int(r, "row")
            c = _as_int(c, "col")
            if not 0 <= r < n_rows or not 0 <= c < n_cols:
                raise InvalidInputError(f"pair ({r}, {c}) out of range")
            if (r, c) in seen:
                raise InvalidInputError(f"duplicate pair ({r}, {c})")
            seen.add((r, c))
            per_row[r].append((c, x))
        return cls.from_rows(n_rows, n_cols, per_row)

    @property
    def nnz(self):
        return int(self.cols.size)

    def row(self, i):
        """Return (cols, costs) views of row i."""
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.cols[lo:hi], self.costs[lo:hi]

    def has_pair(self, i, j):
        lo, hi = self.indptr[i], self.indptr[i + 1]
        k = np.searchsorted(self.cols[lo:hi], j)
        return bool(k < hi - lo and self.cols[lo + k] == j)

    def pair_cost(self, i, j):
        """Cost of stored pair (i, j); InfeasibleError if absent."""
        lo, hi = self.indptr[i], self.indptr[i + 1]
        k = np.searchsorted(self.cols[lo:hi], j)
        if k < hi - lo and self.cols[lo + k] == j:
            return float(self.costs[lo + k])
        raise InfeasibleError(f"pair ({i}, {j}) is not in the structure")

    def to_dense(self, fill=np.inf):
        """Dense copy for debugging and small cross-checks."""
        out = np.full((self.n_rows, self.n_cols), fill, dtype=np.float64)
        for i in range(self.n_rows):
            ci, xi = self.row(i)
            out[i, ci] = xi
        return out

    def max_abs_cost(self):
        return float(np.max(np.abs(self.costs))) if self.nnz else 0.0

    def __repr__(self):
        return (f"SparseCostMatrix({self.n_rows}x{self.n_cols}, "
                f"nnz={self.nnz})")


def dual_tolerance(matrix):
    """Comparison slack for dual-feasibility checks on this matrix."""
    return 1e-9 * (1.0 + matrix.max_abs_cost())


@dataclass(frozen=True)
class Association:
    """One joint pairing: row i goes to column row_to[i], or MISS."""

    row_to: np.ndarray
    cost: float
    parent_hypothesis: int | None = None

    def __post_init__(self):
        arr = np.ascontiguousarray(self.row_to, dtype=np.int32)
        arr.setflags(write=False)
        object.__setattr__(self, "row_to", arr)

    def matched_pairs(self):
        rows = np.nonzero(self.row_to != MISS)[0]
        return [(int(r), int(self.row_to[r])) for r in rows]

    def key(self):
        """Hashable identity used for duplicate detection."""
        return (self.parent_hypothesis, tuple(int(c) for c in self.row_to))


@dataclass(frozen=True)
class Violation:
    """First structural problem found in a candidate association."""

    kind: str   # "bad-length" | "bad-column" | "duplicate-column" | "absent-pair"
    row: int
    col: int


def validate_association(matrix, row_to):
    """Return None if row_to is a valid association for matrix, else a Violation."""
    if isinstance(row_to, Association):
        row_to = row_to.row_to
    row_to = np.asarray(row_to)
    if row_to.shape != (matrix.n_rows,):
        return Violation("bad-length", -1, -1)
    claimed = {}
    for i in range(matrix.n_rows):
        j = int(row_to[i])
        if j == MISS:
            continue
        if not 0 <= j < matrix.n_cols:
            return Violation("bad-column", i, j)
        if j in claimed:
            return Violation("duplicate-column", i, j)
        claimed[j] = i
        if not matrix.has_pair(i, j):
            return Violation("absent-pair", i, j)
    return None


def association_nll(matrix, row_to):
    """Sum of stored costs over matched pairs; misses contribute zero."""
    if isinstance(row_to, Association):
        row_to = row_to.row_to
    row_to = np.asarray(row_to)
    total = 0.0
    for i in range(matrix.n_rows):
        j = int(row_to[i])
        if j != MISS:
            total += matrix.pair_cost(i, j)
    return total


def _likelihood_rows(likelihoods, n_rows, n_cols):
    """Normalize the two accepted likelihood layouts to per-row pair lists."""
    if isinstance(likelihoods, np.ndarray) or (
        hasattr(likelihoods, "ndim") and getattr(likelihoods, "ndim", 0) == 2
    ):
        arr = np.asarray(likelihoods, dtype=np.float64)
        if arr.shape != (n_rows, n_cols):
            raise InvalidInputError("dense likelihood array has wrong shape")
        return [[(j, arr[i, j]) for j in range(n_cols)] for i in range(n_rows)]
    rows = [list(r) for r in likelihoods]
    if len(rows) != n_rows:
        raise InvalidInputError("need one likelihood row list per row")
    return rows


def build_cost(likelihoods, miss_row, miss_col):
    """Fold pairing likelihoods and miss probabilities into one cost matrix.

    ``likelihoods`` is either a dense (M, N) array of strictly positive
    likelihood ratios or a length-M sequence of ``(col, L)`` lists.  The
    stored cost of pair (i, j) is

        C[i, j] = -log L[i, j] + log miss_row[i] + log miss_col[j]

    so that summing matched costs scores a joint association whose
    unmatched rows and columns each contribute their miss probability as
    a constant factor that cancels out of cost differences.
    """
    miss_row = np.asarray(miss_row, dtype=np.float64)
    miss_col = np.asarray(miss_col, dtype=np.float64)
    m, n = miss_row.size, miss_col.size
    if np.any(miss_row <= 0.0) or np.any(miss_row > 1.0) or \
       np.any(miss_col <= 0.0) or np.any(miss_col > 1.0):
        raise InvalidInputError("miss probabilities must lie in (0, 1]")
    rows = _likelihood_rows(likelihoods, m, n)
    log_mr = np.log(miss_row)
    log_mc = np.log(miss_col)
    out = []
    for i, entries in enumerate(rows):
        row_out = []
        for j, lik in entries:
            lik = float(lik)
            if not (lik > 0.0) or not math.isfinite(lik):
                raise InvalidInputError(
                    f"likelihood for pair ({i}, {j}) must be finite and > 0"
                )
            row_out.append((j, -math.log(lik) + log_mr[i] + log_mc[j]))
        out.append(row_out)
    return SparseCostMatrix.from_rows(m, n, out)


def association_probability(likelihoods, miss_row, miss_col, row_to):
    """Unnormalized probability of one association in likelihood space.

    Matched pairs contribute their likelihood ratio, every unmatched row
    and column contributes its miss probability.  This keeps the
    constants that build_cost folds away, so it is the right quantity
    for comparing associations across different problems.
    """
    if isinstance(row_to, Association):
        row_to = row_to.row_to
    miss_row = np.asarray(miss_row, dtype=np.float64)
    miss_col = np.asarray(miss_col, dtype=np.float64)
    m, n = miss_row.size, miss_col.size
    rows = _likelihood_rows(likelihoods, m, n)
    lut = [dict(r) for r in rows]
    row_to = np.asarray(row_to)
    if row_to.shape != (m,):
        raise InvalidInputError("row_to has wrong length")
    prob = 1.0
    used_cols = set()
    for i in range(m):
        j = int(row_to[i])
        if j == MISS:
            prob *= miss_row[i]
            continue
        if j in used_cols:
            raise InvalidInputError(f"column {j} used twice")
        used_cols.add(j)
        if j not in lut[i]:
            raise InfeasibleError(f"pair ({i}, {j}) has no likelihood entry")
        prob *= lut[i][j]
    for j in range(n):
        if j not in used_cols:
            prob *= miss_col[j]
    return float(prob)


@dataclass
class HypothesisSet:
    """Bank of weighted input hypotheses sharing one row universe.

    ``membership[h, i]`` is nonzero when row i exists in hypothesis h,
    and ``priors[h]`` is that hypothesis's negative log prior weight.
    """

    membership: np.ndarray
    priors: np.ndarray
    objects: Sequence | None = None

    def __post_init__(self):
        self.membership = np.ascontiguousarray(
            np.asarray(self.membership, dtype=bool), dtype=np.uint8
        )
        self.priors = np.ascontiguousarray(self.priors, dtype=np.float64)
        if self.membership.ndim != 2:
            raise InvalidInputError("membership must be 2-D (hypotheses x rows)")
        if self.membership.shape[0] == 0:
            raise InvalidInputError("need at least one hypothesis")
        if self.priors.shape != (self.membership.shape[0],):
            raise InvalidInputError("one prior per hypothesis required")
        if not np.all(np.isfinite(self.priors)):
            raise InvalidInputError("priors must be finite")

    @property
    def n_hypotheses(self):
        return int(self.membership.shape[0])

    @property
    def n_rows(self):
        return int(self.membership.shape[1])

    @classmethod
    def single(cls, n_rows):
        """The trivial bank: one hypothesis containing every row, prior 0."""
        return cls(np.ones((1, n_rows), dtype=np.uint8), np.zeros(1))


def write_matrix_text(matrix, stream_or_path):
    """Write the plain text exchange format: 'M N' then 'i j cost' lines."""
    if hasattr(stream_or_path, "write"):
        _write_matrix_stream(matrix, stream_or_path)
    else:
        with open(stream_or_path, "w", encoding="ascii") as fh:
            _write_matrix_stream(matrix, fh)


def _write_matrix_stream(matrix, fh):
    fh.write(f"{matrix.n_rows} {matrix.n_cols}\n")
    for i in range(matrix.n_rows):
        ci, xi = matrix.row(i)
        for j, x in zip(ci, xi):
            fh.write(f"{i} {j} {x:.17g}\n")


def read_matrix_text(stream_or_path):
    """Parse the 'M N' / 'i j cost' text format into a SparseCostMatrix.

    Entries may appear in any order; a repeated (i, j) pair is an error.
    """
    if hasattr(stream_or_path, "read"):
        text = stream_or_path.read()
    else:
        with open(stream_or_path, "r", encoding="ascii") as fh:
            text = fh.read()
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise InvalidInputError("empty matrix file")
    head = lines[0].split()
    if len(head) != 2:
        raise InvalidInputError("first line must be 'M N'")
    try:
        m, n = int(head[0]), int(head[1])
    except ValueError as exc:
        raise InvalidInputError("first line must hold two integers") from exc
    if m < 0 or n < 0:
        raise InvalidInputError("matrix dimensions must be non-negative")
    triples = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 3:
            raise InvalidInputError(f"bad entry line: {ln!r}")
        try:
            triples.append((int(parts[0]), int(parts[1]), float(parts[2])))
        except ValueError as exc:
            raise InvalidInputError(f"bad entry line: {ln!r}") from exc
    return SparseCostMatrix.from_pairs(m, n, triples)

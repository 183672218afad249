"""Successive-shortest-path machinery with implicit miss handling.

The solver never materializes miss edges as matrix entries.  Instead a
single pseudo-column (written theta below, surfaced as MISS in public
results) absorbs every unmatched row, and a matching augmentation step
lets a path enter that pseudo-column through any row's miss edge or
through any currently missing column, and leave it again onto any
column (a claimed one hands its row on) or through any currently
missing row.  Costs of miss edges are zero by construction, so only
their reduced costs (-u, -v) appear here.

The best-first searches require the stored prices to keep every implied
edge nonnegative (nonnegative reduced costs on open pairs, u <= 0 on
rows that may go missing, v == 0 on unclaimed columns); fresh solves
maintain that.  Warm-started re-solves
deeper in a solution tree can legally violate it, and those run through
shortest_path_exhaustive, a label-correcting variant that charges the
pseudo-column detour its true price and lets labels reopen.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .core import (MISS, InfeasibleError, InvalidInputError, Association,
                   dual_tolerance)

# Matching.row_to value for rows that are not part of the problem (yet).
UNSET = -2

_FOUND = "found"
_PRUNED = "pruned"


class Matching:
    """Mutable row/column assignment state.

    row_to[i]: column index, MISS (row present but unmatched), or UNSET
    (row not added to the problem).  col_to[j]: row index or MISS (column
    unclaimed).  A column held by a fixed row outside the active set is
    still recorded here; callers exclude it from searches by listing it
    in blocked_cols.
    """

    __slots__ = ("row_to", "col_to")

    def __init__(self, n_rows, n_cols):
        self.row_to = np.full(n_rows, UNSET, dtype=np.int32)
        self.col_to = np.full(n_cols, MISS, dtype=np.int32)

    @classmethod
    def from_row_to(cls, row_to, n_cols):
        row_to = np.asarray(row_to, dtype=np.int32)
        m = cls(row_to.size, n_cols)
        for r, c in enumerate(row_to):
            if c >= 0:
                m.match(r, int(c))
            else:
                m.row_to[r] = int(c)
        return m

    def match(self, row, col):
        self.row_to[row] = col
        self.col_to[col] = row

    def set_miss(self, row):
        self.row_to[row] = MISS

    def lift(self, row):
        """Remove row's assignment; its column (if any) becomes missing."""
        old = int(self.row_to[row])
        if old >= 0:
            self.col_to[old] = MISS
        self.row_to[row] = UNSET
        return old

    def copy(self):
        out = Matching(self.row_to.size, self.col_to.size)
        out.row_to[:] = self.row_to
        out.col_to[:] = self.col_to
        return out


@dataclass
class DualState:
    """Row and column dual prices; the pseudo-column's price is fixed at 0."""

    u: np.ndarray
    v: np.ndarray

    @classmethod
    def zeros(cls, n_rows, n_cols):
        return cls(np.zeros(n_rows), np.zeros(n_cols))

    def copy(self):
        return DualState(self.u.copy(), self.v.copy())

    def check(self, matrix, row_to, *, active_rows=None, blocked_cols=(),
              forbidden=None, missing_cols_zero=True, admissible=True,
              eps=None):
        """Assert the price invariants that hold for this state.

        row_to uses the Matching conventions (UNSET rows are outside the
        problem and skipped).  Checks only cover the active rows and the
        columns they may still use, so rows outside active_rows, columns
        in blocked_cols (held by rows fixed earlier) and pairs listed in
        forbidden are excluded.  Always enforced: matched pairs tight,
        missing rows at price zero, column prices nonpositive, no
        matched or missing row violating its own bans.  missing_cols_zero
        additionally requires unclaimed columns at price zero, which
        holds after a from-scratch solve but not in resolves where a
        previously matched column was released.  admissible additionally
        requires what admissible_prices accepts: nonnegative reduced
        costs on open pairs and nonpositive prices on rows that may go
        missing.  Warm re-solves deeper in a solution tree may legally
        break those, and only those.
        """
        if eps is None:
            eps = dual_tolerance(matrix)
        blocked = set(int(c) for c in blocked_cols)
        forb = {}
        if forbidden:
            for r, cols in forbidden.items():
                forb[int(r)] = set(int(c) for c in cols)
        row_to = np.asarray(row_to)
        if active_rows is None:
            active = [r for r in range(matrix.n_rows) if row_to[r] != UNSET]
        else:
            active = [int(r) for r in active_rows]
        matched_cols = set()
        for r in range(matrix.n_rows):
            if row_to[r] >= 0:
                matched_cols.add(int(row_to[r]))
        for r in active:
            j = int(row_to[r])
            banned = forb.get(r, ())
            miss_allowed = MISS not in banned
            if admissible and miss_allowed and self.u[r] > eps:
                raise AssertionError(f"u[{r}] = {self.u[r]} > 0")
            if j == MISS:
                if not miss_allowed:
                    raise AssertionError(f"row {r} is missing despite ban")
                if abs(self.u[r]) > eps:
                    raise AssertionError(
                        f"missing row {r} has u = {self.u[r]}"
                    )
            ci, xi = matrix.row(r)
            for c, x in zip(ci, xi):
                c = int(c)
                if c in blocked or c in banned:
                    if j == c:
                        raise AssertionError(
                            f"matched pair ({r}, {c}) is excluded"
                        )
                    continue
                red = x - self.u[r] - self.v[c]
                if admissible and red < -eps:
                    raise AssertionError(
                        f"pair ({r}, {c}) has reduced cost {red} < 0"
                    )
                if j == c and abs(red) > eps:
                    raise AssertionError(
                        f"matched pair ({r}, {c}) not tight: {red}"
                    )
        for c in range(matrix.n_cols):
            if c in blocked:
                continue
            if self.v[c] > eps:
                raise AssertionError(f"v[{c}] = {self.v[c]} > 0")
            if missing_cols_zero and c not in matched_cols \
                    and abs(self.v[c]) > eps:
                raise AssertionError(f"missing column {c} has v = {self.v[c]}")


def admissible_prices(matrix, duals, row_to, active=None, blocked_cols=(),
                      forbidden=None, eps=None):
    """Whether a plain best-first path search may reuse these prices.

    The fast searches assume every edge of the reduced graph is
    nonnegative: each open pair costs its reduced cost, each usable miss
    edge costs -u[row], each unclaimed column's detour through the
    pseudo-column costs v[col], and each exit from it costs -v[col].
    Warm-started re-solves can break any of these -- a matched row left
    with u > 0, a released column with v < 0, or a rewired pair whose
    reduced cost went negative because the repricing pass never reaches
    labels above the path cost.  Such a state is still exact to search,
    but only with the exhaustive variant that tolerates reordered
    labels.  Rows whose miss option is forbidden are exempt from the
    row-price check (their miss edge can never join a path); blocked
    columns and forbidden pairs are excluded throughout.
    """
    if eps is None:
        eps = dual_tolerance(matrix)
    row_to = np.asarray(row_to)
    matched_cols = set(int(c) for c in row_to if c >= 0)
    if active is None:
        rows = range(matrix.n_rows)
    else:
        active = np.asarray(active)
        rows = [int(r) for r in np.nonzero(active)[0]]
    forbidden = forbidden or {}
    blocked = set(int(c) for c in blocked_cols)
    for r in rows:
        banned = forbidden.get(r, ())
        if row_to[r] >= 0 and duals.u[r] > eps and MISS not in banned:
            return False
        ci, xi = matrix.row(r)
        for c, x in zip(ci, xi):
            c = int(c)
            if c in blocked or c in banned:
                continue
            if x - duals.u[r] - duals.v[c] < -eps:
                return False
    for c in range(matrix.n_cols):
        if c in blocked:
            continue
        if duals.v[c] > eps:
            return False
        if c not in matched_cols and duals.v[c] < -eps:
            return False
    return True


@dataclass
class PathResult:
    """Outcome of one shortest augmenting path search.

    status is "found" or "pruned".  A pruned search modified nothing and
    proves every completion through this row costs more than the bound.
    terminal is the reached column, MISS when the path ends at the
    pseudo-column.  pathback[c] holds the row that last relaxed column c
    (n_rows encodes the pseudo-column itself); index n_cols of pathback
    and dist belongs to the pseudo-column.  popped lists columns in the
    order Dijkstra finalized them, with n_cols for the pseudo-column.
    theta_entry records how the augmentation was entered: ("row", r) via
    row r's miss edge, or ("col", c) by popping missing column c.
    """

    status: str
    distance: float
    terminal: int
    pathback: np.ndarray
    dist: np.ndarray
    popped: list = field(default_factory=list)
    theta_entry: tuple | None = None


def _normalize_targets(target_cols, n_cols, allow_theta):
    targets = set()
    for c in target_cols:
        c = int(c)
        if c == MISS:
            if not allow_theta:
                raise InvalidInputError(
                    "MISS target requires the miss-augmented search"
                )
            targets.add(n_cols)
        elif 0 <= c < n_cols:
            targets.add(c)
        else:
            raise InvalidInputError(f"target column {c} out of range")
    if not targets:
        raise InvalidInputError("at least one target column required")
    return targets


def _normalize_forbidden(forbidden, n_cols):
    if not forbidden:
        return {}
    out = {}
    for r, cols in forbidden.items():
        s = set()
        for c in cols:
            c = int(c)
            s.add(n_cols if c == MISS else c)
        out[int(r)] = s
    return out


def shortest_path_dense(matrix, duals, matching, new_row, target_cols,
                        bound=math.inf, *, forbidden=None, blocked_cols=None):
    """Shortest alternating path over real columns only (no miss edges).

    Every non-target column on the path must be matched.  Unmatched
    non-target columns are dead ends and are skipped.  Useful on its own
    only when misses are impossible; the solvers use the augmented and
    heap variants below.
    """
    n_cols = matrix.n_cols
    targets = _normalize_targets(target_cols, n_cols, allow_theta=False)
    forb = _normalize_forbidden(forbidden, n_cols)
    blocked = np.zeros(n_cols, dtype=bool)
    if blocked_cols is not None:
        for c in blocked_cols:
            blocked[int(c)] = True
    u, v = duals.u, duals.v
    col_to = matching.col_to

    dist = np.full(n_cols + 1, np.inf)
    pathback = np.full(n_cols + 1, -1, dtype=np.int32)
    used = np.zeros(n_cols, dtype=bool)
    popped = []

    sp = 0.0
    row = new_row
    while True:
        if row >= 0:
            banned = forb.get(row, ())
            ci, xi = matrix.row(row)
            for c, x in zip(ci, xi):
                c = int(c)
                if used[c] or blocked[c] or c in banned:
                    continue
                p = sp + x - u[row] - v[c]
                if p < dist[c]:
                    dist[c] = p
                    pathback[c] = row
        best = -1
        best_d = math.inf
        for c in range(n_cols):
            if not used[c] and not blocked[c] and dist[c] < best_d:
                best_d = dist[c]
                best = c
        if best < 0:
            raise InfeasibleError("no target column is reachable")
        sp = best_d
        used[best] = True
        popped.append(best)
        if sp > bound:
            return PathResult(_PRUNED, math.nan, MISS, pathback, dist, popped)
        if best in targets:
            return PathResult(_FOUND, sp, best, pathback, dist, popped)
        row = int(col_to[best])
        if row == MISS:
            row = -1  # unmatched non-target column: dead end


def shortest_path_augmented(matrix, duals, matching, new_row, target_cols,
                            bound=math.inf, *, forbidden=None,
                            blocked_cols=None):
    """Shortest augmenting path with implicit miss edges (scan selection).

    The pseudo-column is entered by popping it directly through a miss
    edge or by popping a currently missing column, and once entered the
    path may leave onto any unfinalized column (a claimed one hands its
    row on) or through any currently missing row's edges.  The expansion
    runs at most once per search.
    """
    return _path_theta(matrix, duals, matching, new_row, target_cols, bound,
                       forbidden, blocked_cols, sparse=False)


def shortest_path_sparse(matrix, duals, matching, new_row, target_cols,
                         bound=math.inf, *, forbidden=None, blocked_cols=None):
    """Same search as shortest_path_augmented, selecting pops via a heap.

    Intended for gated matrices where rows hold few entries; results are
    identical to the scan variant, including tie handling (lowest column
    first, pseudo-column last).
    """
    return _path_theta(matrix, duals, matching, new_row, target_cols, bound,
                       forbidden, blocked_cols, sparse=True)


def _path_theta(matrix, duals, matching, new_row, target_cols, bound,
                forbidden, blocked_cols, sparse):
    n_rows, n_cols = matrix.n_rows, matrix.n_cols
    theta = n_cols
    row_theta = n_rows
    targets = _normalize_targets(target_cols, n_cols, allow_theta=True)
    forb = _normalize_forbidden(forbidden, n_cols)
    blocked = np.zeros(n_cols + 1, dtype=bool)
    if blocked_cols is not None:
        for c in blocked_cols:
            blocked[int(c)] = True
    u, v = duals.u, duals.v
    row_to, col_to = matching.row_to, matching.col_to

    dist = np.full(n_cols + 1, np.inf)
    pathback = np.full(n_cols + 1, -1, dtype=np.int32)
    used = np.zeros(n_cols + 1, dtype=bool)
    popped = []
    heap = []
    hseq = 0
    theta_entry = None
    already_augmented = False

    def relax(c, p, src):
        nonlocal hseq
        if p < dist[c]:
            dist[c] = p
            pathback[c] = src
            if sparse:
                heapq.heappush(heap, (p, c, hseq, src))
                hseq += 1

    sp = 0.0
    row = new_row
    while True:
        if row != row_theta and row >= 0:
            banned = forb.get(row, ())
            ci, xi = matrix.row(row)
            for c, x in zip(ci, xi):
                c = int(c)
                if used[c] or blocked[c] or c in banned:
                    continue
                relax(c, sp + x - u[row] - v[c], row)
            if not used[theta] and theta not in banned:
                relax(theta, sp - u[row], row)
        elif row == row_theta and not already_augmented:
            # Leave the augmentation: onto any column (a claimed one
            # hands its row on, continuing the path), or through any
            # currently missing row's pair edges.
            for c in range(n_cols):
                if not used[c] and not blocked[c]:
                    relax(c, sp - v[c], row_theta)
            for r2 in range(n_rows):
                if row_to[r2] != MISS:
                    continue
                banned2 = forb.get(r2, ())
                ci, xi = matrix.row(r2)
                for c, x in zip(ci, xi):
                    c = int(c)
                    if used[c] or blocked[c] or c in banned2:
                        continue
                    relax(c, sp + x - u[r2] - v[c], r2)
            already_augmented = True

        if sparse:
            col = -1
            while heap:
                d, c, _, src = heapq.heappop(heap)
                if not used[c] and not blocked[c]:
                    col = c
                    sp = d
                    pathback[c] = src
                    break
            if col < 0:
                raise InfeasibleError("no target column is reachable")
        else:
            col = -1
            best_d = math.inf
            for c in range(n_cols + 1):
                if not used[c] and not blocked[c] and dist[c] < best_d:
                    best_d = dist[c]
                    col = c
            if col < 0:
                raise InfeasibleError("no target column is reachable")
            sp = best_d
        used[col] = True
        popped.append(col)
        if sp > bound:
            return PathResult(_PRUNED, math.nan, MISS, pathback, dist, popped,
                              theta_entry)
        if col == theta:
            if theta_entry is None:
                theta_entry = ("row", int(pathback[theta]))
            if theta in targets:
                return PathResult(_FOUND, sp, MISS, pathback, dist, popped,
                                  theta_entry)
            row = row_theta
        elif col in targets:
            # The raw column is tested before the missing-column detour
            # below: a search that targets a specific freed column must
            # stop the moment that column is reached, or the path cost
            # stops matching the solution cost delta.
            return PathResult(_FOUND, sp, col, pathback, dist, popped,
                              theta_entry)
        elif col_to[col] == MISS:
            # Popping a non-target missing column enters the augmentation.
            if not used[theta]:
                used[theta] = True
                popped.append(theta)
                dist[theta] = sp
                theta_entry = ("col", col)
                if theta in targets:
                    return PathResult(_FOUND, sp, MISS, pathback, dist,
                                      popped, theta_entry)
            row = row_theta
        else:
            row = int(col_to[col])


def shortest_path_exhaustive(matrix, duals, matching, new_row, target_cols,
                             *, forbidden=None, blocked_cols=None):
    """Exact augmenting path search without price preconditions.

    The plain searches are best-first and require admissible_prices; a
    warm-started state can instead hold a positive row price (negative
    miss edge) or a negative price on an unclaimed column (its detour
    through the pseudo-column is cheaper than its distance).  Here the
    detour is charged its true price, dist[column] + v[column], and
    labels may reopen: whenever a settled column or the pseudo-column
    improves, its edges are relaxed again.  The search runs to
    exhaustion, so it never prunes against a bound, and because a
    solved predecessor problem admits no improving alternating cycle
    there are no negative cycles to diverge on.
    """
    n_rows, n_cols = matrix.n_rows, matrix.n_cols
    theta = n_cols
    row_theta = n_rows
    targets = _normalize_targets(target_cols, n_cols, allow_theta=True)
    forb = _normalize_forbidden(forbidden, n_cols)
    blocked = np.zeros(n_cols + 1, dtype=bool)
    if blocked_cols is not None:
        for c in blocked_cols:
            blocked[int(c)] = True
    u, v = duals.u, duals.v
    row_to, col_to = matching.row_to, matching.col_to

    dist = np.full(n_cols + 1, np.inf)
    pathback = np.full(n_cols + 1, -1, dtype=np.int32)
    heap = []
    hseq = 0
    theta_entry = None
    # Improvements below this floor are rounding residue.  The detour
    # charge and the augmentation exit are exact inverses, so without a
    # floor their float round-trip can "improve" the pair of labels by
    # one ulp each way forever and leave a loop in pathback.  The floor
    # sits far above ulp noise and far below solution tolerances.
    floor = 1e-3 * dual_tolerance(matrix)

    def relax(c, val, src):
        nonlocal hseq
        if val < dist[c] - floor:
            dist[c] = val
            pathback[c] = src
            heapq.heappush(heap, (val, c, hseq))
            hseq += 1
            return True
        return False

    def scan_row(r, sp, with_theta):
        nonlocal theta_entry
        banned = forb.get(r, ())
        ci, xi = matrix.row(r)
        for c, x in zip(ci, xi):
            c = int(c)
            if blocked[c] or c in banned:
                continue
            relax(c, sp + x - u[r] - v[c], r)
        if with_theta and theta not in banned:
            if relax(theta, sp - u[r], r):
                theta_entry = ("row", r)

    # Guard against float-dust cycles; never reached on real problems.
    budget = 8 * (n_cols + 2) * (n_cols + 2) + 64
    scan_row(new_row, 0.0, True)
    while heap:
        budget -= 1
        if budget < 0:
            raise RuntimeError("path search failed to converge")
        key, c, _ = heapq.heappop(heap)
        if key != dist[c]:
            continue
        if c == theta:
            for c2 in range(n_cols):
                if not blocked[c2]:
                    relax(c2, key - v[c2], row_theta)
            for r2 in range(n_rows):
                if row_to[r2] == MISS:
                    scan_row(r2, key, False)
            continue
        r = int(col_to[c])
        if r == MISS:
            if c in targets:
                # A freed target column is a bare endpoint: nothing
                # claims it, so no path continues beyond it.  Detouring
                # from it would admit a negative cycle through any
                # missing row that prices below zero on it.
                continue
            # Other unclaimed columns: the detour into the pseudo-column
            # costs the column's own price, which the plain searches
            # round up to zero.
            if relax(theta, key + v[c], -1):
                theta_entry = ("col", c)
            continue
        scan_row(r, key, True)

    best = None
    for t in sorted(targets):
        if not math.isinf(dist[t]) and (best is None or dist[t] < dist[best]):
            best = t
    if best is None:
        raise InfeasibleError("no target column is reachable")
    p_t = float(dist[best])
    popped = [c for c in sorted(range(n_cols + 1), key=lambda c: (dist[c], c))
              if dist[c] <= p_t]
    terminal = MISS if best == theta else best
    return PathResult(_FOUND, p_t, terminal, pathback, dist, popped,
                      theta_entry)


def apply_path(matching, path_result, new_row):
    """Rewire the matching along a found path (in place).

    Must run before update_duals so the dual refresh sees the new
    assignment.
    """
    if path_result.status != _FOUND:
        raise InvalidInputError("only a found path can be applied")
    row_to = matching.row_to
    row_theta = matching.row_to.size

    def enter_block():
        # Continue the backward walk on the far side of the augmentation.
        kind, idx = path_result.theta_entry
        if kind == "row":
            if idx == new_row:
                matching.set_miss(new_row)
                return -1
            prev = int(row_to[idx])
            matching.set_miss(idx)
            return prev
        return idx  # kind == "col": that column gets matched next

    if path_result.terminal == MISS:
        cur = enter_block()
        if cur < 0:
            return
    else:
        cur = path_result.terminal

    # Each step matches one row, so a sound path tree never needs more.
    steps = row_to.size + 2
    while True:
        steps -= 1
        if steps < 0:
            raise RuntimeError("augmentation walk failed to terminate")
        back = int(path_result.pathback[cur])
        if back == row_theta:
            # This column is fed by the augmentation: it ends up missing.
            matching.col_to[cur] = MISS
            cur = enter_block()
            if cur < 0:
                return
            continue
        prev = int(row_to[back])
        matching.match(back, cur)
        if back == new_row:
            return
        if prev == MISS:
            # A missing row re-entering service; it is fed by the block.
            cur = enter_block()
            if cur < 0:
                return
        else:
            cur = prev


def update_duals(matrix, duals, path_result, matching):
    """Dual refresh after a successful augmentation.

    Column prices drop by the slack between the path distance and their
    finalized distance (columns at or beyond the path distance are
    untouched); row prices are recomputed so matched pairs stay tight
    and missing rows stay at zero.  Returns a new DualState.
    """
    n_cols = matrix.n_cols
    p_t = path_result.distance
    dist = path_result.dist
    v = duals.v.copy()
    for c in range(n_cols):
        if dist[c] < p_t:
            v[c] -= p_t - dist[c]
    u = duals.u.copy()
    row_to = matching.row_to
    for r in range(matrix.n_rows):
        j = int(row_to[r])
        if j == UNSET:
            continue
        u[r] = 0.0 if j == MISS else matrix.pair_cost(r, j) - v[j]
    return DualState(u, v)


def _normalize_fixed(matrix, fixed):
    if fixed is None:
        return {}
    items = fixed.items() if hasattr(fixed, "items") else fixed
    out = {}
    used_cols = set()
    for r, c in items:
        r, c = int(r), int(c)
        if r in out:
            raise InvalidInputError(f"row {r} fixed twice")
        if c != MISS:
            if c in used_cols:
                raise InvalidInputError(f"column {c} fixed twice")
            used_cols.add(c)
            matrix.pair_cost(r, c)  # raises InfeasibleError if absent
        out[r] = c
    return out


def solve_optimal(matrix, row_subset=None, forbidden=None, fixed=None,
                  initial_duals=None, bound=math.inf, *, variant="augmented",
                  check=False):
    """Best single association honoring subset, forbidden and fixed rows.

    Rows outside row_subset simply miss.  fixed maps row -> column (or
    MISS); fixed rows and their columns are excluded from the search and
    their costs are added to the returned total.  forbidden maps
    row -> banned columns, MISS banning the miss option.

    Returns (Association, DualState) or None when the bound proves that
    no association under these constraints costs <= bound.  Pruning uses
    a per-row completion bound that stays valid for negative costs, so a
    finite bound never discards a qualifying association.  With
    bound = +inf the result is always returned (or InfeasibleError raised
    when constraints are unsatisfiable).
    """
    if variant == "augmented":
        path_fn = shortest_path_augmented
    elif variant == "sparse":
        path_fn = shortest_path_sparse
    else:
        raise InvalidInputError(f"unknown variant {variant!r}")

    n_rows, n_cols = matrix.n_rows, matrix.n_cols
    if row_subset is None:
        rows = list(range(n_rows))
    else:
        rows = sorted(set(int(r) for r in row_subset))
        if rows and (rows[0] < 0 or rows[-1] >= n_rows):
            raise InvalidInputError("row_subset index out of range")
    fixed_map = _normalize_fixed(matrix, fixed)

    base = 0.0
    blocked = []
    matching = Matching(n_rows, n_cols)
    for r, c in fixed_map.items():
        if c == MISS:
            matching.set_miss(r)
        else:
            matching.match(r, c)
            blocked.append(c)
            base += matrix.pair_cost(r, c)

    if initial_duals is not None:
        if initial_duals.u.shape != (n_rows,) or \
                initial_duals.v.shape != (n_cols,):
            raise InvalidInputError("initial_duals shape mismatch")
        duals = initial_duals.copy()
    else:
        duals = DualState.zeros(n_rows, n_cols)

    path_rows = [r for r in rows if r not in fixed_map]

    # Valid completion bound per remaining row even with negative costs:
    # any future augmentation from row r costs at least min(0, min C[r, :])
    # while the duals stay feasible.
    row_floor = np.zeros(len(path_rows))
    for k, r in enumerate(path_rows):
        _, xi = matrix.row(r)
        if xi.size:
            row_floor[k] = min(0.0, float(xi.min()))
    suffix = np.zeros(len(path_rows) + 1)
    for k in range(len(path_rows) - 1, -1, -1):
        suffix[k] = suffix[k + 1] + row_floor[k]

    cum = 0.0
    for k, r in enumerate(path_rows):
        path_bound = bound - base - cum - suffix[k + 1]
        pr = path_fn(matrix, duals, matching, r, (MISS,), path_bound,
                     forbidden=forbidden, blocked_cols=blocked)
        if pr.status == _PRUNED:
            return None
        apply_path(matching, pr, r)
        duals = update_duals(matrix, duals, pr, matching)
        cum += pr.distance
        if check:
            duals.check(matrix, matching.row_to,
                        active_rows=path_rows[:k + 1], blocked_cols=blocked,
                        forbidden=forbidden)

    row_to = matching.row_to.copy()
    row_to[row_to == UNSET] = MISS
    return Association(row_to, base + cum), duals

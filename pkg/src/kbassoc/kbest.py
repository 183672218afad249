"""K-best joint association enumeration.

Given one or many weighted input hypotheses over the same cost matrix,
produce the K lowest-total-cost associations across all of them.  Each
input hypothesis is solved once to optimality up front, then a
partition-of-the-solution-space scheme repeatedly pops the best solved
subproblem, emits it, and splits its remaining freedom into disjoint
children, each re-solved by a single warm-started augmenting path.

Feature switches (bundled into SolverConfig):
  early_stop  prune a child's path search once it provably exceeds the
              worst cost the output still needs
  lookahead   cheap per-child lower bounds; children are generated in
              decreasing-bound order and skipped outright when hopeless
  sparse      heap-based path searches instead of dense column scans

All switch combinations return the same solution set.
"""

from __future__ import annotations

import math
from bisect import insort
from dataclasses import dataclass

import numpy as np

from . import backend as _backend
from .core import (MISS, Association, HypothesisSet, InvalidInputError,
                   InfeasibleError, SparseCostMatrix)
from .core import dual_tolerance
from .ssp import (UNSET, DualState, Matching, admissible_prices, apply_path,
                  shortest_path_augmented, shortest_path_exhaustive,
                  shortest_path_sparse, solve_optimal, update_duals)


@dataclass(frozen=True)
class SolverConfig:
    """Feature switches for the enumeration driver."""

    early_stop: bool = True
    lookahead: bool = True
    sparse: bool = False

    @classmethod
    def v1(cls):
        """Plain enumeration: every generated child is fully solved."""
        return cls(early_stop=False, lookahead=False, sparse=False)

    @classmethod
    def v2(cls):
        """v1 plus early stopping of child path searches."""
        return cls(early_stop=True, lookahead=False, sparse=False)

    @classmethod
    def v3(cls):
        """v2 plus look-ahead child ordering and instant pruning."""
        return cls(early_stop=True, lookahead=True, sparse=False)

    @classmethod
    def v4(cls):
        """v3 with heap-based path searches for gated matrices."""
        return cls(early_stop=True, lookahead=True, sparse=True)

    @classmethod
    def from_name(cls, name):
        try:
            return getattr(cls, name.lower())()
        except AttributeError:
            raise InvalidInputError(f"unknown config {name!r}") from None

    @classmethod
    def auto_for(cls, matrix):
        dense = matrix.n_rows * matrix.n_cols
        if dense and matrix.nnz / dense < 0.5:
            return cls.v4()
        return cls.v3()


@dataclass
class ProblemNode:
    """One subproblem of the partition tree, plus its solution when solved.

    Rows with active[i] false are locked: they keep row_to[i] forever
    (MISS for rows absent from the hypothesis).  forbidden maps an active
    row to the assignments it may not take (MISS bans missing).  cost and
    base_cost include the hypothesis prior.
    """

    active: np.ndarray
    row_to: np.ndarray
    u: np.ndarray
    v: np.ndarray
    forbidden: dict
    base_cost: float
    cost: float
    parent_hypothesis: int
    lower_bound: float
    partition_row: int | None = None
    solved: bool = False
    # Whether the stored prices admit the plain best-first re-solve; when
    # False, children of this node use the exhaustive search instead.
    admissible: bool = True

    def fixed(self):
        """Locked (row, assignment) pairs, for inspection and tests."""
        return {int(r): int(self.row_to[r])
                for r in np.nonzero(~self.active)[0]}


class SolutionQueue:
    """Bounded best-first queue ordered by (cost, insertion sequence).

    Holds at most ``capacity`` entries.  A new entry is accepted while
    below capacity, or when its cost is strictly below the current worst;
    at equal cost the earlier insertion wins.  shrink() lowers capacity
    as outputs are emitted, evicting the worst entries.
    """

    def __init__(self, capacity):
        self.capacity = int(capacity)
        self._items = []
        self._seq = 0

    def __len__(self):
        return len(self._items)

    def worst_bound(self):
        if len(self._items) < self.capacity:
            return math.inf
        return self._items[-1][0] if self._items else -math.inf

    def insert(self, cost, payload):
        if len(self._items) < self.capacity:
            insort(self._items, (cost, self._seq, payload))
            self._seq += 1
            return True
        if self._items and cost < self._items[-1][0]:
            insort(self._items, (cost, self._seq, payload))
            self._seq += 1
            del self._items[-1]
            return True
        return False

    def pop_best(self):
        cost, _, payload = self._items.pop(0)
        return cost, payload

    def shrink(self, capacity):
        self.capacity = int(capacity)
        while len(self._items) > self.capacity:
            del self._items[-1]


@dataclass
class OutputSet:
    """Ranked solver output.

    associations[i].cost excludes the hypothesis prior;
    total_costs[i] = prior + association cost, nondecreasing.
    """

    associations: list
    total_costs: np.ndarray
    stats: dict | None = None

    def __len__(self):
        return len(self.associations)

    def __iter__(self):
        return iter(self.associations)

    def __getitem__(self, i):
        return self.associations[i]

    def keys(self):
        """Hashable identities, for set comparisons in tests."""
        return [a.key() for a in self.associations]


def _blocked_cols(node):
    held = node.row_to[~node.active]
    return [int(c) for c in held if c >= 0]


def lookahead_bound(matrix, node, row):
    """Cheapest possible total of any child that re-assigns ``row``.

    parent total + the minimum reduced cost among the row's still-allowed
    alternatives (its current assignment excluded, banned assignments
    excluded, columns held by locked rows excluded).  Valid because every
    augmenting path starts with one such edge and all other reduced
    costs are nonnegative under the inherited duals.
    """
    banned = node.forbidden.get(int(row), ())
    cur = int(node.row_to[row])
    blocked = set(_blocked_cols(node))
    u, v = node.u, node.v
    best = math.inf
    ci, xi = matrix.row(row)
    for c, x in zip(ci, xi):
        c = int(c)
        if c == cur or c in banned or c in blocked:
            continue
        cand = x - u[row] - v[c]
        if cand < best:
            best = cand
    if cur != MISS and MISS not in banned:
        cand = -u[row]
        if cand < best:
            best = cand
    return node.cost + best


def partition(matrix, node, config):
    """Split a solved node into disjoint children, one per active row.

    Child k bans row sigma(k)'s current assignment and locks rows
    sigma(1..k-1) to theirs, so the children plus the emitted solution
    tile the parent's solution set exactly.  With lookahead, sigma orders
    rows by decreasing bound: the largest children (fewest locked rows)
    then carry the highest bounds and are the likeliest to be skipped
    without solving.  Otherwise sigma is ascending row order.  Children
    are returned unsolved.
    """
    rows = [int(r) for r in np.nonzero(node.active)[0]]
    if config.lookahead:
        bounds = {r: lookahead_bound(matrix, node, r) for r in rows}
        rows.sort(key=lambda r: (-bounds[r], r))
    children = []
    running = node.active.copy()
    for r in rows:
        forb = dict(node.forbidden)
        cur = int(node.row_to[r])
        forb[r] = forb.get(r, frozenset()) | {cur}
        if config.lookahead and node.admissible:
            # The one-step bound is only a true lower bound when every
            # later path step is nonnegative, i.e. admissible prices.
            lb = bounds[r]
        else:
            lb = node.cost
        children.append(ProblemNode(
            active=running.copy(),
            row_to=node.row_to.copy(),
            u=node.u.copy(),
            v=node.v.copy(),
            forbidden=forb,
            base_cost=node.cost,
            cost=math.nan,
            parent_hypothesis=node.parent_hypothesis,
            lower_bound=lb,
            partition_row=r,
            admissible=node.admissible,
        ))
        running[r] = False
    return children


def solve_node(matrix, node, bound, config, check=False):
    """Re-solve a child by one augmenting path from its partition row.

    The search targets the column the partition row held in the parent
    solution (or the miss option if it missed): exactly then the path
    distance equals the difference between child and parent costs, since
    the broken pair's tight reduced cost cancels the stale row price.
    Ending anywhere else would misprice the child by that column's price.

    Returns "solved" (node filled in), "pruned" (provably worse than
    bound) or "infeasible" (the ban leaves the row no options).
    """
    n_rows, n_cols = matrix.n_rows, matrix.n_cols
    matching = Matching(n_rows, n_cols)
    for r in range(n_rows):
        c = int(node.row_to[r])
        if node.active[r]:
            if c >= 0:
                matching.match(r, c)
            else:
                matching.set_miss(r)
        elif c >= 0:
            matching.match(r, c)
    t = int(node.partition_row)
    freed = matching.lift(t)
    targets = (freed,) if freed >= 0 else (MISS,)
    blocked = _blocked_cols(node)
    duals = DualState(node.u, node.v)
    try:
        if node.admissible:
            path_fn = (shortest_path_sparse if config.sparse
                       else shortest_path_augmented)
            pr = path_fn(matrix, duals, matching, t, targets,
                         bound - node.base_cost, forbidden=node.forbidden,
                         blocked_cols=blocked)
        else:
            pr = shortest_path_exhaustive(matrix, duals, matching, t, targets,
                                          forbidden=node.forbidden,
                                          blocked_cols=blocked)
    except InfeasibleError:
        return "infeasible"
    if pr.status == "pruned":
        return "pruned"
    apply_path(matching, pr, t)
    duals = update_duals(matrix, duals, pr, matching)
    node.u, node.v = duals.u, duals.v
    node.row_to = np.where(matching.row_to == UNSET, MISS,
                           matching.row_to).astype(np.int32)
    node.cost = node.base_cost + pr.distance
    node.solved = True
    node.admissible = admissible_prices(matrix, duals, node.row_to,
                                        node.active, blocked, node.forbidden)
    if check:
        duals.check(matrix, matching.row_to,
                    active_rows=np.nonzero(node.active)[0],
                    blocked_cols=blocked, forbidden=node.forbidden,
                    missing_cols_zero=False, admissible=node.admissible)
    return "solved"


def _new_stats():
    return {
        "nodes_solved": 0,
        "exhaustive_solves": 0,
        "roots_pruned": 0,
        "children_pruned_lookahead": 0,
        "children_pruned_path": 0,
        "children_infeasible": 0,
        "nodes_rejected": 0,
        "peak_queue": 0,
        "peak_live": 0,
        "emitted": 0,
    }


def _kbest_python(matrix, hypotheses, k, config, check):
    variant = "sparse" if config.sparse else "augmented"
    queue = SolutionQueue(k)
    stats = _new_stats()
    # Bound pruning keeps a little slack so float dust in the stored
    # prices can never discard a solution another configuration keeps.
    slack = 64.0 * dual_tolerance(matrix)

    def note_live(extra):
        live = len(queue) + extra
        if live > stats["peak_live"]:
            stats["peak_live"] = live

    for h in range(hypotheses.n_hypotheses):
        rows = np.nonzero(hypotheses.membership[h])[0]
        prior = float(hypotheses.priors[h])
        if config.early_stop:
            bound = queue.worst_bound() - prior + slack
        else:
            bound = math.inf
        note_live(1)
        res = solve_optimal(matrix, row_subset=rows, bound=bound,
                            variant=variant, check=check)
        stats["nodes_solved"] += 1
        if res is None:
            stats["roots_pruned"] += 1
            continue
        assoc, duals = res
        active = np.zeros(hypotheses.n_rows, dtype=bool)
        active[rows] = True
        node = ProblemNode(
            active=active, row_to=assoc.row_to.copy(), u=duals.u, v=duals.v,
            forbidden={}, base_cost=prior, cost=prior + assoc.cost,
            parent_hypothesis=h, lower_bound=prior + assoc.cost, solved=True,
            admissible=admissible_prices(matrix, duals, assoc.row_to, active),
        )
        if not queue.insert(node.cost, node):
            stats["nodes_rejected"] += 1
        if len(queue) > stats["peak_queue"]:
            stats["peak_queue"] = len(queue)

    out = []
    while len(out) < k and len(queue):
        total, node = queue.pop_best()
        prior = float(hypotheses.priors[node.parent_hypothesis])
        out.append((total, Association(node.row_to, total - prior,
                                       parent_hypothesis=node.parent_hypothesis)))
        stats["emitted"] += 1
        if len(out) == k:
            break
        queue.shrink(k - len(out))
        for child in partition(matrix, node, config):
            if config.lookahead and child.lower_bound > queue.worst_bound() + slack:
                stats["children_pruned_lookahead"] += 1
                continue
            note_live(2)
            bound = queue.worst_bound() + slack if config.early_stop else math.inf
            if not child.admissible:
                stats["exhaustive_solves"] += 1
            status = solve_node(matrix, child, bound, config, check)
            stats["nodes_solved"] += 1
            if status == "pruned":
                stats["children_pruned_path"] += 1
                continue
            if status == "infeasible":
                stats["children_infeasible"] += 1
                continue
            if not queue.insert(child.cost, child):
                stats["nodes_rejected"] += 1
            if len(queue) > stats["peak_queue"]:
                stats["peak_queue"] = len(queue)
    return out, stats


def _wrap_output(entries, stats, with_stats):
    assocs = [a for _, a in entries]
    totals = np.asarray([t for t, _ in entries], dtype=np.float64)
    return OutputSet(assocs, totals, stats if with_stats else None)


def kbest_mimo(matrix, hypotheses, k, config=None, *, backend=None,
               check_duals=False, with_stats=False):
    """K lowest-total associations across a bank of input hypotheses.

    Every hypothesis is solved to its own optimum first, seeding a shared
    queue; the partition scheme then interleaves refinement of all of
    them by total cost (prior + association cost).  Outputs tag their
    parent hypothesis, and equal associations from different parents are
    distinct outputs.
    """
    if not isinstance(matrix, SparseCostMatrix):
        raise InvalidInputError("matrix must be a SparseCostMatrix")
    if hypotheses.n_rows != matrix.n_rows:
        raise InvalidInputError("hypothesis membership width != matrix rows")
    k = int(k)
    if k < 0:
        raise InvalidInputError("k must be >= 0")
    if config is None:
        config = SolverConfig.auto_for(matrix)
    name = _backend.resolve(backend)
    if k == 0:
        return OutputSet([], np.zeros(0), _new_stats() if with_stats else None)
    if name == "c":
        entries, stats = _backend.kernels().kbest(
            matrix, hypotheses.membership, hypotheses.priors, k,
            config.early_stop, config.lookahead, config.sparse,
            check_duals)
    else:
        entries, stats = _kbest_python(matrix, hypotheses, k, config,
                                       check_duals)
    return _wrap_output(entries, stats, with_stats)


def kbest_single(matrix, k, config=None, *, row_subset=None, backend=None,
                 check_duals=False, with_stats=False):
    """K-best associations of a single problem (optionally a row subset)."""
    if not isinstance(matrix, SparseCostMatrix):
        raise InvalidInputError("matrix must be a SparseCostMatrix")
    if row_subset is None:
        hyps = HypothesisSet.single(matrix.n_rows)
    else:
        membership = np.zeros((1, matrix.n_rows), dtype=np.uint8)
        membership[0, [int(r) for r in row_subset]] = 1
        hyps = HypothesisSet(membership, np.zeros(1))
    return kbest_mimo(matrix, hyps, k, config, backend=backend,
                      check_duals=check_duals, with_stats=with_stats)

# cython: language_level=3
"""Compiled kernels behind the k-best driver and the Gibbs sampler.

Structured as a mirror of the pure-Python implementation: identical tie
handling, identical price bookkeeping, identical queue sequencing, so
both backends emit identical solution lists and identical statistics.
Only the data layout changes: per-node bans live in a flat mask, paths
and prices in preallocated scratch arrays.
"""

from bisect import insort

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()

cdef int MISS = -1
cdef int UNSET = -2

cdef int ST_FOUND = 0
cdef int ST_PRUNED = 1
cdef int ST_INFEASIBLE = 2

cdef int ENTRY_NONE = -1
cdef int ENTRY_ROW = 0
cdef int ENTRY_COL = 1


# ---------------------------------------------------------------------------
# minimal binary min-heap over (key, col, seq), matching tuple ordering

cdef class _Heap:
    cdef double[::1] key
    cdef cnp.int32_t[::1] col
    cdef cnp.int64_t[::1] seq
    cdef cnp.int32_t[::1] src
    cdef Py_ssize_t size
    cdef cnp.int64_t next_seq

    def __cinit__(self, Py_ssize_t capacity):
        if capacity < 4:
            capacity = 4
        self._alloc(capacity)
        self.size = 0
        self.next_seq = 0

    cdef _alloc(self, Py_ssize_t capacity):
        self.key = np.empty(capacity, dtype=np.float64)
        self.col = np.empty(capacity, dtype=np.int32)
        self.seq = np.empty(capacity, dtype=np.int64)
        self.src = np.empty(capacity, dtype=np.int32)

    cdef void clear(self):
        self.size = 0
        self.next_seq = 0

    cdef bint _less(self, Py_ssize_t a, Py_ssize_t b):
        if self.key[a] != self.key[b]:
            return self.key[a] < self.key[b]
        if self.col[a] != self.col[b]:
            return self.col[a] < self.col[b]
        return self.seq[a] < self.seq[b]

    cdef void _swap(self, Py_ssize_t a, Py_ssize_t b):
        self.key[a], self.key[b] = self.key[b], self.key[a]
        self.col[a], self.col[b] = self.col[b], self.col[a]
        self.seq[a], self.seq[b] = self.seq[b], self.seq[a]
        self.src[a], self.src[b] = self.src[b], self.src[a]

    cdef void push(self, double key, int col, int src) except *:
        cdef Py_ssize_t i, parent
        if self.size == self.key.shape[0]:
            old = (np.asarray(self.key).copy(), np.asarray(self.col).copy(),
                   np.asarray(self.seq).copy(), np.asarray(self.src).copy())
            self._alloc(2 * self.size)
            np.asarray(self.key)[:self.size] = old[0]
            np.asarray(self.col)[:self.size] = old[1]
            np.asarray(self.seq)[:self.size] = old[2]
            np.asarray(self.src)[:self.size] = old[3]
        i = self.size
        self.key[i] = key
        self.col[i] = col
        self.seq[i] = self.next_seq
        self.src[i] = src
        self.next_seq += 1
        self.size += 1
        while i > 0:
            parent = (i - 1) >> 1
            if self._less(i, parent):
                self._swap(i, parent)
                i = parent
            else:
                break

    cdef void pop(self, double* key, int* col, int* src):
        cdef Py_ssize_t i = 0, left, right, best
        key[0] = self.key[0]
        col[0] = self.col[0]
        src[0] = self.src[0]
        self.size -= 1
        if self.size == 0:
            return
        self._swap(0, self.size)
        while True:
            left = 2 * i + 1
            right = left + 1
            best = i
            if left < self.size and self._less(left, best):
                best = left
            if right < self.size and self._less(right, best):
                best = right
            if best == i:
                return
            self._swap(i, best)
            i = best


# ---------------------------------------------------------------------------
# solver state shared by every search in one driver call

cdef class _Kernel:
    cdef const cnp.int64_t[::1] indptr
    cdef const cnp.int32_t[::1] mcols
    cdef const double[::1] mcosts
    cdef int n_rows, n_cols
    cdef double eps, floor

    # per-solve matching and prices
    cdef cnp.int32_t[::1] row_to, col_to
    cdef double[::1] u, v
    # per-solve constraint masks; ban has a miss slot at column n_cols
    cdef cnp.uint8_t[:, ::1] ban
    cdef cnp.uint8_t[::1] blocked, target
    # search scratch
    cdef double[::1] dist
    cdef cnp.int32_t[::1] pathback
    cdef cnp.uint8_t[::1] used
    cdef _Heap heap
    # search outputs
    cdef double p_t
    cdef int terminal, entry_kind, entry_idx

    def __cinit__(self, indptr, mcols, mcosts, int n_rows, int n_cols,
                  double max_abs_cost):
        self.indptr = indptr
        self.mcols = mcols
        self.mcosts = mcosts
        self.n_rows = n_rows
        self.n_cols = n_cols
        self.eps = 1e-9 * (1.0 + max_abs_cost)
        self.floor = 1e-3 * self.eps
        self.row_to = np.empty(max(n_rows, 1), dtype=np.int32)
        self.col_to = np.empty(max(n_cols, 1), dtype=np.int32)
        self.u = np.zeros(max(n_rows, 1))
        self.v = np.zeros(max(n_cols, 1))
        self.ban = np.zeros((max(n_rows, 1), n_cols + 1), dtype=np.uint8)
        self.blocked = np.zeros(n_cols + 1, dtype=np.uint8)
        self.target = np.zeros(n_cols + 1, dtype=np.uint8)
        self.dist = np.empty(n_cols + 1)
        self.pathback = np.empty(n_cols + 1, dtype=np.int32)
        self.used = np.empty(n_cols + 1, dtype=np.uint8)
        self.heap = _Heap(2 * (len(mcols) + n_cols) + 16)

    cdef double pair_cost(self, int r, int c) except *:
        cdef cnp.int64_t lo = self.indptr[r], hi = self.indptr[r + 1], mid
        while lo < hi:
            mid = (lo + hi) >> 1
            if self.mcols[mid] < c:
                lo = mid + 1
            else:
                hi = mid
        if lo < self.indptr[r + 1] and self.mcols[lo] == c:
            return self.mcosts[lo]
        raise RuntimeError(f"pair ({r}, {c}) is not in the structure")

    # -- best-first search (requires admissible prices) -------------------

    cdef int fast_path(self, int new_row, double bound,
                       bint sparse) except -1:
        """Single augmenting path; scan selection or heap selection."""
        cdef int n_cols = self.n_cols, n_rows = self.n_rows
        cdef int theta = n_cols, row_theta = n_rows
        cdef int row, col, c, r2, src
        cdef double sp, p, best_d
        cdef cnp.int64_t k
        cdef bint already_augmented = False

        self.dist[:] = INFINITY
        self.pathback[:] = -1
        self.used[:] = 0
        self.entry_kind = ENTRY_NONE
        if sparse:
            self.heap.clear()

        sp = 0.0
        row = new_row
        while True:
            if row != row_theta and row >= 0:
                for k in range(self.indptr[row], self.indptr[row + 1]):
                    c = self.mcols[k]
                    if self.used[c] or self.blocked[c] or self.ban[row, c]:
                        continue
                    p = sp + self.mcosts[k] - self.u[row] - self.v[c]
                    if p < self.dist[c]:
                        self.dist[c] = p
                        self.pathback[c] = row
                        if sparse:
                            self.heap.push(p, c, row)
                if not self.used[theta] and not self.ban[row, theta]:
                    p = sp - self.u[row]
                    if p < self.dist[theta]:
                        self.dist[theta] = p
                        self.pathback[theta] = row
                        if sparse:
                            self.heap.push(p, theta, row)
            elif row == row_theta and not already_augmented:
                # Leave the augmentation: onto any column (a claimed one
                # hands its row on, continuing the path), or through any
                # currently missing row's pair edges.
                for c in range(n_cols):
                    if not self.used[c] and not self.blocked[c]:
                        p = sp - self.v[c]
                        if p < self.dist[c]:
                            self.dist[c] = p
                            self.pathback[c] = row_theta
                            if sparse:
                                self.heap.push(p, c, row_theta)
                for r2 in range(n_rows):
                    if self.row_to[r2] != MISS:
                        continue
                    for k in range(self.indptr[r2], self.indptr[r2 + 1]):
                        c = self.mcols[k]
                        if self.used[c] or self.blocked[c] \
                                or self.ban[r2, c]:
                            continue
                        p = sp + self.mcosts[k] - self.u[r2] - self.v[c]
                        if p < self.dist[c]:
                            self.dist[c] = p
                            self.pathback[c] = r2
                            if sparse:
                                self.heap.push(p, c, r2)
                already_augmented = True

            if sparse:
                col = -1
                while self.heap.size > 0:
                    self.heap.pop(&p, &c, &src)
                    if not self.used[c] and not self.blocked[c]:
                        col = c
                        sp = p
                        self.pathback[c] = src
                        break
                if col < 0:
                    return ST_INFEASIBLE
            else:
                col = -1
                best_d = INFINITY
                for c in range(n_cols + 1):
                    if not self.used[c] and not self.blocked[c] \
                            and self.dist[c] < best_d:
                        best_d = self.dist[c]
                        col = c
                if col < 0:
                    return ST_INFEASIBLE
                sp = best_d
            self.used[col] = True
            if sp > bound:
                return ST_PRUNED
            if col == theta:
                if self.entry_kind == ENTRY_NONE:
                    self.entry_kind = ENTRY_ROW
                    self.entry_idx = self.pathback[theta]
                if self.target[theta]:
                    self.p_t = sp
                    self.terminal = MISS
                    return ST_FOUND
                row = row_theta
            elif self.target[col]:
                # a targeted freed column ends the search the moment it
                # is reached, keeping path cost equal to the cost delta
                self.p_t = sp
                self.terminal = col
                return ST_FOUND
            elif self.col_to[col] == MISS:
                # popping a non-target missing column enters the
                # augmentation
                if not self.used[theta]:
                    self.used[theta] = True
                    self.dist[theta] = sp
                    self.entry_kind = ENTRY_COL
                    self.entry_idx = col
                    if self.target[theta]:
                        self.p_t = sp
                        self.terminal = MISS
                        return ST_FOUND
                row = row_theta
            else:
                row = self.col_to[col]

    # -- label-correcting search (no price preconditions) ------------------

    cdef bint _relax(self, int c, double val, int src) except -1:
        if val < self.dist[c] - self.floor:
            self.dist[c] = val
            self.pathback[c] = src
            self.heap.push(val, c, src)
            return True
        return False

    cdef void _scan_row(self, int r, double sp, bint with_theta) except *:
        cdef int c, theta = self.n_cols
        cdef cnp.int64_t k
        for k in range(self.indptr[r], self.indptr[r + 1]):
            c = self.mcols[k]
            if self.blocked[c] or self.ban[r, c]:
                continue
            self._relax(c, sp + self.mcosts[k] - self.u[r] - self.v[c], r)
        if with_theta and not self.ban[r, theta]:
            if self._relax(theta, sp - self.u[r], r):
                self.entry_kind = ENTRY_ROW
                self.entry_idx = r

    cdef int exhaustive_path(self, int new_row) except -1:
        """Label-correcting search tolerating warm inadmissible prices."""
        cdef int n_cols = self.n_cols, n_rows = self.n_rows
        cdef int theta = n_cols, row_theta = n_rows
        cdef int c, c2, r, r2, src, best
        cdef double key
        cdef long budget = 8 * (<long> n_cols + 2) * (<long> n_cols + 2) + 64

        self.dist[:] = INFINITY
        self.pathback[:] = -1
        self.heap.clear()
        self.entry_kind = ENTRY_NONE

        self._scan_row(new_row, 0.0, True)
        while self.heap.size > 0:
            budget -= 1
            if budget < 0:
                raise RuntimeError("path search failed to converge")
            self.heap.pop(&key, &c, &src)
            if key != self.dist[c]:
                continue
            if c == theta:
                for c2 in range(n_cols):
                    if not self.blocked[c2]:
                        self._relax(c2, key - self.v[c2], row_theta)
                for r2 in range(n_rows):
                    if self.row_to[r2] == MISS:
                        self._scan_row(r2, key, False)
                continue
            r = self.col_to[c]
            if r == MISS:
                if self.target[c]:
                    # a freed target column is a bare endpoint: detouring
                    # from it would admit a negative cycle through any
                    # missing row pricing below zero on it
                    continue
                if self._relax(theta, key + self.v[c], -1):
                    self.entry_kind = ENTRY_COL
                    self.entry_idx = c
                continue
            self._scan_row(r, key, True)

        best = -1
        for c in range(n_cols + 1):
            if self.target[c] and self.dist[c] != INFINITY:
                if best < 0 or self.dist[c] < self.dist[best]:
                    best = c
        if best < 0:
            return ST_INFEASIBLE
        self.p_t = self.dist[best]
        self.terminal = MISS if best == theta else best
        return ST_FOUND

    # -- applying a found path --------------------------------------------

    cdef int _enter_block(self, int new_row):
        cdef int prev
        if self.entry_kind == ENTRY_ROW:
            if self.entry_idx == new_row:
                self.row_to[new_row] = MISS
                return -1
            prev = self.row_to[self.entry_idx]
            self.row_to[self.entry_idx] = MISS
            return prev
        return self.entry_idx  # entered via a column: it gets matched next

    cdef void apply_path(self, int new_row) except *:
        cdef int row_theta = self.n_rows
        cdef int cur, back, prev
        cdef long steps = self.n_rows + 2
        if self.terminal == MISS:
            cur = self._enter_block(new_row)
            if cur < 0:
                return
        else:
            cur = self.terminal
        while True:
            steps -= 1
            if steps < 0:
                raise RuntimeError("augmentation walk failed to terminate")
            back = self.pathback[cur]
            if back == row_theta:
                # this column is fed by the augmentation: it ends up missing
                self.col_to[cur] = MISS
                cur = self._enter_block(new_row)
                if cur < 0:
                    return
                continue
            prev = self.row_to[back]
            self.row_to[back] = cur
            self.col_to[cur] = back
            if back == new_row:
                return
            if prev == MISS:
                # a missing row re-entering service; it is fed by the block
                cur = self._enter_block(new_row)
                if cur < 0:
                    return
            else:
                cur = prev

    cdef void update_duals(self) except *:
        cdef int c, r, j
        for c in range(self.n_cols):
            if self.dist[c] < self.p_t:
                self.v[c] -= self.p_t - self.dist[c]
        for r in range(self.n_rows):
            j = self.row_to[r]
            if j == UNSET:
                continue
            self.u[r] = 0.0 if j == MISS else self.pair_cost(r, j) - self.v[j]

    # -- price-state classification and debug checks ----------------------

    cdef bint admissible(self, const cnp.uint8_t[::1] active):
        cdef int r, c, theta = self.n_cols
        cdef cnp.int64_t k
        cdef cnp.uint8_t[::1] matched = self.used  # search scratch, reusable
        matched[:] = 0
        for r in range(self.n_rows):
            if self.row_to[r] >= 0:
                matched[self.row_to[r]] = 1
        for r in range(self.n_rows):
            if not active[r]:
                continue
            if self.row_to[r] >= 0 and self.u[r] > self.eps \
                    and not self.ban[r, theta]:
                return False
            for k in range(self.indptr[r], self.indptr[r + 1]):
                c = self.mcols[k]
                if self.blocked[c] or self.ban[r, c]:
                    continue
                if self.mcosts[k] - self.u[r] - self.v[c] < -self.eps:
                    return False
        for c in range(self.n_cols):
            if self.blocked[c]:
                continue
            if self.v[c] > self.eps:
                return False
            if not matched[c] and self.v[c] < -self.eps:
                return False
        return True

    cdef void check_duals(self, active_rows, bint missing_cols_zero,
                          bint admissible) except *:
        cdef int r, c, j, theta = self.n_cols
        cdef double red
        cdef cnp.int64_t k
        cdef cnp.uint8_t[::1] matched = self.used
        matched[:] = 0
        for r in range(self.n_rows):
            if self.row_to[r] >= 0:
                matched[self.row_to[r]] = 1
        for r in active_rows:
            j = self.row_to[r]
            if admissible and not self.ban[r, theta] and self.u[r] > self.eps:
                raise AssertionError(f"u[{r}] = {self.u[r]} > 0")
            if j == MISS:
                if self.ban[r, theta]:
                    raise AssertionError(f"row {r} is missing despite ban")
                if abs(self.u[r]) > self.eps:
                    raise AssertionError(
                        f"missing row {r} has u = {self.u[r]}")
            for k in range(self.indptr[r], self.indptr[r + 1]):
                c = self.mcols[k]
                if self.blocked[c] or self.ban[r, c]:
                    if j == c:
                        raise AssertionError(
                            f"matched pair ({r}, {c}) is excluded")
                    continue
                red = self.mcosts[k] - self.u[r] - self.v[c]
                if admissible and red < -self.eps:
                    raise AssertionError(
                        f"pair ({r}, {c}) has reduced cost {red} < 0")
                if j == c and abs(red) > self.eps:
                    raise AssertionError(
                        f"matched pair ({r}, {c}) not tight: {red}")
        for c in range(self.n_cols):
            if self.blocked[c]:
                continue
            if self.v[c] > self.eps:
                raise AssertionError(f"v[{c}] = {self.v[c]} > 0")
            if missing_cols_zero and not matched[c] \
                    and abs(self.v[c]) > self.eps:
                raise AssertionError(f"missing column {c} has v = {self.v[c]}")

    # -- constraint mask plumbing ------------------------------------------

    cdef void set_bans(self, list bans, cnp.uint8_t value) except *:
        cdef int r, c
        for r, c in bans:
            self.ban[r, c] = value

    cdef void load_blocked(self, const cnp.uint8_t[::1] active,
                           const cnp.int32_t[::1] node_row_to):
        cdef int r
        self.blocked[:] = 0
        for r in range(self.n_rows):
            if not active[r] and node_row_to[r] >= 0:
                self.blocked[node_row_to[r]] = 1

    cdef double lookahead_bound(self, int row, double node_cost):
        """Cheapest possible child total after re-assigning ``row``."""
        cdef int c, cur = self.row_to[row], theta = self.n_cols
        cdef double best = INFINITY, cand
        cdef cnp.int64_t k
        for k in range(self.indptr[row], self.indptr[row + 1]):
            c = self.mcols[k]
            if c == cur or self.ban[row, c] or self.blocked[c]:
                continue
            cand = self.mcosts[k] - self.u[row] - self.v[c]
            if cand < best:
                best = cand
        if cur != MISS and not self.ban[row, theta]:
            cand = -self.u[row]
            if cand < best:
                best = cand
        return node_cost + best


# ---------------------------------------------------------------------------
# partition-tree node: the compiled twin of the driver's ProblemNode

cdef class _Node:
    cdef public object active      # uint8[n_rows]
    cdef public object row_to      # int32[n_rows], MISS for locked-out rows
    cdef public object u, v        # float64 prices
    cdef public list bans          # [(row, col-or-n_cols), ...]
    cdef public double base_cost, cost, lower_bound
    cdef public int parent_h, partition_row
    cdef public bint admissible


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


cdef class _Queue:
    """Bounded best-first queue ordered by (cost, insertion sequence)."""

    cdef list items
    cdef Py_ssize_t capacity
    cdef long seq

    def __cinit__(self, Py_ssize_t capacity):
        self.items = []
        self.capacity = capacity
        self.seq = 0

    cdef double worst_bound(self) except *:
        cdef Py_ssize_t n = len(self.items)
        if n < self.capacity:
            return INFINITY
        return self.items[n - 1][0] if n else -INFINITY

    cdef bint insert(self, double cost, node) except -1:
        cdef Py_ssize_t n = len(self.items)
        if n < self.capacity:
            insort(self.items, (cost, self.seq, node))
            self.seq += 1
            return True
        if n and cost < self.items[n - 1][0]:
            insort(self.items, (cost, self.seq, node))
            self.seq += 1
            self.items.pop()
            return True
        return False

    cdef void shrink(self, Py_ssize_t capacity) except *:
        self.capacity = capacity
        while len(self.items) > self.capacity:
            self.items.pop()


cdef _public_row_to(_Kernel kern):
    """Matching row_to with locked-out rows mapped back to the miss code."""
    raw = np.asarray(kern.row_to)[:kern.n_rows]
    return np.where(raw == UNSET, MISS, raw).astype(np.int32)


cdef int _solve_root(_Kernel kern, _Node node, double bound, bint sparse,
                     bint check) except -1:
    """From-scratch solve of one hypothesis; ST_PRUNED when over bound."""
    cdef int n_rows = kern.n_rows, n_cols = kern.n_cols
    cdef int r, status, i
    cdef double cum = 0.0, path_bound, floor_r
    cdef const cnp.uint8_t[::1] active = node.active
    cdef cnp.int64_t k

    kern.row_to[:] = UNSET
    kern.col_to[:] = MISS
    u = np.zeros(n_rows)
    v = np.zeros(n_cols)
    kern.u = u
    kern.v = v
    kern.blocked[:] = 0
    kern.target[:] = 0
    kern.target[n_cols] = 1

    path_rows = [r for r in range(n_rows) if active[r]]
    # Valid completion bound per remaining row even with negative costs:
    # any future augmentation from row r costs at least min(0, min C[r, :]).
    suffix = np.zeros(len(path_rows) + 1)
    for i in range(len(path_rows) - 1, -1, -1):
        r = path_rows[i]
        floor_r = 0.0
        for k in range(kern.indptr[r], kern.indptr[r + 1]):
            if kern.mcosts[k] < floor_r:
                floor_r = kern.mcosts[k]
        suffix[i] = suffix[i + 1] + floor_r

    for i in range(len(path_rows)):
        r = path_rows[i]
        path_bound = bound - cum - suffix[i + 1]
        status = kern.fast_path(r, path_bound, sparse)
        if status == ST_PRUNED:
            return ST_PRUNED
        if status == ST_INFEASIBLE:
            raise RuntimeError("no target column is reachable")
        kern.apply_path(r)
        kern.update_duals()
        cum += kern.p_t
        if check:
            kern.check_duals(path_rows[:i + 1], True, True)

    node.row_to = _public_row_to(kern)
    node.u = u
    node.v = v
    node.cost = node.base_cost + cum
    node.admissible = kern.admissible(active)
    return ST_FOUND


cdef int _solve_child(_Kernel kern, _Node node, double bound, bint sparse,
                      bint check) except -1:
    """Re-solve a child by one augmenting path from its partition row."""
    cdef int n_rows = kern.n_rows, n_cols = kern.n_cols
    cdef int r, t, freed, status
    cdef const cnp.uint8_t[::1] active = node.active
    cdef const cnp.int32_t[::1] node_row_to = node.row_to

    for r in range(n_rows):
        if active[r] or node_row_to[r] >= 0:
            kern.row_to[r] = node_row_to[r]
        else:
            kern.row_to[r] = UNSET
    kern.col_to[:] = MISS
    for r in range(n_rows):
        if kern.row_to[r] >= 0:
            kern.col_to[kern.row_to[r]] = r

    t = node.partition_row
    freed = kern.row_to[t]
    if freed >= 0:
        kern.col_to[freed] = MISS
    kern.row_to[t] = UNSET

    u = np.array(node.u, dtype=np.float64)
    v = np.array(node.v, dtype=np.float64)
    kern.u = u
    kern.v = v
    kern.load_blocked(active, node_row_to)
    kern.target[:] = 0
    kern.target[freed if freed >= 0 else n_cols] = 1
    kern.set_bans(node.bans, 1)
    try:
        if node.admissible:
            status = kern.fast_path(t, bound - node.base_cost, sparse)
        else:
            status = kern.exhaustive_path(t)
        if status != ST_FOUND:
            return status
        kern.apply_path(t)
        kern.update_duals()
        node.row_to = _public_row_to(kern)
        node.u = u
        node.v = v
        node.cost = node.base_cost + kern.p_t
        node.admissible = kern.admissible(active)
        if check:
            kern.check_duals(
                [r for r in range(n_rows) if active[r]], False,
                node.admissible)
    finally:
        kern.set_bans(node.bans, 0)
    return ST_FOUND


cdef list _partition(_Kernel kern, _Node node, bint lookahead):
    """Split a solved node into disjoint children, one per active row.

    With lookahead the children are ordered by decreasing bound so the
    largest (least constrained) ones are the likeliest to be skipped.
    """
    cdef int r, cur
    cdef _Node child
    cdef list children = []
    cdef const cnp.uint8_t[::1] active = node.active
    cdef const cnp.int32_t[::1] node_row_to = node.row_to

    rows = [r for r in range(kern.n_rows) if active[r]]
    if lookahead:
        # the one-step bounds need the node's matching and masks in place
        for r in range(kern.n_rows):
            if active[r] or node_row_to[r] >= 0:
                kern.row_to[r] = node_row_to[r]
            else:
                kern.row_to[r] = UNSET
        kern.u = np.asarray(node.u)
        kern.v = np.asarray(node.v)
        kern.load_blocked(active, node_row_to)
        kern.set_bans(node.bans, 1)
        bounds = {r: kern.lookahead_bound(r, node.cost) for r in rows}
        kern.set_bans(node.bans, 0)
        rows.sort(key=lambda rr: (-bounds[rr], rr))
    running = np.asarray(node.active).copy()
    for r in rows:
        cur = node_row_to[r]
        child = _Node()
        child.active = running.copy()
        child.row_to = np.asarray(node.row_to).copy()
        child.u = np.asarray(node.u).copy()
        child.v = np.asarray(node.v).copy()
        child.bans = node.bans + [(r, cur if cur >= 0 else kern.n_cols)]
        child.base_cost = node.cost
        child.cost = 0.0
        child.parent_h = node.parent_h
        # the one-step bound is only a true lower bound when every later
        # path step is nonnegative, i.e. admissible prices
        child.lower_bound = bounds[r] if (lookahead and node.admissible) \
            else node.cost
        child.partition_row = r
        child.admissible = node.admissible
        children.append(child)
        running[r] = False
    return children


def kbest_csr(indptr, cols, costs, n_rows, n_cols, membership, priors,
              k, early_stop, lookahead, sparse, check_duals, max_abs_cost):
    """K lowest-total associations across a bank of input hypotheses.

    Returns (totals, row_to, parents, stats): float64[E], int32[E, M],
    int32[E] and the counter dict, in emission order.
    """
    cdef _Kernel kern = _Kernel(
        np.ascontiguousarray(indptr, dtype=np.int64),
        np.ascontiguousarray(cols, dtype=np.int32),
        np.ascontiguousarray(costs, dtype=np.float64),
        int(n_rows), int(n_cols), float(max_abs_cost))
    cdef _Queue queue = _Queue(int(k))
    cdef _Node node, child
    cdef int h, status, n_hyp
    cdef double bound, prior, total
    cdef double slack = 64.0 * kern.eps
    cdef bint b_early = early_stop, b_look = lookahead, b_sparse = sparse
    cdef bint b_check = check_duals

    stats = _new_stats()
    membership = np.ascontiguousarray(membership, dtype=np.uint8)
    priors = np.ascontiguousarray(priors, dtype=np.float64)
    n_hyp = membership.shape[0]

    def note_live(extra):
        live = len(queue.items) + extra
        if live > stats["peak_live"]:
            stats["peak_live"] = live

    for h in range(n_hyp):
        prior = priors[h]
        bound = queue.worst_bound() - prior + slack if b_early else INFINITY
        note_live(1)
        node = _Node()
        node.active = membership[h].copy()
        node.bans = []
        node.base_cost = prior
        node.parent_h = h
        node.partition_row = -1
        status = _solve_root(kern, node, bound, b_sparse, b_check)
        stats["nodes_solved"] += 1
        if status == ST_PRUNED:
            stats["roots_pruned"] += 1
            continue
        node.lower_bound = node.cost
        if not queue.insert(node.cost, node):
            stats["nodes_rejected"] += 1
        if len(queue.items) > stats["peak_queue"]:
            stats["peak_queue"] = len(queue.items)

    out_totals = []
    out_rows = []
    out_parents = []
    while len(out_totals) < k and queue.items:
        total, _, node = queue.items.pop(0)
        out_totals.append(total)
        out_rows.append(np.asarray(node.row_to))
        out_parents.append(node.parent_h)
        stats["emitted"] += 1
        if len(out_totals) == k:
            break
        queue.shrink(k - len(out_totals))
        for child in _partition(kern, node, b_look):
            if b_look and child.lower_bound > queue.worst_bound() + slack:
                stats["children_pruned_lookahead"] += 1
                continue
            note_live(2)
            bound = queue.worst_bound() + slack if b_early else INFINITY
            if not child.admissible:
                stats["exhaustive_solves"] += 1
            status = _solve_child(kern, child, bound, b_sparse, b_check)
            stats["nodes_solved"] += 1
            if status == ST_PRUNED:
                stats["children_pruned_path"] += 1
                continue
            if status == ST_INFEASIBLE:
                stats["children_infeasible"] += 1
                continue
            if not queue.insert(child.cost, child):
                stats["nodes_rejected"] += 1
            if len(queue.items) > stats["peak_queue"]:
                stats["peak_queue"] = len(queue.items)

    totals_arr = np.asarray(out_totals, dtype=np.float64)
    rows_arr = (np.vstack(out_rows).astype(np.int32) if out_rows
                else np.zeros((0, int(n_rows)), dtype=np.int32))
    parents_arr = np.asarray(out_parents, dtype=np.int32)
    return totals_arr, rows_arr, parents_arr, stats


def gibbs_csr(indptr, cols, costs, n_rows, n_cols, n_sweeps, uniforms):
    """Full-sweep Gibbs sampler; one recorded association per sweep.

    Consumes the pregenerated uniform stream exactly like the reference
    loop, so both backends walk identical sample paths.
    """
    cdef const cnp.int64_t[::1] iptr = \
        np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const cnp.int32_t[::1] ccols = \
        np.ascontiguousarray(cols, dtype=np.int32)
    cdef const double[::1] ccosts = \
        np.ascontiguousarray(costs, dtype=np.float64)
    cdef const double[::1] uni = \
        np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef int m = int(n_rows), sweeps = int(n_sweeps)
    cdef int s, r, c, pick, old
    cdef cnp.int64_t k, pos = 0
    cdef double total, target, acc, pick_cost, total_cost

    cdef const double[::1] weights = \
        np.exp(np.minimum(-np.asarray(ccosts), 700.0))
    cdef cnp.int32_t[::1] row_to = np.full(max(m, 1), MISS, dtype=np.int32)
    cdef cnp.int32_t[::1] col_to = \
        np.full(max(int(n_cols), 1), MISS, dtype=np.int32)
    cdef double[::1] cur_cost = np.zeros(max(m, 1))
    out = np.empty((sweeps, m), dtype=np.int32)
    out_costs = np.empty(sweeps)
    cdef cnp.int32_t[:, :] out_v = out
    cdef double[::1] oc = out_costs

    for s in range(sweeps):
        for r in range(m):
            total = 1.0
            for k in range(iptr[r], iptr[r + 1]):
                c = ccols[k]
                if col_to[c] == MISS or col_to[c] == r:
                    total += weights[k]
            target = uni[pos] * total
            pos += 1
            acc = 1.0
            pick = MISS
            pick_cost = 0.0
            if target >= acc:
                for k in range(iptr[r], iptr[r + 1]):
                    c = ccols[k]
                    if col_to[c] == MISS or col_to[c] == r:
                        acc += weights[k]
                        if target < acc:
                            pick = c
                            pick_cost = ccosts[k]
                            break
            old = row_to[r]
            if old != MISS and old != pick:
                col_to[old] = MISS
            if pick != MISS:
                col_to[pick] = r
            row_to[r] = pick
            cur_cost[r] = pick_cost
        for r in range(m):
            out_v[s, r] = row_to[r]
        total_cost = 0.0
        for r in range(m):
            total_cost += cur_cost[r]
        oc[s] = total_cost
    return out, out_costs

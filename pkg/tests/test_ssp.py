"""Path searches, matching rewires, dual updates, single-best solves."""

import math

import numpy as np
import pytest

from kbassoc import (MISS, DualState, InfeasibleError, InvalidInputError,
                     Matching, SparseCostMatrix, association_nll,
                     solve_optimal)
from kbassoc.oracle import kbest_bruteforce
from kbassoc.ssp import (UNSET, admissible_prices, apply_path,
                         shortest_path_augmented, shortest_path_dense,
                         shortest_path_exhaustive, shortest_path_sparse,
                         update_duals)

from util import random_matrix

M22 = SparseCostMatrix.from_dense(np.array([[-3.0, -1.0], [-2.0, -4.0]]))

FAST_SEARCHES = [shortest_path_augmented, shortest_path_sparse]
ALL_SEARCHES = FAST_SEARCHES + [shortest_path_exhaustive]


def m22_matching(row_to):
    return Matching.from_row_to(np.asarray(row_to, dtype=np.int32), 2)


class TestMatching:
    def test_initial_state(self):
        m = Matching(3, 2)
        assert list(m.row_to) == [UNSET] * 3
        assert list(m.col_to) == [MISS] * 2

    def test_match_and_lift(self):
        m = Matching(2, 2)
        m.match(0, 1)
        assert m.col_to[1] == 0
        assert m.lift(0) == 1
        assert m.row_to[0] == UNSET and m.col_to[1] == MISS

    def test_lift_missing_row(self):
        m = Matching(1, 1)
        m.set_miss(0)
        assert m.lift(0) == MISS

    def test_from_row_to(self):
        m = Matching.from_row_to(np.array([1, MISS, UNSET]), 3)
        assert list(m.row_to) == [1, MISS, UNSET]
        assert list(m.col_to) == [MISS, 0, MISS]


class TestInitialSolve:
    def test_m22_reference(self):
        assoc, duals = solve_optimal(M22, check=True)
        assert assoc.cost == -7.0
        assert list(assoc.row_to) == [0, 1]
        assert duals.u.tolist() == [-3.0, -4.0]
        assert duals.v.tolist() == [0.0, 0.0]

    def test_row_subset(self):
        assoc, _ = solve_optimal(M22, row_subset=[1])
        assert list(assoc.row_to) == [MISS, 1]
        assert assoc.cost == -4.0

    def test_empty_subset_all_miss(self):
        assoc, _ = solve_optimal(M22, row_subset=[])
        assert list(assoc.row_to) == [MISS, MISS]
        assert assoc.cost == 0.0

    def test_forbidden_column(self):
        # without (1,1) the three-way tie at -3 is the best left
        assoc, _ = solve_optimal(M22, forbidden={1: {1}})
        assert assoc.cost == -3.0
        assert assoc.row_to[1] != 1
        assert association_nll(M22, assoc.row_to) == -3.0

    def test_forbidden_miss(self):
        # banning row 0's miss changes nothing here (it prefers matching)
        assoc, _ = solve_optimal(M22, forbidden={0: {MISS}})
        assert assoc.cost == -7.0

    def test_fixed_assignment(self):
        assoc, _ = solve_optimal(M22, fixed={0: 1})
        assert list(assoc.row_to) == [1, 0]
        assert assoc.cost == -3.0

    def test_fixed_miss(self):
        assoc, _ = solve_optimal(M22, fixed={0: MISS})
        assert list(assoc.row_to) == [MISS, 1]
        assert assoc.cost == -4.0

    def test_fixed_row_twice_rejected(self):
        with pytest.raises(InvalidInputError):
            solve_optimal(M22, fixed=[(0, 0), (0, 1)])

    def test_fixed_column_twice_rejected(self):
        with pytest.raises(InvalidInputError):
            solve_optimal(M22, fixed=[(0, 0), (1, 0)])

    def test_fixed_absent_pair_rejected(self):
        gated = SparseCostMatrix.from_pairs(2, 2, [(0, 0, 1.0), (1, 1, 2.0)])
        with pytest.raises(InfeasibleError):
            solve_optimal(gated, fixed={0: 1})

    def test_row_subset_out_of_range(self):
        with pytest.raises(InvalidInputError):
            solve_optimal(M22, row_subset=[5])

    def test_unknown_variant(self):
        with pytest.raises(InvalidInputError):
            solve_optimal(M22, variant="dense")

    def test_infeasible_when_row_fully_banned(self):
        with pytest.raises(InfeasibleError):
            solve_optimal(M22, forbidden={0: {0, 1, MISS}})

    def test_no_columns(self):
        m = SparseCostMatrix.from_pairs(3, 0, [])
        assoc, _ = solve_optimal(m, check=True)
        assert list(assoc.row_to) == [MISS] * 3
        assert assoc.cost == 0.0

    def test_no_rows(self):
        m = SparseCostMatrix.from_pairs(0, 3, [])
        assoc, _ = solve_optimal(m)
        assert assoc.row_to.size == 0
        assert assoc.cost == 0.0

    def test_positive_costs_prefer_miss(self):
        m = SparseCostMatrix.from_dense(np.array([[2.0]]))
        assoc, _ = solve_optimal(m)
        assert list(assoc.row_to) == [MISS]
        assert assoc.cost == 0.0

    def test_initial_duals_shape_checked(self):
        with pytest.raises(InvalidInputError):
            solve_optimal(M22, initial_duals=DualState.zeros(3, 2))


class TestDenseSearch:
    """The real-columns-only search used as a building block."""

    C = SparseCostMatrix.from_dense(np.array([[1.0, 3.0], [2.0, 4.0]]))

    def state(self):
        m = Matching(2, 2)
        m.match(0, 0)
        return m, DualState(np.array([1.0, 0.0]), np.array([0.0, 0.0]))

    def test_alternating_path(self):
        m, d = self.state()
        pr = shortest_path_dense(self.C, d, m, 1, (1,))
        assert pr.status == "found"
        assert pr.distance == 4.0 and pr.terminal == 1
        assert pr.popped == [0, 1]

    def test_bound_prunes(self):
        m, d = self.state()
        pr = shortest_path_dense(self.C, d, m, 1, (1,), 3.0)
        assert pr.status == "pruned"
        assert math.isnan(pr.distance)

    def test_pruned_path_rejected_by_apply(self):
        m, d = self.state()
        pr = shortest_path_dense(self.C, d, m, 1, (1,), 3.0)
        with pytest.raises(InvalidInputError):
            apply_path(m, pr, 1)

    def test_miss_target_rejected(self):
        m, d = self.state()
        with pytest.raises(InvalidInputError):
            shortest_path_dense(self.C, d, m, 1, (MISS,))

    def test_empty_targets_rejected(self):
        m, d = self.state()
        with pytest.raises(InvalidInputError):
            shortest_path_dense(self.C, d, m, 1, ())

    def test_target_out_of_range(self):
        m, d = self.state()
        with pytest.raises(InvalidInputError):
            shortest_path_dense(self.C, d, m, 1, (7,))


class TestM22Resolves:
    """Frozen re-solve cascade on the reference 2x2 problem.

    Each step rebuilds its input state from literals (solution and prices
    of the step before), so a failure pins down exactly one transition.
    """

    def test_ban_best_pair(self):
        # From the optimum [0, 1]: ban (0,0), lift row 0, target col 0.
        m = m22_matching([MISS, 1])
        m.row_to[0] = UNSET
        d = DualState(np.array([-3.0, -4.0]), np.array([0.0, 0.0]))
        pr = shortest_path_augmented(M22, d, m, 0, (0,), forbidden={0: {0}})
        assert pr.status == "found"
        assert pr.distance == 3.0 and pr.terminal == 0
        assert pr.popped == [1, 2, 0]          # col1, pseudo-col, col0
        assert pr.theta_entry == ("row", 0)    # entered via row 0's miss edge
        assert pr.dist.tolist() == [3.0, 2.0, 3.0]
        apply_path(m, pr, 0)
        assert list(m.row_to) == [MISS, 1]     # row 0 ends missing
        d = update_duals(M22, d, pr, m)
        assert d.u.tolist() == [0.0, -3.0]
        assert d.v.tolist() == [0.0, -1.0]
        assert admissible_prices(M22, d, m.row_to, forbidden={0: {0}})

    def test_ban_miss_too(self):
        # From [-1, 1] (cost -4): ban row 0's miss as well; the path must
        # push row 1 off col 1.  Leaves a positive row price, admissible
        # only because that row can no longer go missing.
        m = m22_matching([MISS, 1])
        m.row_to[0] = UNSET
        d = DualState(np.array([0.0, -3.0]), np.array([0.0, -1.0]))
        pr = shortest_path_augmented(M22, d, m, 0, (MISS,),
                                     forbidden={0: {0, MISS}})
        assert pr.distance == 1.0 and pr.terminal == MISS
        assert pr.theta_entry == ("col", 0)    # entered by popping col 0
        assert pr.popped == [1, 0, 2]
        apply_path(m, pr, 0)
        assert list(m.row_to) == [1, 0]
        d = update_duals(M22, d, pr, m)
        assert d.u.tolist() == [1.0, -2.0]
        assert d.v.tolist() == [0.0, -2.0]
        assert admissible_prices(M22, d, m.row_to,
                                 forbidden={0: {0, MISS}})

    def test_released_column_breaks_admissibility(self):
        # From [-1, 1] with row 0 locked to its miss: ban (1,1).  The
        # re-solve leaves col 1 unclaimed below price zero, so descendant
        # searches must go through the exhaustive variant.
        m = Matching(2, 2)
        m.match(1, 1)
        m.lift(1)
        d = DualState(np.array([0.0, -3.0]), np.array([0.0, -1.0]))
        forb = {0: {0}, 1: {1}}
        pr = shortest_path_augmented(M22, d, m, 1, (1,), forbidden=forb)
        assert pr.distance == 2.0 and pr.terminal == 1
        assert pr.theta_entry == ("col", 0)
        assert pr.popped == [0, 2, 1]
        apply_path(m, pr, 1)
        assert list(m.row_to) == [UNSET, 0]
        d = update_duals(M22, d, pr, m)
        assert d.u.tolist() == [0.0, -1.0]
        assert d.v.tolist() == [-1.0, -1.0]
        active = np.array([False, True])
        assert not admissible_prices(M22, d, m.row_to, active,
                                     forbidden=forb)

    def test_exhaustive_resolve(self):
        # Continue the inadmissible state: ban (1,0) as well; row 1 can
        # only miss.  The freed target column must be a dead end or the
        # missing-row detour would loop on its negative pair.
        m = Matching(2, 2)
        m.match(1, 0)
        m.lift(1)
        d = DualState(np.array([0.0, -1.0]), np.array([-1.0, -1.0]))
        pr = shortest_path_exhaustive(M22, d, m, 1, (0,),
                                      forbidden={0: {0}, 1: {0, 1}})
        assert pr.distance == 2.0 and pr.terminal == 0
        assert pr.theta_entry == ("row", 1)
        apply_path(m, pr, 1)
        assert list(m.row_to) == [UNSET, MISS]

    def test_full_ban_infeasible(self):
        m = Matching(2, 2)
        m.match(1, 1)
        m.lift(1)
        d = DualState(np.array([-3.0, 0.0]), np.array([0.0, 0.0]))
        for fn in ALL_SEARCHES:
            with pytest.raises(InfeasibleError):
                fn(M22, d, m, 1, (MISS,), forbidden={1: {0, 1, MISS}})


class TestAugmentationExit:
    """Leaving the pseudo-column onto a claimed column.

    The claimed column's row is handed the path: here row 1 is pushed
    from col 0 to its cheaper col 1 while the entering row misses, which
    no unclaimed-columns-only exit rule can represent.
    """

    C = SparseCostMatrix.from_dense(np.array([[4.0, 9.0], [0.0, -2.0]]))

    def state(self):
        m = Matching(2, 2)
        m.match(1, 0)
        return m, DualState(np.array([0.0, 0.0]), np.array([0.0, -2.0]))

    @pytest.mark.parametrize("fn", ALL_SEARCHES)
    def test_exit_onto_claimed_column(self, fn):
        m, d = self.state()
        pr = fn(self.C, d, m, 0, (1,))
        assert pr.distance == 0.0 and pr.terminal == 1
        assert pr.theta_entry == ("row", 0)
        assert pr.pathback.tolist() == [2, 1, 0]
        apply_path(m, pr, 0)
        assert list(m.row_to) == [MISS, 1]

    def test_pop_orders(self):
        m, d = self.state()
        assert shortest_path_augmented(self.C, d, m, 0, (1,)).popped \
            == [2, 0, 1]
        assert shortest_path_sparse(self.C, d, m, 0, (1,)).popped \
            == [2, 0, 1]
        assert shortest_path_exhaustive(self.C, d, m, 0, (1,)).popped \
            == [0, 1, 2]


class TestDualStateChecks:
    def test_fresh_solve_passes(self):
        assoc, duals = solve_optimal(M22)
        duals.check(M22, assoc.row_to)

    def test_broken_tightness_raises(self):
        assoc, duals = solve_optimal(M22)
        duals.u[0] += 0.5
        with pytest.raises(AssertionError):
            duals.check(M22, assoc.row_to)
        with pytest.raises(AssertionError):
            # matched-pair tightness is enforced even for relaxed states
            duals.check(M22, assoc.row_to, admissible=False,
                        missing_cols_zero=False)

    def test_negative_reduced_cost_gated(self):
        # an open pair below zero only trips the admissible-mode check
        m = SparseCostMatrix.from_dense(np.array([[-1.0]]))
        duals = DualState.zeros(1, 1)
        row_to = np.array([MISS], dtype=np.int32)
        with pytest.raises(AssertionError):
            duals.check(m, row_to)
        duals.check(m, row_to, admissible=False)

    def test_tightness_enforced_in_relaxed_mode(self):
        m = SparseCostMatrix.from_dense(np.array([[-1.0, -3.0]]))
        duals = DualState(np.array([-2.5]), np.array([0.0, -1.0]))
        row_to = np.array([1], dtype=np.int32)
        with pytest.raises(AssertionError):
            # matched pair (0,1) reduces to 0.5, not tight
            duals.check(m, row_to, admissible=False,
                        missing_cols_zero=False)

    def test_excluded_matched_pair_raises(self):
        assoc, duals = solve_optimal(M22)
        with pytest.raises(AssertionError):
            duals.check(M22, assoc.row_to, forbidden={0: {0}})
        with pytest.raises(AssertionError):
            duals.check(M22, assoc.row_to, blocked_cols=(0,))


class TestAdmissiblePrices:
    def test_fresh_solve_admissible(self):
        assoc, duals = solve_optimal(M22)
        assert admissible_prices(M22, duals, assoc.row_to)

    def test_positive_row_price(self):
        duals = DualState(np.array([0.5, -4.0]), np.array([0.0, 0.0]))
        row_to = np.array([0, 1], dtype=np.int32)
        assert not admissible_prices(M22, duals, row_to)
        # exempt when that row can no longer go missing
        ok = SparseCostMatrix.from_dense(np.array([[-3.0, -1.0],
                                                   [-2.0, -4.0]]))
        assert not admissible_prices(ok, duals, row_to, forbidden={1: {0}})

    def test_negative_unclaimed_column(self):
        duals = DualState(np.array([-3.0, 0.0]), np.array([0.0, -1.0]))
        row_to = np.array([0, MISS], dtype=np.int32)
        assert not admissible_prices(M22, duals, row_to)

    def test_negative_reduced_pair(self):
        # all row/column prices individually fine, one open pair negative
        m = SparseCostMatrix.from_dense(np.array([[-1.0]]))
        duals = DualState.zeros(1, 1)
        row_to = np.array([MISS], dtype=np.int32)
        assert not admissible_prices(m, duals, row_to)
        # the same pair banned no longer matters
        assert admissible_prices(m, duals, row_to, forbidden={0: {0}})
        # nor does it when its column is blocked
        assert admissible_prices(m, duals, row_to, blocked_cols=(0,))

    def test_positive_column_price(self):
        duals = DualState(np.array([-3.0, -4.0]), np.array([0.5, 0.0]))
        row_to = np.array([0, 1], dtype=np.int32)
        assert not admissible_prices(M22, duals, row_to)


class TestSolveProperties:
    def test_matches_bruteforce(self):
        rng = np.random.default_rng(11)
        for trial in range(150):
            m = int(rng.integers(1, 5))
            n = int(rng.integers(1, 5))
            density = 1.0 if rng.random() < 0.5 else 0.6
            mat = random_matrix(rng, m, n, density)
            forbidden = None
            if rng.random() < 0.4:
                r = int(rng.integers(0, m))
                c = MISS if rng.random() < 0.3 else int(rng.integers(0, n))
                forbidden = {r: {c}}
            try:
                res = solve_optimal(mat, forbidden=forbidden, check=True)
            except InfeasibleError:
                assert not kbest_bruteforce(mat, 1, forbidden=forbidden)
                continue
            best = kbest_bruteforce(mat, 1, forbidden=forbidden)[0]
            assert res[0].cost == pytest.approx(best.cost, abs=1e-9)

    def test_variants_agree(self):
        rng = np.random.default_rng(12)
        for trial in range(80):
            m = int(rng.integers(1, 6))
            n = int(rng.integers(1, 6))
            mat = random_matrix(rng, m, n, 0.7)
            a1, d1 = solve_optimal(mat, variant="augmented")
            a2, d2 = solve_optimal(mat, variant="sparse")
            assert list(a1.row_to) == list(a2.row_to)
            assert a1.cost == pytest.approx(a2.cost, abs=1e-12)
            np.testing.assert_allclose(d1.u, d2.u, atol=1e-12)
            np.testing.assert_allclose(d1.v, d2.v, atol=1e-12)

    def test_bound_semantics(self):
        rng = np.random.default_rng(13)
        for trial in range(100):
            mat = random_matrix(rng, 3, 3, 0.8)
            best = kbest_bruteforce(mat, 1)[0].cost
            bound = float(rng.uniform(-4.0, 1.0))
            res = solve_optimal(mat, bound=bound)
            if res is None:
                assert best > bound
            else:
                assert res[0].cost == pytest.approx(best, abs=1e-9)

    def test_exhaustive_agrees_on_child_solves(self):
        # one partition step off a fresh optimum: both search families
        # must price the child identically
        rng = np.random.default_rng(14)
        for trial in range(120):
            m = int(rng.integers(2, 5))
            n = int(rng.integers(2, 5))
            mat = random_matrix(rng, m, n, 0.8)
            assoc, duals = solve_optimal(mat)
            r = int(rng.integers(0, m))
            old = int(assoc.row_to[r])
            forb = {r: {old if old >= 0 else MISS}}
            results = []
            for fn in ALL_SEARCHES:
                matching = Matching.from_row_to(assoc.row_to, n)
                freed = matching.lift(r)
                targets = (freed,) if freed >= 0 else (MISS,)
                try:
                    pr = fn(mat, duals.copy(), matching, r, targets,
                            forbidden=forb)
                except InfeasibleError:
                    results.append(None)
                    continue
                apply_path(matching, pr, r)
                results.append((pr.distance,
                                association_nll(mat, np.where(
                                    matching.row_to == UNSET, MISS,
                                    matching.row_to))))
            assert results[0] is not None or all(x is None for x in results)
            if results[0] is not None:
                for other in results[1:]:
                    assert other[0] == pytest.approx(results[0][0], abs=1e-9)
                    assert other[1] == pytest.approx(results[0][1], abs=1e-9)

"""Backend selection and compiled/pure-Python equivalence.

The compiled kernels promise the same outputs as the pure lane down to
float-operation order, so every comparison here is exact: identical
totals, identical assignments, identical counter values, identical
sample paths.
"""

import numpy as np
import pytest

from kbassoc import (HAVE_C, HypothesisSet, InvalidInputError, MISS,
                     SparseCostMatrix, available_backends, gibbs_sample,
                     kbest_mimo, kbest_single)
from kbassoc import backend as backend_mod
from kbassoc.kbest import SolverConfig
from kbassoc.oracle import association_count, kbest_bruteforce

from util import random_matrix

CONFIGS = [SolverConfig.v1(), SolverConfig.v2(),
           SolverConfig.v3(), SolverConfig.v4()]

needs_c = pytest.mark.skipif(not HAVE_C, reason="compiled backend not built")


def test_available_backends():
    names = available_backends()
    assert "python" in names
    assert ("c" in names) == HAVE_C


def test_resolve_explicit():
    assert backend_mod.resolve("python") == "python"
    assert backend_mod.resolve("PYTHON") == "python"
    if HAVE_C:
        assert backend_mod.resolve("c") == "c"


def test_resolve_unknown():
    with pytest.raises(InvalidInputError):
        backend_mod.resolve("fortran")


def test_resolve_env_override(monkeypatch):
    monkeypatch.setenv("KBASSOC_BACKEND", "python")
    assert backend_mod.resolve() == "python"
    monkeypatch.setenv("KBASSOC_BACKEND", "not-a-backend")
    with pytest.raises(InvalidInputError):
        backend_mod.resolve()
    # An explicit argument wins over the environment.
    assert backend_mod.resolve("python") == "python"
    monkeypatch.delenv("KBASSOC_BACKEND")
    assert backend_mod.resolve() in ("c", "python")


def test_without_compiled_backend(monkeypatch):
    monkeypatch.setattr(backend_mod, "HAVE_C", False)
    assert backend_mod.available_backends() == ("python",)
    assert backend_mod.resolve() == "python"
    with pytest.raises(InvalidInputError):
        backend_mod.resolve("c")
    with pytest.raises(InvalidInputError):
        backend_mod.kernels()
    m = SparseCostMatrix.from_dense([[-1.0]])
    out = kbest_single(m, 2)   # auto-resolve must fall back cleanly
    assert list(out.total_costs) == [-1.0, 0.0]


def _ranked(out):
    return [(float(t), tuple(int(c) for c in a.row_to), a.parent_hypothesis)
            for t, a in zip(out.total_costs, out.associations)]


def _assert_identical(a, b):
    __tracebackhide__ = True
    assert _ranked(a) == _ranked(b)
    assert np.array_equal(a.total_costs, b.total_costs)
    assert a.stats == b.stats


@needs_c
def test_frozen_2x2_exact():
    m = SparseCostMatrix.from_dense([[-1.0, -0.4], [0.3, -0.9]])
    want_totals = [-1.9, -1.0, -0.9, -0.4, -0.1, 0.0, 0.3]
    want_rows = [(0, 1), (0, MISS), (MISS, 1), (1, MISS),
                 (1, 0), (MISS, MISS), (MISS, 0)]
    for cfg in CONFIGS:
        out_c = kbest_single(m, 7, cfg, backend="c", with_stats=True)
        out_p = kbest_single(m, 7, cfg, backend="python", with_stats=True)
        got = _ranked(out_c)
        assert [t for t, _, _ in got] == pytest.approx(want_totals, abs=1e-12)
        assert [rt for _, rt, _ in got] == want_rows
        _assert_identical(out_c, out_p)


@needs_c
def test_random_parity_exact():
    rng = np.random.default_rng(61)
    for trial in range(60):
        m_rows = int(rng.integers(1, 7))
        n_cols = int(rng.integers(1, 6))
        density = 1.0 if rng.random() < 0.5 else 0.6
        mat = random_matrix(rng, m_rows, n_cols, density=density)
        k = int(rng.integers(1, 13))
        cfg = CONFIGS[trial % 4]
        out_c = kbest_single(mat, k, cfg, backend="c", with_stats=True)
        out_p = kbest_single(mat, k, cfg, backend="python", with_stats=True)
        _assert_identical(out_c, out_p)


@needs_c
def test_random_parity_with_checks():
    rng = np.random.default_rng(62)
    for trial in range(25):
        mat = random_matrix(rng, int(rng.integers(1, 6)),
                            int(rng.integers(1, 5)),
                            density=0.7)
        k = int(rng.integers(1, 10))
        cfg = CONFIGS[trial % 4]
        out_c = kbest_single(mat, k, cfg, backend="c",
                             check_duals=True, with_stats=True)
        out_p = kbest_single(mat, k, cfg, backend="python",
                             check_duals=True, with_stats=True)
        _assert_identical(out_c, out_p)


@needs_c
def test_mimo_parity_exact():
    rng = np.random.default_rng(63)
    for trial in range(40):
        m_rows = int(rng.integers(1, 7))
        mat = random_matrix(rng, m_rows, int(rng.integers(1, 6)),
                            density=0.8)
        n_h = int(rng.integers(1, 4))
        membership = rng.random((n_h, m_rows)) < 0.7
        priors = np.round(rng.uniform(-1, 1, n_h), 3)
        hyps = HypothesisSet(membership, priors)
        k = int(rng.integers(1, 20))
        cfg = CONFIGS[trial % 4]
        out_c = kbest_mimo(mat, hyps, k, cfg, backend="c", with_stats=True)
        out_p = kbest_mimo(mat, hyps, k, cfg, backend="python",
                           with_stats=True)
        _assert_identical(out_c, out_p)


@needs_c
def test_full_depth_parity_matches_oracle():
    rng = np.random.default_rng(64)
    mat = random_matrix(rng, 4, 4)
    k = association_count(4, 4)
    want = kbest_bruteforce(mat, k)
    for cfg in CONFIGS:
        out_c = kbest_single(mat, k, cfg, backend="c", with_stats=True)
        out_p = kbest_single(mat, k, cfg, backend="python", with_stats=True)
        _assert_identical(out_c, out_p)
        assert len(out_c) == k
        got = np.asarray(out_c.total_costs)
        exp = np.asarray([a.cost for a in want])
        assert np.max(np.abs(got - exp)) <= 1e-9


@needs_c
def test_degenerate_shapes():
    for m in (SparseCostMatrix.from_pairs(0, 0, []),
              SparseCostMatrix.from_pairs(0, 3, []),
              SparseCostMatrix.from_pairs(3, 0, [])):
        for cfg in CONFIGS:
            out_c = kbest_single(m, 4, cfg, backend="c", with_stats=True)
            out_p = kbest_single(m, 4, cfg, backend="python", with_stats=True)
            assert len(out_c) == 1   # all-miss is the only association
            assert out_c.total_costs[0] == 0.0
            assert out_c[0].row_to.shape == (m.n_rows,)
            _assert_identical(out_c, out_p)


@needs_c
def test_k_zero_and_overshoot():
    m = SparseCostMatrix.from_dense([[-1.0, 2.0]])
    for cfg in CONFIGS:
        assert len(kbest_single(m, 0, cfg, backend="c")) == 0
        out_c = kbest_single(m, 50, cfg, backend="c", with_stats=True)
        out_p = kbest_single(m, 50, cfg, backend="python", with_stats=True)
        assert len(out_c) == 3
        _assert_identical(out_c, out_p)


@needs_c
def test_gibbs_parity_exact():
    rng = np.random.default_rng(65)
    for trial in range(30):
        mat = random_matrix(rng, int(rng.integers(1, 8)),
                            int(rng.integers(1, 7)),
                            density=0.75, lo=-3.0, hi=1.0)
        seed = int(rng.integers(0, 2**31))
        s_c = gibbs_sample(mat, 40, seed, backend="c")
        s_p = gibbs_sample(mat, 40, seed, backend="python")
        assert np.array_equal(s_c.row_to, s_p.row_to)
        assert np.array_equal(s_c.costs, s_p.costs)
        assert np.array_equal(s_c.unique_row_to, s_p.unique_row_to)
        assert np.array_equal(s_c.unique_counts, s_p.unique_counts)

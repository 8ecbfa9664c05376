import numpy as np
import pytest

from nbsc.coupled import (CoupledState, build_coupling_matrix, coupled_fixed_point, coupled_update,
                          profile_rows, window_mean, window_spread)
from nbsc.de import DeConfig, EnsembleParams, bp_threshold_uncoupled, de_step, is_ccdf

from conftest import random_ccdf
from oracles import coupled_threshold

P36 = EnsembleParams(3, 6, 1)


def test_coupling_matrix_examples():
    M = build_coupling_matrix(3, 2)
    np.testing.assert_array_equal(M.A, 0.5 * np.array([[1, 1, 0, 0], [0, 1, 1, 0], [0, 0, 1, 1]]))
    np.testing.assert_array_equal(build_coupling_matrix(5, 1).A, np.eye(5))
    M = build_coupling_matrix(10, 3)
    assert M.A.shape == (10, 12) and M.n_positions == 12
    np.testing.assert_allclose(M.A.sum(axis=1), 1.0, atol=1e-15)
    for t in range(10):
        assert np.all(M.A[t, t:t + 3] == 1 / 3)
        assert np.count_nonzero(M.A[t]) == 3
    with pytest.raises(ValueError):
        build_coupling_matrix(0, 3)


def test_window_helpers_match_matrix(rng):
    for L, w in [(1, 1), (4, 2), (7, 3), (5, 5)]:
        M = build_coupling_matrix(L, w)
        G = rng.random((L + w - 1, 3))
        F = rng.random((L, 3))
        np.testing.assert_allclose(window_mean(G, w), M.A @ G, atol=1e-15)
        np.testing.assert_allclose(window_spread(F, w), M.A.T @ F, atol=1e-15)


def test_update_examples(rng):
    for m in (1, 2, 3):
        p = EnsembleParams(3, 6, m)
        M = build_coupling_matrix(6, 3)
        X = random_ccdf(rng, 8, m)
        S = CoupledState(X, np.ones(6))
        np.testing.assert_array_equal(coupled_update(S, 0.0, p, M).X, 0)
        np.testing.assert_array_equal(coupled_update(CoupledState(0 * X, S.eps_mask), 0.6, p, M).X, 0)
        assert is_ccdf(coupled_update(S, 0.6, p, M).X)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_single_position_reduces_to_uncoupled(rng, m):
    p = EnsembleParams(3, 6, m)
    M = build_coupling_matrix(1, 1)
    for x in random_ccdf(rng, 20, m):
        eps = rng.random()
        S = CoupledState(x[None, :], np.ones(1))
        np.testing.assert_allclose(coupled_update(S, eps, p, M).X[0], de_step(x, eps, p), atol=1e-12)


def test_below_uncoupled_threshold_decodes():
    for L, w in [(5, 2), (20, 3), (40, 4)]:
        assert coupled_fixed_point(0.40, P36, L, w).decoded


def test_decodes_between_thresholds():
    r = coupled_fixed_point(0.47, P36, 100, 3)
    assert r.decoded and r.converged


def test_profile_symmetry_and_boundary_advantage():
    L, w = 40, 3
    r = coupled_fixed_point(0.47, EnsembleParams(3, 6, 2), L, w, record_profile=True)
    n = L + w - 1
    for X in r.snapshots:
        np.testing.assert_allclose(X, X[::-1], atol=1e-12)
    prof = r.profile
    mid = (n + 1) // 2 - 1
    assert np.all(prof[:, 0] <= prof[:, mid] + 1e-15)


def test_iterates_monotone():
    r = coupled_fixed_point(0.48, EnsembleParams(3, 6, 2), 30, 3, DeConfig(max_iters=400),
                            keep_states=True)
    X = np.array(r.states)
    assert np.all(np.diff(X, axis=0) <= 1e-15)
    assert all(is_ccdf(s) for s in X)


def test_profile_rows_layout():
    r = coupled_fixed_point(0.45, EnsembleParams(3, 6, 2), 4, 2, record_profile=True,
                            profile_every=5)
    rows = list(profile_rows(r))
    assert rows[0][:2] == (0, 1)
    assert len(rows[0]) == 5
    assert {row[0] for row in rows} >= {0, r.iterations}
    assert all(row[2] == max(row[3:]) for row in rows)


def test_deadline():
    from nbsc.coupled import DeadlineExceeded
    import time
    with pytest.raises(DeadlineExceeded):
        coupled_fixed_point(0.4879, P36, 100, 3, deadline=time.monotonic() - 1)


def test_threshold_increases_with_w():
    vals = [coupled_threshold(3, 6, 1, 100, w) for w in (2, 3, 4, 5)]
    assert all(b >= a - 1e-5 for a, b in zip(vals, vals[1:]))
    assert vals[0] > bp_threshold_uncoupled(P36)


def test_rate_loss_trend():
    vals = [coupled_threshold(3, 6, 1, L, 3) for L in (20, 50, 100)]
    assert all(b <= a + 1e-5 for a, b in zip(vals, vals[1:]))

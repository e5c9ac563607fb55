from itertools import combinations

import numpy as np
import pytest

from patchmodels.learning import (LearnConfig, dct_dictionary, format_dictionary,
                                  initial_dictionary, is_unitary, learn_gs, learn_js,
                                  learn_sp, load_dictionary, parse_dictionary,
                                  random_orthonormal, save_dictionary, sparse_code_sp,
                                  update_dictionary)
from patchmodels.projectors import row_threshold


def _planted(Q, K, count, rng):
    n = Q.shape[0]
    X = np.zeros((n, count))
    for j in range(count):
        X[rng.choice(n, K, replace=False), j] = rng.uniform(1, 2, K) * rng.choice([-1, 1], K)
    return Q @ X


def test_inits_are_unitary():
    for init in ("identity", "dct_like", "seeded_random_orthonormal"):
        for n in (4, 6, 64):
            assert is_unitary(initial_dictionary(n, init, 3))
    np.testing.assert_array_equal(random_orthonormal(5, 9), random_orthonormal(5, 9))
    # Constant atom first for the DCT.
    np.testing.assert_allclose(dct_dictionary(16)[:, 0], 0.25)


def test_config_validation():
    with pytest.raises(ValueError):
        LearnConfig(2, iters=0)
    with pytest.raises(ValueError):
        LearnConfig(2, init="bogus")


def test_sparse_code_identity():
    z = np.array([0.0, 0, 3, 0])
    code = sparse_code_sp(np.eye(4), z, 1)
    np.testing.assert_array_equal(code.values, z)
    np.testing.assert_array_equal(code.support, [2])


def test_sparse_code_matches_least_squares_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(30):
        D = random_orthonormal(6, int(rng.integers(1 << 30)))
        z = rng.normal(size=6)
        code = sparse_code_sp(D, z, 2)
        best = np.inf
        for s in combinations(range(6), 2):
            A = D[:, s]
            coef, *_ = np.linalg.lstsq(A, z, rcond=None)
            best = min(best, np.sum((z - A @ coef) ** 2))
        assert np.isclose(np.sum((z - D @ code.values) ** 2), best, rtol=1e-10, atol=1e-14)


def test_sparse_code_full():
    D = random_orthonormal(5, 1)
    z = np.arange(5.0)
    code = sparse_code_sp(D, z, 5)
    np.testing.assert_allclose(D @ code.values, z, atol=1e-12)


def test_update_dictionary_fixed_point():
    X = np.random.default_rng(1).normal(size=(5, 20))
    D = update_dictionary(X, X)
    assert np.linalg.norm(X - D @ X) <= 1e-10 * np.linalg.norm(X)


def test_update_dictionary_beats_random_competitors():
    rng = np.random.default_rng(2)
    Z, X = rng.normal(size=(4, 30)), rng.normal(size=(4, 30))
    D = update_dictionary(Z, X)
    assert is_unitary(D)
    best = np.sum((Z - D @ X) ** 2)
    for s in range(1000):
        assert best <= np.sum((Z - random_orthonormal(4, s) @ X) ** 2) + 1e-9


def test_update_dictionary_recovers_rotation():
    rng = np.random.default_rng(3)
    Q = random_orthonormal(6, 4)
    X = rng.normal(size=(6, 100))
    np.testing.assert_allclose(update_dictionary(Q @ X, X), Q, atol=1e-8)


def test_update_dictionary_degenerate_keeps_current():
    cur = random_orthonormal(3, 5)
    np.testing.assert_array_equal(update_dictionary(np.zeros((3, 4)), np.ones((3, 4)), cur), cur)
    np.testing.assert_array_equal(update_dictionary(np.zeros((3, 4)), np.zeros((3, 4))),
                                  np.eye(3))


def test_learn_sp_fixed_point():
    rng = np.random.default_rng(4)
    Z = _planted(np.eye(8), 2, 200, rng)
    D, trace = learn_sp(Z, LearnConfig(2, iters=5))
    assert np.all(trace <= 1e-24 * np.sum(Z ** 2))
    np.testing.assert_allclose(D, np.eye(8), atol=1e-12)


def test_learn_sp_planted_recovery():
    rng = np.random.default_rng(5)
    Q = random_orthonormal(8, 11)
    Z = _planted(Q, 2, 10_000, rng)
    D, trace = learn_sp(Z, LearnConfig(2, 20, "seeded_random_orthonormal", seed=3))
    assert is_unitary(D)
    assert trace[-1] <= 1e-6 * trace[0]


def test_learn_traces_non_increasing():
    rng = np.random.default_rng(6)
    groups = [rng.normal(size=(6, 10)) for _ in range(4)]
    cfg = LearnConfig(2, 20, "seeded_random_orthonormal", 1)
    _, t = learn_sp(np.hstack(groups), cfg)
    assert np.all(np.diff(t) <= 1e-9)
    Ds, ts = learn_gs(groups, cfg)
    assert all(np.all(np.diff(x) <= 1e-9) for x in ts)
    assert all(is_unitary(D) for D in Ds)
    D, t = learn_js(groups, cfg)
    assert np.all(np.diff(t) <= 1e-9) and is_unitary(D)


def test_learn_gs_single_group_equals_sp():
    Z = np.random.default_rng(7).normal(size=(5, 12))
    cfg = LearnConfig(2, 10)
    (D,), (t,) = learn_gs([Z], cfg)
    D2, t2 = learn_sp(Z, cfg)
    np.testing.assert_allclose(D, D2, atol=1e-12)
    np.testing.assert_allclose(t, t2, rtol=1e-12)


def test_learn_gs_planted_and_permutation():
    rng = np.random.default_rng(8)
    Qs = [random_orthonormal(6, 21), random_orthonormal(6, 22)]
    groups = [_planted(Q, 1, 400, rng) for Q in Qs]
    cfg = LearnConfig(1, 20, "seeded_random_orthonormal", 2)
    Ds, ts = learn_gs(groups, cfg)
    for t in ts:
        assert t[-1] <= 1e-6 * t[0] or t[-1] < 1e-20
    Ds_rev, ts_rev = learn_gs(groups[::-1], cfg)
    np.testing.assert_allclose(Ds_rev[0], Ds[1], atol=1e-12)
    np.testing.assert_allclose(ts_rev[1], ts[0], rtol=1e-12)
    # Unequal group sizes take the per-group path with the same result.
    Ds_u, _ = learn_gs([groups[0], groups[1][:, :300]], cfg)
    np.testing.assert_allclose(Ds_u[0], Ds[0], atol=1e-12)


def test_learn_js_fixed_point():
    rng = np.random.default_rng(9)
    groups = []
    for _ in range(3):
        X = np.zeros((5, 7))
        X[rng.choice(5, 2, replace=False)] = rng.normal(size=(2, 7))
        groups.append(X)
    D, t = learn_js(groups, LearnConfig(2, 4))
    assert np.all(t <= 1e-24 * sum(np.sum(X ** 2) for X in groups))


def test_js_coding_matches_row_support_enumeration():
    rng = np.random.default_rng(10)
    D = random_orthonormal(4, 3)
    for _ in range(20):
        Z = rng.normal(size=(4, 3))
        X = row_threshold(D.T @ Z, 2)
        best = np.inf
        for rows in combinations(range(4), 2):
            A = D[:, rows]
            coef, *_ = np.linalg.lstsq(A, Z, rcond=None)
            best = min(best, np.sum((Z - A @ coef) ** 2))
        assert np.isclose(np.sum((Z - D @ X) ** 2), best, rtol=1e-10)


def test_dictionary_text_round_trip(tmp_path):
    D = random_orthonormal(4, 7)
    text = format_dictionary(D)
    assert text.startswith("DICT n=4\n")
    np.testing.assert_array_equal(parse_dictionary(text), D)
    save_dictionary(D, tmp_path / "d.txt")
    np.testing.assert_array_equal(load_dictionary(tmp_path / "d.txt"), D)
    with pytest.raises(ValueError):
        parse_dictionary("DICT n=3\n1 0\n0 1\n")
    with pytest.raises(ValueError):
        parse_dictionary("1 0\n0 1\n")

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from bandjost.errors import InputError, QRConvergenceError
from bandjost.model import BandedOperator
from bandjost.oracle import (balance, dense_eigenvalues, dist_to_interval, gershgorin_contains,
                             hessenberg, match, qr_eigenvalues, truncate, write_csv)
from bandjost.spectrum import analyze

from conftest import random_operator, single_site


def same_multiset(a, b):
    r, c = linear_sum_assignment(np.abs(a[:, None] - b[None, :]))
    return np.abs(a[r] - b[c]).max()


def test_truncate_examples():
    m = truncate(BandedOperator.free(1), 4).entries
    assert np.array_equal(m, np.diag(np.ones(3), 1) + np.diag(np.ones(3), -1))
    m = truncate(single_site(2.0), 3).entries
    assert np.array_equal(m, [[2, 1, 0], [1, 0, 1], [0, 1, 0]])
    m = truncate(BandedOperator.free(2), 5).entries
    assert np.array_equal(m, np.diag(np.ones(3), 2) + np.diag(np.ones(3), -2))
    with pytest.raises(InputError):
        truncate(BandedOperator.free(3), 5)


def test_truncate_preserves_band():
    op = random_operator(2, 8, 0.3, 0)
    m = truncate(op, 12).entries
    i, j = np.indices(m.shape)
    assert np.all(m[np.abs(i - j) > 2] == 0)


@pytest.mark.parametrize("solver", ["lapack", "qr"])
def test_dense_examples(solver):
    ev = dense_eigenvalues(np.array([[2, 1], [1, 0]]), solver)
    assert np.allclose(ev, [1 - np.sqrt(2), 1 + np.sqrt(2)])
    ev = dense_eigenvalues(np.diag([3, 1j]), solver)
    assert same_multiset(ev, np.array([3, 1j])) < 1e-14
    N = 30
    ev = dense_eigenvalues(truncate(BandedOperator.free(1), N), solver)
    exact = 2 * np.cos(np.arange(1, N + 1) * np.pi / (N + 1))
    assert same_multiset(ev, exact) < 1e-12


def test_hessenberg_is_similarity(rng):
    a = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
    h = hessenberg(a)
    assert np.allclose(np.tril(h, -2), 0)
    assert same_multiset(np.linalg.eigvals(h), np.linalg.eigvals(a)) < 1e-10


def test_balance_is_similarity(rng):
    a = rng.normal(size=(8, 8)) * np.logspace(-4, 4, 8)[:, None]
    b = balance(a)
    assert same_multiset(np.linalg.eigvals(b), np.linalg.eigvals(a)) < 1e-8


def test_own_qr_matches_lapack(rng):
    for n in (3, 17, 60):
        a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        assert same_multiset(qr_eigenvalues(a), dense_eigenvalues(a)) < 1e-10
    m = truncate(random_operator(2, 20, 0.4, 1), 80)
    assert same_multiset(dense_eigenvalues(m, "qr"), dense_eigenvalues(m)) < 1e-9


def test_qr_iteration_cap_reports_partial(rng):
    a = rng.normal(size=(20, 20)) + 1j * rng.normal(size=(20, 20))
    with pytest.raises(QRConvergenceError) as exc:
        qr_eigenvalues(a, max_iter=3)
    assert exc.value.partial is not None


def test_dense_size_limit():
    with pytest.raises(InputError):
        dense_eigenvalues(np.eye(5), max_dim=4)


def test_gershgorin_containment():
    for seed in range(5):
        m = truncate(random_operator(1 + seed % 2, 10, 0.5, seed), 40).entries
        assert gershgorin_contains(m, dense_eigenvalues(m))


def test_similarity_invariance(rng):
    m = truncate(random_operator(2, 10, 0.4, 3), 40).entries
    s = np.exp(rng.uniform(-1, 1, 40))
    m2 = (s[:, None] * m) / s[None, :]
    assert same_multiset(dense_eigenvalues(m), dense_eigenvalues(m2)) < 1e-10


def test_real_symmetric_p1_has_real_spectrum(rng):
    b = rng.normal(size=30)
    op = BandedOperator.from_entries(1, {0: {n + 1: v for n, v in enumerate(b)}})
    ev = dense_eigenvalues(truncate(op, 60))
    assert np.abs(ev.imag).max() < 1e-10


def test_dist_to_interval():
    assert dist_to_interval(1.0 + 0.5j) == pytest.approx(0.5)
    assert dist_to_interval(-3.0) == pytest.approx(1.0)
    assert dist_to_interval(3 + 4j) == pytest.approx(np.hypot(1, 4))


def test_match_single_site(tmp_path):
    op = single_site(2.0)
    rep, _ = analyze(op)
    table = match(rep.eigenvalues, op, [200, 400])
    row = table.rows[0]
    assert row.distance[200] < 1e-8 and row.converged
    assert table.pollution_candidates == [] and table.unmatched == []
    path = tmp_path / "ev.csv"
    write_csv(path, table.spectra)
    lines = path.read_text().splitlines()
    assert lines[0] == "N,index,re,im" and len(lines) == 601


def test_match_free_needs_nothing():
    table = match([], BandedOperator.free(1), [50, 100])
    assert table.rows == [] and table.unmatched == []


def test_match_requires_two_sections():
    with pytest.raises(InputError):
        match([], BandedOperator.free(1), [100])


def test_near_interval_eigenvalue_converges_slowly():
    """Eigenvalues close to [-2, 2] need larger sections but are genuine."""
    from bandjost.generators import random_finite
    op = random_finite(2, 6, q_max=1.5, seed=9)
    rep, _ = analyze(op)
    table = match(rep.eigenvalues, op, [200, 400, 800])
    slow = [r for r in table.rows if r.distance[400] > 1e-5]
    assert slow
    for r in slow:
        assert r.distance[800] < r.distance[400] < r.distance[200]
        assert r.distance[800] < 1e-2 * r.distance[200]

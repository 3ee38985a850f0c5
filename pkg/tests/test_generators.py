import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from bandjost.errors import InputError
from bandjost.generators import (accumulation_diagnostic, interleave, jacobi, random_finite,
                                 sample_class, slowly_decaying)
from bandjost.model import BandedOperator, normalize
from bandjost.oracle import dense_eigenvalues, truncate
from bandjost.spectrum import analyze


def test_sample_class_respects_bound():
    for p in (1, 2, 3):
        op = sample_class(p, 0.5, 0.4, 1.0, seed=p)
        n = np.arange(1, op.n_explicit + 1)
        assert np.all(op.q() <= 0.4 * np.exp(-n**0.5) * (1 + 1e-12))
        assert op.tail.kind == "exp_beta"
        assert op.tail.weighted_sum(op.n_explicit + 1) <= 1e-14


def test_sample_class_deterministic():
    a = sample_class(2, 0.5, 0.3, 1.0, seed=7)
    b = sample_class(2, 0.5, 0.3, 1.0, seed=7)
    c = sample_class(2, 0.5, 0.3, 1.0, seed=8)
    assert np.array_equal(a.band, b.band) and not np.array_equal(a.band, c.band)


def test_sample_class_zero_is_free():
    op = sample_class(2, 0.5, 0.0, 1.0)
    assert op.n_explicit == 0 or np.all(op.q() == 0)


def test_sample_class_validation():
    with pytest.raises(InputError):
        sample_class(1, 1.0, 0.3, 1.0)


def test_random_finite_budget():
    op = random_finite(2, 12, q_max=0.3, seed=1)
    assert op.tail.is_zero and np.all(op.q() <= 0.3 + 1e-15)


def test_jacobi_layout():
    J = jacobi([1.0, 2.0, 3.0], a_upper=[5, 6, 7], a_lower=[8, 9])
    assert J.entry(2, 2) == 2 and J.entry(1, 2) == 5 and J.entry(2, 1) == 8
    assert J.entry(3, 4) == 7 and J.entry(3, 2) == 9


def test_interleave_single_is_identity():
    J = jacobi([0.5, -0.2, 0.1])
    assert np.array_equal(interleave([J]).band, J.band)


def test_interleave_free_pair_is_free():
    op = interleave([BandedOperator.free(1), BandedOperator.free(1)])
    assert op.p == 2 and np.all(op.q() == 0)


def test_interleave_invariant_subspaces():
    Js = [jacobi([0.5, 0.3]), jacobi([-1.0, 0.2, 0.1])]
    m = truncate(interleave(Js), 20).entries
    even = np.arange(1, 20, 2)
    odd = np.arange(0, 20, 2)
    assert np.all(m[np.ix_(odd, even)] == 0) and np.all(m[np.ix_(even, odd)] == 0)
    assert np.array_equal(m[np.ix_(odd, odd)], truncate(Js[0], 10).entries)


def test_interleave_spectrum_is_union():
    Js = [jacobi([2.0]), jacobi([-0.5, 1.5, 0.8]), jacobi([0.3j, -2.5])]
    rep, _ = analyze(interleave(Js))
    parts = np.concatenate([[e.lam for e in analyze(J)[0].eigenvalues] for J in Js])
    got = np.array([e.lam for e in rep.eigenvalues for _ in range(e.multiplicity)])
    assert len(got) == len(parts)
    r, c = linear_sum_assignment(np.abs(got[:, None] - parts[None, :]))
    assert np.abs(got[r] - parts[c]).max() < 1e-8


def test_interleave_rejects_wide_components():
    with pytest.raises(InputError):
        interleave([BandedOperator.free(2)])


def test_slowly_decaying_accumulates():
    op = slowly_decaying(n_rows=800)
    d = accumulation_diagnostic(op, [2.0, -2.0], [0.05], [200, 400, 800])
    for k in range(2):
        off = [row[k][0] for row in d["off_interval"]]
        assert off == sorted(off) and off[-1] >= 1


def test_accumulation_counts_free():
    d = accumulation_diagnostic(BandedOperator.free(1), [0.0], [10.0], [10, 20])
    assert [r[0][0] for r in d["counts"]] == [10, 20]
    assert [r[0][0] for r in d["off_interval"]] == [0, 0]


def test_class_samples_are_analyzable():
    op = sample_class(1, 0.5, 0.5, 2.0, seed=3)
    c = normalize(op)
    assert c.tail_q0 <= 1e-13
    rep, _ = analyze(op)
    ev = dense_eigenvalues(truncate(op, 400))
    for e in rep.eigenvalues:
        assert np.min(np.abs(ev - e.lam)) < 1e-6

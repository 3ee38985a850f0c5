import math

import numpy as np
import pytest

from bandjost.errors import EnclosureUnavailable, PoleError
from bandjost.model import BandedOperator, normalize
from bandjost.oracle import dense_eigenvalues, dist_to_interval, truncate
from bandjost.spectrum import (T_ROOT, AnalysisConfig, JostEngine, ZeroSearchConfig, analyze,
                               circle_winding, enclosure, find_zeros, gamma, gamma_grid,
                               preimages, zhukovsky)

from conftest import random_operator, single_site


def test_zhukovsky_examples():
    assert zhukovsky(0.5) == pytest.approx(2.5)
    assert zhukovsky(1j) == pytest.approx(0.0)
    with pytest.raises(PoleError):
        zhukovsky(0)


def test_preimages():
    (z1, f1), (z2, f2) = preimages(2.5)
    assert z1 == pytest.approx(0.5) and f1 == "inside"
    assert z2 == pytest.approx(2.0) and f2 == "outside"
    (z1, f1), (z2, f2) = preimages(2.0)
    assert z1 == pytest.approx(1.0) and f1 == f2 == "boundary"


def test_gamma_examples():
    e = JostEngine(normalize(BandedOperator.free(2)))
    assert gamma(0.3 + 0.4j, e) == pytest.approx(1.0)
    v = 1.6
    e = JostEngine(normalize(single_site(v)))
    z = np.array([0.1, 0.4j, -0.7])
    assert np.allclose(e.gamma(z), 1 - v * z)
    assert abs(JostEngine(normalize(single_site(2.0))).gamma(0.5)) < 1e-15


def test_engine_routes_agree():
    c = normalize(random_operator(2, 6, 0.2, 1))
    a = JostEngine(c, route="taylor")
    b = JostEngine(c, route="iteration")
    for z in (0.3, 0.5j, -0.2 - 0.6j):
        assert a.gamma(z) == pytest.approx(b.gamma(z), abs=1e-12)
        assert a.dgamma(z) == pytest.approx(b.dgamma(z), abs=1e-7)


def test_find_zeros_free():
    for p in (1, 2, 3):
        res = find_zeros(JostEngine(normalize(BandedOperator.free(p))))
        assert res.eigenvalues == [] and res.winding_total == 0


def test_find_zeros_single_site():
    res = find_zeros(JostEngine(normalize(single_site(2.0))))
    assert len(res.eigenvalues) == 1
    e = res.eigenvalues[0]
    assert abs(e.z - 0.5) < 1e-12 and abs(e.lam - 2.5) < 1e-12 and e.multiplicity == 1
    assert find_zeros(JostEngine(normalize(single_site(0.5)))).eigenvalues == []


def test_find_zeros_complex_site():
    v = -3 + 1j
    res = find_zeros(JostEngine(normalize(single_site(v))))
    assert len(res.eigenvalues) == 1
    assert res.eigenvalues[0].z == pytest.approx(1 / v, abs=1e-12)


def test_winding_total_matches_zero_count():
    for seed in range(6):
        op = random_operator(1 + seed % 2, 5, 0.5, seed)
        res = find_zeros(JostEngine(normalize(op)))
        assert res.winding_total == sum(e.multiplicity for e in res.eigenvalues)
        assert res.unresolved_cells == []


def test_residuals_small_relative_to_cells():
    for seed in range(4):
        e = JostEngine(normalize(random_operator(2, 5, 0.5, seed)))
        for ev in find_zeros(e).eigenvalues:
            assert ev.residual <= 1e-10 * max(1.0, np.abs(e.gamma(ev.z + 0.01 * np.exp(1j * np.arange(8)))).max())


def test_double_zero_reported_with_multiplicity():
    """Direct sum of two copies of the same Jacobi matrix has a double eigenvalue."""
    op = BandedOperator.from_entries(2, {0: {1: 2.0, 2: 2.0}})
    res = find_zeros(JostEngine(normalize(op)))
    assert sum(e.multiplicity for e in res.eigenvalues) == 2
    for e in res.eigenvalues:
        assert abs(e.lam - 2.5) < 1e-5


def test_conjugation_symmetry():
    op = random_operator(2, 5, 0.5, 7)
    a = find_zeros(JostEngine(normalize(op))).eigenvalues
    b = find_zeros(JostEngine(normalize(op.conjugate()))).eigenvalues
    la = sorted((e.lam for e in a), key=lambda x: (x.real, x.imag))
    lb = sorted((np.conj(e.lam) for e in b), key=lambda x: (x.real, x.imag))
    assert len(la) == len(lb)
    assert np.allclose(la, lb, atol=1e-10)


def test_threads_do_not_change_results():
    e = JostEngine(normalize(random_operator(2, 6, 0.5, 3)))
    r1 = find_zeros(e, ZeroSearchConfig(threads=1))
    r4 = find_zeros(e, ZeroSearchConfig(threads=4))
    assert [x.to_json() for x in r1.eigenvalues] == [x.to_json() for x in r4.eigenvalues]


def test_edge_delta_must_cover_exclusion():
    e = JostEngine(normalize(single_site(2.0)))
    with pytest.raises(ValueError):
        find_zeros(e, ZeroSearchConfig(edge_delta=1e-4, exclusion_eps=1e-3))


def test_origin_has_no_zeros():
    e = JostEngine(normalize(random_operator(2, 6, 1.0, 2)))
    assert circle_winding(e, 1e-3, ZeroSearchConfig()) == 0
    assert np.allclose(e.delta(0.0), np.eye(2))


def test_edge_zero_reported():
    # eigenvalue with |z| = 0.995, inside the excluded edge annulus
    v = 1 / 0.995
    res = find_zeros(JostEngine(normalize(single_site(v))))
    assert res.eigenvalues == []
    assert res.edge_zero_count == 1


# -- enclosure ----------------------------------------------------------------


def test_t_root():
    assert abs(T_ROOT * math.exp(T_ROOT) - 1) < 1e-14
    assert T_ROOT == pytest.approx(0.56714329, abs=1e-8)


def test_enclosure_free():
    v = enclosure(BandedOperator.free(2))
    assert v.region_radius == 0 and v.empty_spectrum_certified and v.empty_spectrum_certified_strict


def test_enclosure_single_site_half():
    v = enclosure(single_site(0.5))
    assert v.Q0 == v.Q1 == v.q == 0.5
    assert v.criterion_value == pytest.approx(math.exp(1.5) * 0.5)
    assert v.criterion_value == pytest.approx(2.2408, abs=1e-4)
    assert 4 / v.t_root == pytest.approx(7.05289, abs=1e-5)
    assert v.empty_spectrum_certified


def test_enclosure_unavailable():
    with pytest.raises(EnclosureUnavailable):
        enclosure(single_site(1.0))


def test_rectangles_present_iff_small_radius():
    small = enclosure(BandedOperator.from_entries(1, {0: {30: 0.01}}))
    assert small.region_radius < 2 and small.rectangles is not None
    big = enclosure(single_site(0.5))
    assert big.region_radius >= 2 and big.rectangles is None


@pytest.mark.parametrize("rows,eps", [((20, 30), 0.01), ((40, 45), 0.02), ((50, 52), 0.03),
                                      ((30, 40), -0.01)])
def test_weak_potentials_respect_enclosure(rows, eps):
    op = BandedOperator.from_entries(1, {0: {k: eps for k in range(rows[0], rows[1] + 1)}})
    rep, _ = analyze(op)
    v = rep.enclosure
    assert rep.eigenvalues
    for e in rep.eigenvalues:
        assert not v.is_free(e.lam)
        if v.rectangles is not None:
            assert v.in_rectangles(e.lam)


def test_second_criterion_counterexample():
    """The 4/t form certifies emptiness although an eigenvalue exists; t/4 does not."""
    op = BandedOperator.from_entries(1, {0: {k: 0.01 for k in range(1, 26)}})
    rep, _ = analyze(op)
    v = rep.enclosure
    assert v.criterion_value == pytest.approx(5.3719, abs=1e-3)
    assert v.empty_spectrum_certified
    assert not v.empty_spectrum_certified_strict
    assert len(rep.eigenvalues) == 1
    lam = rep.eigenvalues[0].lam
    assert lam.real == pytest.approx(2.00294, abs=1e-5)
    ev = dense_eigenvalues(truncate(op, 800))
    assert np.min(np.abs(ev - lam)) < 1e-8


def test_strict_criterion_sound_on_random_suite():
    for seed in range(10):
        op = random_operator(1 + seed % 2, 4, 0.05, seed)
        try:
            v = enclosure(op)
        except EnclosureUnavailable:
            continue
        if v.empty_spectrum_certified_strict:
            rep, _ = analyze(op)
            assert rep.eigenvalues == [] and rep.edge_zero_count == 0


# -- pipeline -----------------------------------------------------------------


def test_analyze_report_json():
    rep, _ = analyze(single_site(2.0))
    d = rep.to_json()
    assert d["eigenvalues"][0]["lambda"]["re"] == pytest.approx(2.5)
    assert d["enclosure"] is None and "enclosure_error" in d


def test_analyze_iteration_route():
    rep, _ = analyze(single_site(2.0), AnalysisConfig(route="iteration"))
    assert abs(rep.eigenvalues[0].lam - 2.5) < 1e-10


def test_gamma_grid():
    e = JostEngine(normalize(single_site(2.0)))
    g = gamma_grid(e, 21)
    assert g.shape[1] == 3
    assert np.allclose(g[:, 2], np.abs(1 - 2 * (g[:, 0] + 1j * g[:, 1])))


def test_oracle_consistency_far_eigenvalues():
    op = random_operator(2, 5, 0.6, 4)
    rep, _ = analyze(op)
    ev = dense_eigenvalues(truncate(op, 300))
    far = ev[dist_to_interval(ev) > 0.1]
    found = np.array([e.lam for e in rep.eigenvalues])
    for x in far:
        assert np.min(np.abs(found - x)) < 1e-6

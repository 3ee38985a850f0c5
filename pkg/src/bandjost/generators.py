"""Test families: class samples, random finite perturbations, interleavings."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import InputError
from .model import ZERO_TAIL, BandedOperator, TailCertificate, combine_tails, free_band
from .oracle import dense_eigenvalues, dist_to_interval, truncate


def _fill_rows(p: int, budgets: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Band whose row n deviates from the free band by at most budgets[n-1] in l1."""
    n_rows = len(budgets)
    band = free_band(p, n_rows)
    for idx in range(n_rows):
        n = idx + 1
        offs = np.arange(-p, p + 1)
        allowed = offs[n + offs >= 1]  # padding positions stay fixed
        w = rng.dirichlet(np.ones(len(allowed)))
        frac = rng.uniform(0.5, 1.0)
        mags = budgets[idx] * frac * w
        # extreme diagonals must stay away from zero
        for k, r in enumerate(allowed):
            if abs(r) == p:
                mags[k] = min(mags[k], 0.5)
        phases = np.exp(2j * np.pi * rng.uniform(size=len(allowed)))
        band[idx, allowed + p] += mags * phases
        # 1 + tiny rounds; drop extreme-diagonal changes if rounding broke the budget
        if np.abs(band[idx] - free_band(p, 1)[0]).sum() > budgets[idx]:
            ext = allowed[np.abs(allowed) == p] + p
            band[idx, ext] = 1.0
    return band


def sample_class(p: int, beta: float, C1: float, C2: float, seed: int = 0,
                 n_explicit: int | None = None, tol: float = 1e-14) -> BandedOperator:
    """Random operator with q_n <= C1 exp(-C2 n^beta) and that certificate attached.

    When ``n_explicit`` is omitted, explicit rows run until the certified tail
    sum drops below ``tol``.
    """
    if not (0 < beta < 1) or C1 < 0 or C2 <= 0:
        raise InputError("sample_class needs 0 < beta < 1, C1 >= 0, C2 > 0")
    if C1 == 0:
        return BandedOperator.free(p)
    tail = TailCertificate("exp_beta", C1=float(C1), C2=float(C2), beta=float(beta))
    if n_explicit is None:
        n_explicit = p
        while tail.weighted_sum(n_explicit + 1) > tol:
            n_explicit *= 2
        lo, hi = n_explicit // 2, n_explicit
        while hi - lo > 1:
            mid = (lo + hi) // 2
            lo, hi = (mid, hi) if tail.weighted_sum(mid + 1) > tol else (lo, mid)
        n_explicit = max(hi, p)
    rng = np.random.default_rng(seed)
    n = np.arange(1, n_explicit + 1)
    budgets = C1 * np.exp(-C2 * n**beta)
    return BandedOperator(p, _fill_rows(p, budgets, rng), tail)


def random_finite(p: int, n_rows: int, q_max: float = 0.4, seed: int = 0,
                  decay: float = 0.0) -> BandedOperator:
    """Zero-tail random perturbation with q_n <= q_max * exp(-decay * (n - 1))."""
    rng = np.random.default_rng(seed)
    n = np.arange(n_rows)
    budgets = q_max * np.exp(-decay * n) * np.ones(n_rows)
    return BandedOperator(p, _fill_rows(p, budgets, rng), ZERO_TAIL)


def jacobi(b, a_upper=None, a_lower=None, tail: TailCertificate = ZERO_TAIL) -> BandedOperator:
    """p = 1 operator with diagonal b_n and off-diagonals (n, n+1), (n+1, n).

    Off-diagonals default to 1; ``a_upper[k]`` and ``a_lower[k]`` refer to
    rows k+1 -> k+2 and k+2 -> k+1.
    """
    b = np.asarray(b, dtype=complex)
    m = len(b)
    up = np.ones(m, complex) if a_upper is None else np.asarray(a_upper, complex)
    lowr = np.ones(m, complex) if a_lower is None else np.asarray(a_lower, complex)
    band = free_band(1, m)
    band[:, 1] = b
    band[: len(up), 2] = up[:m]
    band[1:, 0] = lowr[: m - 1] if len(lowr) >= m - 1 else np.concatenate(
        [lowr, np.ones(m - 1 - len(lowr))])
    return BandedOperator(1, band, tail)


def interleave(jacobis: list[BandedOperator]) -> BandedOperator:
    """Order-p operator acting as jacobis[i-1] on span{e_i, e_{p+i}, ...}.

    Row p(n-1)+i of the result copies row n of the i-th Jacobi matrix.
    """
    p = len(jacobis)
    if p < 1:
        raise InputError("interleave needs at least one Jacobi matrix")
    for J in jacobis:
        if J.p != 1:
            raise InputError("interleave inputs must have band order 1")
    m = max(J.n_explicit for J in jacobis)
    band = free_band(p, m * p)
    for i, J in enumerate(jacobis, start=1):
        rows = np.arange(1, m + 1)
        sub = J.entries(rows[:, None], rows[:, None] + np.array([-1, 0, 1])[None, :])
        tgt = p * (rows - 1) + i - 1
        band[tgt, 0] = sub[:, 0]
        band[tgt, p] = sub[:, 1]
        band[tgt, 2 * p] = sub[:, 2]
    # rows of the i-th matrix sit at index >= its own row number times p
    tail = combine_tails([J.tail for J in jacobis], index_scale=float(p))
    return BandedOperator(p, band, tail)


def slowly_decaying(signs=(1, -1), strength: float = 1.0, gamma: float = 1.5,
                    n_rows: int = 1000) -> BandedOperator:
    """Interleaved Jacobi matrices with potentials sign * strength * n^-gamma.

    For gamma < 2 each component picks up more and more eigenvalues beyond
    +-2 as more rows are kept, a desk-scale stand-in for accumulation at the
    band edges.  Heuristic; not an element of an exponential class.
    """
    n = np.arange(1, n_rows + 1, dtype=float)
    comps = [jacobi(s * strength * n ** (-gamma)) for s in signs]
    return comps[0] if len(comps) == 1 else interleave(comps)


def accumulation_diagnostic(op: BandedOperator, points, radii, N_list,
                            threads: int | None = None) -> dict:
    """Counts of section eigenvalues within each radius of each point, per N.

    ``off_interval`` counts only eigenvalues at positive distance from [-2, 2].
    """
    N_list = sorted(int(N) for N in N_list)
    threads = threads or os.cpu_count() or 1
    with ThreadPoolExecutor(max_workers=threads) as ex:
        spectra = list(ex.map(lambda N: dense_eigenvalues(truncate(op, N)), N_list))
    table = {"N": N_list, "points": [complex(x) for x in points], "radii": list(radii),
             "counts": [], "off_interval": []}
    for ev in spectra:
        off = dist_to_interval(ev) > 1e-9
        row, row_off = [], []
        for x in points:
            d = np.abs(ev - complex(x))
            row.append([int(np.sum(d <= r)) for r in radii])
            row_off.append([int(np.sum((d <= r) & off)) for r in radii])
        table["counts"].append(row)
        table["off_interval"].append(row_off)
    return table

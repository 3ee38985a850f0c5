"""Finite-section eigenvalues as a brute-force check on the Jost zeros.

The default solver is LAPACK ``zgeev`` through SciPy (balancing, Hessenberg
reduction, shifted QR).  :func:`qr_eigenvalues` is an independent
Hessenberg + single-shift complex QR used to cross-check it on small sections.
"""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import InputError, QRConvergenceError
from .model import BandedOperator

MAX_DENSE = 2000


@dataclass(frozen=True, eq=False)
class FiniteSection:
    N: int
    entries: np.ndarray


def truncate(op: BandedOperator, N: int) -> FiniteSection:
    """Top-left N x N corner of the operator."""
    if N < 2 * op.p:
        raise InputError(f"section size {N} must be at least 2p = {2 * op.p}")
    m = np.zeros((N, N), dtype=complex)
    rows = np.arange(1, N + 1)
    for r in range(-op.p, op.p + 1):
        n = rows[(rows + r >= 1) & (rows + r <= N)]
        m[n - 1, n + r - 1] = op.entries(n, n + r)
    return FiniteSection(N, m)


# ---------------------------------------------------------------------------
# own QR


def balance(a: np.ndarray, radix: float = 2.0, max_sweeps: int = 100) -> np.ndarray:
    """Diagonal similarity by powers of the radix that evens out row and column norms."""
    a = np.array(a, dtype=complex)
    n = a.shape[0]
    for _ in range(max_sweeps):
        done = True
        for i in range(n):
            c = np.abs(a[:, i]).sum() - abs(a[i, i])
            r = np.abs(a[i, :]).sum() - abs(a[i, i])
            if c == 0.0 or r == 0.0:
                continue
            f = 1.0
            s = c + r
            while c < r / radix:
                c *= radix
                r /= radix
                f *= radix
            while c >= r * radix:
                c /= radix
                r *= radix
                f /= radix
            if (c + r) < 0.95 * s:
                done = False
                a[:, i] *= f
                a[i, :] /= f
        if done:
            break
    return a


def hessenberg(a: np.ndarray) -> np.ndarray:
    """Upper Hessenberg form by Householder reflections."""
    h = np.array(a, dtype=complex)
    n = h.shape[0]
    for k in range(n - 2):
        x = h[k + 1:, k]
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x.copy()
        v[0] += phase * alpha
        v /= np.linalg.norm(v)
        h[k + 1:, k:] -= 2.0 * np.outer(v, v.conj() @ h[k + 1:, k:])
        h[:, k + 1:] -= 2.0 * np.outer(h[:, k + 1:] @ v, v.conj())
        h[k + 2:, k] = 0.0
    return h


def _wilkinson(a, b, c, d):
    """Eigenvalue of [[a, b], [c, d]] closer to d."""
    tr = 0.5 * (a + d)
    disc = np.sqrt(0.25 * (a - d) ** 2 + b * c)
    l1, l2 = tr + disc, tr - disc
    return l1 if abs(l1 - d) < abs(l2 - d) else l2


def qr_eigenvalues(a: np.ndarray, balanced: bool = True, max_iter: int | None = None) -> np.ndarray:
    """Eigenvalues by Hessenberg reduction and Wilkinson-shifted complex QR."""
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    if n == 0:
        return np.zeros(0, complex)
    h = hessenberg(balance(a) if balanced else a)
    eps = np.finfo(float).eps
    eig = np.full(n, np.nan + 0j)
    hi = n - 1
    its = 0
    stall = 0
    cap = max_iter if max_iter is not None else 30 * n
    while hi >= 0:
        # find the start of the active unreduced block
        lo = hi
        while lo > 0:
            s = abs(h[lo, lo]) + abs(h[lo - 1, lo - 1])
            if s == 0.0:
                s = np.abs(h[: hi + 1, : hi + 1]).sum()
            if abs(h[lo, lo - 1]) <= eps * s:
                h[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            eig[hi] = h[hi, hi]
            hi -= 1
            stall = 0
            continue
        if its >= cap:
            raise QRConvergenceError(f"QR iteration cap {cap} reached", partial=eig[hi + 1:].copy())
        its += 1
        stall += 1
        if stall % 11 == 10:
            mu = h[hi, hi] + 0.75 * abs(h[hi, hi - 1]) * (1 + 1j)  # exceptional shift
        else:
            mu = _wilkinson(h[hi - 1, hi - 1], h[hi - 1, hi], h[hi, hi - 1], h[hi, hi])
        # one explicit shifted QR step on the block lo..hi
        blk = h[lo:hi + 1, lo:hi + 1]
        m = blk.shape[0]
        blk[np.arange(m), np.arange(m)] -= mu
        rots = []
        for k in range(m - 1):
            x, y = blk[k, k], blk[k + 1, k]
            r = math.hypot(abs(x), abs(y))
            if r == 0.0:
                c, s = 1.0, 0.0
            else:
                c, s = x / r, y / r
            G = np.array([[np.conj(c), np.conj(s)], [-s, c]])
            blk[k:k + 2, k:] = G @ blk[k:k + 2, k:]
            rots.append(G)
        for k, G in enumerate(rots):
            top = min(k + 2, m - 1)
            blk[: top + 1, k:k + 2] = blk[: top + 1, k:k + 2] @ G.conj().T
        blk[np.arange(m), np.arange(m)] += mu
        h[lo:hi + 1, lo:hi + 1] = blk
    return eig


def dense_eigenvalues(m: FiniteSection | np.ndarray, solver: str = "lapack",
                      max_dim: int = MAX_DENSE) -> np.ndarray:
    """All eigenvalues of the section, sorted by (real, imag)."""
    a = m.entries if isinstance(m, FiniteSection) else np.asarray(m, dtype=complex)
    if a.shape[0] > max_dim:
        raise InputError(f"section size {a.shape[0]} exceeds the dense limit {max_dim}")
    if solver == "lapack":
        ev = sla.eigvals(a, check_finite=True)
    elif solver == "qr":
        ev = qr_eigenvalues(a)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    ev = np.asarray(ev, dtype=complex)
    return ev[np.lexsort((ev.imag, ev.real))]


def gershgorin_contains(a: np.ndarray, eigs: np.ndarray, rel: float = 1e-9) -> bool:
    a = np.asarray(a)
    centers = np.diag(a)
    radii = np.abs(a).sum(axis=1) - np.abs(centers)
    slack = rel * max(1.0, np.abs(a).max())
    d = np.abs(eigs[:, None] - centers[None, :]) - radii[None, :]
    return bool(np.all(d.min(axis=1) <= slack))


def dist_to_interval(lam) -> np.ndarray:
    """Distance from lam to the segment [-2, 2]."""
    lam = np.asarray(lam, dtype=complex)
    dx = np.maximum(np.abs(lam.real) - 2.0, 0.0)
    return np.hypot(dx, lam.imag)


# ---------------------------------------------------------------------------
# matching


@dataclass
class MatchRow:
    lam: complex
    gap: float
    nearest: dict
    distance: dict
    converged: bool

    def to_json(self) -> dict:
        return {
            "lambda": {"re": self.lam.real, "im": self.lam.imag},
            "gap": self.gap,
            "nearest": {str(N): {"re": v.real, "im": v.imag} for N, v in self.nearest.items()},
            "distance": {str(N): v for N, v in self.distance.items()},
            "converged": self.converged,
        }


@dataclass
class MatchTable:
    sections: list
    rows: list
    pollution_candidates: list
    unmatched: list
    on_interval: int = 0
    spectra: dict = field(repr=False, default_factory=dict)

    def to_json(self) -> dict:
        c = lambda v: {"re": v.real, "im": v.imag}
        return {"sections": self.sections,
                "rows": [r.to_json() for r in self.rows],
                "pollution_candidates": [c(v) for v in self.pollution_candidates],
                "unmatched": [c(v) for v in self.unmatched],
                "on_interval": self.on_interval}


def section_spectra(op: BandedOperator, sections, solver: str = "lapack",
                    threads: int | None = None) -> dict:
    sections = sorted(int(N) for N in sections)
    threads = threads or os.cpu_count() or 1
    with ThreadPoolExecutor(max_workers=threads) as ex:
        spectra = list(ex.map(lambda N: dense_eigenvalues(truncate(op, N), solver), sections))
    return dict(zip(sections, spectra))


def match(eigenvalues, op: BandedOperator, sections, gap: float = 0.05,
          match_radius: float = 1e-3, floor: float = 1e-11, on_tol: float = 1e-9, solver: str = "lapack",
          threads: int | None = None) -> MatchTable:
    """Pair each Jost eigenvalue with the nearest section eigenvalue per N.

    Jost eigenvalues within ``gap`` of [-2, 2] are listed but not asserted.
    ``converged`` holds when distances are non-increasing in N up to the
    round-off ``floor``.  Section eigenvalues at the largest N that sit farther
    than ``match_radius`` from every Jost eigenvalue are counted as lying on
    [-2, 2] (distance below ``on_tol``), labelled pollution candidates if
    within ``gap`` of it, and unmatched otherwise.
    """
    sections = sorted(int(N) for N in sections)
    if len(sections) < 2:
        raise InputError("matching needs at least two section sizes")
    spectra = section_spectra(op, sections, solver, threads)
    lams = [complex(e.lam) if hasattr(e, "lam") else complex(e) for e in eigenvalues]
    rows = []
    for lam in lams:
        g = float(dist_to_interval(lam))
        near, dist = {}, {}
        for N in sections:
            ev = spectra[N]
            i = int(np.argmin(np.abs(ev - lam)))
            near[N] = complex(ev[i])
            dist[N] = float(abs(ev[i] - lam))
        ds = [dist[N] for N in sections]
        conv = all(b <= a + floor for a, b in zip(ds, ds[1:]))
        rows.append(MatchRow(lam, g, near, dist, conv))
    last = spectra[sections[-1]]
    pollution, unmatched, on_interval = [], [], 0
    for v in last:
        if lams and min(abs(v - l) for l in lams) <= match_radius:
            continue
        d = dist_to_interval(v)
        if d <= on_tol:
            on_interval += 1
        else:
            (pollution if d <= gap else unmatched).append(complex(v))
    return MatchTable(sections, rows, pollution, unmatched, on_interval, spectra)


def write_csv(path, spectra: dict) -> None:
    """Rows N, index, re, im for every section eigenvalue."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["N", "index", "re", "im"])
        for N in sorted(spectra):
            for i, v in enumerate(spectra[N]):
                w.writerow([N, i, repr(float(v.real)), repr(float(v.imag))])

"""Doubly-infinite banded matrices and the doubling map to the half line.

The basis map ``U e_k = e^_{-2k}`` for ``k < 0`` and ``e^_{2k+1}`` for
``k >= 0`` turns a doubly-infinite band matrix of order p into a unitarily
equivalent semi-infinite one of order 2p.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import InputError
from .model import (ZERO_TAIL, BandedOperator, TailCertificate, _as_complex, check_keys,
                    combine_tails, complex_to_json)
from .oracle import FiniteSection


def u_index(k):
    """Position of e_k in the doubled basis (1-based)."""
    k = np.asarray(k, dtype=np.int64)
    out = np.where(k < 0, -2 * k, 2 * k + 1)
    return int(out) if out.ndim == 0 else out


def u_inverse(m):
    m = np.asarray(m, dtype=np.int64)
    if np.any(m < 1):
        raise InputError("doubled indices start at 1")
    out = np.where(m % 2 == 1, (m - 1) // 2, -(m // 2))
    return int(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class BiBandedOperator:
    """Rows ``lo .. lo + len(band) - 1`` stored explicitly, free elsewhere.

    ``tail`` bounds q_n in terms of |n| outside the explicit rows on both sides.
    """

    p: int
    lo: int
    band: np.ndarray
    tail: TailCertificate = ZERO_TAIL

    def __post_init__(self):
        if not isinstance(self.p, (int, np.integer)) or self.p < 1:
            raise InputError("band order p must be a positive integer")
        band = np.array(self.band, dtype=complex, copy=True)
        if band.ndim != 2 or band.shape[1] != 2 * self.p + 1:
            raise InputError(f"band must have shape (N, {2 * self.p + 1})")
        if not np.all(np.isfinite(band)):
            raise InputError("operator entries must be finite")
        if np.any(band[:, 0] == 0) or np.any(band[:, -1] == 0):
            raise InputError("extreme diagonals d[n, n+-p] must be nonzero")
        band.setflags(write=False)
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "lo", int(self.lo))
        object.__setattr__(self, "band", band)

    @property
    def hi(self) -> int:
        return self.lo + self.band.shape[0] - 1

    @classmethod
    def free(cls, p: int) -> "BiBandedOperator":
        return cls.from_entries(p, {})

    @classmethod
    def from_entries(cls, p: int, entries: Mapping[int, Mapping[int, complex]],
                     tail: TailCertificate = ZERO_TAIL) -> "BiBandedOperator":
        """``{offset: {row: value}}`` with signed row indices."""
        rows = [int(n) for d in entries.values() for n in d]
        lo, hi = (min(rows), max(rows)) if rows else (0, -1)
        band = np.zeros((hi - lo + 1, 2 * p + 1), dtype=complex)
        band[:, 0] = band[:, -1] = 1.0
        for r, diag in entries.items():
            r = int(r)
            if abs(r) > p:
                raise InputError(f"offset {r} outside band of order {p}")
            for n, v in diag.items():
                band[int(n) - lo, r + p] = _as_complex(v)
        return cls(p, lo, band, tail)

    def entries(self, i, j) -> np.ndarray:
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        i, j = np.broadcast_arrays(i, j)
        r = j - i
        out = np.where(np.abs(r) == self.p, 1.0 + 0j, 0j).astype(complex)
        explicit = (np.abs(r) <= self.p) & (i >= self.lo) & (i <= self.hi)
        out[explicit] = self.band[i[explicit] - self.lo, r[explicit] + self.p]
        return out

    def entry(self, i: int, j: int) -> complex:
        return complex(self.entries(i, j))

    def q(self) -> np.ndarray:
        """q_n for the explicit rows lo..hi."""
        dev = self.band.copy()
        dev[:, 0] -= 1.0
        dev[:, -1] -= 1.0
        return np.abs(dev).sum(axis=1)

    def to_json(self) -> dict:
        p = self.p
        diagonals = []
        for r in range(-p, p + 1):
            col = self.band[:, r + p]
            default = 1.0 if abs(r) == p else 0.0
            idx = np.nonzero(col != default)[0]
            if len(idx):
                diagonals.append({"offset": r, "entries": {
                    str(int(n) + self.lo): complex_to_json(col[n]) for n in idx}})
        return {"p": p, "bi_infinite": True, "diagonals": diagonals, "tail": self.tail.to_json()}

    @classmethod
    def from_json(cls, obj: Mapping) -> "BiBandedOperator":
        check_keys(obj, {"p", "bi_infinite", "diagonals", "tail"}, "bi-infinite operator")
        try:
            p = int(obj["p"])
            entries: dict[int, dict[int, complex]] = {}
            for diag in obj.get("diagonals", []):
                r = int(diag["offset"])
                entries.setdefault(r, {})
                for n, v in diag.get("entries", {}).items():
                    entries[r][int(n)] = _as_complex(v)
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed bi-infinite operator: {exc}") from exc
        return cls.from_entries(p, entries, TailCertificate.from_json(obj.get("tail")))


def double(op: BiBandedOperator) -> BandedOperator:
    """Semi-infinite order-2p matrix with (U^)_{u(i), u(j)} = d_{ij}.

    Every entry of the rows in [min(lo, -p), max(hi, p)] is transferred,
    defaults included, so the fold near index 0 is represented explicitly.
    The image tail follows from |n| >= m/4 for image rows m >= 2.
    """
    p = op.p
    lo = min(op.lo, -p)
    hi = max(op.hi, p)
    M = max(2 * hi + 1, -2 * lo)
    P = 2 * p
    band = np.zeros((M, 2 * P + 1), dtype=complex)
    m = np.arange(1, M + 1)
    i = u_inverse(m)
    for r in range(-p, p + 1):
        j = i + r
        mj = u_index(j)
        off = mj - m
        band[m - 1, off + P] = op.entries(i, j)
    # columns <= 0 are padding in the half-line convention
    for row in range(1, min(M, P) + 1):
        for off in range(-P, 1 - row):
            band[row - 1, off + P] = 1.0 if off == -P else 0.0
    tail = combine_tails([op.tail], index_scale=4.0)
    return BandedOperator(P, band, tail)


def sym_truncate(op: BiBandedOperator, N: int) -> FiniteSection:
    """Rows and columns -N..N of the doubly-infinite matrix."""
    idx = np.arange(-N, N + 1)
    I, J = np.meshgrid(idx, idx, indexing="ij")
    return FiniteSection(2 * N + 1, op.entries(I, J))


def analyze_bi(op: BiBandedOperator, cfg=None):
    """Run the half-line pipeline on ``double(op)``; eigenvalues are unchanged."""
    from .spectrum import analyze

    return analyze(double(op), cfg)

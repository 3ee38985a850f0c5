"""Semi-infinite complex banded operators and their block decomposition.

An operator of order ``p`` is stored as a dense ``(N, 2p+1)`` band holding the
explicit rows ``1..N``; row ``n`` and column ``r + p`` of the band is the entry
``d[n, n+r]``.  Rows beyond ``N`` take the free values (1 on the extreme
diagonals, 0 elsewhere).  Indices ``<= 0`` are never stored: they are
synthesized as padding with the same free values.

The :class:`TailCertificate` bounds the perturbation sizes ``q_n`` of the true
operator for ``n > N``; explicit rows are exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy import linalg as sla
from scipy import special

from .errors import HorizonError, InputError, NonSummableError

TAIL_KINDS = ("zero", "exp_beta", "power")


def row_norm(m: np.ndarray) -> np.ndarray:
    """Max absolute row sum; works on stacks of matrices."""
    return np.abs(m).sum(axis=-1).max(axis=-1)


# ---------------------------------------------------------------------------
# tail certificates


def _log_upper_gamma(a: float, x: float) -> float:
    q = special.gammaincc(a, x)
    if q <= 0.0:
        return -math.inf
    return special.gammaln(a) + math.log(q)


def _exp_beta_sum(C1, C2, beta, s, m):
    """Upper bound on sum_{k>=m} k**s * C1*exp(-C2*k**beta), m >= 1.

    Sum <= integral + 2*max for a unimodal summand, <= integral + g(m) once
    the summand is decreasing from m on.
    """
    a = (s + 1.0) / beta
    x = C2 * m**beta
    log_int = math.log(C1) + _log_upper_gamma(a, x) - math.log(beta) - a * math.log(C2)
    integral = math.exp(log_int) if log_int > -math.inf else 0.0
    peak = (s / (C2 * beta)) ** (1.0 / beta) if s > 0 else 0.0

    def g(xv):
        return math.exp(math.log(C1) + s * math.log(xv) - C2 * xv**beta)

    if m >= peak:
        return integral + g(m)
    return integral + 2.0 * g(peak)


@dataclass(frozen=True)
class TailCertificate:
    """Bound on q_n for rows beyond the explicit ones.

    ``exp_beta``: q_n <= C1*exp(-C2*n**beta).  ``power``: q_n <= C1*n**(-s).
    ``zero``: the operator is exactly free beyond its explicit rows.
    """

    kind: str = "zero"
    C1: float = 0.0
    C2: float = 0.0
    beta: float = 0.0
    s: float = 0.0

    def __post_init__(self):
        if self.kind not in TAIL_KINDS:
            raise InputError(f"unknown tail kind {self.kind!r}")
        if self.kind == "exp_beta":
            if not (self.C1 >= 0 and self.C2 > 0 and 0 < self.beta < 1):
                raise InputError("exp_beta tail needs C1 >= 0, C2 > 0, 0 < beta < 1")
        if self.kind == "power" and not (self.C1 >= 0 and self.s > 1):
            raise InputError("power tail needs C1 >= 0 and s > 1")

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or self.C1 == 0.0

    def bound(self, n: int) -> float:
        if self.is_zero:
            return 0.0
        n = max(n, 1)
        if self.kind == "exp_beta":
            return self.C1 * math.exp(-self.C2 * n**self.beta)
        return self.C1 * n ** (-self.s)

    def weighted_sum(self, m: int, power: float = 0.0) -> float:
        """Certified bound on sum_{k>=m} k**power * q_k."""
        if self.is_zero:
            return 0.0
        m = max(int(m), 1)
        if self.kind == "exp_beta":
            return _exp_beta_sum(self.C1, self.C2, self.beta, power, m)
        e = self.s - power
        if e <= 1.0:
            raise NonSummableError(
                f"power tail with s={self.s} does not make sum k^{power} q_k finite"
            )
        return self.C1 * (m ** (-e) + m ** (1.0 - e) / (e - 1.0))

    def moment(self, m: int, r: int) -> float:
        """Certified bound on sum_{k>=m} (k+1)**r * q_k."""
        m = max(int(m), 1)
        return (1.0 + 1.0 / m) ** r * self.weighted_sum(m, r)

    def to_json(self) -> dict:
        if self.kind == "zero":
            return {"kind": "zero"}
        if self.kind == "exp_beta":
            return {"kind": "exp_beta", "C1": self.C1, "C2": self.C2, "beta": self.beta}
        return {"kind": "power", "C1": self.C1, "s": self.s}

    @classmethod
    def from_json(cls, obj: Mapping | None) -> "TailCertificate":
        if obj is None:
            return ZERO_TAIL
        try:
            kind = obj.get("kind", "zero")
            if kind == "zero":
                return ZERO_TAIL
            if kind == "exp_beta":
                return cls("exp_beta", C1=float(obj["C1"]), C2=float(obj["C2"]),
                           beta=float(obj["beta"]))
            if kind == "power":
                return cls("power", C1=float(obj["C1"]), s=float(obj["s"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"bad tail certificate: {exc}") from exc
        raise InputError(f"unknown tail kind {kind!r}")


ZERO_TAIL = TailCertificate()


def combine_tails(tails, index_scale: float = 1.0) -> TailCertificate:
    """One certificate covering all of ``tails`` after stretching indices.

    ``index_scale`` = s means row m of the new operator corresponds to a row
    n >= m/s of the source, so q'_m <= C1*exp(-C2*(m/s)**beta).
    """
    live = [t for t in tails if not t.is_zero]
    if not live:
        return ZERO_TAIL
    kinds = {t.kind for t in live}
    if kinds == {"exp_beta"}:
        beta = min(t.beta for t in live)
        # n**beta_i >= n**beta for n >= 1
        C2 = min(t.C2 for t in live) * index_scale ** (-beta)
        return TailCertificate("exp_beta", C1=max(t.C1 for t in live), C2=C2, beta=beta)
    if kinds == {"power"}:
        s = min(t.s for t in live)
        return TailCertificate("power", C1=max(t.C1 for t in live) * index_scale**s, s=s)
    raise InputError("cannot combine exp_beta and power tails")


# ---------------------------------------------------------------------------
# operator


def _as_complex(v) -> complex:
    if isinstance(v, Mapping):
        try:
            return complex(float(v.get("re", 0.0)), float(v.get("im", 0.0)))
        except (TypeError, ValueError) as exc:
            raise InputError(f"bad complex value {v!r}") from exc
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    try:
        return complex(v)
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad complex value {v!r}") from exc


def complex_to_json(v: complex) -> dict:
    return {"re": float(v.real), "im": float(v.imag)}


def check_keys(obj: Mapping, allowed: set, what: str) -> None:
    """Reject unknown top-level keys so misspelled fields do not pass silently."""
    if not isinstance(obj, Mapping):
        raise InputError(f"{what}: expected a JSON object")
    extra = sorted(set(obj) - allowed)
    if extra:
        raise InputError(f"{what}: unknown keys {extra}")


def free_band(p: int, n_rows: int) -> np.ndarray:
    band = np.zeros((n_rows, 2 * p + 1), dtype=complex)
    band[:, 0] = 1.0
    band[:, 2 * p] = 1.0
    return band


@dataclass(frozen=True, eq=False)
class BandedOperator:
    p: int
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
        # padding positions (column <= 0) always carry the free values
        free = free_band(self.p, band.shape[0])
        for n in range(1, min(band.shape[0], self.p) + 1):
            for r in range(-self.p, 1 - n):
                band[n - 1, r + self.p] = free[n - 1, r + self.p]
        if np.any(band[:, 0] == 0) or np.any(band[:, 2 * self.p] == 0):
            raise InputError("extreme diagonals d[n, n+-p] must be nonzero")
        band.setflags(write=False)
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "band", band)

    # -- constructors --------------------------------------------------------

    @classmethod
    def free(cls, p: int) -> "BandedOperator":
        return cls(p, free_band(p, 0))

    @classmethod
    def from_entries(cls, p: int, entries: Mapping[int, Mapping[int, complex]],
                     tail: TailCertificate = ZERO_TAIL) -> "BandedOperator":
        """Build from ``{offset: {row: value}}`` with 1-based rows."""
        rows = [int(n) for diag in entries.values() for n in diag]
        n_rows = max(rows, default=0)
        band = free_band(p, n_rows)
        for r, diag in entries.items():
            r = int(r)
            if abs(r) > p:
                raise InputError(f"offset {r} outside band of order {p}")
            for n, v in diag.items():
                n = int(n)
                if n < 1:
                    raise InputError(f"row index {n} must be >= 1")
                if n + r < 1:
                    raise InputError(f"entry d[{n},{n + r}] is padding and cannot be set")
                band[n - 1, r + p] = _as_complex(v)
        return cls(p, band, tail)

    # -- entries -------------------------------------------------------------

    @property
    def n_explicit(self) -> int:
        return self.band.shape[0]

    @property
    def support_blocks(self) -> int:
        return -(-self.n_explicit // self.p)

    def entries(self, i, j) -> np.ndarray:
        """Vectorized d[i, j] including padding and free defaults."""
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        i, j = np.broadcast_arrays(i, j)
        r = j - i
        out = np.where(np.abs(r) == self.p, 1.0 + 0j, 0j)
        explicit = (np.abs(r) <= self.p) & (np.minimum(i, j) >= 1) & (i <= self.n_explicit)
        if np.any(explicit):
            out = out.astype(complex)
            out[explicit] = self.band[i[explicit] - 1, r[explicit] + self.p]
        return out

    def entry(self, i: int, j: int) -> complex:
        return complex(self.entries(i, j))

    def q(self) -> np.ndarray:
        """q_n for the explicit rows n = 1..N."""
        p = self.p
        dev = self.band - free_band(p, self.n_explicit)
        return np.abs(dev).sum(axis=1)

    def conjugate(self) -> "BandedOperator":
        return BandedOperator(self.p, np.conj(self.band), self.tail)

    # -- json ----------------------------------------------------------------

    def to_json(self) -> dict:
        p = self.p
        free = free_band(p, self.n_explicit)
        diagonals = []
        for r in range(-p, p + 1):
            col = self.band[:, r + p]
            idx = np.nonzero(col != free[:, r + p])[0]
            if len(idx):
                diagonals.append({
                    "offset": r,
                    "entries": {str(int(n) + 1): complex_to_json(col[n]) for n in idx},
                })
        return {"p": p, "n_explicit": self.n_explicit, "diagonals": diagonals,
                "tail": self.tail.to_json()}

    @classmethod
    def from_json(cls, obj: Mapping) -> "BandedOperator":
        check_keys(obj, {"p", "n_explicit", "diagonals", "tail"}, "operator")
        try:
            p = int(obj["p"])
            entries: dict[int, dict[int, complex]] = {}
            for diag in obj.get("diagonals", []):
                r = int(diag["offset"])
                entries.setdefault(r, {})
                for n, v in diag.get("entries", {}).items():
                    entries[r][int(n)] = _as_complex(v)
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed operator description: {exc}") from exc
        op = cls.from_entries(p, entries, TailCertificate.from_json(obj.get("tail")))
        n_explicit = int(obj.get("n_explicit", op.n_explicit))
        if n_explicit > op.n_explicit:
            band = np.vstack([op.band, free_band(p, n_explicit - op.n_explicit)])
            op = cls(p, band, op.tail)
        return op


# ---------------------------------------------------------------------------
# scalar characteristics


def perturbation_size(op: BandedOperator, n: int) -> float:
    """q_n of the represented operator; zero on padding rows and free rows."""
    if n < 1 or n > op.n_explicit:
        return 0.0
    return float(op.q()[n - 1])


def tail_sum(op: BandedOperator, n: int, power: float = 0.0) -> float:
    """Certified bound on sum_{k>=n} k**power q_k."""
    n = max(int(n), 1)
    q = op.q()
    k = np.arange(1, op.n_explicit + 1, dtype=float)
    explicit = float(np.sum((k**power * q)[n - 1:])) if n <= op.n_explicit else 0.0
    return explicit + op.tail.weighted_sum(max(n, op.n_explicit + 1), power)


def tail_sums(op: BandedOperator, n: int) -> tuple[float, float]:
    """(sum_{k>=n} q_k, sum_{k>=n} k q_k); exact for zero tails."""
    return tail_sum(op, n, 0.0), tail_sum(op, n, 1.0)


def sup_q(op: BandedOperator) -> float:
    """sup_n q_n including the certified tail."""
    q = op.q()
    explicit = float(q.max()) if len(q) else 0.0
    return max(explicit, op.tail.bound(op.n_explicit + 1))


def moments(op: BandedOperator, r: int) -> float:
    """Certified bound on M_r = sum_{k>=0} (k+1)**r q_k (q_0 = 0)."""
    q = op.q()
    k = np.arange(1, op.n_explicit + 1, dtype=float)
    return float(np.sum((k + 1.0) ** r * q)) + op.tail.moment(op.n_explicit + 1, r)


# ---------------------------------------------------------------------------
# blocks


@dataclass(frozen=True)
class BlockCoefficients:
    k: int
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray


def block_arrays(op: BandedOperator, k_max: int):
    """A_k, B_k, C_k for k = 0..k_max, with A_0 = C_0 = I and B_0 = 0."""
    p = op.p
    ks = np.arange(1, k_max + 1)[:, None, None]
    a = np.arange(p)[None, :, None]
    b = np.arange(p)[None, None, :]
    rows = (ks - 1) * p + 1 + a
    A = op.entries(rows, (ks - 2) * p + 1 + b)
    B = op.entries(rows, (ks - 1) * p + 1 + b)
    C = op.entries(rows, ks * p + 1 + b)
    eye = np.eye(p, dtype=complex)[None]
    zero = np.zeros((1, p, p), dtype=complex)
    return (np.concatenate([eye, A]), np.concatenate([zero, B]), np.concatenate([eye, C]))


def blocks(op: BandedOperator, k: int) -> BlockCoefficients:
    if k < 1:
        raise InputError("block index k must be >= 1")
    A, B, C = block_arrays(op, k)
    return BlockCoefficients(k, A[k], B[k], C[k])


def qhat(op: BandedOperator, k_max: int) -> np.ndarray:
    """Blockwise maxima q^_k = max_j q_{(k-1)p+j}, k = 0..k_max (q^_0 = 0)."""
    p = op.p
    q = np.zeros(k_max * p)
    n = min(op.n_explicit, k_max * p)
    q[:n] = op.q()[:n]
    return np.concatenate([[0.0], q.reshape(k_max, p).max(axis=1)])


@dataclass(frozen=True, eq=False)
class NormalizedCoefficients:
    """L_k, B~_k, C~_k for k = 0..H+1 where H is the horizon.

    Beyond the horizon B~ = 0 and C~ = I exactly.  ``h[k]`` follows
    ||B~_k|| + ||I - C~_{k-1}|| and ``g[k]`` follows ||B~_k|| + ||I - C~_k||.
    """

    p: int
    horizon: int
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    L: np.ndarray
    Linv: np.ndarray
    Btilde: np.ndarray
    Ctilde: np.ndarray
    h: np.ndarray
    g: np.ndarray
    qhat: np.ndarray
    q_sup: float
    Q0: float
    Q1: float
    tail_q0: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def sigma0(self) -> np.ndarray:
        """sigma0[n] = sum_{k>n} h_k for n = 0..H+1."""
        return _suffix_after(self.h)

    @property
    def sigma1(self) -> np.ndarray:
        """sigma1[n] = sum_{k>n} k h_k."""
        k = np.arange(len(self.h), dtype=float)
        return _suffix_after(k * self.h)


def _suffix_after(x: np.ndarray) -> np.ndarray:
    s = np.cumsum(x[::-1])[::-1]
    return np.concatenate([s[1:], [0.0]])


def normalize(op: BandedOperator, horizon: int | None = None,
              tail_tol: float | None = 1e-14) -> NormalizedCoefficients:
    """Left products L_k and the reduced coefficients B~_k, C~_k."""
    p = op.p
    S = max(op.support_blocks, 1)
    H = S if horizon is None else int(horizon)
    if H < 1:
        raise InputError("horizon must be >= 1")
    tail_mass = tail_sum(op, H * p + 1)
    if tail_tol is not None and tail_mass > tail_tol:
        raise HorizonError(
            f"certified tail beyond horizon {H} is {tail_mass:.3e} > tolerance {tail_tol:.1e}"
        )
    Q0 = tail_sum(op, 1)
    try:
        Q1 = tail_sum(op, 1, 1.0)
    except NonSummableError:
        Q1 = math.inf
    q_sup = sup_q(op)
    if H < S:
        op = BandedOperator(p, op.band[: H * p], op.tail)
    A, B, C = block_arrays(op, H + 1)
    eye = np.eye(p, dtype=complex)
    L = np.empty((H + 2, p, p), dtype=complex)
    L[H + 1] = eye
    L[H] = eye
    for k in range(H, 0, -1):
        L[k - 1] = L[k] @ A[k]
    Linv = np.empty_like(L)
    for k in range(H + 2):
        # products of upper triangular A_j stay upper triangular
        Linv[k] = sla.solve_triangular(L[k], eye, lower=False)
    Bt = L @ B @ Linv
    Ct = np.empty_like(L)
    Ct[: H + 1] = L[: H + 1] @ C[: H + 1] @ Linv[1:]
    Ct[H + 1] = eye
    Bt[0] = 0.0
    Ct[0] = eye
    Ct[H + 1 :] = eye
    h = np.zeros(H + 2)
    h[1:] = row_norm(Bt[1:]) + row_norm(eye - Ct[:-1])
    g = row_norm(Bt) + row_norm(eye - Ct)
    return NormalizedCoefficients(
        p=p, horizon=H, A=A, B=B, C=C, L=L, Linv=Linv, Btilde=Bt, Ctilde=Ct,
        h=h, g=g, qhat=qhat(op, H + 1), q_sup=q_sup, Q0=Q0, Q1=Q1,
        tail_q0=tail_mass,
    )

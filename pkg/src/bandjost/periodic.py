"""Periodic Jacobi backgrounds and asymptotically periodic Jacobi matrices.

Index conventions: row n of a Jacobi matrix J carries ``a_n`` at (n, n-1),
``b_n`` at (n, n) and ``c_{n+1}`` at (n, n+1).  A period-p background is
given by lists a, b, c of length p holding a_1..a_p etc., extended by
``a_n = a[(n - 1) mod p]`` over all integers n.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.optimize import linear_sum_assignment

from .bi_infinite import BiBandedOperator, analyze_bi
from .errors import ConventionError, InputError, NotQuasiSymmetric
from .model import ZERO_TAIL, TailCertificate, _as_complex, complex_to_json
from .oracle import FiniteSection, dense_eigenvalues

NAIMAN_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class PeriodicBackground:
    p: int
    a: tuple
    b: tuple
    c: tuple

    def __post_init__(self):
        if not isinstance(self.p, (int, np.integer)) or self.p < 1:
            raise InputError("period p must be a positive integer")
        vals = []
        for name in ("a", "b", "c"):
            v = tuple(_as_complex(x) for x in getattr(self, name))
            if len(v) != self.p:
                raise InputError(f"list {name} must have length p = {self.p}")
            vals.append(v)
        a, b, c = vals
        if any(x * y == 0 for x, y in zip(a, c)):
            raise InputError("background needs a_n c_n != 0")
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @classmethod
    def free(cls, p: int) -> "PeriodicBackground":
        return cls(p, (1.0,) * p, (0.0,) * p, (1.0,) * p)

    @property
    def alpha(self) -> complex:
        return complex(np.prod(self.a))

    @property
    def delta(self) -> complex:
        return complex(np.prod(self.c))

    def is_quasi_symmetric(self, rtol: float = 1e-12) -> bool:
        return abs(self.alpha - self.delta) <= rtol * max(1.0, abs(self.alpha))

    def coef(self, name: str, n):
        arr = np.asarray(getattr(self, name), dtype=complex)
        return arr[(np.asarray(n) - 1) % self.p]

    def window(self, lo: int, hi: int) -> np.ndarray:
        """Dense J^0 restricted to rows and columns lo..hi."""
        n = np.arange(lo, hi + 1)
        m = np.diag(self.coef("b", n)).astype(complex)
        m[np.arange(1, len(n)), np.arange(len(n) - 1)] = self.coef("a", n[1:])
        m[np.arange(len(n) - 1), np.arange(1, len(n))] = self.coef("c", n[1:])
        return m

    def to_json(self) -> dict:
        f = lambda xs: [complex_to_json(x) for x in xs]
        return {"p": self.p, "a": f(self.a), "b": f(self.b), "c": f(self.c)}

    @classmethod
    def from_json(cls, obj: Mapping) -> "PeriodicBackground":
        try:
            return cls(int(obj["p"]), tuple(obj["a"]), tuple(obj["b"]), tuple(obj["c"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed background: {exc}") from exc


# ---------------------------------------------------------------------------
# Burchnall-Chaundy polynomial


def _tridiag_charpoly(bg: PeriodicBackground, first: int, last: int) -> np.ndarray:
    """Coefficients (low to high) of det(lambda - J(first..last)).

    Dimension 0 gives 1 and dimension -1 gives 0.
    """
    dim = last - first + 1
    if dim < 0:
        return np.zeros(1, complex)
    prev2 = np.zeros(1, complex)   # dimension -1
    prev = np.ones(1, complex)     # dimension 0
    for k in range(first, last + 1):
        lin = np.array([-bg.coef("b", k), 1.0], complex)
        term = npoly.polymul(lin, prev)
        if k > first:
            term = npoly.polysub(term, bg.coef("a", k) * bg.coef("c", k) * prev2)
        prev2, prev = prev, term
    return prev


def poly_matrix(coeffs: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Horner evaluation of a polynomial (low-to-high coefficients) at a matrix."""
    out = np.zeros_like(m, dtype=complex)
    eye = np.eye(m.shape[0], dtype=complex)
    for c in coeffs[::-1]:
        out = out @ m + c * eye
    return out


def naiman_check(bg: PeriodicBackground, P: np.ndarray, window: tuple[int, int] | None = None) -> float:
    """max |(P(J^0) - E_p)_ij| over interior entries of a padded window.

    E_p has alpha on i - j = p and delta on i - j = -p.
    """
    p = bg.p
    lo, hi = window if window is not None else (-3 * p, 3 * p)
    deg = len(P) - 1
    pad = p * max(deg, 1)
    m = poly_matrix(P, bg.window(lo - pad, hi + pad))
    inner = m[pad:pad + hi - lo + 1, pad:pad + hi - lo + 1]
    n = inner.shape[0]
    E = np.zeros((n, n), complex)
    E[np.arange(p, n), np.arange(n - p)] = bg.alpha
    E[np.arange(n - p), np.arange(p, n)] = bg.delta
    return float(np.abs(inner - E).max())


@dataclass
class BCPolynomial:
    P: np.ndarray
    alpha: complex
    delta: complex
    Q: np.ndarray | None
    naiman_residual: float

    def __call__(self, lam):
        return npoly.polyval(lam, self.P)

    def q_value(self, lam):
        if self.Q is None:
            raise NotQuasiSymmetric("Q = P/alpha is defined for quasi-symmetric backgrounds only")
        return npoly.polyval(lam, self.Q)

    def to_json(self) -> dict:
        f = lambda xs: None if xs is None else [complex_to_json(x) for x in xs]
        return {"P": f(self.P), "Q": f(self.Q), "alpha": complex_to_json(self.alpha),
                "delta": complex_to_json(self.delta), "naiman_residual": self.naiman_residual}


def bc_polynomial(bg: PeriodicBackground, tol: float = NAIMAN_TOL) -> BCPolynomial:
    """P = det(lambda - J(1..p)) - a_1 c_1 det(lambda - J(2..p-1)), validated."""
    p = bg.p
    P = npoly.polysub(_tridiag_charpoly(bg, 1, p),
                      bg.coef("a", 1) * bg.coef("c", 1) * _tridiag_charpoly(bg, 2, p - 1))
    P = np.asarray(P, complex)
    P = np.concatenate([P, np.zeros(p + 1 - len(P), complex)])[: p + 1]
    res = naiman_check(bg, P)
    scale = max(1.0, abs(bg.alpha), abs(bg.delta))
    if not res <= tol * scale:
        raise ConventionError(f"P(J0) differs from E_p by {res:.3e}")
    Q = P / bg.alpha if bg.is_quasi_symmetric() else None
    return BCPolynomial(P, bg.alpha, bg.delta, Q, res)


# ---------------------------------------------------------------------------
# spectral arcs


def lambda_matrix(bg: PeriodicBackground, t: float) -> np.ndarray:
    """p x p Floquet matrix with a_1 e^{ipt} at (1, p) and c_1 e^{-ipt} at (p, 1)."""
    p = bg.p
    m = np.zeros((p, p), complex)
    for n in range(1, p + 1):
        m[n - 1, n - 1] += bg.coef("b", n)
        m[n - 1, (n - 2) % p] += bg.coef("a", n) * (np.exp(1j * p * t) if n == 1 else 1.0)
        m[n - 1, n % p] += bg.coef("c", n + 1) * (np.exp(-1j * p * t) if n == p else 1.0)
    return m


def lambda_identity_residual(bg: PeriodicBackground, P: np.ndarray, n_samples: int = 100,
                             seed: int = 0) -> float:
    """max |det(Lambda(t) - lam) - (-1)^p (P(lam) - alpha e^{ipt} - delta e^{-ipt})|, relative."""
    rng = np.random.default_rng(seed)
    p = bg.p
    worst = 0.0
    for _ in range(n_samples):
        t = rng.uniform(0, 2 * math.pi)
        lam = complex(rng.normal(), rng.normal()) * 2
        lhs = np.linalg.det(lambda_matrix(bg, t) - lam * np.eye(p))
        rhs = (-1) ** p * (npoly.polyval(lam, P) - bg.alpha * np.exp(1j * p * t)
                           - bg.delta * np.exp(-1j * p * t))
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(rhs)))
    return worst


@dataclass
class SpectralArcs:
    t: np.ndarray
    ranges: np.ndarray  # (p, samples) continued branches lambda_j(t)
    identity_residual: float

    def points(self) -> np.ndarray:
        return self.ranges.ravel()

    def to_json(self) -> dict:
        return {"t": self.t.tolist(),
                "ranges": [[complex_to_json(z) for z in r] for r in self.ranges],
                "identity_residual": self.identity_residual}


def spectral_arcs(bg: PeriodicBackground, samples: int = 256, P: np.ndarray | None = None,
                  check_tol: float = NAIMAN_TOL) -> SpectralArcs:
    """Eigenvalues of Lambda(t) on a uniform grid of [0, 2 pi / p], continued into p ranges."""
    if samples < 64:
        raise InputError("arc sampling needs at least 64 samples")
    p = bg.p
    if P is None:
        P = bc_polynomial(bg).P
    res = lambda_identity_residual(bg, P)
    if res > check_tol:
        raise ConventionError(f"Lambda determinant identity off by {res:.3e}")
    ts = np.linspace(0.0, 2 * math.pi / p, samples)
    out = np.empty((p, samples), complex)
    prev = None
    for k, t in enumerate(ts):
        ev = dense_eigenvalues(lambda_matrix(bg, t))
        if prev is not None:
            r, c = linear_sum_assignment(np.abs(prev[:, None] - ev[None, :]))
            ev = ev[c[np.argsort(r)]]
        out[:, k] = ev
        prev = ev
    return SpectralArcs(ts, out, res)


# ---------------------------------------------------------------------------
# asymptotically periodic matrices


@dataclass(frozen=True, eq=False)
class AsymptoticallyPeriodicJacobi:
    """Background plus finitely many explicit changes and an omega tail bound.

    ``a``, ``b``, ``c`` map signed indices n to the perturbed a_n, b_n, c_n.
    """

    background: PeriodicBackground
    a: Mapping = field(default_factory=dict)
    b: Mapping = field(default_factory=dict)
    c: Mapping = field(default_factory=dict)
    tail: TailCertificate = ZERO_TAIL

    def __post_init__(self):
        for name in ("a", "b", "c"):
            d = {int(k): _as_complex(v) for k, v in dict(getattr(self, name)).items()}
            object.__setattr__(self, name, d)
        for n in set(self.a) | set(self.c):
            if self.coef("a", n) * self.coef("c", n) == 0:
                raise InputError(f"a_n c_n vanishes at n = {n}")

    def coef(self, name: str, n: int) -> complex:
        d = getattr(self, name)
        return d[n] if n in d else complex(self.background.coef(name, n))

    @property
    def support(self) -> tuple[int, int]:
        idx = list(self.a) + list(self.b) + [n - 1 for n in self.c]
        return (min(idx), max(idx)) if idx else (0, -1)

    def omega(self, n: int) -> float:
        bg = self.background
        return (abs(self.coef("a", n) - bg.coef("a", n)) + abs(self.coef("b", n) - bg.coef("b", n))
                + abs(self.coef("c", n + 1) - bg.coef("c", n + 1)))

    def window(self, lo: int, hi: int) -> np.ndarray:
        n = np.arange(lo, hi + 1)
        m = np.diag([self.coef("b", k) for k in n]).astype(complex)
        for i, k in enumerate(n):
            if i > 0:
                m[i, i - 1] = self.coef("a", k)
            if i < len(n) - 1:
                m[i, i + 1] = self.coef("c", k + 1)
        return m

    def section(self, N: int) -> FiniteSection:
        """Rows and columns -N..N."""
        return FiniteSection(2 * N + 1, self.window(-N, N))

    @classmethod
    def from_json(cls, obj: Mapping) -> "AsymptoticallyPeriodicJacobi":
        try:
            bg = PeriodicBackground.from_json(obj["background"])
            pert = obj.get("perturbation", {})
            return cls(bg, pert.get("a", {}), pert.get("b", {}), pert.get("c", {}),
                       TailCertificate.from_json(obj.get("tail")))
        except (KeyError, TypeError, AttributeError) as exc:
            raise InputError(f"malformed asymptotically periodic matrix: {exc}") from exc


def _sup_row(m: np.ndarray) -> float:
    return float(np.abs(m).sum(axis=1).max())


def q_of_jacobi(J: AsymptoticallyPeriodicJacobi, Q: np.ndarray) -> BiBandedOperator:
    """Q(J) as a doubly-infinite p-banded matrix.

    Rows within p of the perturbation support are computed exactly on a window
    padded by 2 p deg(Q); all other rows coincide with Q(J^0), the free band.
    A nonzero omega tail is propagated with the operator-norm constant
    sum_j |Q_j| sum_{a+b=j-1} |J|^a |J0|^b.
    """
    bg = J.background
    p = bg.p
    deg = len(Q) - 1
    lo, hi = J.support
    if hi < lo:
        lo, hi = 0, 0
    rlo, rhi = lo - p, hi + p
    pad = 2 * p * deg
    W = J.window(rlo - pad, rhi + pad)
    QJ = poly_matrix(Q, W)
    entries: dict[int, dict[int, complex]] = {r: {} for r in range(-p, p + 1)}
    for n in range(rlo, rhi + 1):
        i = n - (rlo - pad)
        for r in range(-p, p + 1):
            entries[r][n] = complex(QJ[i, i + r])
        off = np.abs(np.delete(QJ[i], np.arange(i - p, i + p + 1))).max(initial=0.0)
        if off > 1e-9 * max(1.0, np.abs(QJ[i]).max()):
            raise ConventionError(f"Q(J) row {n} leaves the band of order {p}")
    tail = ZERO_TAIL
    if not J.tail.is_zero:
        nJ0 = _sup_row(bg.window(-2 * p, 2 * p))
        nJ = nJ0 + max(J.tail.bound(1), max((J.omega(n) for n in range(lo, hi + 1)), default=0.0))
        C = sum(abs(Q[j]) * sum(nJ**a * nJ0 ** (j - 1 - a) for a in range(j)) for j in range(1, deg + 1))
        t = J.tail
        if t.kind == "exp_beta":
            # (|k| - p)^beta >= |k|^beta - p^beta for 0 < beta < 1
            tail = TailCertificate("exp_beta", C1=C * t.C1 * math.exp(t.C2 * p**t.beta), C2=t.C2,
                                   beta=t.beta)
        else:
            tail = TailCertificate("power", C1=C * t.C1 * (1 + p) ** t.s, s=t.s)
    return BiBandedOperator.from_entries(p, entries, tail)


def propagation_constant(J: AsymptoticallyPeriodicJacobi, Q: np.ndarray) -> float:
    """Measured max_k rowdiff_k / sum_{s=k-p}^{k+p} omega_s over rows with nonzero omega sum."""
    p = J.background.p
    lo, hi = J.support
    pad = 2 * p * (len(Q) - 1) + p
    a, b = lo - pad, hi + pad
    diff = poly_matrix(Q, J.window(a, b)) - poly_matrix(Q, J.background.window(a, b))
    om = np.array([J.omega(n) for n in range(a, b + 1)])
    best = 0.0
    margin = p * len(Q)
    for i in range(margin, len(om) - margin):
        s = om[i - p:i + p + 1].sum()
        rd = np.abs(diff[i]).sum()
        if s > 0:
            best = max(best, rd / s)
        elif rd > 1e-12:
            return math.inf
    return best


@dataclass
class AsymptoticReport:
    polynomial: BCPolynomial
    arcs: SpectralArcs
    image_report: object
    eigenvalues: list

    def to_json(self) -> dict:
        return {"polynomial": self.polynomial.to_json(), "arcs": self.arcs.to_json(),
                "image_eigenvalues": [e.to_json() for e in self.image_report.eigenvalues],
                "eigenvalues": self.eigenvalues}


def analyze_asymptotic(J: AsymptoticallyPeriodicJacobi, cfg=None, samples: int = 256,
                       sections: tuple[int, int] = (200, 400), floor: float = 1e-7) -> AsymptoticReport:
    """Eigenvalues of J from the spectrum E of Q(J) by spectral mapping.

    Every root of Q(lam) = mu, mu in E, is a candidate.  A candidate is kept
    when a section eigenvalue of J lies within 10 times the change of that
    section eigenvalue between the two section sizes (never below ``floor``).
    """
    bg = J.background
    if not bg.is_quasi_symmetric():
        raise NotQuasiSymmetric(f"alpha = {bg.alpha} differs from delta = {bg.delta}")
    bcp = bc_polynomial(bg)
    arcs = spectral_arcs(bg, samples, P=bcp.P)
    rep, _ = analyze_bi(q_of_jacobi(J, bcp.Q), cfg)
    n1, n2 = sections
    ev1 = dense_eigenvalues(J.section(n1))
    ev2 = dense_eigenvalues(J.section(n2))
    found = []
    for e in rep.eigenvalues:
        mu = e.lam
        roots = npoly.polyroots(npoly.polysub(bcp.Q, [mu]))
        group = []
        for lam in roots:
            i2 = int(np.argmin(np.abs(ev2 - lam)))
            d2 = float(abs(ev2[i2] - lam))
            est = float(np.min(np.abs(ev1 - ev2[i2])))
            thresh = max(10.0 * est, floor)
            if d2 <= thresh:
                group.append({"lambda": complex_to_json(complex(lam)), "mu": complex_to_json(mu),
                              "section_distance": d2, "threshold": thresh,
                              "mapping_residual": float(abs(npoly.polyval(lam, bcp.Q) - mu))})
        for g in group:
            g["ambiguous"] = len(group) > 1
        found.extend(group)
    found.sort(key=lambda d: (d["lambda"]["re"], d["lambda"]["im"]))
    return AsymptoticReport(bcp, arcs, rep, found)

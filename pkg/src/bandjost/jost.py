"""Matrix Jost solutions of the reduced block recurrence.

Two independent routes compute the rescaled Jost solution
``Vt_n(z) = z**-n V_n(z)``:

* :func:`jost_iterate` sums successive approximations of the discrete
  Volterra equation ``Vt_n = I + sum_{k>n} Jt(n,k,z) Vt_k``;
* :func:`jost_taylor` builds the Taylor coefficients ``K(n, j)`` of ``Vt_n``
  from backward sums, so that ``Delta(z) = Vt_0(z) = sum_j delta(j) z**j``.

For operators with finitely many explicit rows both routes terminate exactly:
the kernel is strictly upper triangular in ``(n, k)`` and ``Vt_0`` is a
polynomial of degree at most ``2H``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import EnclosureUnavailable, NonConvergentMajorant, PoleError
from .model import NormalizedCoefficients

_POLE_ATOL = 1e-15


def _check_pole(z):
    z = np.asarray(z, dtype=complex)
    if np.any((np.abs(z) < _POLE_ATOL) | (np.abs(z - 1) < _POLE_ATOL) | (np.abs(z + 1) < _POLE_ATOL)):
        raise PoleError("Green kernel has poles at z = 0, 1, -1")
    return z


def green_kernel(n, k, z):
    """g(n, k, z) = (z**(k-n) - z**(n-k)) / (z - 1/z) for k > n, else 0.

    Vectorized over broadcastable ``n``, ``k``, ``z``.
    """
    z = _check_pole(z)
    n, k, z = np.broadcast_arrays(np.asarray(n), np.asarray(k), z)
    m = (k - n).astype(float)
    val = (z**m - z ** (-m)) / (z - 1.0 / z)
    out = np.where(k > n, val, 0.0)
    return out[()] if out.ndim == 0 else out


def rescaled_green_table(z: complex, m_max: int) -> np.ndarray:
    """G[m] = z**m g(0, m, z) = z * sum_{i<m} z**(2i), m = 0..m_max.

    Polynomial in z, so it stays finite at z = +-1.
    """
    G = np.zeros(m_max + 1, dtype=complex)
    if m_max >= 1:
        odd = z ** (2 * np.arange(m_max) + 1)
        G[1:] = np.cumsum(odd)
    return G


def _coef(coeffs: NormalizedCoefficients, k: int):
    p = coeffs.p
    eye = np.eye(p, dtype=complex)
    if k < 0:
        return np.zeros((p, p), complex), eye
    if k > coeffs.horizon + 1:
        return np.zeros((p, p), complex), eye
    return coeffs.Btilde[k], coeffs.Ctilde[k]


def kernel_J(n: int, k: int, z: complex, coeffs: NormalizedCoefficients) -> np.ndarray:
    """J(n,k,z) = -g(n,k,z) B~_k + g(n,k-1,z) (I - C~_{k-1})."""
    eye = np.eye(coeffs.p, dtype=complex)
    Bk, _ = _coef(coeffs, k)
    _, Ckm1 = _coef(coeffs, k - 1)
    return -green_kernel(n, k, z) * Bk + green_kernel(n, k - 1, z) * (eye - Ckm1)


def kernel_Jtilde(n: int, k: int, z: complex, coeffs: NormalizedCoefficients) -> np.ndarray:
    """z**(k-n) J(n,k,z), a matrix polynomial in z defined at z = +-1 too."""
    eye = np.eye(coeffs.p, dtype=complex)
    if k <= n:
        return np.zeros((coeffs.p, coeffs.p), complex)
    G = rescaled_green_table(z, k - n)
    Bk, _ = _coef(coeffs, k)
    _, Ckm1 = _coef(coeffs, k - 1)
    return -G[k - n] * Bk + z * G[k - 1 - n] * (eye - Ckm1)


def phi(z: complex) -> float:
    """2|z| / |z**2 - 1|; infinite at z = +-1."""
    d = abs(z * z - 1.0)
    return math.inf if d == 0.0 else 2.0 * abs(z) / d


def majorants(coeffs: NormalizedCoefficients, z: complex) -> np.ndarray:
    """A priori bounds on ||Vt_n - I|| for n = 0..H+1.

    min of phi*s0*exp(phi*s0) and s1*exp(s1) with s0, s1 the computed
    sums of h_k and k*h_k beyond n.
    """
    s0 = coeffs.sigma0
    s1 = coeffs.sigma1
    with np.errstate(over="ignore", invalid="ignore"):
        f = phi(z)
        a = f * s0 * np.exp(f * s0) if math.isfinite(f) else np.full_like(s0, math.inf)
        a = np.where(s0 == 0, 0.0, a)
        b = s1 * np.exp(s1)
    return np.minimum(a, b)


def _factorial_remainder(x: float, j: int) -> float:
    """sum_{i>j} x**i/(i-1)! = x e**x P(j, x)."""
    if x <= 0.0:
        return 0.0
    P = special.gammainc(j, x)
    if P <= 0.0:
        return 0.0
    return math.exp(math.log(x) + x + math.log(P))


@dataclass
class JostEvaluation:
    z: complex
    V: np.ndarray
    Vtilde: np.ndarray
    majorant: np.ndarray
    error_bound: np.ndarray | None
    truncation_error: float
    route: str
    iterations: int


def jost_error_bound(coeffs: NormalizedCoefficients, z: complex, n: int = 0,
                     route: str = "best") -> float:
    """Bound on ||V_n(z) - z**n I|| with the efficient constant.

    Uses C = 2 exp{(2-q)/(1-q) Q0}, valid when q = sup q_n < 1, and the
    blockwise majorants s0(n) <= C sum_{k>n}(q^_{k-1}+q^_k) (route "i") and
    s1(n) <= C sum_{k>n} k (q^_{k-1}+q^_k) (route "ii").
    """
    q = coeffs.q_sup
    if q >= 1.0:
        raise EnclosureUnavailable(f"sup q_n = {q:.4g} >= 1: efficient constant unavailable")
    C = 2.0 * math.exp((2.0 - q) / (1.0 - q) * coeffs.Q0)
    qh = coeffs.qhat
    pair = np.concatenate([[0.0], qh[:-1] + qh[1:], [qh[-1]]])  # k = 0..H+2
    k = np.arange(len(pair), dtype=float)
    s0 = C * pair[n + 1:].sum()
    s1 = C * (k * pair)[n + 1:].sum()
    if coeffs.tail_q0 > 0:
        # mass beyond the horizon, counted twice for (q^_{k-1} + q^_k); Q1 dominates k-weights
        s0 += 2.0 * C * coeffs.tail_q0
        s1 += 2.0 * C * coeffs.Q1
    zn = abs(z) ** n
    out = []
    if route in ("i", "best"):
        f = phi(z)
        if math.isfinite(f):
            x = f * s0
            out.append(zn * x * math.exp(x) if x < 700 else math.inf)
        elif route == "i":
            raise PoleError("route (i) bound is unavailable at z = +-1")
    if route in ("ii", "best"):
        out.append(zn * s1 * math.exp(s1) if s1 < 700 else math.inf)
    return min(out)


def jost_iterate(coeffs: NormalizedCoefficients, z: complex, n_max: int = 0,
                 tol: float = 1e-14, max_iter: int | None = None) -> JostEvaluation:
    """Successive approximations F_{n,j+1} = sum_{k>n} Jt(n,k) F_{k,j}.

    Stops once the factorial majorant of the remaining terms is below
    ``tol`` or the nilpotent kernel is exhausted.
    """
    z = complex(z)
    if z == 0:
        raise PoleError("z = 0 is excluded")
    p, H = coeffs.p, coeffs.horizon
    M = H + 2
    eye = np.eye(p, dtype=complex)
    G = rescaled_green_table(z, M)
    idx = np.arange(M)
    diff = idx[None, :] - idx[:, None]
    T1 = np.where(diff > 0, G[np.clip(diff, 0, M)], 0.0)
    T2 = z * np.where(diff > 1, G[np.clip(diff - 1, 0, M)], 0.0)
    Bk = coeffs.Btilde[:M]
    Ek = np.zeros((M, p, p), complex)
    Ek[1:] = eye - coeffs.Ctilde[: M - 1]

    s0 = coeffs.sigma0[0]
    s1 = coeffs.sigma1[0]
    x = min(phi(z) * s0 if s0 > 0 else 0.0, s1)
    if max_iter is None:
        max_iter = M + 1

    F = np.broadcast_to(eye, (M, p, p))
    total = np.zeros((M, p, p), complex)
    remainder = math.inf
    j = 0
    while True:
        j += 1
        F = (-np.tensordot(T1, Bk @ F, axes=(1, 0))
             + np.tensordot(T2, Ek @ F, axes=(1, 0)))
        total += F
        if not np.any(F):
            remainder = 0.0
            break
        remainder = _factorial_remainder(x, j)
        if remainder <= tol:
            break
        if j >= max_iter:
            raise NonConvergentMajorant(
                f"majorant remainder {remainder:.3e} after {j} iterations at z={z}"
            )
    Vt_all = eye + total
    n_max = min(n_max, M - 1)
    Vt = Vt_all[: n_max + 1]
    V = Vt * (z ** np.arange(n_max + 1))[:, None, None]
    try:
        eb = np.array([jost_error_bound(coeffs, z, n) for n in range(n_max + 1)])
    except EnclosureUnavailable:
        eb = None
    return JostEvaluation(z=z, V=V, Vtilde=Vt, majorant=majorants(coeffs, z)[: n_max + 1],
                          error_bound=eb, truncation_error=remainder, route="iteration",
                          iterations=j)


def jost_fixed_point(coeffs: NormalizedCoefficients, z: complex, start: np.ndarray | None = None,
                     tol: float = 1e-14, max_iter: int | None = None) -> np.ndarray:
    """Picard iteration W <- I + J~ W from an arbitrary start; returns Vt_0..Vt_{H+1}."""
    z = complex(z)
    p, H = coeffs.p, coeffs.horizon
    M = H + 2
    eye = np.eye(p, dtype=complex)
    G = rescaled_green_table(z, M)
    idx = np.arange(M)
    diff = idx[None, :] - idx[:, None]
    T1 = np.where(diff > 0, G[np.clip(diff, 0, M)], 0.0)
    T2 = z * np.where(diff > 1, G[np.clip(diff - 1, 0, M)], 0.0)
    Bk = coeffs.Btilde[:M]
    Ek = np.zeros((M, p, p), complex)
    Ek[1:] = eye - coeffs.Ctilde[: M - 1]
    W = np.broadcast_to(eye, (M, p, p)).copy() if start is None else np.array(start, complex)
    if max_iter is None:
        max_iter = 4 * M + 50
    for _ in range(max_iter):
        Wn = eye - np.tensordot(T1, Bk @ W, axes=(1, 0)) + np.tensordot(T2, Ek @ W, axes=(1, 0))
        step = np.max(np.abs(Wn - W))
        W = Wn
        if step <= tol:
            return W
    raise NonConvergentMajorant("fixed-point iteration did not settle")


# ---------------------------------------------------------------------------
# Taylor route


@dataclass
class TaylorTable:
    """Taylor coefficients K(n, j) of Vt_n and delta(j) = K(0, j)."""

    p: int
    K: np.ndarray          # (n_max+1, j_max+1, p, p)
    delta: np.ndarray      # (j_max+1, p, p)
    j_max: int
    tail_bound: float
    exact: bool
    bound_ratio_max: float

    def evaluate(self, z) -> np.ndarray:
        """Delta(z) for an array of z; shape z.shape + (p, p)."""
        z = np.asarray(z, dtype=complex)
        zz = z[..., None, None]
        acc = np.broadcast_to(self.delta[-1], z.shape + (self.p, self.p)).copy()
        for d in self.delta[-2::-1]:
            acc = acc * zz + d
        return acc

    def derivative(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        zz = z[..., None, None]
        j = np.arange(1, self.j_max + 1)[:, None, None]
        d1 = self.delta[1:] * j
        if len(d1) == 0:
            return np.zeros(z.shape + (self.p, self.p), complex)
        acc = np.broadcast_to(d1[-1], z.shape + (self.p, self.p)).copy()
        for d in d1[-2::-1]:
            acc = acc * zz + d
        return acc


def kappa(coeffs: NormalizedCoefficients) -> np.ndarray:
    """kappa(n) = sum_{j>=n} g_j for n = 0..H+1."""
    return np.cumsum(coeffs.g[::-1])[::-1]


def jost_taylor(coeffs: NormalizedCoefficients, n_max: int = 0, j_max: int | None = None,
                tol: float = 1e-14) -> TaylorTable:
    """Taylor coefficients from the backward sums

    K(n,1)   = -sum_{k>n} B~_k
    K(n,2)   = -sum_{k>n} [B~_k K(k,1) + (C~_k - I)]
    K(n,j+1) = K(n+1,j-1) - sum_{k>n} [B~_k K(k,j) + (C~_k - I) K(k+1,j-1)]

    ``j_max=None`` starts at 64 and doubles until the bound
    sum_{j>J} kappa(0,j) kappa(floor(j/2)) drops below ``tol``, or the
    polynomial degree 2H is reached.
    """
    p, H = coeffs.p, coeffs.horizon
    M = H + 2
    eye = np.eye(p, dtype=complex)
    Bt = coeffs.Btilde[:M]
    Cm = coeffs.Ctilde[:M] - eye
    exact_degree = 2 * H

    kap = np.concatenate([kappa(coeffs)[:M], np.zeros(2 * M + 4)])
    logc = np.concatenate([[0.0], np.cumsum(np.log1p(kap))])  # logc[m] = sum_{i<m} log(1+kap_i)

    def kappa_nm(n, m):
        # prod_{i=1}^{m-1} (1 + kappa(n+i))
        return np.exp(logc[n + m] - logc[n + 1]) if m >= 1 else 1.0

    def tail_after(J):
        # sum_{j>J} kappa(0,j) kappa(floor(j/2)); kappa vanishes past the horizon
        top = 2 * (H + 2)
        js = np.arange(J + 1, max(top, J + 1) + 1)
        if len(js) == 0:
            return 0.0
        vals = np.exp(logc[js] - logc[1]) * kap[js // 2]
        return float(vals.sum())

    def suffix_after(X):
        s = np.cumsum(X[::-1], axis=0)[::-1]
        out = np.zeros_like(X)
        out[:-1] = s[1:]
        return out

    def shift_up(X):
        out = np.zeros_like(X)
        out[:-1] = X[1:]
        return out

    n_idx = np.arange(M)
    ratio_max = 0.0

    def check_bound(Kj, j):
        nonlocal ratio_max
        nrm = np.abs(Kj).sum(axis=-1).max(axis=-1)
        bnd = np.array([kappa_nm(n, j) for n in n_idx]) * kap[n_idx + j // 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(nrm > 0, nrm / np.where(bnd > 0, bnd, np.inf), 0.0)
            r = np.where((nrm > 1e-13) & (bnd == 0), np.inf, r)
        ratio_max = max(ratio_max, float(np.max(r)))

    K_list = [np.broadcast_to(eye, (M, p, p)).copy()]
    K1 = -suffix_after(Bt)
    K_list.append(K1)
    check_bound(K1, 1)
    target = 64 if j_max is None else j_max
    j = 1
    while True:
        if j >= exact_degree:
            break
        if j >= target:
            if j_max is not None:
                break
            if tail_after(j) <= tol:
                break
            target *= 2
        Kj, Kjm1 = K_list[j], K_list[j - 1]
        if j == 1:
            Knew = -suffix_after(Bt @ Kj + Cm)
        else:
            Knew = shift_up(Kjm1) - suffix_after(Bt @ Kj + Cm @ shift_up(Kjm1))
        K_list.append(Knew)
        j += 1
        check_bound(Knew, j)
    J = j
    exact = J >= exact_degree
    K = np.stack(K_list, axis=1)[: n_max + 1]
    return TaylorTable(p=p, K=K, delta=K[0].copy() if n_max >= 0 else None, j_max=J,
                       tail_bound=0.0 if exact else tail_after(J), exact=exact,
                       bound_ratio_max=ratio_max)


def recurrence_residual(coeffs: NormalizedCoefficients, z: complex, V: np.ndarray) -> np.ndarray:
    """||V_{k-1} + B~_k V_k + C~_k V_{k+1} - lambda V_k|| for interior k."""
    lam = z + 1.0 / z
    res = []
    for k in range(1, len(V) - 1):
        Bk, Ck = _coef(coeffs, k)
        r = V[k - 1] + Bk @ V[k] + Ck @ V[k + 1] - lam * V[k]
        res.append(np.abs(r).sum(axis=-1).max())
    return np.array(res)

"""Zeros of gamma(z) = det Delta(z) in the unit disk and enclosure criteria.

Zeros are located by the argument principle on polar cells of the annulus
``origin_eps <= |z| <= 1 - edge_delta``.  Each cell boundary is sampled
adaptively until consecutive phase increments of gamma stay below pi/4;
cells with nonzero winding are split until they hold one simple zero, which
is then polished by Newton's method.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special

from .errors import EnclosureUnavailable, PoleError
from .jost import TaylorTable, jost_iterate, jost_taylor
from .model import BandedOperator, NormalizedCoefficients, complex_to_json, normalize

T_ROOT = float(special.lambertw(1.0).real)  # t e^t = 1


def zhukovsky(z):
    """lambda = z + 1/z."""
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise PoleError("z = 0 has no image")
    out = z + 1.0 / z
    return complex(out) if out.ndim == 0 else out


def preimages(lam: complex, atol: float = 1e-12):
    """Both roots of z**2 - lam z + 1 = 0, inside first.

    Each root comes with a flag "inside", "outside" or "boundary".
    """
    lam = complex(lam)
    s = np.sqrt(lam * lam - 4.0 + 0j)
    roots = sorted([(lam + s) / 2.0, (lam - s) / 2.0], key=abs)
    out = []
    for z in roots:
        a = abs(z)
        flag = "boundary" if abs(a - 1.0) <= atol else ("inside" if a < 1 else "outside")
        out.append((complex(z), flag))
    return out


# ---------------------------------------------------------------------------
# gamma evaluation


class JostEngine:
    """gamma(z) and gamma'(z) from either Jost route.

    The Taylor route evaluates Delta by Horner's rule and supplies analytic
    derivatives.  The iteration route runs successive approximations point
    by point and differentiates numerically.
    """

    def __init__(self, coeffs: NormalizedCoefficients, route: str = "taylor",
                 tol: float = 1e-14, j_max: int | None = None):
        if route not in ("taylor", "iteration"):
            raise ValueError(f"unknown route {route!r}")
        self.coeffs = coeffs
        self.p = coeffs.p
        self.route = route
        self.tol = tol
        self.table: TaylorTable | None = None
        if route == "taylor":
            self.table = jost_taylor(coeffs, n_max=0, j_max=j_max, tol=tol)

    def delta(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.route == "taylor":
            return self.table.evaluate(z)
        flat = z.ravel()
        out = np.empty((flat.size, self.p, self.p), complex)
        for i, zi in enumerate(flat):
            out[i] = jost_iterate(self.coeffs, zi, n_max=0, tol=self.tol).Vtilde[0]
        return out.reshape(z.shape + (self.p, self.p))

    def gamma(self, z):
        out = np.linalg.det(self.delta(z))
        return complex(out) if np.ndim(out) == 0 else out

    def dgamma(self, z, step: float = 1e-6):
        """gamma'(z); row-replacement formula on the Taylor route."""
        z = np.asarray(z, dtype=complex)
        if self.route == "taylor":
            D = self.table.evaluate(z)
            dD = self.table.derivative(z)
            total = np.zeros(z.shape, complex)
            for i in range(self.p):
                M = D.copy()
                M[..., i, :] = dD[..., i, :]
                total = total + np.linalg.det(M)
            return complex(total) if total.ndim == 0 else total
        g1 = np.asarray(self.gamma(z + step))
        g0 = np.asarray(self.gamma(z - step))
        out = (g1 - g0) / (2 * step)
        return complex(out) if out.ndim == 0 else out


def gamma(z, engine: JostEngine):
    """det Delta(z) via LU with partial pivoting (numpy/LAPACK getrf)."""
    return engine.gamma(z)


# ---------------------------------------------------------------------------
# winding numbers


@dataclass(frozen=True)
class ZeroSearchConfig:
    edge_delta: float = 1e-2
    exclusion_eps: float = 1e-3
    origin_eps: float = 1e-3
    residual_tol: float = 1e-10
    min_cell: float = 1e-7
    max_depth: int = 40
    n_sectors: int = 12
    n_rings: int = 4
    edge_samples: int = 16
    max_edge_samples: int = 1 << 14
    threads: int | None = None


@dataclass(frozen=True)
class Cell:
    r0: float
    r1: float
    t0: float
    t1: float
    depth: int = 0

    @property
    def size(self) -> float:
        return max(self.r1 - self.r0, self.r1 * (self.t1 - self.t0))

    @property
    def center(self) -> complex:
        r = 0.5 * (self.r0 + self.r1)
        t = 0.5 * (self.t0 + self.t1)
        return complex(r * math.cos(t), r * math.sin(t))

    def contains(self, z: complex, slack: float = 1e-12) -> bool:
        r = abs(z)
        if r < self.r0 - slack or r > self.r1 + slack:
            return False
        t = math.atan2(z.imag, z.real)
        # shift into [t0, t0 + 2 pi)
        t = self.t0 + (t - self.t0) % (2 * math.pi)
        return t <= self.t1 + slack / max(r, 1e-300) or t - 2 * math.pi >= self.t0 - slack

    def to_json(self) -> dict:
        return {"r": [self.r0, self.r1], "theta": [self.t0, self.t1], "depth": self.depth}


class _Unstable(Exception):
    pass


def _path_phase(engine: JostEngine, path, n0: int, n_max: int) -> tuple[float, float]:
    """Total change in arg gamma along path(s), s in [0, 1], and max |gamma|."""
    s = np.linspace(0.0, 1.0, n0 + 1)
    g = np.asarray(engine.gamma(path(s)))
    while True:
        mag = np.abs(g)
        top = mag.max()
        if top == 0.0 or mag.min() <= 1e-13 * top:
            raise _Unstable
        dphi = np.angle(g[1:] / g[:-1])
        bad = np.abs(dphi) > math.pi / 4
        if not bad.any():
            return float(dphi.sum()), float(top)
        if len(s) >= n_max:
            raise _Unstable
        mids = 0.5 * (s[:-1][bad] + s[1:][bad])
        gm = np.asarray(engine.gamma(path(mids)))
        s_all = np.concatenate([s, mids])
        g_all = np.concatenate([g, gm])
        order = np.argsort(s_all, kind="stable")
        s, g = s_all[order], g_all[order]


def _arc(r, ta, tb):
    return lambda s: r * np.exp(1j * (ta + s * (tb - ta)))


def _ray(t, ra, rb):
    e = complex(math.cos(t), math.sin(t))
    return lambda s: (ra + s * (rb - ra)) * e


def circle_winding(engine: JostEngine, r: float, cfg: ZeroSearchConfig) -> int:
    phase, _ = _path_phase(engine, _arc(r, 0.0, 2 * math.pi), 4 * cfg.edge_samples,
                           cfg.max_edge_samples * 4)
    return int(round(phase / (2 * math.pi)))


def cell_winding(engine: JostEngine, c: Cell, cfg: ZeroSearchConfig) -> tuple[int, float]:
    """Winding number of gamma around the cell and max |gamma| on its boundary."""
    total, top = 0.0, 0.0
    # counterclockwise: outer arc forward, inner arc backward
    for path in (_ray(c.t0, c.r0, c.r1), _arc(c.r1, c.t0, c.t1),
                 _ray(c.t1, c.r1, c.r0), _arc(c.r0, c.t1, c.t0)):
        ph, mx = _path_phase(engine, path, cfg.edge_samples, cfg.max_edge_samples)
        total += ph
        top = max(top, mx)
    w = total / (2 * math.pi)
    if abs(w - round(w)) > 0.1:
        raise _Unstable
    return int(round(w)), top


def _jitter(c: Cell, salt: int) -> float:
    """Deterministic offset in [-0.1, 0.1] derived from the cell geometry."""
    h = hash((round(c.r0, 15), round(c.r1, 15), round(c.t0, 15), round(c.t1, 15), salt))
    rng = np.random.default_rng(abs(h) % (2**63))
    return float(rng.uniform(-0.1, 0.1))


def _split(c: Cell, salt: int = 0) -> list[Cell]:
    fr = 0.5 + _jitter(c, 2 * salt)
    ft = 0.5 + _jitter(c, 2 * salt + 1)
    rm = c.r0 + fr * (c.r1 - c.r0)
    tm = c.t0 + ft * (c.t1 - c.t0)
    d = c.depth + 1
    return [Cell(c.r0, rm, c.t0, tm, d), Cell(c.r0, rm, tm, c.t1, d),
            Cell(rm, c.r1, c.t0, tm, d), Cell(rm, c.r1, tm, c.t1, d)]


def _newton(engine: JostEngine, z0: complex, max_iter: int = 60) -> complex | None:
    z = z0
    for _ in range(max_iter):
        g = engine.gamma(z)
        dg = engine.dgamma(z)
        if dg == 0 or not np.isfinite(dg):
            return None
        step = g / dg
        z = z - step
        # outside the unit disk the truncated series is meaningless and may overflow
        if not np.isfinite(z) or abs(z) >= 1:
            return None
        if abs(step) <= 4e-16 * max(1.0, abs(z)):
            break
    return complex(z)


@dataclass
class Eigenvalue:
    lam: complex
    z: complex
    multiplicity: int
    residual: float
    refined: bool = True

    def to_json(self) -> dict:
        return {"lambda": complex_to_json(self.lam), "z": complex_to_json(self.z),
                "multiplicity": self.multiplicity, "residual": self.residual,
                "refined": self.refined}


@dataclass
class ZeroSearchResult:
    eigenvalues: list
    unresolved_cells: list
    winding_total: int
    edge_zero_count: int
    cells_visited: int


def _process(engine: JostEngine, c: Cell, cfg: ZeroSearchConfig):
    """Returns ("drop"|"zero"|"split"|"unresolved", payload)."""
    try:
        w, top = cell_winding(engine, c, cfg)
    except _Unstable:
        if c.depth >= cfg.max_depth or c.size < cfg.min_cell:
            return "unresolved", (c, None)
        return "split", None
    if w == 0:
        return "drop", None
    if w < 0:
        return "unresolved", (c, w)
    if w == 1:
        z = _newton(engine, c.center)
        if z is not None and c.contains(z, slack=1e-12):
            res = abs(engine.gamma(z))
            if res <= cfg.residual_tol * top:
                return "zero", Eigenvalue(zhukovsky(z), z, 1, float(res))
    if c.size < cfg.min_cell or c.depth >= cfg.max_depth:
        z = c.center
        return "zero", Eigenvalue(zhukovsky(z), z, w, float(abs(engine.gamma(z))), refined=False)
    return "split", None


def find_zeros(engine: JostEngine, cfg: ZeroSearchConfig | None = None) -> ZeroSearchResult:
    """All zeros of gamma with origin_eps < |z| < 1 - edge_delta."""
    cfg = cfg or ZeroSearchConfig()
    R = 1.0 - cfg.edge_delta
    if R <= cfg.origin_eps:
        raise ValueError("edge_delta leaves an empty search region")
    if cfg.edge_delta < cfg.exclusion_eps:
        # the search disk must stay clear of the eps-disks around +-1
        raise ValueError("edge_delta must be at least exclusion_eps")
    total = circle_winding(engine, R, cfg) - circle_winding(engine, cfg.origin_eps, cfg)
    r_edge = 1.0 - cfg.edge_delta / 10.0
    try:
        edge_count = circle_winding(engine, r_edge, cfg) - circle_winding(engine, R, cfg)
    except _Unstable:
        edge_count = -1

    # irrational angular offset keeps initial rays off symmetry axes
    off = (math.sqrt(2) - 1) * 2 * math.pi / cfg.n_sectors
    radii = np.geomspace(cfg.origin_eps, R, cfg.n_rings + 1)
    radii[0], radii[-1] = cfg.origin_eps, R
    cells = [Cell(float(radii[i]), float(radii[i + 1]),
                  off + 2 * math.pi * s / cfg.n_sectors, off + 2 * math.pi * (s + 1) / cfg.n_sectors)
             for i in range(cfg.n_rings) for s in range(cfg.n_sectors)]
    threads = cfg.threads or os.cpu_count() or 1
    found: list[Eigenvalue] = []
    unresolved: list[dict] = []
    visited = 0
    with ThreadPoolExecutor(max_workers=threads) as ex:
        while cells:
            visited += len(cells)
            results = list(ex.map(lambda c: _process(engine, c, cfg), cells))
            nxt = []
            for c, (kind, payload) in zip(cells, results):
                if kind == "zero":
                    found.append(payload)
                elif kind == "split":
                    nxt.extend(_split(c))
                elif kind == "unresolved":
                    cell, w = payload
                    unresolved.append({**cell.to_json(), "winding": w})
            cells = nxt
    found = _dedupe(found)
    found.sort(key=lambda e: (e.z.real, e.z.imag))
    return ZeroSearchResult(found, unresolved, total, edge_count, visited)


def _dedupe(found: list[Eigenvalue], tol: float = 1e-10) -> list[Eigenvalue]:
    out: list[Eigenvalue] = []
    for e in sorted(found, key=lambda e: (e.z.real, e.z.imag)):
        if out and abs(out[-1].z - e.z) <= tol and out[-1].refined and e.refined:
            continue
        out.append(e)
    return out


# ---------------------------------------------------------------------------
# enclosure


@dataclass
class EnclosureVerdict:
    Q0: float
    Q1: float
    q: float
    t_root: float
    exponent: float
    region_radius: float
    criterion_value: float
    empty_spectrum_certified: bool
    empty_spectrum_certified_strict: bool
    rectangles: list | None

    def is_free(self, lam: complex) -> bool:
        """True when lam lies in the certified eigenvalue-free region |lam^2 - 4| > c^2."""
        return abs(lam * lam - 4.0) > self.region_radius**2

    def in_rectangles(self, lam: complex) -> bool:
        if self.rectangles is None:
            return True
        return any(r[0] < lam.real < r[1] and r[2] < lam.imag < r[3] for r in self.rectangles)

    def to_json(self) -> dict:
        d = asdict(self)
        for k in ("Q1", "criterion_value"):
            if not math.isfinite(d[k]):
                d[k] = None
        return d


def enclosure(op: BandedOperator | NormalizedCoefficients) -> EnclosureVerdict:
    """Eigenvalue-free region and the two emptiness criteria.

    ``empty_spectrum_certified`` tests exp{(2-q)/(1-q) Q0} Q1 < 4/t, the
    criterion as usually quoted.  ``empty_spectrum_certified_strict`` tests
    the threshold t/4 that the underlying estimate supports; see the
    decisions ledger for a counterexample to the 4/t form.
    """
    if isinstance(op, NormalizedCoefficients):
        Q0, Q1, q = op.Q0, op.Q1, op.q_sup
    else:
        from .model import sup_q, tail_sum

        Q0 = tail_sum(op, 1)
        q = sup_q(op)
        try:
            Q1 = tail_sum(op, 1, 1.0)
        except Exception:
            Q1 = math.inf
    if q >= 1.0:
        raise EnclosureUnavailable(f"sup q_n = {q:.4g} >= 1")
    expo = math.exp((2.0 - q) / (1.0 - q) * Q0)
    c = 8.0 * Q0 / T_ROOT * expo
    crit = expo * Q1
    rect = None
    if c < 2.0:
        lo, hi, im = math.sqrt(4 - c * c), math.sqrt(4 + c * c), c * c / 4
        rect = [[lo, hi, -im, im], [-hi, -lo, -im, im]]
    return EnclosureVerdict(Q0=float(Q0), Q1=float(Q1), q=float(q), t_root=T_ROOT, exponent=expo,
                            region_radius=c, criterion_value=crit,
                            empty_spectrum_certified=bool(crit < 4.0 / T_ROOT),
                            empty_spectrum_certified_strict=bool(crit < T_ROOT / 4.0),
                            rectangles=rect)


# ---------------------------------------------------------------------------
# pipeline


@dataclass
class AnalysisConfig:
    tol: float = 1e-14
    edge_delta: float = 1e-2
    exclusion_eps: float = 1e-3
    j_max: int | None = None
    route: str = "taylor"
    threads: int | None = None
    horizon: int | None = None

    def search(self) -> ZeroSearchConfig:
        return ZeroSearchConfig(edge_delta=self.edge_delta, exclusion_eps=self.exclusion_eps,
                                threads=self.threads)


@dataclass
class SpectralReport:
    eigenvalues: list
    enclosure: EnclosureVerdict | None
    enclosure_error: str | None
    unresolved_cells: list
    winding_total: int
    edge_zero_count: int
    taylor: dict | None = None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {
            "eigenvalues": [e.to_json() for e in self.eigenvalues],
            "enclosure": self.enclosure.to_json() if self.enclosure else None,
            "unresolved_cells": self.unresolved_cells,
            "winding_total": self.winding_total,
            "edge_zero_count": self.edge_zero_count,
        }
        if self.enclosure_error:
            out["enclosure_error"] = self.enclosure_error
        if self.taylor is not None:
            out["taylor"] = self.taylor
        out.update(self.extra)
        return out


def analyze(op: BandedOperator, cfg: AnalysisConfig | None = None) -> tuple[SpectralReport, JostEngine]:
    """normalize -> Jost engine -> zeros -> enclosure."""
    cfg = cfg or AnalysisConfig()
    coeffs = normalize(op, horizon=cfg.horizon, tail_tol=cfg.tol)
    engine = JostEngine(coeffs, route=cfg.route, tol=cfg.tol, j_max=cfg.j_max)
    res = find_zeros(engine, cfg.search())
    try:
        enc, enc_err = enclosure(coeffs), None
    except EnclosureUnavailable as exc:
        enc, enc_err = None, str(exc)
    taylor = None
    if engine.table is not None:
        t = engine.table
        taylor = {"j_max": t.j_max, "exact": t.exact, "tail_bound": t.tail_bound,
                  "bound_ratio_max": t.bound_ratio_max}
    rep = SpectralReport(res.eigenvalues, enc, enc_err, res.unresolved_cells,
                         res.winding_total, res.edge_zero_count, taylor)
    return rep, engine


def gamma_grid(engine: JostEngine, n: int = 101, radius: float = 1.0):
    """Rows (Re z, Im z, |gamma(z)|) on a square grid clipped to the disk."""
    xs = np.linspace(-radius, radius, n)
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    Z = (X + 1j * Y).ravel()
    Z = Z[(np.abs(Z) <= radius) & (Z != 0)]
    G = np.abs(np.asarray(engine.gamma(Z)))
    return np.column_stack([Z.real, Z.imag, G])

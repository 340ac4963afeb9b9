"""Symmetric-difference volumes of balls and simplexes.

Exact ball volumes use hyperspherical caps through the regularized incomplete
beta function; the elementary lens formulas for ``n <= 3`` are kept as an
independent path.  Monte Carlo estimators draw from a counter-based generator
(Philox) in fixed-size blocks so the estimate does not depend on how the blocks
are spread over workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import special

from .funcspace import unit_ball_volume

__all__ = [
    "BallParams",
    "SimplexParams",
    "BoundReport",
    "cap_volume",
    "lens_volume",
    "lens_volume_elementary",
    "ball_set_measures",
    "ball_symmdiff_exact",
    "ball_symmdiff_montecarlo",
    "indicator_lp_distance",
    "polygon_area",
    "clip_convex",
    "simplex_intersection_area",
    "simplex_symmdiff",
    "simplex_symmdiff_montecarlo",
    "simplex_lp_distance",
    "triangle_norm",
    "simplex_lipschitz_constant",
    "bilip_certify",
    "MC_BLOCK",
]

MC_BLOCK = 1 << 16


@dataclass(frozen=True)
class BallParams:
    """Closed ball ``B(centre, radius)``."""

    centre: tuple
    radius: float

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.centre, dtype=float))
        if c.ndim != 1:
            raise ValueError("centre must be a vector")
        object.__setattr__(self, "centre", tuple(float(x) for x in c))
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ValueError(f"radius must be positive, got {self.radius}")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def n(self) -> int:
        return len(self.centre)

    @property
    def volume(self) -> float:
        return unit_ball_volume(self.n) * self.radius ** self.n


@dataclass(frozen=True)
class SimplexParams:
    """Simplex with vertex columns ``v`` (an ``n x (n+1)`` matrix)."""

    vertices: tuple

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != v.shape[0] + 1:
            raise ValueError("vertices must be an n x (n+1) matrix of columns")
        if _simplex_volume(v) <= 0 or not np.all(np.isfinite(v)):
            raise ValueError("degenerate simplex")
        object.__setattr__(self, "vertices", tuple(tuple(float(x) for x in row) for row in v))

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.vertices)

    @property
    def n(self) -> int:
        return len(self.vertices)

    @property
    def volume(self) -> float:
        return _simplex_volume(self.matrix)

    def sorted(self) -> "SimplexParams":
        """Columns in lexicographic order."""
        v = self.matrix
        order = np.lexsort(v[::-1])
        return SimplexParams(v[:, order])

    def max_edge(self) -> float:
        v = self.matrix
        d = v[:, :, None] - v[:, None, :]
        return float(np.sqrt(np.max(np.sum(d * d, axis=0))))


def _simplex_volume(v) -> float:
    n = v.shape[0]
    return abs(float(np.linalg.det(v[:, 1:] - v[:, :1]))) / math.factorial(n)


@dataclass(frozen=True)
class BoundReport:
    """Outcome of the bi-Lipschitz check for one pair of balls.

    ``ratio`` is ``|B1 symdiff B2| / (|a1 - a2| + |r1 - r2|)``.
    """

    case: str
    lower: float
    upper: float
    ratio: float
    passed: bool
    norm_constant: float = math.sqrt(2.0)
    diam_K: float = float("nan")

    def as_dict(self) -> dict:
        return {
            "case": self.case,
            "lower": self.lower,
            "upper": self.upper,
            "ratio": self.ratio,
            "pass": self.passed,
            "norm_constant": self.norm_constant,
            "diam_K": self.diam_K,
        }


# ---------------------------------------------------------------- balls


def cap_volume(r: float, h: float, n: int) -> float:
    """Volume of the cap of height ``h`` cut from a ball of radius ``r`` in ``R^n``."""
    if h <= 0.0:
        return 0.0
    full = unit_ball_volume(n) * r ** n
    if h >= 2.0 * r:
        return full
    if h > r:
        return full - cap_volume(r, 2.0 * r - h, n)
    x = (2.0 * r * h - h * h) / (r * r)
    return 0.5 * full * float(special.betainc((n + 1) / 2.0, 0.5, min(x, 1.0)))


def _lens_geometry(r1, r2, d):
    x1 = (d * d + r1 * r1 - r2 * r2) / (2.0 * d)
    return x1, r1 - x1, r2 - (d - x1)


def lens_volume(r1: float, r2: float, d: float, n: int) -> float:
    """``|B(0, r1) cap B(d e_1, r2)|`` in ``R^n`` via two caps."""
    if d >= r1 + r2:
        return 0.0
    if d <= abs(r1 - r2):
        return unit_ball_volume(n) * min(r1, r2) ** n
    _, h1, h2 = _lens_geometry(r1, r2, d)
    return cap_volume(r1, h1, n) + cap_volume(r2, h2, n)


def lens_volume_elementary(r1: float, r2: float, d: float, n: int) -> float:
    """Elementary lens formulas for ``n`` in ``{1, 2, 3}``."""
    if n not in (1, 2, 3):
        raise ValueError("elementary lens formulas exist for n <= 3 only")
    if d >= r1 + r2:
        return 0.0
    if d <= abs(r1 - r2):
        return unit_ball_volume(n) * min(r1, r2) ** n
    if n == 1:
        return r1 + r2 - d
    if n == 2:
        x1 = (d * d + r1 * r1 - r2 * r2) / (2.0 * d)
        x2 = d - x1
        seg1 = r1 * r1 * math.acos(x1 / r1) - x1 * math.sqrt(r1 * r1 - x1 * x1)
        seg2 = r2 * r2 * math.acos(x2 / r2) - x2 * math.sqrt(r2 * r2 - x2 * x2)
        return seg1 + seg2
    s = r1 + r2 - d
    return math.pi * s * s * (d * d + 2.0 * d * (r1 + r2) - 3.0 * (r1 - r2) ** 2) / (12.0 * d)


def _dim(b1: BallParams, b2: BallParams, n) -> int:
    if b1.n != b2.n:
        raise ValueError("balls live in different dimensions")
    if n is not None and int(n) != b1.n:
        raise ValueError(f"dimension {n} does not match centres of length {b1.n}")
    return b1.n


def ball_set_measures(b1: BallParams, b2: BallParams, n=None):
    """``(|B1 \\ B2|, |B2 \\ B1|, |B1 cap B2|)``."""
    n = _dim(b1, b2, n)
    d = float(np.linalg.norm(np.subtract(b1.centre, b2.centre)))
    r1, r2 = b1.radius, b2.radius
    om = unit_ball_volume(n)
    if d >= r1 + r2:
        return b1.volume, b2.volume, 0.0
    if d <= abs(r1 - r2):
        # nested; write the difference as om*(r1^n - r2^n) to avoid cancellation
        inner = om * min(r1, r2) ** n
        diff = om * abs(r1 ** n - r2 ** n)
        return (diff, 0.0, inner) if r1 >= r2 else (0.0, diff, inner)
    lens = lens_volume(r1, r2, d, n)
    return max(b1.volume - lens, 0.0), max(b2.volume - lens, 0.0), lens


def ball_symmdiff_exact(b1: BallParams, b2: BallParams, n=None) -> float:
    """``|B1 symdiff B2|``; tangency counts as disjoint."""
    if b1 == b2:
        _dim(b1, b2, n)
        return 0.0
    o1, o2, _ = ball_set_measures(b1, b2, n)
    return o1 + o2


def indicator_lp_distance(b1: BallParams, b2: BallParams, p=1.0, lam1=1.0, lam2=1.0) -> float:
    """``|| lam1 chi_B1 - lam2 chi_B2 ||_p`` from the set decomposition."""
    o1, o2, inter = ball_set_measures(b1, b2)
    if b1 == b2:
        o1 = o2 = 0.0
    dl = abs(lam1 - lam2)
    if math.isinf(p):
        vals = [lam1 if o1 > 0 else 0.0, lam2 if o2 > 0 else 0.0, dl if inter > 0 else 0.0]
        return max(vals)
    total = lam1 ** p * o1 + lam2 ** p * o2 + dl ** p * inter
    return total ** (1.0 / p)


def _mc_run(count_block, total: int, seed: int, workers: int) -> int:
    nblocks = -(-total // MC_BLOCK)
    sizes = [min(MC_BLOCK, total - j * MC_BLOCK) for j in range(nblocks)]

    def work(j):
        gen = np.random.Generator(np.random.Philox(key=int(seed), counter=[0, j, 0, 0]))
        return count_block(gen, sizes[j])

    if workers <= 1:
        hits = [work(j) for j in range(nblocks)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            hits = list(ex.map(work, range(nblocks)))
    return int(sum(hits))


def _mc_estimate(lo, hi, member, samples, seed, workers):
    samples = int(samples)
    if samples < 1:
        raise ValueError("need at least one sample")
    width = hi - lo
    vol = float(np.prod(width))
    if not vol > 0:
        raise ValueError("zero-volume sampling box")

    def count(gen, m):
        z = lo + width * gen.random((m, lo.size))
        return int(np.count_nonzero(member(z)))

    hits = _mc_run(count, samples, seed, workers)
    frac = hits / samples
    return vol * frac, vol * math.sqrt(frac * (1.0 - frac) / samples)


def ball_symmdiff_montecarlo(b1: BallParams, b2: BallParams, n=None, samples: int = 10**6, seed: int = 0, workers: int = 1):
    """Monte Carlo estimate of ``|B1 symdiff B2|`` with its standard error.

    Points are drawn uniformly in the bounding box of ``B1 cup B2``.

    :returns: ``(estimate, stderr)``
    """
    n = _dim(b1, b2, n)
    c1, c2 = np.asarray(b1.centre), np.asarray(b2.centre)
    lo = np.minimum(c1 - b1.radius, c2 - b2.radius)
    hi = np.maximum(c1 + b1.radius, c2 + b2.radius)

    def member(z):
        in1 = np.sum((z - c1) ** 2, axis=1) <= b1.radius ** 2
        in2 = np.sum((z - c2) ** 2, axis=1) <= b2.radius ** 2
        return in1 ^ in2

    return _mc_estimate(lo, hi, member, samples, seed, workers)


# ---------------------------------------------------------------- simplexes


def polygon_area(poly) -> float:
    """Signed shoelace area of a polygon given as a ``(k, 2)`` array."""
    poly = np.asarray(poly, dtype=float)
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _ccw(poly):
    poly = np.asarray(poly, dtype=float)
    return poly if polygon_area(poly) >= 0 else poly[::-1]


def clip_convex(subject, clip) -> np.ndarray:
    """Sutherland-Hodgman clipping of ``subject`` against a convex ``clip``."""
    out = [tuple(p) for p in _ccw(subject)]
    clip = _ccw(clip)
    for i in range(len(clip)):
        if not out:
            break
        a, b = clip[i], clip[(i + 1) % len(clip)]
        ex, ey = b[0] - a[0], b[1] - a[1]

        def side(p):
            return ex * (p[1] - a[1]) - ey * (p[0] - a[0])

        src, out = out, []
        for j in range(len(src)):
            p, q = src[j], src[(j + 1) % len(src)]
            sp, sq = side(p), side(q)
            if sp >= 0:
                out.append(p)
            if (sp >= 0) != (sq >= 0):
                t = sp / (sp - sq)
                out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return np.asarray(out, dtype=float).reshape(-1, 2)


def _as_simplex(s) -> SimplexParams:
    return s if isinstance(s, SimplexParams) else SimplexParams(s)


def simplex_intersection_area(s1, s2) -> float:
    """``|T1 cap T2|`` for planar triangles."""
    s1, s2 = _as_simplex(s1), _as_simplex(s2)
    if s1.n != 2 or s2.n != 2:
        raise ValueError("exact clipping is implemented for n = 2")
    poly = clip_convex(s1.matrix.T, s2.matrix.T)
    return abs(polygon_area(poly))


def simplex_symmdiff_montecarlo(s1, s2, samples: int = 10**6, seed: int = 0, workers: int = 1):
    """Monte Carlo ``|T1 symdiff T2|`` with barycentric membership tests."""
    s1, s2 = _as_simplex(s1), _as_simplex(s2)
    if s1.n != s2.n:
        raise ValueError("simplexes live in different dimensions")
    v1, v2 = s1.matrix, s2.matrix
    lo = np.minimum(v1.min(axis=1), v2.min(axis=1))
    hi = np.maximum(v1.max(axis=1), v2.max(axis=1))
    inv1 = np.linalg.inv(v1[:, 1:] - v1[:, :1])
    inv2 = np.linalg.inv(v2[:, 1:] - v2[:, :1])

    def inside(z, v, inv):
        lam = (z - v[:, 0]) @ inv.T
        return np.all(lam >= 0, axis=1) & (np.sum(lam, axis=1) <= 1)

    def member(z):
        return inside(z, v1, inv1) ^ inside(z, v2, inv2)

    return _mc_estimate(lo, hi, member, samples, seed, workers)


def simplex_symmdiff(s1, s2, n=None, samples: int = 10**6, seed: int = 0) -> float:
    """``|T1 symdiff T2|``: exact for ``n = 2``, Monte Carlo estimate otherwise."""
    s1, s2 = _as_simplex(s1), _as_simplex(s2)
    if s1.n != s2.n or (n is not None and int(n) != s1.n):
        raise ValueError("dimension mismatch")
    if s1.n == 2:
        if s1 == s2:
            return 0.0
        inter = simplex_intersection_area(s1, s2)
        return max(s1.volume + s2.volume - 2.0 * inter, 0.0)
    return simplex_symmdiff_montecarlo(s1, s2, samples, seed)[0]


def simplex_lp_distance(v1, v2, p=1.0, lam1=1.0, lam2=1.0) -> float:
    """``|| lam1 chi_T1 - lam2 chi_T2 ||_p`` for planar triangles."""
    s1, s2 = _as_simplex(v1), _as_simplex(v2)
    inter = 0.0 if s1 == s2 else simplex_intersection_area(s1, s2)
    if s1 == s2:
        o1 = o2 = 0.0
        inter = s1.volume
    else:
        o1 = max(s1.volume - inter, 0.0)
        o2 = max(s2.volume - inter, 0.0)
    dl = abs(lam1 - lam2)
    if math.isinf(p):
        return max(lam1 if o1 > 0 else 0.0, lam2 if o2 > 0 else 0.0, dl if inter > 0 else 0.0)
    return (lam1 ** p * o1 + lam2 ** p * o2 + dl ** p * inter) ** (1.0 / p)


def triangle_norm(v) -> float:
    """``||v||`` as the largest Euclidean column norm."""
    v = np.asarray(v, dtype=float)
    return float(np.max(np.linalg.norm(v, axis=0)))


def simplex_lipschitz_constant(n: int, mu: float) -> float:
    """``3^n (n+1) mu^(n-1)``."""
    return 3.0 ** n * (n + 1) * mu ** (n - 1)


# ---------------------------------------------------------------- bi-Lipschitz


def bilip_certify(b1: BallParams, b2: BallParams, A: float, rho: float, R: float, n=None, rtol: float = 1e-9) -> BoundReport:
    """Compare ``|B1 symdiff B2|`` with the per-case two-sided constants.

    The parameter distance is the sum norm ``|a1 - a2| + |r1 - r2|``.  The
    disjoint-case lower constant needs the diameter of the parameter box in
    that norm; it is bounded by ``c * diam_K`` with the Euclidean diameter and
    ``c = sqrt(2)``, and both numbers are stored in the report.

    :arg rtol: relative slack for the comparisons; several cases are sharp
        in one dimension.
    """
    n = _dim(b1, b2, n)
    for b in (b1, b2):
        if float(np.linalg.norm(b.centre)) > A * (1 + 1e-12) or not (rho * (1 - 1e-12) <= b.radius <= R * (1 + 1e-12)):
            raise ValueError(f"ball {b} outside the parameter box A={A}, rho={rho}, R={R}")
    c = math.sqrt(2.0)
    diam = math.hypot(2.0 * A, R - rho)
    if b1 == b2:
        return BoundReport("degenerate", float("nan"), float("nan"), float("nan"), True, c, diam)
    om = unit_ball_volume(n)
    d = float(np.linalg.norm(np.subtract(b1.centre, b2.centre)))
    dr = abs(b1.radius - b2.radius)
    r_sum = b1.radius + b2.radius
    if d >= r_sum:
        case = "disjoint"
        lower = om * rho ** n / (c * diam)
        upper = 2.0 ** (n - 1) * om * R ** (n - 1)
    elif d < dr:
        case = "nested"
        lower = 0.5 * n * om * rho ** (n - 1)
        upper = n * om * R ** (n - 1)
    else:
        upper = 2.0 ** (n - 1) * n * om * R ** (n - 1)
        if d > max(b1.radius, b2.radius):
            case = "lens-far"
            lower = om * rho ** (n - 1) / 2.0 ** n
        else:
            case = "lens-near"
            lower = unit_ball_volume(n - 1) * rho ** (n - 1) / 2.0 ** n
    ratio = ball_symmdiff_exact(b1, b2) / (d + dr)
    ok = lower * (1 - rtol) <= ratio <= upper * (1 + rtol)
    return BoundReport(case, lower, upper, ratio, bool(ok), c, diam)

"""Finite-dimensional manifold families with explicit charts.

Each family exposes the parametrisation ``embed`` (the inverse chart), the
chart ``chart_coords``, its Hoelder data ``(alpha, ell)``, a compact set ``K``
given as a constrained parameter box, and exact ambient distances.

Families are immutable; empirically estimated constants are cached on first
use and flagged with ``ell_source == "empirical"``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.stats import qmc

from . import geometry
from .funcspace import (
    BallIndicator,
    FunctionRep,
    GaussianBump,
    GaussianDirectional,
    IntervalIndicator,
    SimplexIndicator,
    gaussian_distance,
    lp_distance,
    lp_norm,
    unit_ball_volume,
)

__all__ = [
    "ModelPoint",
    "CompactSetSpec",
    "ManifoldFamily",
    "IntervalFamily",
    "BallFamily",
    "BallIntensityFamily",
    "GaussianFamily",
    "SimplexFamily",
    "make_family",
    "holder_data",
    "ambient_distance",
    "sample_compact",
    "gaussian_chart_derivative",
    "project_polygon",
]


@dataclass(frozen=True)
class ModelPoint:
    """Chart coordinates ``h`` of a family member.

    ``chart`` names the chart for families with several charts (the flattened
    reference vertices of a simplex chart); single-chart families leave it
    ``None``.
    """

    family: str
    coords: tuple
    chart: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(float(x) for x in np.ravel(self.coords)))
        if self.chart is not None:
            object.__setattr__(self, "chart", tuple(float(x) for x in np.ravel(self.chart)))

    @property
    def h(self) -> np.ndarray:
        return np.array(self.coords)


@dataclass(frozen=True)
class CompactSetSpec:
    """Compact set ``K`` as a parameter box cut by an extra constraint.

    :ivar margin: chart-coordinate distance from ``K`` to the boundary of the
        chart image.
    :ivar delta_KM: the finite threshold standing in for the one-chart
        constant; ``delta_source`` says where it came from.
    :ivar constraint: predicate on chart coordinates beyond the box.
    :ivar projector: Euclidean projection of chart coordinates onto ``K``.
    """

    family: str
    lower: tuple
    upper: tuple
    margin: float
    delta_KM: float
    delta_source: str = "cap"
    anchor: tuple | None = None
    constraint: Callable | None = field(default=None, compare=False, repr=False)
    projector: Callable | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("box bounds must be vectors of equal length")
        if np.any(hi < lo):
            raise ValueError("empty parameter box")
        if not self.delta_KM > 0:
            raise ValueError("delta_KM must be positive")
        object.__setattr__(self, "lower", tuple(lo.tolist()))
        object.__setattr__(self, "upper", tuple(hi.tolist()))
        anchor = self.project(0.5 * (lo + hi)) if self.anchor is None else np.asarray(self.anchor, dtype=float)
        object.__setattr__(self, "anchor", tuple(anchor.tolist()))

    @property
    def dim(self) -> int:
        return len(self.lower)

    def contains(self, h, tol: float = 1e-12) -> bool:
        h = np.asarray(h, dtype=float)
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        if np.any(h < lo - tol) or np.any(h > hi + tol):
            return False
        return True if self.constraint is None else bool(self.constraint(h, tol))

    def project(self, h) -> np.ndarray:
        h = np.asarray(h, dtype=float)
        if self.projector is not None:
            return np.asarray(self.projector(h), dtype=float)
        return np.clip(h, self.lower, self.upper)

    def as_dict(self) -> dict:
        return {
            "family": self.family,
            "lower": list(self.lower),
            "upper": list(self.upper),
            "margin": self.margin,
            "delta_KM": self.delta_KM,
            "delta_source": self.delta_source,
        }


def sample_compact(spec: CompactSetSpec, count: int, seed: int = 0) -> list:
    """Deterministic quasi-uniform sample of ``K``.

    The first point is the anchor of ``spec`` (the box centre projected onto
    ``K``); the rest come from a scrambled Halton sequence over the box with
    rejection of points outside ``K``.
    """
    count = int(count)
    if count < 1:
        raise ValueError("count must be >= 1")
    lo, hi = np.asarray(spec.lower), np.asarray(spec.upper)
    pts = [np.asarray(spec.anchor, dtype=float)]
    if count == 1:
        return [ModelPoint(spec.family, pts[0])]
    width = hi - lo
    halton = qmc.Halton(d=spec.dim, scramble=True, seed=np.random.default_rng(seed))
    attempts = 0
    while len(pts) < count:
        batch = lo + width * halton.random(max(64, 2 * (count - len(pts))))
        for h in batch:
            if spec.contains(h):
                pts.append(h)
                if len(pts) == count:
                    break
        attempts += 1
        if attempts > 1000:
            raise ValueError("compact set appears to be empty")
    return [ModelPoint(spec.family, h) for h in pts]


# ---------------------------------------------------------------- base class


class ManifoldFamily:
    """Common interface; see the concrete families below."""

    tag: str = "abstract"
    p: float = 1.0

    # -- chart ---------------------------------------------------------
    @property
    def dim(self) -> int:
        raise NotImplementedError

    def in_chart_image(self, h, chart=None) -> bool:
        raise NotImplementedError

    def embed(self, x) -> FunctionRep:
        raise NotImplementedError

    def chart_coords(self, f: FunctionRep, chart=None) -> ModelPoint:
        raise NotImplementedError

    def point(self, h, chart=None) -> ModelPoint:
        h = np.asarray(h, dtype=float).ravel()
        if h.size != self.dim:
            raise ValueError(f"{self.tag} coordinates have {self.dim} entries, got {h.size}")
        if not self.in_chart_image(h, chart):
            raise ValueError(f"coordinates {h.tolist()} outside the chart image of {self.tag}")
        return ModelPoint(self.tag, h, chart)

    def _coords(self, x) -> np.ndarray:
        if isinstance(x, ModelPoint):
            if x.family != self.tag:
                raise ValueError(f"point of family {x.family!r} passed to {self.tag!r}")
            return x.h
        return np.asarray(x, dtype=float).ravel()

    # -- metric data ----------------------------------------------------
    @property
    def alpha(self) -> float:
        raise NotImplementedError

    @property
    def ell(self) -> float:
        raise NotImplementedError

    ell_source = "analytic"

    def chart_distance(self, h1, h2) -> float:
        return float(np.linalg.norm(self._coords(h1) - self._coords(h2)))

    def ambient_distance(self, x, y, p=None) -> float:
        return lp_distance(self.embed(x), self.embed(y), self.p if p is None else p)

    def ambient_modulus(self, d: float) -> float:
        """Upper bound on ambient distance for chart points ``d`` apart (Euclidean)."""
        return d ** self.alpha / self.ell

    def compact_spec(self) -> CompactSetSpec:
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError

    def _empirical_ell(self, count: int = 160, near: int = 800, seed: int = 0) -> float:
        """Half the smallest two-sided ratio over a dense sample of ``K``."""
        spec = self.compact_spec()
        pts = [x.h for x in sample_compact(spec, count, seed)]
        rng = np.random.default_rng(seed)
        pairs = [(pts[i], pts[j]) for i in range(len(pts)) for j in range(i + 1, len(pts))]
        for _ in range(near):
            h = pts[rng.integers(len(pts))]
            u = rng.normal(size=self.dim)
            g = h + 10 ** rng.uniform(-5, -2) * u / np.linalg.norm(u)
            if spec.contains(g):
                pairs.append((h, g))
        best = np.inf
        a = self.alpha
        for h, g in pairs:
            dc = self.chart_distance(h, g)
            if dc == 0:
                continue
            da = self.ambient_distance(h, g)
            best = min(best, dc ** a / da, da / dc)
        return float(min(1.0, 0.5 * best))


def project_polygon(h, vertices) -> np.ndarray:
    """Euclidean projection of ``h`` onto a convex polygon (CCW vertices)."""
    h = np.asarray(h, dtype=float)
    V = np.asarray(vertices, dtype=float)
    k = len(V)
    inside = True
    for i in range(k):
        a, b = V[i], V[(i + 1) % k]
        e = b - a
        if e[0] * (h[1] - a[1]) - e[1] * (h[0] - a[0]) < 0:
            inside = False
            break
    if inside:
        return h.copy()
    best, best_d = None, np.inf
    for i in range(k):
        a, b = V[i], V[(i + 1) % k]
        e = b - a
        t = min(1.0, max(0.0, float(np.dot(h - a, e) / np.dot(e, e))))
        q = a + t * e
        d = float(np.dot(h - q, h - q))
        if d < best_d:
            best, best_d = q, d
    return best


def _project_ball(x, centre, radius):
    d = x - centre
    nrm = float(np.linalg.norm(d))
    return x.copy() if nrm <= radius else centre + d * (radius / nrm)


# ---------------------------------------------------------------- intervals


@dataclass(frozen=True)
class IntervalFamily(ManifoldFamily):
    """Indicators ``chi_[a,b]`` of subintervals of ``[0, 1]`` with ``b - a > eps``.

    The chart is ``(a, b)``.  ``K`` is ``a, b in [eps, 1 - eps]`` with
    ``b - a >= 2 eps``.  In ``L^p`` the family is ``1/p``-Hoelder with
    ``ell = eps`` when chart distances use the sum norm.
    """

    eps: float = 0.1
    p: float = 1.0
    tag: str = field(default="interval", init=False)

    def __post_init__(self):
        if not (0 < self.eps < 0.25):
            raise ValueError("eps must lie in (0, 1/4) for K to be nonempty")
        if self.p < 1:
            raise ValueError("p must be >= 1")

    @property
    def dim(self):
        return 2

    @property
    def alpha(self):
        return 1.0 / self.p

    @property
    def ell(self):
        return self.eps

    def in_chart_image(self, h, chart=None):
        a, b = np.asarray(h, dtype=float)
        return bool(0.0 < a < b < 1.0 and b - a > self.eps)

    def embed(self, x):
        a, b = self._coords(x)
        if not self.in_chart_image((a, b)):
            raise ValueError(f"({a}, {b}) outside the chart image")
        return IntervalIndicator(a, b)

    def chart_coords(self, f, chart=None):
        if not isinstance(f, IntervalIndicator) or f.intensity != 1.0:
            raise ValueError("not a unit interval indicator")
        return self.point((f.a, f.b))

    def chart_distance(self, h1, h2):
        return float(np.sum(np.abs(self._coords(h1) - self._coords(h2))))

    def ambient_distance(self, x, y, p=None):
        p = self.p if p is None else p
        (a1, b1), (a2, b2) = self._coords(x), self._coords(y)
        if a1 == a2 and b1 == b2:
            return 0.0
        if math.isinf(p):
            return 1.0
        if b1 <= a2 or b2 <= a1:
            meas = (b1 - a1) + (b2 - a2)
        else:
            meas = abs(a1 - a2) + abs(b1 - b2)
        return meas ** (1.0 / p)

    def ambient_modulus(self, d):
        # ||.||_p <= (|da| + |db|)^(1/p) <= (sqrt(2) d)^(1/p)
        return (math.sqrt(2.0) * d) ** (1.0 / self.p)

    def triangle(self):
        e = self.eps
        return np.array([[e, 3 * e], [1 - 3 * e, 1 - e], [e, 1 - e]])

    def compact_spec(self):
        e = self.eps
        tri = self.triangle()

        def constraint(h, tol):
            return h[1] - h[0] >= 2 * e - tol

        return CompactSetSpec(
            self.tag,
            (e, 3 * e),
            (1 - 3 * e, 1 - e),
            margin=e,
            delta_KM=e / 2,
            delta_source="cap: half the margin of K",
            constraint=constraint,
            projector=lambda h: project_polygon(h, tri),
        )

    def describe(self):
        return {"tag": self.tag, "eps": self.eps, "p": self.p}


# ---------------------------------------------------------------- balls


def _ball_margin(A, rho, R, k_margin):
    m = 0.1 * min(A, R - rho) if k_margin is None else float(k_margin)
    if not (0 < m < A and 2 * m < R - rho):
        raise ValueError("k_margin leaves an empty compact set")
    return m


@dataclass(frozen=True)
class BallFamily(ManifoldFamily):
    """Indicators of balls ``B(a, r)`` with ``|a| < A`` and ``rho < r < R``.

    Chart ``(a_1, ..., a_n, r)``.  ``1/p``-Hoelder in ``L^p``; ``ell`` is
    estimated on ``K`` and halved.
    """

    n: int = 2
    A: float = 1.0
    rho: float = 0.5
    R: float = 1.5
    p: float = 1.0
    k_margin: float | None = None
    tag: str = field(default="ball", init=False)

    def __post_init__(self):
        if self.n < 1 or not (self.A > 0 and 0 < self.rho < self.R) or self.p < 1:
            raise ValueError("invalid ball family parameters")
        _ball_margin(self.A, self.rho, self.R, self.k_margin)

    @property
    def dim(self):
        return self.n + 1

    @property
    def alpha(self):
        return 1.0 / self.p

    ell_source = "empirical"

    @cached_property
    def ell(self):
        return self._empirical_ell()

    @property
    def margin(self):
        return _ball_margin(self.A, self.rho, self.R, self.k_margin)

    def in_chart_image(self, h, chart=None):
        h = np.asarray(h, dtype=float)
        return bool(np.linalg.norm(h[: self.n]) < self.A and self.rho < h[self.n] < self.R)

    def params(self, x) -> geometry.BallParams:
        h = self._coords(x)
        return geometry.BallParams(h[: self.n], h[self.n])

    def embed(self, x):
        h = self._coords(x)
        if not self.in_chart_image(h):
            raise ValueError(f"{h.tolist()} outside the chart image")
        return BallIndicator(h[: self.n], h[self.n])

    def chart_coords(self, f, chart=None):
        if not isinstance(f, BallIndicator) or f.n != self.n or f.intensity != 1.0:
            raise ValueError("not a unit-intensity ball of this family")
        return self.point(np.append(f.centre, f.radius))

    def ambient_distance(self, x, y, p=None):
        p = self.p if p is None else p
        return geometry.indicator_lp_distance(self.params(x), self.params(y), p)

    def upper_constant(self) -> float:
        om = unit_ball_volume(self.n)
        return 2.0 ** (self.n - 1) * self.n * om * self.R ** (self.n - 1)

    def ambient_modulus(self, d):
        return (self.upper_constant() * math.sqrt(2.0) * d) ** (1.0 / self.p)

    def _box(self):
        m = self.margin
        Ak = self.A - m
        lo = [-Ak] * self.n + [self.rho + m]
        hi = [Ak] * self.n + [self.R - m]
        return Ak, lo, hi

    def compact_spec(self):
        Ak, lo, hi = self._box()
        n = self.n
        zero = np.zeros(n)

        def constraint(h, tol):
            return np.linalg.norm(h[:n]) <= Ak + tol

        def projector(h):
            out = np.clip(h, lo, hi)
            out[:n] = _project_ball(out[:n], zero, Ak)
            return out

        return CompactSetSpec(
            self.tag, lo, hi, margin=self.margin, delta_KM=self.margin / 2,
            delta_source="cap: half the margin of K", constraint=constraint, projector=projector,
        )

    def describe(self):
        return {"tag": self.tag, "n": self.n, "A": self.A, "rho": self.rho, "R": self.R, "p": self.p,
                "k_margin": self.margin}


@dataclass(frozen=True)
class BallIntensityFamily(ManifoldFamily):
    """``lam chi_B(a, r)`` with ``|a| < A`` and ``r, lam`` in ``(rho, R)``; Lipschitz in ``L^1``."""

    n: int = 2
    A: float = 1.0
    rho: float = 0.5
    R: float = 1.5
    k_margin: float | None = None
    p: float = field(default=1.0, init=False)
    tag: str = field(default="ball_intensity", init=False)

    def __post_init__(self):
        if self.n < 1 or not (self.A > 0 and 0 < self.rho < self.R):
            raise ValueError("invalid ball family parameters")
        _ball_margin(self.A, self.rho, self.R, self.k_margin)

    @property
    def dim(self):
        return self.n + 2

    @property
    def alpha(self):
        return 1.0

    ell_source = "empirical"

    @cached_property
    def ell(self):
        return self._empirical_ell()

    @property
    def margin(self):
        return _ball_margin(self.A, self.rho, self.R, self.k_margin)

    def in_chart_image(self, h, chart=None):
        h = np.asarray(h, dtype=float)
        n = self.n
        return bool(np.linalg.norm(h[:n]) < self.A and self.rho < h[n] < self.R and self.rho < h[n + 1] < self.R)

    def embed(self, x):
        h = self._coords(x)
        if not self.in_chart_image(h):
            raise ValueError(f"{h.tolist()} outside the chart image")
        return BallIndicator(h[: self.n], h[self.n], h[self.n + 1])

    def chart_coords(self, f, chart=None):
        if not isinstance(f, BallIndicator) or f.n != self.n:
            raise ValueError("not a ball of this family")
        return self.point(np.concatenate([f.centre, [f.radius, f.intensity]]))

    def ambient_distance(self, x, y, p=None):
        p = self.p if p is None else p
        hx, hy = self._coords(x), self._coords(y)
        bx = geometry.BallParams(hx[: self.n], hx[self.n])
        by = geometry.BallParams(hy[: self.n], hy[self.n])
        return geometry.indicator_lp_distance(bx, by, p, hx[self.n + 1], hy[self.n + 1])

    def ambient_modulus(self, d):
        om = unit_ball_volume(self.n)
        U = 2.0 ** (self.n - 1) * self.n * om * self.R ** (self.n - 1)
        return (self.R * U + om * self.R ** self.n) * math.sqrt(3.0) * d

    def compact_spec(self):
        m = self.margin
        n = self.n
        Ak = self.A - m
        lo = [-Ak] * n + [self.rho + m] * 2
        hi = [Ak] * n + [self.R - m] * 2
        zero = np.zeros(n)

        def constraint(h, tol):
            return np.linalg.norm(h[:n]) <= Ak + tol

        def projector(h):
            out = np.clip(h, lo, hi)
            out[:n] = _project_ball(out[:n], zero, Ak)
            return out

        return CompactSetSpec(
            self.tag, lo, hi, margin=m, delta_KM=m / 2, delta_source="cap: half the margin of K",
            constraint=constraint, projector=projector,
        )

    def describe(self):
        return {"tag": self.tag, "n": self.n, "A": self.A, "rho": self.rho, "R": self.R, "k_margin": self.margin}


# ---------------------------------------------------------------- Gaussians


@dataclass(frozen=True)
class GaussianFamily(ManifoldFamily):
    """Translates ``G_a(z) = exp(-|z - a|^2)``; the chart is ``a`` itself.

    ``K`` is the cube ``[-A, A]^n``.  The chart image is all of ``R^n``, so the
    threshold ``delta_KM`` is capped at the half-width ``A`` of ``K``.
    """

    n: int = 1
    A: float = 1.0
    p: float = 1.0
    tag: str = field(default="gaussian", init=False)

    def __post_init__(self):
        if self.n < 1 or not self.A > 0 or self.p < 1:
            raise ValueError("invalid Gaussian family parameters")

    @property
    def dim(self):
        return self.n

    @property
    def alpha(self):
        return 1.0

    ell_source = "empirical"

    @cached_property
    def ell(self):
        return self._empirical_ell()

    def in_chart_image(self, h, chart=None):
        return bool(np.all(np.isfinite(np.asarray(h, dtype=float))))

    def embed(self, x):
        return GaussianBump(self._coords(x))

    def chart_coords(self, f, chart=None):
        if not isinstance(f, GaussianBump) or f.n != self.n:
            raise ValueError("not a Gaussian of this family")
        return self.point(f.centre)

    def ambient_distance(self, x, y, p=None):
        p = self.p if p is None else p
        d = float(np.linalg.norm(self._coords(x) - self._coords(y)))
        return gaussian_distance(d, self.n, p)

    def ambient_modulus(self, d):
        e1 = np.zeros(self.n)
        e1[0] = 1.0
        return lp_norm(GaussianDirectional(np.zeros(self.n), e1), self.p) * d

    def compact_spec(self):
        return CompactSetSpec(
            self.tag, [-self.A] * self.n, [self.A] * self.n, margin=math.inf, delta_KM=self.A,
            delta_source="cap: half-width of K (chart image is all of R^n)",
        )

    def describe(self):
        return {"tag": self.tag, "n": self.n, "A": self.A, "p": self.p}


def gaussian_chart_derivative(a, h) -> GaussianDirectional:
    """The derivative of ``a -> G_a`` applied to ``h``."""
    h = np.atleast_1d(np.asarray(h, dtype=float))
    if h.size == 0:
        raise ValueError("direction must be nonempty")
    return GaussianDirectional(a, h)


# ---------------------------------------------------------------- simplexes


_DEFAULT_TRIANGLE = ((0.25, 0.7, 0.35), (0.25, 0.3, 0.7))


@dataclass(frozen=True)
class SimplexFamily(ManifoldFamily):
    """Indicators of non-degenerate simplexes with edges shorter than ``mu``.

    A chart is attached to a reference simplex ``T`` (vertex columns sorted
    lexicographically): nearby simplexes are written with their vertices
    matched to those of ``T``.  Coordinates are the vertex columns stacked
    vertex by vertex.  ``K`` is the set of simplexes whose vertices lie within
    ``kappa * R_T`` of those of ``T``, ``R_T`` being a third of the shortest
    edge of ``T``.
    """

    n: int = 2
    mu: float = 1.0
    reference: tuple = _DEFAULT_TRIANGLE
    kappa: float = 0.5
    mc_samples: int = 200_000
    p: float = field(default=1.0, init=False)
    tag: str = field(default="simplex", init=False)

    def __post_init__(self):
        ref = geometry.SimplexParams(self.reference).sorted()
        if ref.n != self.n:
            raise ValueError("reference simplex has the wrong dimension")
        if ref.max_edge() >= self.mu:
            raise ValueError("reference simplex has an edge longer than mu")
        if not (0 < self.kappa < 1):
            raise ValueError("kappa must lie in (0, 1)")
        object.__setattr__(self, "reference", ref.vertices)

    @property
    def dim(self):
        return self.n * (self.n + 1)

    @property
    def alpha(self):
        return 1.0

    ell_source = "empirical"

    @cached_property
    def ell(self):
        return self._empirical_ell(count=60, near=300)

    @property
    def ref_matrix(self) -> np.ndarray:
        return np.asarray(self.reference)

    @staticmethod
    def chart_radius(v) -> float:
        v = np.asarray(v, dtype=float)
        d = v[:, :, None] - v[:, None, :]
        dist = np.sqrt(np.sum(d * d, axis=0))
        return float(np.min(dist[np.triu_indices(v.shape[1], 1)])) / 3.0

    def flat(self, v) -> np.ndarray:
        return np.asarray(v, dtype=float).T.ravel()

    def unflat(self, h) -> np.ndarray:
        return np.asarray(h, dtype=float).reshape(self.n + 1, self.n).T

    def default_chart(self) -> tuple:
        return tuple(self.flat(self.ref_matrix))

    def _chart_matrix(self, chart):
        return self.ref_matrix if chart is None else self.unflat(chart)

    def in_chart_image(self, h, chart=None):
        v = self.unflat(h)
        T = self._chart_matrix(chart)
        if geometry.triangle_norm(v - T) >= self.chart_radius(T):
            return False
        d = v[:, :, None] - v[:, None, :]
        if np.max(np.sqrt(np.sum(d * d, axis=0))) >= self.mu:
            return False
        return SimplexIndicator.volume_of(v) > 0

    def point(self, h, chart=None):
        chart = self.default_chart() if chart is None else chart
        return super().point(h, chart)

    def _coords(self, x):
        if isinstance(x, ModelPoint):
            return super()._coords(x)
        return np.asarray(x, dtype=float).ravel()

    def embed(self, x):
        h = self._coords(x)
        chart = x.chart if isinstance(x, ModelPoint) else None
        if not self.in_chart_image(h, chart):
            raise ValueError("vertices outside the chart image")
        return SimplexIndicator(self.unflat(h))

    def chart_coords(self, f, chart=None):
        """Coordinates of ``f`` in the chart of ``chart`` (its own sorted chart by default)."""
        if not isinstance(f, SimplexIndicator) or f.n != self.n or f.intensity != 1.0:
            raise ValueError("not a unit simplex of this family")
        v = f.matrix
        if chart is None:
            srt = geometry.SimplexParams(v).sorted().matrix
            return ModelPoint(self.tag, self.flat(srt), self.flat(srt))
        T = self.unflat(chart)
        order = []
        for j in range(T.shape[1]):
            dist = np.linalg.norm(v - T[:, j : j + 1], axis=0)
            order.append(int(np.argmin(dist)))
        if len(set(order)) != len(order):
            raise ValueError("simplex is not in the chart domain")
        return self.point(self.flat(v[:, order]), chart)

    def chart_distance(self, h1, h2):
        return geometry.triangle_norm(self.unflat(self._coords(h1)) - self.unflat(self._coords(h2)))

    def ambient_distance(self, x, y, p=None):
        p = self.p if p is None else p
        v1 = self.unflat(self._coords(x))
        v2 = self.unflat(self._coords(y))
        if self.n == 2:
            return geometry.simplex_lp_distance(v1, v2, p)
        meas = geometry.simplex_symmdiff(v1, v2, self.n, samples=self.mc_samples)
        return meas ** (1.0 / p)

    def ambient_modulus(self, d):
        # the triangle norm is bounded by the Euclidean norm of the stacked vertices
        return geometry.simplex_lipschitz_constant(self.n, self.mu) * d

    def compact_spec(self, chart=None):
        T = self._chart_matrix(chart)
        RT = self.chart_radius(T)
        rad = self.kappa * RT
        flatT = self.flat(T)
        lo = flatT - rad
        hi = flatT + rad
        unflat = self.unflat
        flat = self.flat

        def constraint(h, tol):
            return geometry.triangle_norm(unflat(h) - T) <= rad + tol

        def projector(h):
            v = unflat(np.clip(h, lo, hi))
            cols = [_project_ball(v[:, j], T[:, j], rad) for j in range(T.shape[1])]
            return flat(np.stack(cols, axis=1))

        return CompactSetSpec(
            self.tag, lo, hi, margin=(1 - self.kappa) * RT, delta_KM=(1 - self.kappa) * RT / 2,
            delta_source="cap: half the margin of K", anchor=tuple(flatT),
            constraint=constraint, projector=projector,
        )

    def describe(self):
        return {"tag": self.tag, "n": self.n, "mu": self.mu, "kappa": self.kappa,
                "reference": [list(r) for r in self.reference]}


# ---------------------------------------------------------------- helpers

_FAMILIES = {
    "interval": IntervalFamily,
    "ball": BallFamily,
    "ball_intensity": BallIntensityFamily,
    "gaussian": GaussianFamily,
    "simplex": SimplexFamily,
}


def make_family(tag: str, **params) -> ManifoldFamily:
    """Construct a family from its tag and keyword parameters."""
    try:
        cls = _FAMILIES[tag]
    except KeyError:
        raise ValueError(f"unknown family {tag!r}; choose from {sorted(_FAMILIES)}") from None
    if "reference" in params and params["reference"] is not None:
        params["reference"] = tuple(tuple(float(x) for x in row) for row in params["reference"])
    return cls(**{k: v for k, v in params.items() if v is not None})


def holder_data(family: ManifoldFamily) -> tuple:
    """``(alpha, ell)`` of ``family``."""
    return family.alpha, family.ell


def ambient_distance(family: ManifoldFamily, x, y, p=None) -> float:
    """``|| embed(x) - embed(y) ||_p`` computed from the family's closed forms."""
    for z in (x, y):
        if isinstance(z, ModelPoint) and z.family != family.tag:
            raise ValueError("points belong to a different family")
    return family.ambient_distance(x, y, p)

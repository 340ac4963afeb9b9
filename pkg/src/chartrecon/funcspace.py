"""Function representations on ``[0, 1]`` and ``R^n``.

Every representation is an immutable value object.  Closed-form kinds carry
exact :math:`L^p` norms and exact Fourier coefficients; the remaining kinds
fall back to composite Gauss-Legendre quadrature split at the breakpoints of
the representation.

Boundary convention: interval indicators are left-closed ``[a, b)`` and ball
indicators include their boundary.  Both choices are measure-zero and only
matter for pointwise evaluation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special

__all__ = [
    "Domain",
    "UNIT_INTERVAL",
    "euclidean",
    "FunctionRep",
    "IntervalIndicator",
    "PiecewiseLinear",
    "SampledGrid",
    "TrigPolynomial",
    "Modulated",
    "Combination",
    "BallIndicator",
    "GaussianBump",
    "GaussianDirectional",
    "SimplexIndicator",
    "as_piecewise",
    "evaluate",
    "lp_norm",
    "lp_distance",
    "fourier_coefficients",
    "half_coefficients",
    "half_lattice",
    "torus_coefficients",
    "gauss_legendre_panels",
    "unit_ball_volume",
]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def unit_ball_volume(n: int) -> float:
    """Lebesgue measure of the unit ball in ``R^n`` (``n = 0`` gives 1)."""
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def gauss_legendre_panels(edges, max_width: float, order: int = 16):
    """Composite Gauss-Legendre rule on the partition given by ``edges``.

    Each cell ``[edges[i], edges[i+1]]`` is split into equal panels no wider
    than ``max_width``.

    :arg edges: sorted break points; zero-width cells are skipped.
    :arg max_width: largest panel width.
    :arg order: nodes per panel.
    :returns: ``(nodes, weights)`` as flat arrays.
    """
    if order == 16:
        gx, gw = _GL_X, _GL_W
    else:
        gx, gw = np.polynomial.legendre.leggauss(order)
    edges = np.asarray(edges, dtype=float)
    lo, hi = edges[:-1], edges[1:]
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    counts = np.maximum(1, np.ceil((hi - lo) / max_width).astype(int))
    starts = np.repeat(lo, counts)
    widths = np.repeat((hi - lo) / counts, counts)
    offsets = np.concatenate([np.arange(c) for c in counts]) if len(counts) else np.zeros(0)
    a = starts + offsets * widths
    half = 0.5 * widths
    nodes = (a + half)[:, None] + half[:, None] * gx[None, :]
    weights = half[:, None] * gw[None, :]
    return nodes.ravel(), weights.ravel()


@dataclass(frozen=True)
class Domain:
    """Either the unit interval or a Euclidean space ``R^dim``."""

    kind: str
    dim: int = 1

    def __post_init__(self):
        if self.kind not in ("interval", "euclidean"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.dim < 1 or (self.kind == "interval" and self.dim != 1):
            raise ValueError("invalid domain dimension")


UNIT_INTERVAL = Domain("interval", 1)


def euclidean(n: int) -> Domain:
    return Domain("euclidean", int(n))


def _check_p(p) -> float:
    p = float(p)
    if math.isnan(p) or p < 1:
        raise ValueError(f"L^p exponent must be >= 1, got {p}")
    return p


class FunctionRep:
    """Base class of all representations.

    Subclasses provide ``domain``, ``_eval`` and optionally the closed-form
    hooks ``_exact_lp`` and ``_half_coefficients``.
    """

    domain: Domain

    def __call__(self, t):
        return evaluate(self, t)

    # closed-form hooks; ``None`` means "not available"
    def _exact_lp(self, p: float):
        return None

    def _half_coefficients(self, K: int):
        return None

    def breakpoints(self) -> np.ndarray:
        return np.array([0.0, 1.0])

    def support_box(self):
        raise NotImplementedError

    def __add__(self, other):
        return combine([(1.0, self), (1.0, other)])

    def __sub__(self, other):
        return combine([(1.0, self), (-1.0, other)])

    def __mul__(self, s):
        if not np.isscalar(s):
            return NotImplemented
        return combine([(float(s), self)])

    __rmul__ = __mul__

    def __neg__(self):
        return combine([(-1.0, self)])


# ---------------------------------------------------------------- unit interval


@dataclass(frozen=True, eq=True)
class IntervalIndicator(FunctionRep):
    """``intensity * chi_[a, b)`` on the unit interval."""

    a: float
    b: float
    intensity: float = 1.0
    domain: Domain = field(default=UNIT_INTERVAL, init=False, repr=False)

    def __post_init__(self):
        if not (0.0 <= self.a < self.b <= 1.0):
            raise ValueError(f"need 0 <= a < b <= 1, got a={self.a}, b={self.b}")
        if not self.intensity > 0:
            raise ValueError("intensity must be positive")

    def _eval(self, t):
        return np.where((t >= self.a) & (t < self.b), self.intensity, 0.0)

    def breakpoints(self):
        return np.array([0.0, self.a, self.b, 1.0])

    def as_piecewise(self) -> "PiecewiseLinear":
        return PiecewiseLinear((self.a, self.b), (0.0,), (self.intensity,))

    def _exact_lp(self, p):
        if math.isinf(p):
            return self.intensity
        return self.intensity * (self.b - self.a) ** (1.0 / p)

    def _half_coefficients(self, K):
        k = np.arange(K + 1)
        w = 2.0 * np.pi * k
        out = np.empty(K + 1, dtype=complex)
        out[0] = self.b - self.a
        wk = w[1:]
        out[1:] = (np.exp(-1j * wk * self.a) - np.exp(-1j * wk * self.b)) / (1j * wk)
        return self.intensity * out


@dataclass(frozen=True, eq=False)
class PiecewiseLinear(FunctionRep):
    """``slopes[j] * t + offsets[j]`` on ``[x_j, x_{j+1})``, zero elsewhere.

    The right end point of the last piece is included when it equals 1 so that
    ``F(chi_[0,1])(1) == 1``.
    """

    breakpoints_: tuple
    slopes: tuple
    offsets: tuple
    domain: Domain = field(default=UNIT_INTERVAL, init=False, repr=False)

    def __init__(self, breakpoints: Sequence[float], slopes: Sequence[float], offsets: Sequence[float]):
        bp = tuple(float(x) for x in breakpoints)
        sl = tuple(float(x) for x in slopes)
        of = tuple(float(x) for x in offsets)
        if len(bp) < 2 or len(sl) != len(bp) - 1 or len(of) != len(bp) - 1:
            raise ValueError("need len(slopes) == len(offsets) == len(breakpoints) - 1 >= 1")
        arr = np.asarray(bp)
        if np.any(np.diff(arr) <= 0) or arr[0] < 0.0 or arr[-1] > 1.0:
            raise ValueError("breakpoints must be strictly increasing within [0, 1]")
        object.__setattr__(self, "breakpoints_", bp)
        object.__setattr__(self, "slopes", sl)
        object.__setattr__(self, "offsets", of)
        object.__setattr__(self, "domain", UNIT_INTERVAL)

    def __repr__(self):
        return f"PiecewiseLinear(breakpoints={self.breakpoints_}, slopes={self.slopes}, offsets={self.offsets})"

    def __eq__(self, other):
        return (
            isinstance(other, PiecewiseLinear)
            and self.breakpoints_ == other.breakpoints_
            and self.slopes == other.slopes
            and self.offsets == other.offsets
        )

    def __hash__(self):
        return hash((self.breakpoints_, self.slopes, self.offsets))

    def breakpoints(self):
        return np.unique(np.concatenate([[0.0, 1.0], self.breakpoints_]))

    def as_piecewise(self):
        return self

    def _eval(self, t):
        bp = np.asarray(self.breakpoints_)
        sl = np.asarray(self.slopes)
        of = np.asarray(self.offsets)
        idx = np.searchsorted(bp, t, side="right") - 1
        if bp[-1] == 1.0:
            idx = np.where(t == 1.0, len(sl) - 1, idx)
        inside = (idx >= 0) & (idx < len(sl))
        j = np.clip(idx, 0, len(sl) - 1)
        return np.where(inside, sl[j] * t + of[j], 0.0)

    def pieces(self):
        """Iterate over ``(x0, x1, slope, offset)``."""
        bp = self.breakpoints_
        for j in range(len(self.slopes)):
            yield bp[j], bp[j + 1], self.slopes[j], self.offsets[j]

    def scaled(self, s: float) -> "PiecewiseLinear":
        return PiecewiseLinear(self.breakpoints_, [s * x for x in self.slopes], [s * x for x in self.offsets])

    def _exact_lp(self, p):
        if math.isinf(p):
            vals = [0.0]
            for x0, x1, al, be in self.pieces():
                vals += [abs(al * x0 + be), abs(al * x1 + be)]
            return max(vals)
        total = 0.0
        for x0, x1, al, be in self.pieces():
            total += _linear_piece_lp(x0, x1, al, be, p)
        return total ** (1.0 / p)

    def _half_coefficients(self, K):
        bp = np.asarray(self.breakpoints_)
        x0, x1 = bp[:-1], bp[1:]
        al = np.asarray(self.slopes)
        be = np.asarray(self.offsets)
        out = np.empty(K + 1, dtype=complex)
        out[0] = np.sum(0.5 * al * (x1 * x1 - x0 * x0) + be * (x1 - x0))
        if K:
            w = 2.0 * np.pi * np.arange(1, K + 1)[:, None]

            def prim(x):
                # antiderivative of (al t + be) e^{-i w t}
                return np.exp(-1j * w * x) * (1j * (al * x + be) / w + al / (w * w))

            out[1:] = np.sum(prim(x1) - prim(x0), axis=1)
        return out


def _linear_piece_lp(x0, x1, al, be, p):
    """Exact ``int_{x0}^{x1} |al t + be|^p dt``."""
    if x1 <= x0:
        return 0.0
    g0, g1 = al * x0 + be, al * x1 + be
    if al == 0.0:
        return abs(be) ** p * (x1 - x0)
    root = -be / al
    if x0 < root < x1:
        return _linear_piece_lp(x0, root, al, be, p) + _linear_piece_lp(root, x1, al, be, p)
    scale = max(abs(g0), abs(g1))
    if abs(al) * (x1 - x0) > 1e-3 * scale:
        return abs(abs(g1) ** (p + 1) - abs(g0) ** (p + 1)) / (abs(al) * (p + 1))
    # nearly constant piece: the closed form cancels, quadrature is exact enough
    half = 0.5 * (x1 - x0)
    t = x0 + half * (1.0 + _GL_X)
    return half * float(np.sum(_GL_W * np.abs(al * t + be) ** p))


@dataclass(frozen=True, eq=False)
class SampledGrid(FunctionRep):
    """Linear interpolant of ``values`` on a uniform grid over ``[lo, hi]``."""

    values: np.ndarray
    lo: float = 0.0
    hi: float = 1.0
    domain: Domain = field(default=UNIT_INTERVAL, init=False, repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("SampledGrid needs at least two samples")
        if not (0.0 <= self.lo < self.hi <= 1.0):
            raise ValueError("grid must lie in [0, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def nodes(self):
        return np.linspace(self.lo, self.hi, self.values.size)

    def as_piecewise(self) -> PiecewiseLinear:
        x = self.nodes
        v = self.values
        sl = np.diff(v) / np.diff(x)
        of = v[:-1] - sl * x[:-1]
        return PiecewiseLinear(x, sl, of)

    def breakpoints(self):
        return np.unique(np.concatenate([[0.0, 1.0], self.nodes]))

    def _eval(self, t):
        inside = (t >= self.lo) & (t <= self.hi)
        return np.where(inside, np.interp(t, self.nodes, self.values), 0.0)

    def _exact_lp(self, p):
        return self.as_piecewise()._exact_lp(p)

    def _half_coefficients(self, K):
        return self.as_piecewise()._half_coefficients(K)


@dataclass(frozen=True, eq=False)
class TrigPolynomial(FunctionRep):
    """Real trigonometric polynomial ``c_0 + 2 Re sum_{k>=1} c_k e^{2 pi i k t}``.

    :arg coeffs: complex coefficients for ``k = 0..K``; ``c_0`` must be real.
    """

    coeffs: np.ndarray
    domain: Domain = field(default=UNIT_INTERVAL, init=False, repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex).ravel()
        if c.size == 0:
            raise ValueError("empty coefficient vector")
        c[0] = c[0].real
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def _eval(self, t):
        t = np.asarray(t, dtype=float)
        k = np.arange(1, self.coeffs.size)
        if k.size == 0:
            return np.full(t.shape, self.coeffs[0].real)
        ph = 2.0 * np.pi * np.multiply.outer(t, k)
        c = self.coeffs[1:]
        return self.coeffs[0].real + 2.0 * (np.cos(ph) @ c.real - np.sin(ph) @ c.imag)

    def breakpoints(self):
        return np.array([0.0, 1.0])

    def _exact_lp(self, p):
        if p == 2.0:
            c = self.coeffs
            return math.sqrt(c[0].real ** 2 + 2.0 * float(np.sum(np.abs(c[1:]) ** 2)))
        return None

    def _half_coefficients(self, K):
        out = np.zeros(K + 1, dtype=complex)
        m = min(K, self.degree) + 1
        out[:m] = self.coeffs[:m]
        return out

    def quad_width(self):
        return 1.0 / (4.0 * (self.degree + 1))


@dataclass(frozen=True, eq=False)
class Modulated(FunctionRep):
    """Pointwise product ``weight(t) * base(t)`` on the unit interval."""

    base: FunctionRep
    weight: Callable = field(repr=False)
    label: str = "g"
    domain: Domain = field(default=UNIT_INTERVAL, init=False, repr=False)

    def __post_init__(self):
        if self.base.domain != UNIT_INTERVAL:
            raise ValueError("Modulated is defined on the unit interval only")

    def breakpoints(self):
        return self.base.breakpoints()

    def _eval(self, t):
        return np.asarray(self.weight(t), dtype=float) * self.base._eval(t)


@dataclass(frozen=True, eq=False)
class Combination(FunctionRep):
    """Finite linear combination ``sum_i w_i f_i`` evaluated termwise."""

    terms: tuple
    domain: Domain = field(init=False, repr=False)

    def __post_init__(self):
        if not self.terms:
            raise ValueError("empty combination")
        doms = {f.domain for _, f in self.terms}
        if len(doms) != 1:
            raise ValueError("cannot combine functions on different domains")
        object.__setattr__(self, "domain", doms.pop())

    def breakpoints(self):
        return np.unique(np.concatenate([f.breakpoints() for _, f in self.terms]))

    def support_box(self):
        boxes = [f.support_box() for _, f in self.terms]
        lo = np.min([b[0] for b in boxes], axis=0)
        hi = np.max([b[1] for b in boxes], axis=0)
        return lo, hi

    def _eval(self, t):
        return sum(w * f._eval(t) for w, f in self.terms)

    def _half_coefficients(self, K):
        parts = []
        for w, f in self.terms:
            c = f._half_coefficients(K)
            if c is None:
                return None
            parts.append(w * c)
        return np.sum(parts, axis=0)

    def quad_width(self):
        widths = [f.quad_width() for _, f in self.terms if hasattr(f, "quad_width")]
        return min(widths) if widths else None


def combine(terms) -> FunctionRep:
    """Linear combination, simplified to ``PiecewiseLinear`` when possible."""
    terms = [(float(w), f) for w, f in terms]
    pls = [as_piecewise(f) for _, f in terms]
    if all(pl is not None for pl in pls):
        return _pl_combination([(w, pl) for (w, _), pl in zip(terms, pls)])
    flat = []
    for w, f in terms:
        if isinstance(f, Combination):
            flat.extend((w * v, g) for v, g in f.terms)
        else:
            flat.append((w, f))
    return Combination(tuple(flat))


def _pl_combination(terms) -> PiecewiseLinear:
    bp = np.unique(np.concatenate([np.asarray(pl.breakpoints_) for _, pl in terms]))
    mids = 0.5 * (bp[:-1] + bp[1:])
    slopes = np.zeros(mids.size)
    offsets = np.zeros(mids.size)
    for w, pl in terms:
        pbp = np.asarray(pl.breakpoints_)
        idx = np.searchsorted(pbp, mids, side="right") - 1
        inside = (idx >= 0) & (idx < len(pl.slopes))
        j = np.clip(idx, 0, len(pl.slopes) - 1)
        slopes = slopes + np.where(inside, w * np.asarray(pl.slopes)[j], 0.0)
        offsets = offsets + np.where(inside, w * np.asarray(pl.offsets)[j], 0.0)
    return PiecewiseLinear(bp, slopes, offsets)


def as_piecewise(f) -> PiecewiseLinear | None:
    """Exact ``PiecewiseLinear`` form of ``f`` or ``None``."""
    if isinstance(f, PiecewiseLinear):
        return f
    if isinstance(f, (IntervalIndicator, SampledGrid)):
        return f.as_piecewise()
    return None


# ---------------------------------------------------------------- Euclidean kinds


def _as_point(x) -> tuple:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise ValueError("centre must be a vector")
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class BallIndicator(FunctionRep):
    """``intensity * chi_B(centre, radius)`` in ``R^n`` (closed ball)."""

    centre: tuple
    radius: float
    intensity: float = 1.0
    domain: Domain = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "centre", _as_point(self.centre))
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if not self.intensity > 0:
            raise ValueError("intensity must be positive")
        object.__setattr__(self, "domain", euclidean(len(self.centre)))

    @property
    def n(self) -> int:
        return len(self.centre)

    @property
    def volume(self) -> float:
        return unit_ball_volume(self.n) * self.radius ** self.n

    def _eval(self, z):
        d2 = np.sum((z - np.asarray(self.centre)) ** 2, axis=-1)
        return np.where(d2 <= self.radius ** 2, self.intensity, 0.0)

    def support_box(self):
        c = np.asarray(self.centre)
        return c - self.radius, c + self.radius

    def _exact_lp(self, p):
        if math.isinf(p):
            return self.intensity
        return self.intensity * self.volume ** (1.0 / p)


@dataclass(frozen=True)
class GaussianBump(FunctionRep):
    """``z -> exp(-|z - centre|^2)`` in ``R^n``."""

    centre: tuple
    domain: Domain = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "centre", _as_point(self.centre))
        object.__setattr__(self, "domain", euclidean(len(self.centre)))

    @property
    def n(self) -> int:
        return len(self.centre)

    def _eval(self, z):
        return np.exp(-np.sum((z - np.asarray(self.centre)) ** 2, axis=-1))

    def support_box(self):
        c = np.asarray(self.centre)
        return c - 7.0, c + 7.0

    def _exact_lp(self, p):
        if math.isinf(p):
            return 1.0
        return (math.pi / p) ** (self.n / (2.0 * p))


@dataclass(frozen=True)
class GaussianDirectional(FunctionRep):
    """``z -> 2 exp(-|z - a|^2) <z - a, h>``, the chart derivative of ``G_a``."""

    centre: tuple
    direction: tuple
    domain: Domain = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "centre", _as_point(self.centre))
        object.__setattr__(self, "direction", _as_point(self.direction))
        if len(self.centre) != len(self.direction):
            raise ValueError("direction and centre differ in dimension")
        object.__setattr__(self, "domain", euclidean(len(self.centre)))

    @property
    def n(self) -> int:
        return len(self.centre)

    def _eval(self, z):
        y = z - np.asarray(self.centre)
        return 2.0 * np.exp(-np.sum(y * y, axis=-1)) * (y @ np.asarray(self.direction))

    def support_box(self):
        c = np.asarray(self.centre)
        return c - 7.0, c + 7.0

    def _exact_lp(self, p):
        s = float(np.linalg.norm(self.direction))
        if math.isinf(p):
            return 2.0 * s * math.exp(-0.5) / math.sqrt(2.0)
        # rotate h onto e_1; the transverse directions give plain Gaussians
        radial = math.gamma((p + 1) / 2) / p ** ((p + 1) / 2)
        transverse = (math.pi / p) ** ((self.n - 1) / 2)
        return 2.0 * s * (radial * transverse) ** (1.0 / p)


@dataclass(frozen=True)
class SimplexIndicator(FunctionRep):
    """``intensity * chi_T`` for the simplex with vertex columns ``vertices``."""

    vertices: tuple
    intensity: float = 1.0
    domain: Domain = field(init=False, repr=False)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != v.shape[0] + 1:
            raise ValueError("vertices must be an n x (n+1) matrix of columns")
        if self.volume_of(v) <= 0:
            raise ValueError("degenerate simplex")
        object.__setattr__(self, "vertices", tuple(tuple(float(x) for x in row) for row in v))
        object.__setattr__(self, "domain", euclidean(v.shape[0]))

    @staticmethod
    def volume_of(v) -> float:
        v = np.asarray(v, dtype=float)
        n = v.shape[0]
        return abs(np.linalg.det(v[:, 1:] - v[:, :1])) / math.factorial(n)

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.vertices)

    @property
    def n(self) -> int:
        return len(self.vertices)

    @property
    def volume(self) -> float:
        return self.volume_of(self.matrix)

    def _eval(self, z):
        v = self.matrix
        E = v[:, 1:] - v[:, :1]
        lam = np.linalg.solve(E, (z - v[:, 0]).reshape(-1, self.n).T).T
        lam = lam.reshape(np.shape(z)[:-1] + (self.n,))
        inside = np.all(lam >= 0, axis=-1) & (np.sum(lam, axis=-1) <= 1)
        return np.where(inside, self.intensity, 0.0)

    def support_box(self):
        v = self.matrix
        return v.min(axis=1), v.max(axis=1)

    def _exact_lp(self, p):
        if math.isinf(p):
            return self.intensity
        return self.intensity * self.volume ** (1.0 / p)


# ---------------------------------------------------------------- operations


def evaluate(f: FunctionRep, t):
    """Pointwise value of ``f``.

    :arg t: scalar or array in ``[0, 1]`` for interval functions; array of
        shape ``(..., n)`` for functions on ``R^n``.
    :raises ValueError: if ``t`` lies outside the domain.
    """
    arr = np.asarray(t, dtype=float)
    if f.domain.kind == "interval":
        if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ValueError("evaluation point outside [0, 1]")
        out = f._eval(arr)
    else:
        if arr.shape[-1:] != (f.domain.dim,) and not (f.domain.dim == 1 and arr.ndim == 0):
            raise ValueError(f"points must have trailing dimension {f.domain.dim}")
        if arr.ndim == 0:
            arr = arr.reshape(1)
        out = f._eval(arr)
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out


def _interval_quad(f: FunctionRep, integrand, extra_width=None):
    width = 1.0 / 64.0
    qw = getattr(f, "quad_width", None)
    if qw is not None and qw() is not None:
        width = min(width, qw())
    if extra_width is not None:
        width = min(width, extra_width)
    x, w = gauss_legendre_panels(f.breakpoints(), width)
    return float(np.sum(w * integrand(x)))


def _euclidean_quad(f: FunctionRep, integrand):
    lo, hi = f.support_box()
    n = len(lo)
    panels = {1: 64, 2: 24, 3: 8}.get(n)
    if panels is None:
        raise NotImplementedError("quadrature supported for n <= 3")
    axes = [gauss_legendre_panels([lo[i], hi[i]], (hi[i] - lo[i]) / panels) for i in range(n)]
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    wgrid = np.ones_like(grids[0])
    for i, (_, w) in enumerate(axes):
        shape = [1] * n
        shape[i] = -1
        wgrid = wgrid * w.reshape(shape)
    z = np.stack(grids, axis=-1)
    return float(np.sum(wgrid * integrand(z)))


def _smooth_euclidean(f) -> bool:
    kinds = (GaussianBump, GaussianDirectional)
    if isinstance(f, Combination):
        return all(isinstance(g, kinds) for _, g in f.terms)
    return isinstance(f, kinds)


def lp_norm(f: FunctionRep, p=1.0) -> float:
    """:math:`L^p` norm of ``f``; exact for closed-form kinds.

    :raises ValueError: for ``p < 1`` or ``p = inf`` on kinds without a
        closed-form supremum.
    """
    p = _check_p(p)
    exact = f._exact_lp(p)
    if exact is not None:
        return float(exact)
    if math.isinf(p):
        raise ValueError(f"p = inf is not supported for {type(f).__name__}")
    if f.domain.kind == "interval":
        val = _interval_quad(f, lambda x: np.abs(f._eval(x)) ** p)
    else:
        if not _smooth_euclidean(f):
            raise NotImplementedError("quadrature norms in R^n need smooth integrands; use lp_distance")
        val = _euclidean_quad(f, lambda z: np.abs(f._eval(z)) ** p)
    return val ** (1.0 / p)


def lp_distance(f: FunctionRep, g: FunctionRep, p=1.0) -> float:
    """:math:`L^p` distance of two representations on the same domain.

    Indicator pairs go through the symmetric-difference volumes of
    :mod:`chartrecon.geometry`; other pairs use exact piecewise arithmetic or
    quadrature.
    """
    from . import geometry

    p = _check_p(p)
    if f.domain != g.domain:
        raise ValueError("functions live on different domains")
    if isinstance(f, IntervalIndicator) and isinstance(g, IntervalIndicator):
        return geometry.indicator_lp_distance(
            geometry.BallParams(((f.a + f.b) / 2,), (f.b - f.a) / 2),
            geometry.BallParams(((g.a + g.b) / 2,), (g.b - g.a) / 2),
            p,
            f.intensity,
            g.intensity,
        )
    if isinstance(f, BallIndicator) and isinstance(g, BallIndicator):
        return geometry.indicator_lp_distance(
            geometry.BallParams(f.centre, f.radius),
            geometry.BallParams(g.centre, g.radius),
            p,
            f.intensity,
            g.intensity,
        )
    if isinstance(f, SimplexIndicator) and isinstance(g, SimplexIndicator) and f.n == 2:
        return geometry.simplex_lp_distance(f.matrix, g.matrix, p, f.intensity, g.intensity)
    if isinstance(f, GaussianBump) and isinstance(g, GaussianBump):
        d = float(np.linalg.norm(np.subtract(f.centre, g.centre)))
        return gaussian_distance(d, f.n, p)
    return lp_norm(combine([(1.0, f), (-1.0, g)]), p)


def gaussian_distance(d: float, n: int, p=1.0) -> float:
    """``||G_a - G_b||_p`` for ``|a - b| = d`` in ``R^n``.

    The difference factorises into a one-dimensional profile along ``a - b``
    times a plain Gaussian in the transverse directions.
    """
    from scipy import integrate

    p = _check_p(p)
    if d == 0.0:
        return 0.0
    if math.isinf(p):
        s = np.linspace(0.0, d / 2 + 6.0, 20001)
        c = d / 2
        return float(np.max(np.abs(np.exp(-(s - c) ** 2) - np.exp(-(s + c) ** 2))))
    if p == 1.0:
        return 2.0 * math.pi ** ((n - 1) / 2) * math.sqrt(math.pi) * math.erf(d / 2)
    if p == 2.0:
        return math.sqrt(2.0 * (math.pi / 2) ** (n / 2) * (1.0 - math.exp(-d * d / 2)))
    c = d / 2
    transverse = (math.pi / p) ** ((n - 1) / 2)

    def profile(s):
        # exp(-(s-c)^2) - exp(-(s+c)^2) written without cancellation
        return (-np.expm1(-4.0 * s * c) * np.exp(-(s - c) ** 2)) ** p

    val, _ = integrate.quad(profile, 0.0, c + 8.0, points=[c], epsabs=0.0, epsrel=1e-12, limit=200)
    return (2.0 * transverse * val) ** (1.0 / p)


def half_coefficients(f: FunctionRep, K: int) -> np.ndarray:
    """Fourier coefficients ``c_k`` of a real function for ``k = 0..K``."""
    K = int(K)
    if K < 0:
        raise ValueError("K must be nonnegative")
    if f.domain != UNIT_INTERVAL:
        raise ValueError("Fourier coefficients on [0, 1] need an interval function")
    c = f._half_coefficients(K)
    if c is not None:
        return np.asarray(c, dtype=complex)
    x, w = gauss_legendre_panels(f.breakpoints(), min(1.0 / 64.0, 1.0 / (2.0 * (K + 1))))
    vals = w * f._eval(x)
    k = np.arange(K + 1)
    out = np.exp(-2j * np.pi * np.multiply.outer(k, x)) @ vals
    out[0] = out[0].real
    return out


def fourier_coefficients(f: FunctionRep, K: int) -> np.ndarray:
    """Two-sided coefficients ``c_{-K..K}`` with ``c_k = int f e^{-2 pi i k t}``.

    Real inputs give ``c_{-k} = conj(c_k)`` by construction.
    """
    half = half_coefficients(f, K)
    return np.concatenate([np.conj(half[:0:-1]), half])


# ---------------------------------------------------------------- torus coefficients


def half_lattice(N: int, d: int) -> np.ndarray:
    """Frequencies ``k`` in ``{-N..N}^d`` with ``k = 0`` first, then ``k > 0``.

    ``k > 0`` means lexicographically positive, so every nonzero frequency
    appears either as ``k`` or as ``-k`` but not both.
    """
    if N < 0 or d < 1:
        raise ValueError("need N >= 0 and d >= 1")
    grids = np.meshgrid(*([np.arange(-N, N + 1)] * d), indexing="ij")
    ks = np.stack([g.ravel() for g in grids], axis=1)
    first = np.zeros(len(ks), dtype=int)
    for j in range(d - 1, -1, -1):
        nz = ks[:, j] != 0
        first = np.where(nz, ks[:, j], first)
    positive = ks[first > 0]
    return np.vstack([np.zeros((1, d), dtype=int), positive])


def _triangle_rule(order: int = 40):
    """Collapsed Gauss-Legendre rule on the reference triangle."""
    x, w = np.polynomial.legendre.leggauss(order)
    s = 0.5 * (x + 1.0)
    ws = 0.5 * w
    S, T = np.meshgrid(s, s, indexing="ij")
    WS, WT = np.meshgrid(ws, ws, indexing="ij")
    u = S.ravel()
    v = ((1.0 - S) * T).ravel()
    weight = (WS * WT * (1.0 - S)).ravel()
    return u, v, weight


_TRI_RULE = _triangle_rule()


def torus_coefficients(f: FunctionRep, N: int, with_gradient: bool = False):
    """Fourier coefficients of the 1-periodisation of ``f`` over ``half_lattice``.

    Closed forms cover balls (Bessel functions) and Gaussians; planar simplexes
    use a collapsed Gauss-Legendre rule on the reference triangle.

    :arg with_gradient: also return ``dc/dh`` for the natural parameters of the
        kind (centre then radius then intensity; vertex matrix in column order).
    """
    n = f.domain.dim
    ks = half_lattice(N, n).astype(float)
    if isinstance(f, BallIndicator):
        c = np.asarray(f.centre)
        r, lam = f.radius, f.intensity
        kn = np.linalg.norm(ks, axis=1)
        nz = kn > 0
        nu = n / 2.0
        S = np.empty(len(ks))
        dS = np.empty(len(ks))
        S[~nz] = unit_ball_volume(n) * r ** n
        dS[~nz] = n * unit_ball_volume(n) * r ** (n - 1)
        z = 2.0 * np.pi * r * kn[nz]
        S[nz] = r ** nu * kn[nz] ** (-nu) * special.jv(nu, z)
        dS[nz] = 2.0 * np.pi * r ** nu * kn[nz] ** (1.0 - nu) * special.jv(nu - 1.0, z)
        phase = np.exp(-2j * np.pi * (ks @ c))
        coeffs = lam * phase * S
        if not with_gradient:
            return coeffs
        grad = np.empty((len(ks), n + 2), dtype=complex)
        grad[:, :n] = (-2j * np.pi * ks) * coeffs[:, None]
        grad[:, n] = lam * phase * dS
        grad[:, n + 1] = phase * S
        return coeffs, grad
    if isinstance(f, GaussianBump):
        c = np.asarray(f.centre)
        k2 = np.sum(ks * ks, axis=1)
        coeffs = math.pi ** (n / 2) * np.exp(-(math.pi ** 2) * k2) * np.exp(-2j * np.pi * (ks @ c))
        if not with_gradient:
            return coeffs
        return coeffs, (-2j * np.pi * ks) * coeffs[:, None]
    if isinstance(f, SimplexIndicator):
        if n != 2:
            raise NotImplementedError("torus coefficients of simplexes need n = 2")
        v = f.matrix
        E = v[:, 1:] - v[:, :1]
        det = float(np.linalg.det(E))
        u, w_, wt = _TRI_RULE
        lam = np.stack([1.0 - u - w_, u, w_])  # barycentric weights of the nodes
        pts = v @ lam  # (2, Q)
        ph = np.exp(-2j * np.pi * (ks @ pts))  # (M, Q)
        coeffs = f.intensity * abs(det) * (ph @ wt)
        if not with_gradient:
            return coeffs
        # d/dv_{c,j}: area term from |det E| plus the moving integrand
        sgn = math.copysign(1.0, det)
        Einv_T = np.linalg.inv(E).T
        ddet = np.zeros((2, 3))
        ddet[:, 1:] = det * Einv_T
        ddet[:, 0] = -ddet[:, 1] - ddet[:, 2]
        grad = np.empty((len(ks), 6), dtype=complex)
        base = ph @ wt
        for j in range(3):
            lw = (ph * lam[j]) @ wt
            for ci in range(2):
                col = j * 2 + ci
                grad[:, col] = f.intensity * (
                    sgn * ddet[ci, j] * base + abs(det) * (-2j * np.pi * ks[:, ci]) * lw
                )
        return coeffs, grad
    raise NotImplementedError(f"no torus coefficients for {type(f).__name__}")

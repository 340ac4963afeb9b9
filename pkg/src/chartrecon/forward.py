"""Forward operators and their chart-composed differentials.

``Integration`` is the Volterra operator ``F(u)(t) = int_0^t u(s) ds`` on
``L^1(0, 1)``.  For interval indicators both ``F`` and the differential of
``F o phi^{-1}`` have closed forms; every other pairing falls back to central
finite differences of ``apply_forward o embed``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .funcspace import (
    UNIT_INTERVAL,
    Combination,
    FunctionRep,
    IntervalIndicator,
    Modulated,
    PiecewiseLinear,
    SampledGrid,
    as_piecewise,
    combine,
    gauss_legendre_panels,
    lp_norm,
)
from .manifolds import IntervalFamily, ManifoldFamily

__all__ = [
    "ForwardOp",
    "INTEGRATION",
    "IDENTITY",
    "multiplication",
    "periodic_exp_weight",
    "make_operator",
    "apply_forward",
    "chart_differential",
    "differential_continuity_modulus",
    "zero_function",
]


def periodic_exp_weight(t):
    """The 1-periodic weight ``g(t) = exp(-1 / frac(t))`` (zero at the integers)."""
    t = np.asarray(t, dtype=float)
    s = t - np.floor(t)
    with np.errstate(divide="ignore"):
        return np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)


@dataclass(frozen=True)
class ForwardOp:
    """A forward operator tag plus its weight for multiplication operators."""

    kind: str
    weight: Callable | None = field(default=None, compare=False, repr=False)
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("integration", "identity", "multiplication"):
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if self.kind == "multiplication" and self.weight is None:
            raise ValueError("multiplication needs a weight")

    def accepts(self, f: FunctionRep) -> bool:
        if self.kind == "identity":
            return True
        return f.domain == UNIT_INTERVAL


INTEGRATION = ForwardOp("integration", label="integration")
IDENTITY = ForwardOp("identity", label="identity")


def multiplication(weight: Callable = periodic_exp_weight, label: str = "exp(-1/t)") -> ForwardOp:
    return ForwardOp("multiplication", weight, label)


def make_operator(name: str) -> ForwardOp:
    """Operator from its config name."""
    if name == "integration":
        return INTEGRATION
    if name == "identity":
        return IDENTITY
    if name == "multiplication":
        return multiplication()
    raise ValueError(f"unknown operator {name!r}")


def zero_function(domain_of: FunctionRep) -> FunctionRep:
    if domain_of.domain == UNIT_INTERVAL:
        return PiecewiseLinear((0.0, 1.0), (0.0,), (0.0,))
    return Combination(((0.0, domain_of),))


def _integrate_indicator(f: IntervalIndicator) -> PiecewiseLinear:
    lam, a, b = f.intensity, f.a, f.b
    bp, sl, of = [], [], []
    if a > 0.0:
        bp.append(0.0)
        sl.append(0.0)
        of.append(0.0)
    bp.append(a)
    sl.append(lam)
    of.append(-lam * a)
    if b < 1.0:
        bp.append(b)
        sl.append(0.0)
        of.append(lam * (b - a))
    bp.append(1.0)
    return PiecewiseLinear(bp, sl, of)


def _integrate_step(pl: PiecewiseLinear) -> PiecewiseLinear:
    """Exact antiderivative of a piecewise constant function."""
    bp = list(pl.breakpoints_)
    vals = list(pl.offsets)
    if bp[0] > 0.0:
        bp.insert(0, 0.0)
        vals.insert(0, 0.0)
    if bp[-1] < 1.0:
        bp.append(1.0)
        vals.append(0.0)
    slopes, offsets = [], []
    acc = 0.0
    for j, c in enumerate(vals):
        x0, x1 = bp[j], bp[j + 1]
        slopes.append(c)
        offsets.append(acc - c * x0)
        acc += c * (x1 - x0)
    return PiecewiseLinear(bp, slopes, offsets)


def _integrate_sampled(f: FunctionRep, nodes: int = 4097) -> SampledGrid:
    grid = np.linspace(0.0, 1.0, nodes)
    edges = np.unique(np.concatenate([grid, f.breakpoints()]))
    x, w = gauss_legendre_panels(edges, 1.0)
    cell = np.add.reduceat(w * f._eval(x), np.arange(0, x.size, 16))
    cum = np.concatenate([[0.0], np.cumsum(cell)])
    idx = np.searchsorted(edges, grid)
    return SampledGrid(cum[idx])


def apply_forward(op: ForwardOp, f: FunctionRep) -> FunctionRep:
    """``F(f)`` for the operator ``op``."""
    if not op.accepts(f):
        raise ValueError(f"{op.kind} acts on functions on [0, 1]")
    if op.kind == "identity":
        return f
    if op.kind == "multiplication":
        return Modulated(f, op.weight, op.label)
    if isinstance(f, IntervalIndicator):
        return _integrate_indicator(f)
    pl = as_piecewise(f)
    if pl is not None and all(s == 0.0 for s in pl.slopes):
        return _integrate_step(pl)
    return _integrate_sampled(f)


def _direction(family: ManifoldFamily, direction) -> np.ndarray:
    d = np.asarray(direction, dtype=float).ravel()
    if d.size != family.dim:
        raise ValueError(f"direction must have {family.dim} entries")
    return d


def chart_differential(op: ForwardOp, family: ManifoldFamily, h, direction, chart=None) -> FunctionRep:
    """``(F o phi^{-1})'(h)[direction]``.

    Closed form for integration on intervals,
    ``h_2 chi_[b,1] - h_1 chi_[a,1]``; otherwise central differences with step
    ``1e-6 (1 + |h|)``.
    """
    h = np.asarray(family._coords(h), dtype=float)
    if not family.in_chart_image(h, chart):
        raise ValueError("h outside the chart image")
    d = _direction(family, direction)
    if op.kind == "integration" and isinstance(family, IntervalFamily):
        a, b = h
        return PiecewiseLinear((a, b, 1.0), (0.0, 0.0), (-d[0], d[1] - d[0]))
    base = family.embed(family.point(h, chart) if chart is not None else h)
    if not np.any(d):
        return zero_function(apply_forward(op, base))
    step = 1e-6 * (1.0 + float(np.linalg.norm(h)))
    if step * float(np.max(np.abs(d))) == 0.0:
        raise ValueError("finite-difference step underflows")
    hp, hm = h + step * d, h - step * d
    if not (family.in_chart_image(hp, chart) and family.in_chart_image(hm, chart)):
        raise ValueError("finite-difference stencil leaves the chart image")
    fp = apply_forward(op, family.embed(family.point(hp, chart) if chart is not None else hp))
    fm = apply_forward(op, family.embed(family.point(hm, chart) if chart is not None else hm))
    return combine([(0.5 / step, fp), (-0.5 / step, fm)])


def differential_continuity_modulus(family: IntervalFamily, h1, h2, directions: int = 360) -> float:
    """``sup_{|u| = 1} || dF_{h1} u - dF_{h2} u ||_{L^1}`` by a direction sweep.

    The sweep samples ``directions`` equally spaced unit vectors, so the
    result is a lower bound on the operator norm.
    """
    if not isinstance(family, IntervalFamily):
        raise ValueError("the continuity modulus is implemented for the interval family")
    best = 0.0
    for th in np.arange(directions) * (2.0 * math.pi / directions):
        u = (math.cos(th), math.sin(th))
        g1 = chart_differential(INTEGRATION, family, h1, u)
        g2 = chart_differential(INTEGRATION, family, h2, u)
        best = max(best, lp_norm(combine([(1.0, g1), (-1.0, g2)]), 1.0))
    return best

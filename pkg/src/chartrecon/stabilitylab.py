"""Empirical stability constants, Hoelder exponents and instability witnesses.

Stability constants are suprema over finite pair samples and therefore lower
estimates of the true constants.  Exponents come from log-log regressions over
near pairs, where the differential regime dominates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy import integrate

from .forward import ForwardOp, apply_forward, periodic_exp_weight
from .funcspace import combine, lp_norm
from .manifolds import CompactSetSpec, ManifoldFamily, sample_compact
from .measurement import deficit_curve, measured_forward

__all__ = [
    "StabilityReport",
    "PairSample",
    "sample_pairs",
    "forward_distance",
    "empirical_stability",
    "projected_stability",
    "lipschitz_estimate",
    "NScan",
    "GridExhausted",
    "find_sufficient_N",
    "sin_example_derivative",
    "counterexample_sin",
    "counterexample_weight",
    "weight_ratio_bound",
    "weight_numerator_closed_form",
]


@dataclass
class PairSample:
    """Chart-coordinate pairs with their chart distances."""

    first: np.ndarray
    second: np.ndarray
    chart_distance: np.ndarray
    near: np.ndarray
    seed: int
    near_cutoff: float

    def __len__(self):
        return len(self.chart_distance)


@dataclass
class StabilityReport:
    """Summary of one stability run.

    ``C_hat`` is the supremum of ``||x - y||_X / ||F x - F y||_Y^alpha`` over
    the sample (a lower estimate of the constant); ``alpha_hat`` is the
    near-pair slope of ``log ||F x - F y||_Y`` against ``log |h_x - h_y|``.
    """

    family: str
    op: str
    p: float
    y_norm: str
    N: int | None
    pairs: int
    seed: int
    alpha: float
    C_hat: float
    C_p99: float
    alpha_hat: float
    near_fraction: float
    family_params: dict = field(default_factory=dict)
    box: dict = field(default_factory=dict)
    sample: PairSample | None = field(default=None, repr=False)
    ratios: np.ndarray | None = field(default=None, repr=False)

    @property
    def stable(self) -> bool:
        return bool(np.isfinite(self.C_hat))

    def as_dict(self) -> dict:
        return {
            "family": self.family,
            "op": self.op,
            "p": self.p,
            "y_norm": self.y_norm,
            "N": "inf" if self.N is None else self.N,
            "pairs": self.pairs,
            "seed": self.seed,
            "alpha": self.alpha,
            "C_hat": self.C_hat if np.isfinite(self.C_hat) else "inf",
            "C_p99": self.C_p99 if np.isfinite(self.C_p99) else "inf",
            "alpha_hat": self.alpha_hat,
            "near_fraction": self.near_fraction,
            "family_params": self.family_params,
            "box": self.box,
            "C_label": "lower estimate (sup over sampled pairs)",
        }


def sample_pairs(
    family: ManifoldFamily,
    spec: CompactSetSpec,
    pairs: int,
    seed: int = 0,
    near_fraction: float = 0.5,
    near_cutoff: float = 1e-2,
    near_min: float = 1e-5,
) -> PairSample:
    """Mix of far pairs (two sample points of ``K``) and near pairs.

    Near pairs are a sample point plus a random chart-norm perturbation with
    log-uniform length in ``[near_min, near_cutoff)``.
    """
    pairs = int(pairs)
    if pairs < 1:
        raise ValueError("need at least one pair")
    rng = np.random.default_rng(seed)
    n_near = int(round(near_fraction * pairs))
    n_far = pairs - n_near
    base = np.array([x.h for x in sample_compact(spec, max(64, min(pairs, 2000)), seed)])
    first, second = [], []
    while len(first) < n_far:
        i, j = rng.integers(len(base), size=2)
        if i != j:
            first.append(base[i])
            second.append(base[j])
    while len(first) < pairs:
        h = base[rng.integers(len(base))]
        u = rng.normal(size=family.dim)
        u /= family.chart_distance(u, np.zeros_like(u))
        g = h + 10.0 ** rng.uniform(math.log10(near_min), math.log10(near_cutoff)) * u
        if spec.contains(g, tol=0.0):
            first.append(h)
            second.append(g)
    first, second = np.array(first), np.array(second)
    dist = np.array([family.chart_distance(a, b) for a, b in zip(first, second)])
    return PairSample(first, second, dist, dist < near_cutoff, seed, near_cutoff)


def forward_distance(op: ForwardOp, family: ManifoldFamily, h1, h2, p: float, chart=None) -> float:
    """``|| F(phi^{-1} h1) - F(phi^{-1} h2) ||_{L^p}``."""
    if op.kind == "identity":
        return family.ambient_distance(h1, h2, p)
    f1 = apply_forward(op, family.embed(family.point(h1, chart)))
    f2 = apply_forward(op, family.embed(family.point(h2, chart)))
    return lp_norm(combine([(1.0, f1), (-1.0, f2)]), p)


def _summarise(family, op, spec, p, y_norm, N, sample, alpha, x_dist, y_dist, pairs, seed):
    x_dist = np.asarray(x_dist)
    y_dist = np.asarray(y_dist)
    if np.all(x_dist == 0):
        raise ValueError("degenerate sampling: all pairs coincide")
    keep = x_dist > 0
    with np.errstate(divide="ignore"):
        ratios = np.where(y_dist[keep] > 0, x_dist[keep] / y_dist[keep] ** alpha, np.inf)
    C_hat = float(np.max(ratios))
    C_p99 = float(np.percentile(np.sort(ratios), 99)) if np.all(np.isfinite(ratios)) else float(np.inf)
    near = sample.near & keep & (y_dist > 0)
    if np.count_nonzero(near) >= 2:
        slope = np.polyfit(np.log(sample.chart_distance[near]), np.log(y_dist[near]), 1)[0]
    else:
        slope = float("nan")
    return StabilityReport(
        family=family.tag,
        op=op.kind,
        p=float(p),
        y_norm=y_norm,
        N=N,
        pairs=pairs,
        seed=seed,
        alpha=float(alpha),
        C_hat=C_hat,
        C_p99=C_p99,
        alpha_hat=float(slope),
        near_fraction=float(np.mean(sample.near)),
        family_params=family.describe(),
        box=spec.as_dict(),
        sample=sample,
        ratios=ratios,
    )


def empirical_stability(
    family: ManifoldFamily,
    op: ForwardOp,
    spec: CompactSetSpec,
    p: float | None = None,
    alpha: float | None = None,
    pairs: int = 10_000,
    seed: int = 0,
    y_p: float | None = None,
    near_cutoff: float = 1e-2,
) -> StabilityReport:
    """Stability of the unprojected map ``F`` on ``K``.

    :arg p: exponent of ``X = L^p`` (defaults to the family's).
    :arg alpha: exponent in the estimate (defaults to the family's).
    :arg y_p: exponent of ``Y = L^{y_p}``; defaults to ``p``.
    """
    if pairs < 100:
        raise ValueError("use at least 100 pairs")
    p = family.p if p is None else float(p)
    y_p = p if y_p is None else float(y_p)
    alpha = family.alpha if alpha is None else float(alpha)
    sample = sample_pairs(family, spec, pairs, seed, near_cutoff=near_cutoff)
    xd = [family.ambient_distance(a, b, p) for a, b in zip(sample.first, sample.second)]
    yd = [forward_distance(op, family, a, b, y_p) for a, b in zip(sample.first, sample.second)]
    return _summarise(family, op, spec, p, f"L^{y_p:g}", None, sample, alpha, xd, yd, pairs, seed)


def projected_stability(
    family: ManifoldFamily,
    op: ForwardOp,
    spec: CompactSetSpec,
    N,
    alpha: float | None = None,
    pairs: int = 10_000,
    seed: int = 0,
    p: float | None = None,
    near_cutoff: float = 1e-2,
):
    """Stability of ``Q_N F`` with the Parseval norm on measurements.

    ``N`` may be an integer or a sequence; a sequence returns one report per
    entry, all on the same pair sample.
    """
    if pairs < 100:
        raise ValueError("use at least 100 pairs")
    p = family.p if p is None else float(p)
    alpha = family.alpha if alpha is None else float(alpha)
    sample = sample_pairs(family, spec, pairs, seed, near_cutoff=near_cutoff)
    xd = [family.ambient_distance(a, b, p) for a, b in zip(sample.first, sample.second)]
    grid = [int(N)] if np.isscalar(N) else [int(n) for n in N]
    reports = []
    for n in grid:
        cache = {}

        def meas(h):
            key = h.tobytes()
            if key not in cache:
                cache[key] = measured_forward(op, family, h, n).coeffs
            return cache[key]

        yd = [float(np.linalg.norm(meas(a) - meas(b))) for a, b in zip(sample.first, sample.second)]
        reports.append(_summarise(family, op, spec, p, "Parseval L^2", n, sample, alpha, xd, yd, pairs, seed))
    return reports[0] if np.isscalar(N) else reports


def lipschitz_estimate(family: ManifoldFamily, op: ForwardOp, spec: CompactSetSpec, N: int, pairs: int = 10_000, seed: int = 0) -> float:
    """``sup ||Q_N F x - Q_N F y|| / ||x - y||_X`` over a pair sample.

    This is the product ``L_{F,K} ||Q_N||`` as it enters the lattice radius.
    """
    sample = sample_pairs(family, spec, pairs, seed)
    best = 0.0
    for a, b in zip(sample.first, sample.second):
        dx = family.ambient_distance(a, b)
        if dx > 0:
            dm = measured_forward(op, family, a, N).coeffs - measured_forward(op, family, b, N).coeffs
            best = max(best, float(np.linalg.norm(dm)) / dx)
    return best


# ---------------------------------------------------------------- N selection


@dataclass
class NScan:
    N_star: int
    threshold: float
    grid: list
    curve: list

    def as_dict(self) -> dict:
        return {"N_star": self.N_star, "threshold": self.threshold, "grid": self.grid, "deficits": self.curve}


class GridExhausted(ValueError):
    """No grid value of ``N`` met the deficit threshold."""

    def __init__(self, threshold, grid, curve):
        self.threshold = threshold
        self.grid = list(grid)
        self.curve = list(curve)
        pairs = ", ".join(f"N={n}: {d:.3e}" for n, d in zip(grid, curve))
        super().__init__(f"deficit never reached {threshold:.3e} ({pairs})")


def find_sufficient_N(
    family: ManifoldFamily,
    op: ForwardOp,
    spec: CompactSetSpec,
    C: float,
    delta: float,
    N_grid=(4, 8, 16, 32, 64, 128),
    count: int = 1000,
    seed: int = 0,
) -> NScan:
    """Smallest ``N`` in ``N_grid`` whose projection deficit is ``<= delta / (4 C)``.

    :raises GridExhausted: with the achieved deficit curve when no ``N`` works.
    """
    if not (C > 0 and delta >= 0):
        raise ValueError("need C > 0 and delta >= 0")
    grid = sorted(int(n) for n in N_grid)
    threshold = delta / (4.0 * C)
    curve = deficit_curve(op, family, spec, grid, count, seed)
    for n, d in zip(grid, curve):
        if d <= threshold:
            return NScan(n, threshold, grid, curve)
    raise GridExhausted(threshold, grid, curve)


# ---------------------------------------------------------------- counterexamples


def sin_example_derivative(x):
    """``f'(x) = 2x (sign x + sin(1/x)) - cos(1/x) + 1`` (and ``f'(0) = 1``)."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / x
        val = 2.0 * x * (np.sign(x) + np.sin(inv)) - np.cos(inv) + 1.0
    return np.where(x == 0, 1.0, val)


def counterexample_sin(k_list) -> list:
    """``f'(x_k)`` at ``x_k = 1 / (2 k pi)``.

    The nodes are irrational, so the evaluation runs in 40-digit arithmetic
    and rounds once at the end.
    """
    out = []
    with mpmath.workdps(40):
        for k in k_list:
            k = int(k)
            if k < 1:
                raise ValueError("k must be a positive integer")
            x = 1 / (2 * k * mpmath.pi)
            val = 2 * x * (1 + mpmath.sin(1 / x)) - mpmath.cos(1 / x) + 1
            out.append(float(val))
    return out


def weight_numerator_closed_form(t: float) -> float:
    """``2 int_0^t exp(-1/s) ds = 2 (t e^{-1/t} - E_1(1/t))``."""
    from scipy.special import exp1

    return 2.0 * (t * math.exp(-1.0 / t) - exp1(1.0 / t))


def weight_ratio_bound(t: float, alpha: float) -> float:
    """``2^{alpha-1} e^{-alpha/t} / t^{1-alpha}``."""
    return 2.0 ** (alpha - 1.0) * math.exp(-alpha / t) / t ** (1.0 - alpha)


def counterexample_weight(t_list, alpha: float = 1.0, weight=periodic_exp_weight) -> list:
    """Hoelder ratios of the multiplication operator along ``chi_[t, t+1]``.

    Returns ``||g (chi_[t,t+1] - chi_[0,1])||_1^alpha / ||chi_[t,t+1] - chi_[0,1]||_1``
    for each ``t``, the numerator by adaptive quadrature.
    """
    if not (0 < alpha <= 1):
        raise ValueError("alpha must lie in (0, 1]")
    out = []
    for t in t_list:
        t = float(t)
        if not (0 < t < 1):
            raise ValueError("t must lie in (0, 1)")

        def integrand(s):
            diff = float(t <= s < t + 1.0) - float(0.0 <= s < 1.0)
            return abs(float(weight(s))) * abs(diff)

        num, _ = integrate.quad(integrand, 0.0, 1.0 + t, points=[t, 1.0], epsabs=0.0, epsrel=1e-12, limit=200)
        den = 2.0 * min(1.0, t)
        out.append(num ** alpha / den)
    return out

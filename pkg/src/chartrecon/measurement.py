"""Finite-rank Fejer measurements and their Parseval packing.

``Q_N f = F_N * f`` keeps the Fourier coefficients ``|k| <= N`` of ``f`` with
the Fejer weights ``w_k = 1 - |k| / (N + 1)``.  A real function is determined
by its coefficients for ``k >= 0``, which are packed as

    (c_0, sqrt(2) Re c_1, sqrt(2) Im c_1, ..., sqrt(2) Re c_N, sqrt(2) Im c_N)

so that the Euclidean inner product of two packed vectors is the ``L^2``
inner product of the trigonometric polynomials they represent.  Functions on
``R^d`` are measured through their 1-periodisation on the torus, with the
tensor Fejer weights over a half lattice of frequencies.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .forward import INTEGRATION, ForwardOp, apply_forward
from .funcspace import (
    UNIT_INTERVAL,
    FunctionRep,
    IntervalIndicator,
    TrigPolynomial,
    gauss_legendre_panels,
    half_coefficients,
    half_lattice,
    torus_coefficients,
)
from .manifolds import (
    BallFamily,
    BallIntensityFamily,
    CompactSetSpec,
    IntervalFamily,
    ManifoldFamily,
    sample_compact,
)

__all__ = [
    "Measurement",
    "fejer_weights",
    "pack",
    "unpack",
    "project_fejer",
    "measurement_inner",
    "as_trig_polynomial",
    "measured_forward",
    "measured_jacobian",
    "fd_jacobian",
    "l1_deficit",
    "projection_deficit",
    "deficit_curve",
    "qn_operator_norm_bound",
    "add_noise",
    "write_measurement_csv",
    "read_measurement_csv",
    "format_float",
]


def format_float(x: float) -> str:
    """17 significant digits; parses back to the same double."""
    return f"{float(x):.17g}"


@dataclass(frozen=True, eq=False)
class Measurement:
    """Packed Fejer coefficients of bandwidth ``N`` on the ``dim``-torus."""

    N: int
    coeffs: np.ndarray
    dim: int = 1

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 0:
            raise ValueError("N must be a nonnegative integer")
        c = np.array(self.coeffs, dtype=float).ravel()
        if c.size != (2 * self.N + 1) ** self.dim:
            raise ValueError(f"expected {(2 * self.N + 1) ** self.dim} coefficients, got {c.size}")
        c.setflags(write=False)
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "coeffs", c)

    def __eq__(self, other):
        return (
            isinstance(other, Measurement)
            and self.N == other.N
            and self.dim == other.dim
            and np.array_equal(self.coeffs, other.coeffs)
        )

    def __len__(self):
        return self.coeffs.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def __sub__(self, other: "Measurement") -> "Measurement":
        _check_compatible(self, other)
        return Measurement(self.N, self.coeffs - other.coeffs, self.dim)


def _check_compatible(m1: Measurement, m2: Measurement):
    if m1.N != m2.N or m1.dim != m2.dim:
        raise ValueError(f"measurements differ in N or dimension: ({m1.N}, {m1.dim}) vs ({m2.N}, {m2.dim})")


def fejer_weights(N: int, d: int = 1) -> np.ndarray:
    """Tensor Fejer weights over ``half_lattice(N, d)``."""
    ks = half_lattice(N, d)
    return np.prod(1.0 - np.abs(ks) / (N + 1.0), axis=1)


def pack(c: np.ndarray) -> np.ndarray:
    """Real Parseval packing of complex coefficients over a half lattice.

    ``c`` may carry extra trailing axes (Jacobian columns).
    """
    c = np.asarray(c)
    out = np.empty((2 * c.shape[0] - 1,) + c.shape[1:])
    out[0] = c[0].real
    out[1::2] = math.sqrt(2.0) * c[1:].real
    out[2::2] = math.sqrt(2.0) * c[1:].imag
    return out


def unpack(m: Measurement) -> np.ndarray:
    """Complex (weighted) coefficients over the half lattice."""
    v = m.coeffs
    c = np.empty((v.size + 1) // 2, dtype=complex)
    c[0] = v[0]
    c[1:] = (v[1::2] + 1j * v[2::2]) / math.sqrt(2.0)
    return c


def project_fejer(f: FunctionRep, N: int) -> Measurement:
    """``Q_N f`` in packed form."""
    N = int(N)
    if N < 0:
        raise ValueError("N must be nonnegative")
    if f.domain == UNIT_INTERVAL:
        return Measurement(N, pack(fejer_weights(N) * half_coefficients(f, N)))
    d = f.domain.dim
    return Measurement(N, pack(fejer_weights(N, d) * torus_coefficients(f, N)), d)


def measurement_inner(m1: Measurement, m2: Measurement) -> float:
    """Euclidean inner product of packed vectors (``L^2`` of the polynomials)."""
    _check_compatible(m1, m2)
    return float(np.dot(m1.coeffs, m2.coeffs))


def as_trig_polynomial(m: Measurement) -> TrigPolynomial:
    """The polynomial ``F_N * f`` represented by a one-dimensional measurement."""
    if m.dim != 1:
        raise ValueError("only one-dimensional measurements map to TrigPolynomial")
    return TrigPolynomial(unpack(m))


# ---------------------------------------------------------------- measured map


def _interval_coefficient_gradient(op: ForwardOp, a: float, b: float, N: int) -> np.ndarray:
    """``d c_k / d(a, b)`` for ``k = 0..N`` of ``F(chi_[a,b])``."""
    k = np.arange(N + 1)
    w = 2.0 * np.pi * k
    ea, eb = np.exp(-1j * w * a), np.exp(-1j * w * b)
    if op.kind == "identity":
        return np.stack([-ea, eb], axis=1)
    if op.kind == "multiplication":
        ga, gb = float(op.weight(a)), float(op.weight(b))
        return np.stack([-ga * ea, gb * eb], axis=1)
    # integration: columns are the coefficients of -chi_[a,1] and chi_[b,1]
    return np.stack(
        [-IntervalIndicator(a, 1.0)._half_coefficients(N), IntervalIndicator(b, 1.0)._half_coefficients(N)],
        axis=1,
    )


def measured_forward(op: ForwardOp, family: ManifoldFamily, h, N: int, chart=None) -> Measurement:
    """``Q_N F(phi^{-1}(h))``."""
    x = family.point(family._coords(h), chart if chart is not None else getattr(h, "chart", None))
    return project_fejer(apply_forward(op, family.embed(x)), N)


def measured_jacobian(op: ForwardOp, family: ManifoldFamily, h, N: int, chart=None) -> np.ndarray:
    """Jacobian of ``h -> Q_N F(phi^{-1}(h))`` in packed coordinates.

    Column ``j`` is the packed Fejer projection of the chart differential in
    direction ``e_j``; analytic coefficient derivatives are used throughout,
    with finite differences only for pairings without one.
    """
    chart = chart if chart is not None else getattr(h, "chart", None)
    hv = np.asarray(family._coords(h), dtype=float)
    if not family.in_chart_image(hv, chart):
        raise ValueError("h outside the chart image")
    N = int(N)
    if family.dim == 0:
        return np.zeros(((2 * N + 1), 0))
    if isinstance(family, IntervalFamily):
        grad = _interval_coefficient_gradient(op, hv[0], hv[1], N)
        return pack(fejer_weights(N)[:, None] * grad)
    if op.kind == "identity" and family.embed(family.point(hv, chart)).domain.dim <= 3:
        f = family.embed(family.point(hv, chart))
        try:
            _, grad = torus_coefficients(f, N, with_gradient=True)
        except NotImplementedError:
            return fd_jacobian(op, family, hv, N, chart)
        if isinstance(family, BallFamily):
            grad = grad[:, : family.dim]
        w = fejer_weights(N, f.domain.dim)
        return pack(w[:, None] * grad)
    return fd_jacobian(op, family, hv, N, chart)


def fd_jacobian(op: ForwardOp, family: ManifoldFamily, h, N: int, chart=None, step=None) -> np.ndarray:
    """Central finite differences of the measured forward map."""
    hv = np.asarray(family._coords(h), dtype=float)
    s = 1e-6 * (1.0 + float(np.linalg.norm(hv))) if step is None else float(step)
    cols = []
    for j in range(family.dim):
        e = np.zeros_like(hv)
        e[j] = s
        mp = measured_forward(op, family, hv + e, N, chart).coeffs
        mm = measured_forward(op, family, hv - e, N, chart).coeffs
        cols.append((mp - mm) / (2.0 * s))
    return np.stack(cols, axis=1)


# ---------------------------------------------------------------- deficit


def _fejer_sum(c: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Evaluate ``c_0 + 2 Re sum_k c_k e^{2 pi i k x}`` by a running power."""
    out = np.full(x.shape, c[0].real)
    if c.size > 1:
        z = np.exp(2j * np.pi * x)
        zk = z.copy()
        acc = np.zeros(x.shape, dtype=complex)
        for k in range(1, c.size):
            acc += c[k] * zk
            zk *= z
        out = out + 2.0 * acc.real
    return out


def l1_deficit(g: FunctionRep, N: int) -> float:
    """``|| g - F_N * g ||_{L^1(0, 1)}`` by composite Gauss-Legendre quadrature.

    Panels are split at the breakpoints of ``g``, at the sign changes of the
    residual (located by linear interpolation, so ``|.|`` is smooth on every panel)
    and are at most half a period of the highest retained frequency wide.
    """
    if g.domain != UNIT_INTERVAL:
        raise ValueError("the deficit is defined on [0, 1]")
    N = int(N)
    c = fejer_weights(N) * half_coefficients(g, N)
    width = min(1.0 / 64.0, 1.0 / (2.0 * (N + 1)))

    def residual(x):
        return g._eval(x) - _fejer_sum(c, x)

    edges = np.asarray(g.breakpoints(), dtype=float)
    x, w = gauss_legendre_panels(edges, width)
    r = residual(x)
    idx = np.nonzero((r[:-1] > 0) != (r[1:] > 0))[0]
    lo, hi = x[idx], x[idx + 1]
    inner = np.array([not np.any((edges > a) & (edges < b)) for a, b in zip(lo, hi)], dtype=bool)
    lo, hi = lo[inner], hi[inner]
    if lo.size:
        # brackets are one node gap wide, so linear interpolation places the
        # kink to O(gap^2) and the integral error is smaller still
        ra, rb = r[idx][inner], r[idx + 1][inner]
        t = lo - ra * (hi - lo) / (rb - ra)
        x, w = gauss_legendre_panels(np.union1d(edges, t), width)
        r = residual(x)
    return float(np.sum(w * np.abs(r)))


def projection_deficit(op: ForwardOp, family: ManifoldFamily, spec: CompactSetSpec, N: int, count: int = 1000, seed: int = 0) -> float:
    """``max_xi || F(xi) - Q_N F(xi) ||_{L^1}`` over a deterministic sample of ``K``."""
    if count < 1:
        raise ValueError("empty sample")
    pts = sample_compact(spec, count, seed)
    return max(l1_deficit(apply_forward(op, family.embed(x)), N) for x in pts)


def deficit_curve(op: ForwardOp, family: ManifoldFamily, spec: CompactSetSpec, N_grid, count: int = 1000, seed: int = 0) -> list:
    """Deficits for every ``N`` in ``N_grid`` on one shared sample of ``K``."""
    if count < 1:
        raise ValueError("empty sample")
    images = [apply_forward(op, family.embed(x)) for x in sample_compact(spec, count, seed)]
    return [max(l1_deficit(g, N) for g in images) for N in N_grid]


def qn_operator_norm_bound() -> float:
    """Bound on ``||Q_N||`` on ``L^1`` (the Fejer kernel is a probability density)."""
    return 1.0


def add_noise(m: Measurement, sigma: float, seed: int = 0) -> Measurement:
    """Additive Gaussian noise on the packed coefficients (off when ``sigma == 0``)."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0:
        return m
    rng = np.random.default_rng(seed)
    return Measurement(m.N, m.coeffs + sigma * rng.standard_normal(m.coeffs.size), m.dim)


# ---------------------------------------------------------------- persistence


def write_measurement_csv(m: Measurement, path) -> None:
    """One row: ``N`` followed by the packed coefficients."""
    row = [str(m.N)] + [format_float(x) for x in m.coeffs]
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(row) + "\n")


def read_measurement_csv(path) -> Measurement:
    with open(path, encoding="ascii") as fh:
        rows = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if len(rows) != 1:
        raise ValueError("measurement file must contain exactly one row")
    fields = rows[0].split(",")
    try:
        N = int(fields[0])
        vals = np.array([float(x) for x in fields[1:]])
    except ValueError as exc:
        raise ValueError(f"malformed measurement row: {exc}") from None
    base = 2 * N + 1
    d = 1
    while base ** d < vals.size:
        d += 1
    return Measurement(N, vals, d)

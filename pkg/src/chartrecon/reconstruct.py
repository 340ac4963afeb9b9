"""Global reconstruction: lattice initial guess plus chart Landweber iteration.

The pipeline follows the offline/online split of the algorithm:

* offline: pick a radius ``r`` from the a priori constants, cover ``K`` by a
  chart grid whose ambient covering radius is below ``r`` and measure every
  grid point (:func:`build_lattice`);
* online: scan the table for the first point whose measurement residual is
  below the selection threshold (:func:`select_initial`), then run Landweber
  in the chart of that point (:func:`landweber`).

Every failure raised here carries the line of the algorithm it belongs to and
the CLI exit code it maps to.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .forward import ForwardOp, make_operator
from .manifolds import (
    CompactSetSpec,
    ManifoldFamily,
    ModelPoint,
    SimplexFamily,
    sample_compact,
)
from .measurement import (
    Measurement,
    add_noise,
    format_float,
    measured_forward,
    measured_jacobian,
    qn_operator_norm_bound,
    read_measurement_csv,
)
from .reporting import to_json
from .stabilitylab import empirical_stability, lipschitz_estimate, projected_stability

__all__ = [
    "ReconstructionError",
    "ConstantsError",
    "LatticeTooLarge",
    "NoInitialGuess",
    "Divergence",
    "lattice_radius",
    "selection_threshold",
    "lattice_spacing",
    "lattice_grid",
    "LatticeTable",
    "build_lattice",
    "covering_radius",
    "save_table",
    "load_table",
    "Selection",
    "select_initial",
    "StopRule",
    "LandweberTrajectory",
    "spectral_step",
    "landweber",
    "RateFit",
    "rate_envelope",
    "rate_fit",
    "BasinCalibration",
    "calibrate_basin",
    "Constants",
    "acquire_constants",
    "ReconstructionReport",
    "reconstruct",
    "default_workers",
]

TABLE_FORMAT_VERSION = 1
TABLE_MAGIC = "chartrecon lattice table"
WORKERS_ENV = "CHARTRECON_WORKERS"


def default_workers() -> int:
    """Worker count from ``CHARTRECON_WORKERS`` (1 when unset or invalid)."""
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------- errors


class ReconstructionError(RuntimeError):
    """Base class; ``line`` is the step of the algorithm that failed."""

    line = 0
    exit_code = 1

    def __init__(self, message: str):
        super().__init__(f"[algorithm line {self.line}] {message}")


class ConstantsError(ReconstructionError):
    line = 1
    exit_code = 2


class LatticeTooLarge(ReconstructionError):
    line = 3
    exit_code = 2


class NoInitialGuess(ReconstructionError):
    """No lattice point met the selection threshold: some constant was underestimated."""

    line = 6
    exit_code = 4


class Divergence(ReconstructionError):
    line = 14
    exit_code = 5

    def __init__(self, message: str, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


# ---------------------------------------------------------------- radius


def _check_alpha(alpha):
    if not (0.5 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (1/2, 1], got {alpha}")


def selection_threshold(rho: float, ell: float, delta_KM: float, alpha: float, C: float) -> float:
    """``(min(rho ell, delta_KM) / (2 C))^(1/alpha)``, the bound on the residual of ``x_0``."""
    for name, v in (("rho", rho), ("ell", ell), ("delta_KM", delta_KM), ("C", C)):
        if not v > 0:
            raise ValueError(f"{name} must be positive")
    _check_alpha(alpha)
    return (min(rho * ell, delta_KM) / (2.0 * C)) ** (1.0 / alpha)


def lattice_radius(L_FK: float, q_norm: float, rho: float, ell: float, delta_KM: float, alpha: float, C: float) -> float:
    """Covering radius ``r`` for the lattice.

    ``r = (min(rho ell, delta_KM) / (2 C))^(1/alpha) / (L_FK ||Q||)``; a point
    within ``r`` of ``x_dag`` then has residual below the selection threshold.
    """
    if not (L_FK > 0 and q_norm > 0):
        raise ValueError("L_FK and q_norm must be positive")
    return selection_threshold(rho, ell, delta_KM, alpha, C) / (L_FK * q_norm)


def lattice_spacing(family: ManifoldFamily, r: float, dim: int | None = None) -> float:
    """Largest chart spacing ``s`` with ``ambient_modulus(s sqrt(m) / 2) < r``.

    A cell-centred grid of spacing ``s`` has Euclidean covering radius
    ``s sqrt(m) / 2``.  Found by bisection on the family's modulus.
    """
    if not r > 0:
        raise ValueError("r must be positive")
    m = family.dim if dim is None else dim
    half_diag = math.sqrt(m) / 2.0

    def ok(s):
        return family.ambient_modulus(s * half_diag) < r

    lo, hi = 0.0, 1.0
    while ok(hi):
        lo, hi = hi, 2.0 * hi
        if hi > 1e12:
            return hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if ok(mid):
            lo = mid
        else:
            hi = mid
    if lo == 0.0:
        raise ValueError("no positive spacing achieves the requested radius")
    return lo


def lattice_grid(spec: CompactSetSpec, spacing: float, max_points: int | None = None) -> np.ndarray:
    """Row-major cell-centre grid over the box of ``K``, projected onto ``K``.

    Projection onto a convex set does not increase distances to its points,
    so the covering radius of the raw grid carries over.  Duplicates created
    by the projection are dropped, keeping the first occurrence.
    """
    lo, hi = np.asarray(spec.lower), np.asarray(spec.upper)
    width = hi - lo
    counts = np.maximum(1, np.ceil(width / spacing - 1e-12)).astype(int)
    total = int(np.prod(counts.astype(float)))
    if max_points is not None and total > max_points:
        raise LatticeTooLarge(f"grid needs {total} points (cap {max_points}); spacing {spacing:.3e}")
    axes = [lo[i] + (np.arange(counts[i]) + 0.5) * (width[i] / counts[i]) for i in range(lo.size)]
    mesh = np.meshgrid(*axes, indexing="ij")
    raw = np.stack([g.ravel() for g in mesh], axis=1)
    inside = np.array([spec.contains(h, tol=0.0) for h in raw])
    pts = raw.copy()
    for i in np.flatnonzero(~inside):
        pts[i] = spec.project(raw[i])
    _, first = np.unique(pts, axis=0, return_index=True)
    return pts[np.sort(first)]


# ---------------------------------------------------------------- table


@dataclass(frozen=True, eq=False)
class LatticeTable:
    """Lattice points of ``K`` with their measurements (immutable once built)."""

    points: np.ndarray
    coeffs: np.ndarray
    r: float
    N: int
    family: dict
    op: str
    lower: tuple
    upper: tuple
    seed: int = 0
    spacing: float = float("nan")
    chart: tuple | None = None
    meas_dim: int = 1
    version: int = TABLE_FORMAT_VERSION

    def __post_init__(self):
        for name in ("points", "coeffs"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if self.points.ndim != 2 or self.coeffs.ndim != 2 or len(self.points) != len(self.coeffs):
            raise ValueError("points and coefficients must be row-aligned matrices")
        if len(self.points) == 0:
            raise ValueError("empty lattice")

    def __len__(self):
        return len(self.points)

    def __eq__(self, other):
        return (
            isinstance(other, LatticeTable)
            and self.header() == other.header()
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.coeffs, other.coeffs)
        )

    def measurement(self, j: int) -> Measurement:
        return Measurement(self.N, self.coeffs[j], self.meas_dim)

    def point(self, j: int) -> ModelPoint:
        return ModelPoint(self.family["tag"], self.points[j], self.chart)

    def header(self) -> dict:
        return {
            "format_version": self.version,
            "family": self.family,
            "operator": self.op,
            "box_lower": list(self.lower),
            "box_upper": list(self.upper),
            "r": self.r,
            "spacing": self.spacing,
            "N": self.N,
            "seed": self.seed,
            "chart": None if self.chart is None else list(self.chart),
            "measurement_dim": self.meas_dim,
            "points": len(self),
        }


def _measure_points(op: ForwardOp, family: ManifoldFamily, points: np.ndarray, N: int, chart, workers: int) -> np.ndarray:
    """Measurements of every lattice point, merged in index order."""

    def block(rows):
        return np.stack([measured_forward(op, family, h, N, chart).coeffs for h in rows])

    workers = max(1, int(workers))
    if workers == 1 or len(points) < 2 * workers:
        return block(points)
    chunks = np.array_split(points, workers * 4)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(block, [c for c in chunks if len(c)]))
    return np.concatenate(parts, axis=0)


def build_lattice(
    family: ManifoldFamily,
    spec: CompactSetSpec,
    r: float,
    N: int,
    op: ForwardOp,
    max_points: int = 2_000_000,
    seed: int = 0,
    workers: int = 1,
    chart=None,
) -> LatticeTable:
    """Offline phase: cover ``K`` within ambient radius ``r`` and measure the cover.

    When ``r`` exceeds the ambient diameter bound of ``K`` the single anchor
    point of ``K`` is used.

    :raises LatticeTooLarge: when the grid would exceed ``max_points``.
    """
    if not r > 0:
        raise ValueError("r must be positive")
    lo, hi = np.asarray(spec.lower), np.asarray(spec.upper)
    if family.ambient_modulus(float(np.linalg.norm(hi - lo))) <= r:
        spacing = float("inf")
        pts = np.array([spec.anchor], dtype=float)
    else:
        spacing = lattice_spacing(family, r)
        pts = lattice_grid(spec, spacing, max_points)
    if chart is None and isinstance(family, SimplexFamily):
        chart = family.default_chart()
    coeffs = _measure_points(op, family, pts, N, chart, workers)
    meas_dim = measured_forward(op, family, pts[0], N, chart).dim
    return LatticeTable(
        pts, coeffs, float(r), int(N), family.describe(), op.kind,
        spec.lower, spec.upper, int(seed), float(spacing),
        None if chart is None else tuple(float(c) for c in chart), meas_dim,
    )


def covering_radius(table: LatticeTable, family: ManifoldFamily, spec: CompactSetSpec, count: int = 1000, seed: int = 0, neighbours: int = 8) -> float:
    """Largest ambient distance from a ``K`` sample to the lattice.

    Each sample point is compared with its ``neighbours`` nearest lattice
    points in the chart, so the result bounds the true value from above.
    """
    tree = cKDTree(table.points)
    k = min(neighbours, len(table))
    worst = 0.0
    for x in sample_compact(spec, count, seed):
        _, idx = tree.query(x.h, k=k)
        idx = np.atleast_1d(idx)
        d = min(family.ambient_distance(x.h, table.points[j]) for j in idx)
        worst = max(worst, d)
    return worst


def save_table(table: LatticeTable, path) -> None:
    """Versioned text format: ``#`` header lines (JSON values), a column line, CSV rows."""
    m = table.points.shape[1]
    cols = [f"h{i}" for i in range(m)] + [f"c{i}" for i in range(table.coeffs.shape[1])]
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"# {TABLE_MAGIC}\n")
        for key, value in table.header().items():
            fh.write(f"# {key}: {json.dumps(value, sort_keys=True)}\n")
        fh.write(",".join(cols) + "\n")
        for h, c in zip(table.points, table.coeffs):
            fh.write(",".join(format_float(v) for v in np.concatenate([h, c])) + "\n")


def load_table(path) -> LatticeTable:
    with open(path, encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != f"# {TABLE_MAGIC}":
        raise ValueError("not a lattice table file")
    header = {}
    i = 1
    while i < len(lines) and lines[i].startswith("# "):
        key, _, value = lines[i][2:].partition(": ")
        header[key] = json.loads(value)
        i += 1
    if header.get("format_version") != TABLE_FORMAT_VERSION:
        raise ValueError(f"unsupported table format version {header.get('format_version')!r}")
    cols = lines[i].split(",")
    m = sum(1 for c in cols if c.startswith("h"))
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[i + 1 :] if ln])
    if data.ndim != 2 or data.shape[1] != len(cols):
        raise ValueError("malformed table rows")
    if len(data) != header["points"]:
        raise ValueError("row count does not match the header")
    chart = header["chart"]
    return LatticeTable(
        data[:, :m], data[:, m:], header["r"], header["N"], header["family"], header["operator"],
        tuple(header["box_lower"]), tuple(header["box_upper"]), header["seed"], header["spacing"],
        None if chart is None else tuple(chart), header["measurement_dim"], header["format_version"],
    )


# ---------------------------------------------------------------- selection


@dataclass(frozen=True)
class Selection:
    point: ModelPoint
    index: int
    residual: float
    threshold: float
    mode: str

    def as_dict(self) -> dict:
        return {
            "index": self.index,
            "coords": list(self.point.coords),
            "residual": self.residual,
            "threshold": self.threshold,
            "mode": self.mode,
        }


def select_initial(table: LatticeTable, m_dag: Measurement, threshold: float, mode: str = "first") -> Selection:
    """Initial guess from the table.

    ``mode="first"`` returns the first point in scan order with residual
    strictly below ``threshold``; ``mode="argmin"`` the smallest residual
    among such points.

    :raises NoInitialGuess: when no point qualifies.
    """
    if m_dag.N != table.N or len(m_dag) != table.coeffs.shape[1]:
        raise ValueError("measurement and table differ in N")
    if mode not in ("first", "argmin"):
        raise ValueError("mode must be 'first' or 'argmin'")
    res = np.linalg.norm(table.coeffs - m_dag.coeffs[None, :], axis=1)
    ok = np.flatnonzero(res < threshold)
    if ok.size == 0:
        raise NoInitialGuess(
            f"no lattice point has residual below {threshold:.6e} (best {res.min():.6e}); "
            "C, L_FK or r was underestimated"
        )
    j = int(ok[0]) if mode == "first" else int(ok[np.argmin(res[ok])])
    return Selection(table.point(j), j, float(res[j]), float(threshold), mode)


# ---------------------------------------------------------------- Landweber


@dataclass(frozen=True)
class StopRule:
    tolerance: float = 1e-9
    max_iters: int = 100_000
    divergence_factor: float = 1e3


@dataclass
class LandweberTrajectory:
    """Iterates ``h_k`` with residual norms and, when the truth is known, ambient errors."""

    iterates: np.ndarray
    residuals: np.ndarray
    mu: float
    termination: str
    errors: np.ndarray | None = None
    chart_errors: np.ndarray | None = None
    clamped: int = 0
    chart: tuple | None = None

    def __len__(self):
        return len(self.residuals)

    @property
    def iterations(self) -> int:
        return len(self.residuals) - 1

    @property
    def final(self) -> np.ndarray:
        return self.iterates[-1]

    @property
    def converged(self) -> bool:
        return self.termination == "converged"

    def csv_rows(self) -> list:
        m = self.iterates.shape[1]
        head = ["k"] + [f"h{i}" for i in range(m)] + ["residual"]
        if self.errors is not None:
            head += ["error", "chart_error"]
        rows = [",".join(head)]
        for k in range(len(self)):
            vals = list(self.iterates[k]) + [self.residuals[k]]
            if self.errors is not None:
                vals += [self.errors[k], self.chart_errors[k]]
            rows.append(",".join([str(k)] + [format_float(v) for v in vals]))
        return rows


def spectral_step(op: ForwardOp, family: ManifoldFamily, h, N: int, chart=None) -> float:
    """``1 / sigma_max(J(h))^2`` for the measured Jacobian ``J``."""
    J = measured_jacobian(op, family, h, N, chart)
    s = float(np.linalg.norm(J, 2))
    if not s > 0:
        raise ValueError("measured Jacobian vanishes; no spectral step")
    return 1.0 / (s * s)


def landweber(
    family: ManifoldFamily,
    op: ForwardOp,
    N: int,
    h0,
    m_dag: Measurement,
    mu: float | None = None,
    stop: StopRule | None = None,
    chart=None,
    spec: CompactSetSpec | None = None,
    truth=None,
) -> LandweberTrajectory:
    """Landweber iteration in chart coordinates.

    ``h_{k+1} = h_k - mu J(h_k)^T (m(h_k) - m_dag)`` with the Parseval inner
    product on measurements.  Iterates leaving the chart image are projected
    onto ``K`` (``spec``) and counted in ``clamped``.

    :raises Divergence: when the residual grows beyond
        ``stop.divergence_factor`` times its initial value or turns non-finite.
    """
    stop = StopRule() if stop is None else stop
    h = np.asarray(family._coords(h0), dtype=float).copy()
    if not family.in_chart_image(h, chart):
        raise ValueError("h0 outside the chart image")
    if mu is None:
        mu = spectral_step(op, family, h, N, chart)
    if not mu > 0:
        raise ValueError("mu must be positive")
    target = m_dag.coeffs
    h_true = None if truth is None else np.asarray(family._coords(truth), dtype=float)
    iterates, residuals, errors, chart_errors = [], [], [], []
    clamped = 0

    def record(h):
        r = measured_forward(op, family, h, N, chart).coeffs - target
        iterates.append(h.copy())
        residuals.append(float(np.linalg.norm(r)))
        if h_true is not None:
            errors.append(family.ambient_distance(h, h_true))
            chart_errors.append(family.chart_distance(h, h_true))
        return r

    def result(reason):
        return LandweberTrajectory(
            np.array(iterates), np.array(residuals), float(mu), reason,
            None if h_true is None else np.array(errors),
            None if h_true is None else np.array(chart_errors),
            clamped, None if chart is None else tuple(chart),
        )

    r = record(h)
    r0 = residuals[0]
    k = 0
    while True:
        if residuals[-1] <= stop.tolerance:
            return result("converged")
        if k >= stop.max_iters:
            return result("max_iters")
        J = measured_jacobian(op, family, h, N, chart)
        h = h - mu * (J.T @ r)
        if not family.in_chart_image(h, chart):
            if spec is None:
                raise Divergence("iterate left the chart image and no compact set was given for clamping", result("diverged"))
            h = spec.project(h)
            clamped += 1
        r = record(h)
        k += 1
        if not math.isfinite(residuals[-1]) or residuals[-1] > stop.divergence_factor * max(r0, stop.tolerance):
            raise Divergence(f"residual grew from {r0:.3e} to {residuals[-1]:.3e}; mu={mu:.3e} too large", result("diverged"))


# ---------------------------------------------------------------- rates


def rate_envelope(k, alpha: float, rho: float, ell: float, c: float) -> np.ndarray:
    """Ambient error envelope after ``k`` Landweber steps.

    ``rho c^k / ell`` for ``alpha = 1``; for ``alpha < 1`` the power law
    ``(c k (1 - alpha)/alpha + rho^(-(1 - alpha)/alpha))^(-alpha^2 / (2 (1 - alpha))) / ell``.
    """
    k = np.asarray(k, dtype=float)
    if alpha == 1.0:
        return rho * c ** k / ell
    _check_alpha(alpha)
    q = (1.0 - alpha) / alpha
    return (c * k * q + rho ** (-q)) ** (-alpha * alpha / (2.0 * (1.0 - alpha))) / ell


@dataclass(frozen=True)
class RateFit:
    c_hat: float
    bound_satisfied: bool
    tail_start: int
    tail_length: int
    alpha: float
    rho: float | None
    ell: float | None
    c: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def rate_fit(traj, alpha: float = 1.0, rho: float | None = None, ell: float | None = None, c: float | None = None, min_tail: int = 5) -> RateFit:
    """Fit ``c_hat = exp(slope)`` of log error against ``k`` on the decreasing tail.

    ``traj`` is a :class:`LandweberTrajectory` with known errors or a plain
    error sequence indexed by ``k``.  The tail is the longest strictly
    decreasing suffix of positive errors.  With ``rho`` and ``ell`` given the
    envelope of :func:`rate_envelope` is checked at every ``k`` using ``c``
    (the fitted ``c_hat`` by default).
    """
    e = np.asarray(traj.errors if isinstance(traj, LandweberTrajectory) else traj, dtype=float)
    if e is None or e.ndim != 1:
        raise ValueError("need a one-dimensional error sequence")
    end = len(e)
    while end > 0 and not e[end - 1] > 0:
        end -= 1
    start = end - 1
    while start > 0 and e[start - 1] > e[start]:
        start -= 1
    if end - start < min_tail:
        raise ValueError(f"tail has {max(end - start, 0)} strictly decreasing errors; need {min_tail}")
    ks = np.arange(start, end)
    slope = np.polyfit(ks, np.log(e[start:end]), 1)[0]
    c_hat = float(math.exp(slope))
    c_use = c_hat if c is None else float(c)
    ok = True
    if rho is not None and ell is not None:
        env = rate_envelope(np.arange(len(e)), alpha, rho, ell, c_use)
        ok = bool(np.all(e <= env * (1.0 + 1e-12)))
    return RateFit(c_hat, ok, int(start), int(end - start), float(alpha), rho, ell, c_use)


# ---------------------------------------------------------------- basin


@dataclass
class BasinCalibration:
    """Largest tested radius from which every trial converged (empirical)."""

    rho: float
    radii: list
    success: list
    trials: int
    tolerance: float
    seed: int
    label: str = "empirical"

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _start_on_sphere(family, spec, h, radius, rng, tries=1000):
    for _ in range(tries):
        u = rng.normal(size=h.size)
        u /= family.chart_distance(u, np.zeros_like(u))
        g = h + radius * u
        if spec.contains(g, tol=0.0) and family.in_chart_image(g):
            return g
    return None


def calibrate_basin(
    family: ManifoldFamily,
    op: ForwardOp,
    spec: CompactSetSpec,
    N: int,
    radii=(0.02, 0.05, 0.1, 0.2, 0.3),
    trials: int = 10,
    seed: int = 0,
    stop: StopRule | None = None,
    tol: float = 1e-6,
) -> BasinCalibration:
    """Chart-norm basin radius by perturbation trials.

    For each radius, ``trials`` sample points of ``K`` are perturbed by that
    chart distance (staying in ``K``) and Landweber is run from the perturbed
    point.  The reported radius is the largest one such that it and every
    smaller tested radius converged to chart error ``<= tol`` in all trials.
    """
    stop = StopRule() if stop is None else stop
    radii = sorted(float(x) for x in radii)
    truths = [x.h for x in sample_compact(spec, trials, seed)]
    rng = np.random.default_rng(seed)
    success = []
    for rad in radii:
        wins = tested = 0
        for h in truths:
            g = _start_on_sphere(family, spec, h, rad, rng)
            if g is None:
                continue
            tested += 1
            m_dag = measured_forward(op, family, h, N)
            try:
                tr = landweber(family, op, N, g, m_dag, stop=stop, spec=spec, truth=h)
            except (Divergence, ValueError):
                continue
            wins += int(tr.converged and tr.chart_errors[-1] <= tol)
        success.append(wins / tested if tested else 0.0)
    rho = 0.0
    for rad, s in zip(radii, success):
        if s < 1.0:
            break
        rho = rad
    if rho == 0.0:
        raise ConstantsError("no tested radius gave 100% Landweber convergence")
    return BasinCalibration(rho, radii, success, int(trials), float(tol), int(seed))


# ---------------------------------------------------------------- constants


@dataclass
class Constants:
    """A priori constants of the algorithm with their provenance."""

    C: float
    C_source: str
    C_F_hat: float | None
    C_QF_hat: float | None
    L_FK: float
    L_FK_source: str
    q_norm: float
    rho: float
    rho_source: str
    ell: float
    ell_source: str
    alpha: float
    delta_KM: float
    delta_source: str
    safety: float
    basin: dict | None = None

    def as_dict(self) -> dict:
        return dict(self.__dict__)

    @property
    def threshold(self) -> float:
        return selection_threshold(self.rho, self.ell, self.delta_KM, self.alpha, self.C)

    @property
    def radius(self) -> float:
        return lattice_radius(self.L_FK, self.q_norm, self.rho, self.ell, self.delta_KM, self.alpha, self.C)

    @property
    def basin_bound(self) -> float:
        return min(self.rho * self.ell, self.delta_KM)


def acquire_constants(cfg, family: ManifoldFamily, op: ForwardOp, spec: CompactSetSpec) -> Constants:
    """Constants from config overrides, falling back to empirical estimates.

    ``C`` defaults to ``safety * max(C_F_hat, C_QF_hat)`` where the two hats
    are sampled stability constants of ``F`` (into ``L^2``) and of ``Q_N F``
    (Parseval norm).  ``L_FK ||Q||`` defaults to ``safety`` times its sampled
    value with ``||Q||`` folded in.
    """
    k = cfg.constants
    alpha = family.alpha
    try:
        _check_alpha(alpha)
    except ValueError as exc:
        raise ConstantsError(str(exc)) from None
    pairs, seed = k.estimation_pairs, cfg.seed
    C_F = C_QF = None
    if k.C is not None:
        C, C_source = float(k.C), "config"
    else:
        C_F = empirical_stability(family, op, spec, alpha=alpha, pairs=pairs, seed=seed, y_p=2.0).C_hat
        C_QF = projected_stability(family, op, spec, cfg.N, alpha=alpha, pairs=pairs, seed=seed).C_hat
        C = k.safety * max(C_F, C_QF)
        C_source = f"empirical: safety {k.safety:g} x max(C_F_hat, C_QF_hat)"
        if not math.isfinite(C):
            raise ConstantsError("estimated stability constant is infinite; the configuration is unstable")
    if k.L_FK is not None:
        L, L_source, q = float(k.L_FK), "config", qn_operator_norm_bound()
    else:
        L = k.safety * lipschitz_estimate(family, op, spec, cfg.N, pairs=pairs, seed=seed)
        L_source = f"empirical: safety {k.safety:g} x sampled L_FK ||Q||"
        q = 1.0
    stop = StopRule(cfg.stop.tolerance, cfg.stop.max_iters, cfg.stop.divergence_factor)
    basin = None
    if k.rho_basin is not None:
        rho, rho_source = float(k.rho_basin), "config"
    else:
        cal = calibrate_basin(family, op, spec, cfg.N, k.basin_radii, k.basin_trials, seed, stop)
        rho, rho_source, basin = cal.rho, "empirical: basin calibration", cal.as_dict()
    if k.delta_KM is not None:
        delta, delta_source = float(k.delta_KM), "config"
    else:
        delta, delta_source = spec.delta_KM, spec.delta_source
    return Constants(
        C, C_source, C_F, C_QF, L, L_source, q, rho, rho_source, float(family.ell),
        getattr(family, "ell_source", "analytic"), alpha, delta, delta_source, float(k.safety), basin,
    )


# ---------------------------------------------------------------- pipeline


@dataclass
class ReconstructionReport:
    family: dict
    operator: str
    N: int
    seed: int
    constants: Constants
    lattice: dict
    selection: Selection
    chart: tuple | None
    trajectory: LandweberTrajectory
    final: ModelPoint
    truth: list | None = None
    x0_error: float | None = None
    final_chart_error: float | None = None
    rate: RateFit | None = None
    notes: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.trajectory.converged

    def __post_init__(self):
        if self.converged and not self.trajectory.residuals[-1] <= self._tolerance():
            raise AssertionError("converged trajectory above tolerance")

    def _tolerance(self):
        return self.lattice.get("tolerance", math.inf)

    def as_dict(self) -> dict:
        t = self.trajectory
        return {
            "family": self.family,
            "operator": self.operator,
            "N": self.N,
            "seed": self.seed,
            "constants": self.constants.as_dict(),
            "threshold": self.constants.threshold,
            "basin_bound": self.constants.basin_bound,
            "lattice": self.lattice,
            "selection": self.selection.as_dict(),
            "chart": None if self.chart is None else list(self.chart),
            "landweber": {
                "mu": t.mu,
                "iterations": t.iterations,
                "termination": t.termination,
                "final_residual": float(t.residuals[-1]),
                "initial_residual": float(t.residuals[0]),
                "clamped": t.clamped,
            },
            "final": list(self.final.coords),
            "truth": self.truth,
            "x0_error": self.x0_error,
            "x0_within_basin": None if self.x0_error is None else bool(self.x0_error < self.constants.basin_bound),
            "final_chart_error": self.final_chart_error,
            "rate": None if self.rate is None else self.rate.as_dict(),
            "converged": self.converged,
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return to_json(self.as_dict())


def _lattice_spec(family: ManifoldFamily):
    return family.compact_spec()


def reconstruct(cfg, table: LatticeTable | None = None, measurement: Measurement | None = None, constants: Constants | None = None) -> ReconstructionReport:
    """Run the full pipeline described by an :class:`~chartrecon.config.ExperimentConfig`.

    :arg table: precomputed offline table; when given no lattice point is
        re-measured.
    :arg measurement: data ``Q F(x_dag)``; by default synthesised from
        ``cfg.truth`` or read from ``cfg.measurement_file``.
    :arg constants: precomputed constants, skipping their acquisition.
    """
    family = cfg.family.build()
    op = make_operator(cfg.operator)
    spec = _lattice_spec(family)
    N = int(cfg.N)
    notes = []
    truth = None if cfg.truth is None else np.asarray(cfg.truth, dtype=float)
    if truth is not None and not spec.contains(truth, tol=1e-12):
        notes.append("truth lies outside K")

    # line 1-2: constants and the Parseval structure on ran Q
    if constants is None:
        constants = acquire_constants(cfg, family, op, spec)
    threshold = constants.threshold
    r = constants.radius

    # line 3-5: offline table
    if table is None:
        if cfg.lattice.table_file:
            table = load_table(cfg.lattice.table_file)
        else:
            table = build_lattice(family, spec, r, N, op, cfg.lattice.max_points, cfg.seed,
                                  cfg.workers if cfg.workers > 1 else default_workers())
    if table.N != N or table.family != family.describe() or table.op != op.kind:
        raise ValueError("lattice table was built for a different family, operator or N")
    if table.r > r:
        notes.append(f"table radius {table.r:.6e} exceeds the radius {r:.6e} implied by the constants")

    # data
    if measurement is None:
        if truth is not None:
            measurement = measured_forward(op, family, truth, N)
            measurement = add_noise(measurement, cfg.noise_sigma, cfg.seed)
        elif cfg.measurement_file:
            measurement = read_measurement_csv(cfg.measurement_file)
        else:
            raise ValueError("need a ground truth or a measurement file")

    # line 6-10: initial guess
    sel = select_initial(table, measurement, threshold, cfg.lattice.select_mode)

    # line 11-12: chart of x_0
    chart = table.chart
    h0 = sel.point.h
    lw_spec = spec
    h_true = truth
    if isinstance(family, SimplexFamily):
        x0 = family.chart_coords(family.embed(family.point(h0, table.chart)))
        chart, h0 = x0.chart, x0.h
        lw_spec = family.compact_spec(chart)
        if truth is not None:
            h_true = family.chart_coords(family.embed(family.point(truth, table.chart)), chart).h
        notes.append("Landweber runs in the covering chart of x_0")

    # line 13-16: Landweber
    stop = StopRule(cfg.stop.tolerance, cfg.stop.max_iters, cfg.stop.divergence_factor)
    traj = landweber(family, op, N, h0, measurement, cfg.constants.mu_step, stop, chart, lw_spec, h_true)
    if traj.clamped:
        notes.append(f"{traj.clamped} iterates projected back onto K")

    x0_error = final_err = rate = None
    if truth is not None:
        x0_error = float(traj.errors[0])
        final_err = float(traj.chart_errors[-1])
        try:
            rate = rate_fit(traj, constants.alpha, constants.rho, constants.ell)
        except ValueError as exc:
            notes.append(f"rate fit skipped: {exc}")

    lattice_info = {
        "r": table.r,
        "points": len(table),
        "spacing": table.spacing,
        "tolerance": stop.tolerance,
        "max_iters": stop.max_iters,
    }
    final = ModelPoint(family.tag, traj.final, chart)
    return ReconstructionReport(
        family.describe(), op.kind, N, int(cfg.seed), constants, lattice_info, sel, chart, traj,
        final, None if truth is None else truth.tolist(), x0_error, final_err, rate, notes,
    )

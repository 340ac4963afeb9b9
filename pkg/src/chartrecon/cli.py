"""Command-line front end: ``chartrecon <verb> [options]``.

Exit codes:

=====  ==========================================================
0      success
1      reconstruction stopped at ``max_iters`` without converging
2      invalid input, configuration or parameters
3      unstable configuration (infinite constant, threshold unmet)
4      no lattice point met the initial-guess threshold
5      Landweber divergence detected
=====  ==========================================================
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import geometry
from .config import ConfigError, ExperimentConfig, load_config
from .forward import make_operator
from .measurement import format_float, write_measurement_csv
from .reconstruct import (
    Divergence,
    LatticeTooLarge,
    NoInitialGuess,
    ReconstructionError,
    acquire_constants,
    build_lattice,
    default_workers,
    reconstruct,
    save_table,
)
from .reporting import _cell, write_report
from .stabilitylab import (
    GridExhausted,
    counterexample_sin,
    counterexample_weight,
    empirical_stability,
    find_sufficient_N,
    projected_stability,
    weight_ratio_bound,
)

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_INVALID, EXIT_UNSTABLE, EXIT_NO_GUESS, EXIT_DIVERGED = 0, 1, 2, 3, 4, 5


class UsageError(ValueError):
    """Bad command-line parameters (exit code 2)."""


def _floats(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("seed must be an integer") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected an integer") from None
    if v < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return v


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML experiment configuration")
    common.add_argument("--seed", type=_seed, help="override the configured seed")
    common.add_argument("--workers", type=_positive_int, help="worker threads (default: $CHARTRECON_WORKERS or 1)")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--format", choices=("csv", "json"), help="report format")

    parser = _Parser(prog="chartrecon", description="Manifold-constrained reconstruction laboratory.")
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    p = sub.add_parser("symmdiff", parents=[common], help="symmetric-difference volumes and bi-Lipschitz check")
    p.add_argument("--shape", choices=("ball", "simplex"), default="ball")
    p.add_argument("--n", type=int, help="dimension (inferred from centres when omitted)")
    p.add_argument("--c1", type=_floats, help="first centre, comma separated")
    p.add_argument("--r1", type=float)
    p.add_argument("--c2", type=_floats)
    p.add_argument("--r2", type=float)
    p.add_argument("--v1", type=_floats, help="first simplex, vertex coordinates stacked vertex by vertex")
    p.add_argument("--v2", type=_floats)
    p.add_argument("--A", type=float, help="centre box half-width for the certificate")
    p.add_argument("--rho", type=float, help="smallest admissible radius")
    p.add_argument("--R", type=float, help="largest admissible radius")
    p.add_argument("--samples", type=_positive_int, default=10 ** 6)

    sub.add_parser("stability", parents=[common], help="empirical stability constants and exponents")
    sub.add_parser("find-n", parents=[common], help="smallest N meeting the projection-deficit threshold")
    sub.add_parser("reconstruct", parents=[common], help="run the global reconstruction pipeline")
    sub.add_parser("table", parents=[common], help="build and persist the offline lattice table")

    p = sub.add_parser("counterexample", parents=[common], help="instability witnesses")
    p.add_argument("--which", choices=("sin", "weight", "both"), default="both")
    p.add_argument("--k", type=_floats, default=[1, 2, 5, 10, 100, 1000], help="indices for the sine example")
    p.add_argument("--t", type=_floats, default=[0.2, 0.1, 0.05, 0.025], help="parameters for the weight example")
    p.add_argument("--alpha", type=_floats, default=[0.5, 1.0])
    return parser


# ---------------------------------------------------------------- helpers


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    cfg.command = args.verb
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    elif cfg.workers == 1:
        cfg.workers = default_workers()
    if args.out is not None:
        cfg.output.dir = args.out
    if args.format is not None:
        cfg.output.format = args.format
    return cfg.validate()


def _outdir(cfg) -> Path:
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(obj, out: Path, stem: str, fmt: str) -> Path:
    path = out / f"{stem}.{fmt}"
    write_report(obj, path, fmt)
    return path


def _write_csv(rows: list, path: Path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")


# ---------------------------------------------------------------- verbs


def cmd_symmdiff(args) -> int:
    fmt = args.format or "csv"
    workers = args.workers or default_workers()
    seed = 0 if args.seed is None else args.seed
    if args.shape == "ball":
        if None in (args.c1, args.r1, args.c2, args.r2):
            raise UsageError("ball mode needs --c1 --r1 --c2 --r2")
        b1 = geometry.BallParams(args.c1, args.r1)
        b2 = geometry.BallParams(args.c2, args.r2)
        n = len(args.c1) if args.n is None else args.n
        exact = geometry.ball_symmdiff_exact(b1, b2, n)
        mc, se = geometry.ball_symmdiff_montecarlo(b1, b2, n, args.samples, seed, workers)
        row = {"shape": "ball", "n": n, "exact": exact, "mc": mc, "stderr": se, "samples": args.samples, "seed": seed}
        if None not in (args.A, args.rho, args.R):
            rep = geometry.bilip_certify(b1, b2, args.A, args.rho, args.R, n)
            row.update({f"bound_{k}": v for k, v in rep.as_dict().items()})
    else:
        if args.v1 is None or args.v2 is None:
            raise UsageError("simplex mode needs --v1 and --v2")
        n = args.n if args.n is not None else int(round((np.sqrt(1 + 4 * len(args.v1)) - 1) / 2))
        if len(args.v1) != n * (n + 1) or len(args.v2) != n * (n + 1):
            raise UsageError("simplex vertices must have n (n + 1) coordinates")
        v1 = np.asarray(args.v1).reshape(n + 1, n).T
        v2 = np.asarray(args.v2).reshape(n + 1, n).T
        mc, se = geometry.simplex_symmdiff_montecarlo(v1, v2, args.samples, seed, workers)
        exact = geometry.simplex_symmdiff(v1, v2, n) if n == 2 else float("nan")
        lip = geometry.simplex_lipschitz_constant(n, max(
            geometry.SimplexParams(v1).max_edge(), geometry.SimplexParams(v2).max_edge()))
        dist = geometry.triangle_norm(v1 - v2)
        row = {"shape": "simplex", "n": n, "exact": exact, "mc": mc, "stderr": se, "samples": args.samples,
               "seed": seed, "vertex_distance": dist, "lipschitz_bound": lip * dist}
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _emit(row, out, "symmdiff", fmt)
    if fmt == "json":
        from .reporting import to_json

        sys.stdout.write(to_json(row))
    else:
        keys = list(row)
        sys.stdout.write(",".join(keys) + "\n")
        sys.stdout.write(",".join(_cell(row[k]) for k in keys) + "\n")
    return EXIT_OK


def cmd_stability(args) -> int:
    cfg = _config(args)
    family = cfg.family.build()
    op = make_operator(cfg.operator)
    spec = family.compact_spec()
    rep = empirical_stability(family, op, spec, alpha=cfg.alpha, pairs=cfg.pairs, seed=cfg.seed)
    proj = projected_stability(family, op, spec, cfg.N, alpha=cfg.alpha, pairs=cfg.pairs, seed=cfg.seed)
    out = _outdir(cfg)
    doc = {"config": cfg.to_dict(), "unprojected": rep.as_dict(), "projected": proj.as_dict()}
    path = _emit(doc, out, "stability", cfg.output.format)
    print(f"C_hat={format_float(rep.C_hat)} alpha_hat={format_float(rep.alpha_hat)} "
          f"C_hat_N{cfg.N}={format_float(proj.C_hat)} -> {path}")
    return EXIT_OK if (rep.stable and proj.stable) else EXIT_UNSTABLE


def cmd_find_n(args) -> int:
    cfg = _config(args)
    family = cfg.family.build()
    op = make_operator(cfg.operator)
    spec = family.compact_spec()
    if cfg.constants.C is not None:
        C, source = cfg.constants.C, "config"
    else:
        C = empirical_stability(family, op, spec, alpha=cfg.alpha, pairs=cfg.pairs, seed=cfg.seed).C_hat
        source = "empirical"
    delta = cfg.delta if cfg.delta is not None else (cfg.constants.delta_KM or spec.delta_KM)
    out = _outdir(cfg)
    doc = {"config": cfg.to_dict(), "C": C, "C_source": source, "delta": delta}
    try:
        scan = find_sufficient_N(family, op, spec, C, delta, cfg.N_grid, cfg.deficit_count, cfg.seed)
    except GridExhausted as exc:
        doc.update({"N_star": None, "threshold": exc.threshold, "grid": exc.grid, "deficits": exc.curve})
        _emit(doc, out, "find_n", cfg.output.format)
        print(str(exc), file=sys.stderr)
        return EXIT_UNSTABLE
    doc.update(scan.as_dict())
    path = _emit(doc, out, "find_n", cfg.output.format)
    print(f"N*={scan.N_star} threshold={format_float(scan.threshold)} -> {path}")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    cfg = _config(args)
    out = _outdir(cfg)
    try:
        rep = reconstruct(cfg)
    except Divergence as exc:
        if exc.trajectory is not None and cfg.output.trajectory_csv:
            _write_csv(exc.trajectory.csv_rows(), out / "trajectory.csv")
        raise
    _emit(rep.as_dict(), out, "reconstruction", cfg.output.format)
    if cfg.output.trajectory_csv:
        _write_csv(rep.trajectory.csv_rows(), out / "trajectory.csv")
    if cfg.truth is not None:
        from .measurement import measured_forward

        family = cfg.family.build()
        write_measurement_csv(measured_forward(make_operator(cfg.operator), family, cfg.truth, cfg.N), out / "measurement.csv")
    print(f"termination={rep.trajectory.termination} iterations={rep.trajectory.iterations} "
          f"final={','.join(format_float(x) for x in rep.final.coords)}")
    return EXIT_OK if rep.converged else EXIT_NOT_CONVERGED


def cmd_table(args) -> int:
    cfg = _config(args)
    family = cfg.family.build()
    op = make_operator(cfg.operator)
    spec = family.compact_spec()
    consts = acquire_constants(cfg, family, op, spec)
    table = build_lattice(family, spec, consts.radius, cfg.N, op, cfg.lattice.max_points, cfg.seed, cfg.workers)
    out = _outdir(cfg)
    path = out / "lattice_table.csv"
    save_table(table, path)
    print(f"{len(table)} points, r={format_float(table.r)} -> {path}")
    return EXIT_OK


def cmd_counterexample(args) -> int:
    fmt = args.format or "csv"
    rows = []
    if args.which in ("sin", "both"):
        ks = [int(k) for k in args.k]
        if any(k < 1 or k != kk for k, kk in zip(ks, args.k)):
            raise UsageError("k values must be positive integers")
        for k, v in zip(ks, counterexample_sin(ks)):
            rows.append({"example": "sin", "param": float(k), "alpha": float("nan"), "value": float(v),
                         "reference": 1.0 / (k * np.pi)})
    if args.which in ("weight", "both"):
        for a in args.alpha:
            if not 0 < a <= 1:
                raise UsageError("alpha must lie in (0, 1]")
            if any(not 0 < t < 1 for t in args.t):
                raise UsageError("t values must lie in (0, 1)")
            for t, v in zip(args.t, counterexample_weight(args.t, a)):
                rows.append({"example": "weight", "param": float(t), "alpha": float(a), "value": float(v),
                             "reference": weight_ratio_bound(t, a)})
    if fmt == "json":
        from .reporting import to_json

        text = to_json(rows)
    else:
        head = "example,param,alpha,value,reference"
        text = "\n".join([head] + [
            ",".join([r["example"]] + [format_float(r[k]) for k in ("param", "alpha", "value", "reference")])
            for r in rows]) + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"counterexample.{fmt}").write_text(text, encoding="ascii")
    sys.stdout.write(text)
    return EXIT_OK


_VERBS = {
    "symmdiff": cmd_symmdiff,
    "stability": cmd_stability,
    "find-n": cmd_find_n,
    "reconstruct": cmd_reconstruct,
    "table": cmd_table,
    "counterexample": cmd_counterexample,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _VERBS[args.verb](args)
    except (ConfigError, UsageError, LatticeTooLarge) as exc:
        print(f"chartrecon {args.verb}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NoInitialGuess as exc:
        print(f"chartrecon {args.verb}: {exc}", file=sys.stderr)
        return EXIT_NO_GUESS
    except Divergence as exc:
        print(f"chartrecon {args.verb}: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except ReconstructionError as exc:
        print(f"chartrecon {args.verb}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, OSError) as exc:
        print(f"chartrecon {args.verb}: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

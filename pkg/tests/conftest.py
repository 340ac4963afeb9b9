from __future__ import annotations

import time
from typing import NamedTuple

import pytest

from chartrecon.forward import INTEGRATION
from chartrecon.manifolds import IntervalFamily


@pytest.fixture(scope="session")
def interval_family():
    return IntervalFamily(eps=0.1)


@pytest.fixture(scope="session")
def interval_spec(interval_family):
    return interval_family.compact_spec()


@pytest.fixture(scope="session")
def integration():
    return INTEGRATION


class Pipeline(NamedTuple):
    cfg: object
    constants: object
    table: object
    offline_seconds: float


@pytest.fixture(scope="session")
def interval_pipeline():
    """Constants and offline table for the integration problem on intervals.

    ``L_FK = 1`` is the analytic bound ``||F x - F y||_2 <= ||x - y||_1``;
    every other constant is estimated.  Building the table takes most of a
    minute, so it is shared by every test in the session.
    """
    from chartrecon.config import ExperimentConfig
    from chartrecon.forward import make_operator
    from chartrecon.reconstruct import acquire_constants, build_lattice

    start = time.perf_counter()
    cfg = ExperimentConfig.from_dict(
        {"family": {"tag": "interval", "eps": 0.1}, "operator": "integration", "N": 16, "constants": {"L_FK": 1.0}}
    )
    family = cfg.family.build()
    op = make_operator(cfg.operator)
    spec = family.compact_spec()
    constants = acquire_constants(cfg, family, op, spec)
    table = build_lattice(family, spec, constants.radius, cfg.N, op, cfg.lattice.max_points, cfg.seed)
    return Pipeline(cfg, constants, table, time.perf_counter() - start)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

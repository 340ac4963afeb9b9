"""Chart-based reconstruction on finite-dimensional manifolds.

Submodules: :mod:`funcspace` (function representations and norms),
:mod:`geometry` (symmetric-difference volumes), :mod:`manifolds` (parametric
families and compact sets), :mod:`forward` (forward operators),
:mod:`measurement` (Fejer measurements), :mod:`stabilitylab` (empirical
constants), :mod:`reconstruct` (the reconstruction pipeline) and :mod:`cli`.
"""
from .config import ExperimentConfig, load_config
from .forward import IDENTITY, INTEGRATION, apply_forward, make_operator, multiplication
from .manifolds import ModelPoint, make_family, sample_compact
from .measurement import Measurement, measured_forward, measured_jacobian, project_fejer
from .reconstruct import (
    LatticeTable,
    ReconstructionReport,
    build_lattice,
    landweber,
    lattice_radius,
    rate_fit,
    reconstruct,
    select_initial,
)
from .stabilitylab import empirical_stability, find_sufficient_N, projected_stability

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig",
    "load_config",
    "IDENTITY",
    "INTEGRATION",
    "apply_forward",
    "make_operator",
    "multiplication",
    "ModelPoint",
    "make_family",
    "sample_compact",
    "Measurement",
    "measured_forward",
    "measured_jacobian",
    "project_fejer",
    "LatticeTable",
    "ReconstructionReport",
    "build_lattice",
    "landweber",
    "lattice_radius",
    "rate_fit",
    "reconstruct",
    "select_initial",
    "empirical_stability",
    "find_sufficient_N",
    "projected_stability",
]

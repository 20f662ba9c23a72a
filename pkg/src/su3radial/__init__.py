"""Radial entire solutions of the self-dual SU(3) Chern-Simons system: shooting,
classification and conformance diagnostics."""
from __future__ import annotations

from .classifier import AsymptoticFit, Classification, ClassifyTolerances, Kind, classify
from .diagnostics import DiagnosticsReport, diagnose
from .integrator import IntegrateOpts, StopReason, Trajectory, certify_blowup, integrate, integrate_scalar
from .model import Params, State
from .omega import (
    BadBracket,
    BadCenter,
    BoundaryPoint,
    GridSpec,
    OmegaMap,
    ShootOpts,
    bisect_boundary,
    openness_probe,
    scalar_boundary,
    scalar_oracle,
    scan,
    shoot,
)
from .seed import InitialData, SeedState, scalar_seed, seed

__all__ = [
    "AsymptoticFit", "BadBracket", "BadCenter", "BoundaryPoint", "Classification", "ClassifyTolerances",
    "DiagnosticsReport", "GridSpec", "InitialData", "IntegrateOpts", "Kind", "OmegaMap", "Params",
    "SeedState", "ShootOpts", "State", "StopReason", "Trajectory", "bisect_boundary", "certify_blowup",
    "classify", "diagnose", "integrate", "integrate_scalar", "openness_probe", "scalar_boundary",
    "scalar_oracle", "scalar_seed", "scan", "seed", "shoot",
]

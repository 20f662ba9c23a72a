"""Stable CSV and JSON renderings of trajectories, maps and boundary points."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .classifier import AsymptoticFit, Classification
from .diagnostics import pohozaev_residuals
from .integrator import Trajectory
from .omega import BoundaryPoint, OmegaMap, PointResult

TRAJECTORY_COLUMNS = ("r", "t", "u", "v", "ru_r", "rv_r", "f1", "f2", "pohozaev_residual")
OMEGA_COLUMNS = ("alpha1", "alpha2", "kind", "beta1", "beta2", "residual")
DEFAULT_CHECKPOINTS = 200
OMEGA_LEGEND = "NonTopological means classified NonTopological at the working horizon"


def fmt(x: float | None) -> str:
    """17 significant digits in scientific notation; missing values print as nan."""
    if x is None:
        return "nan"
    return f"{float(x):.16e}"


def jsonable(x: Any) -> Any:
    """Replace non-finite floats by None and numpy scalars by Python ones."""
    if isinstance(x, dict):
        return {k: jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if hasattr(x, "value") and isinstance(getattr(x, "value"), str):
        return x.value
    return x


def dumps(obj: Any) -> str:
    return json.dumps(jsonable(obj), indent=2, ensure_ascii=False) + "\n"


def write_text(path: str | Path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="")


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def trajectory_table(traj: Trajectory, count: int = DEFAULT_CHECKPOINTS) -> np.ndarray:
    """Rows (r, t, u, v, r u_r, r v_r, f1, f2, residual) at ``count`` log-spaced radii."""
    t0, t1 = traj.t_range
    tg = np.linspace(t0, t1, count) if t1 > t0 else np.array([t0])
    vals = traj.evaluate(tg)
    u, v = vals[:, 0], vals[:, 1]
    a = np.exp(u) - 2.0 * np.exp(2.0 * u) + np.exp(u + v)
    b = np.exp(v) - 2.0 * np.exp(2.0 * v) + np.exp(u + v)
    res = pohozaev_residuals(traj, tg)
    return np.column_stack([np.exp(tg), tg, u, v, vals[:, 2], vals[:, 3], a, b, res])


def trajectory_csv(traj: Trajectory, count: int = DEFAULT_CHECKPOINTS) -> str:
    table = trajectory_table(traj, count)
    return _csv_text(TRAJECTORY_COLUMNS, ([fmt(x) for x in row] for row in table))


def fit_dict(fit: AsymptoticFit | None) -> dict | None:
    if fit is None:
        return None
    return {
        "beta1": fit.beta1,
        "beta2": fit.beta2,
        "intercept1": fit.intercept1,
        "intercept2": fit.intercept2,
        "residual": fit.residual,
        "window_t": list(fit.window),
        "endpoint_beta1": fit.endpoint_beta1,
        "endpoint_beta2": fit.endpoint_beta2,
        "flagged": fit.flagged,
    }


def classification_dict(cls: Classification) -> dict:
    return {"kind": cls.kind.value, "reason": cls.reason, "fit": fit_dict(cls.fit)}


def _point_row(pt: PointResult) -> list[str]:
    fit = pt.classification.fit
    b1 = b2 = res = None
    if fit is not None:
        b1, b2, res = fit.beta1, fit.beta2, fit.residual
    return [fmt(pt.alpha.alpha1), fmt(pt.alpha.alpha2), pt.kind.value, fmt(b1), fmt(b2), fmt(res)]


def omega_csv(omega: OmegaMap) -> str:
    return _csv_text(OMEGA_COLUMNS, (_point_row(p) for p in omega.points))


def omega_dict(omega: OmegaMap) -> dict:
    g = omega.grid
    return {
        "legend": OMEGA_LEGEND,
        "params": {"n1": omega.params.n1, "n2": omega.params.n2},
        "grid": {
            "alpha1_range": list(g.alpha1_range),
            "alpha2_range": list(g.alpha2_range),
            "resolution": list(g.resolution),
        },
        "counts": {k.value: n for k, n in omega.counts().items()},
        "points": [
            {
                "alpha1": p.alpha.alpha1,
                "alpha2": p.alpha.alpha2,
                **classification_dict(p.classification),
                "rerun": p.rerun,
                "diagnostics": None if p.report is None else p.report.to_dict(),
            }
            for p in omega.points
        ],
    }


def boundary_dict(bp: BoundaryPoint) -> dict:
    betas = bp.betas
    return {
        "alpha": list(bp.alpha.as_tuple()),
        "bracket_width": bp.bracket_width,
        "inside_kind": bp.inside_kind.value,
        "outside_kind": bp.outside_kind.value,
        "boundary_kind": bp.boundary_kind.value,
        "betas": None if betas is None else list(betas),
        "anomaly": bp.anomaly,
        "classification": classification_dict(bp.classification),
        "midpoint_classification": classification_dict(bp.midpoint_classification),
        "shadow": {
            "score": bp.shadow.score,
            "t_linger": bp.shadow.t_linger,
            "t_split": bp.shadow.t_split,
            "divergent_slope": bp.shadow.divergent_slope,
        },
    }

from __future__ import annotations

import numpy as np
import pytest

from su3radial.integrator import IntegrateOpts, StopReason, Trajectory
from su3radial.model import Params

ACCEPTANCE_LINES: list[str] = []


def synthetic_trajectory(
    t,
    u,
    v,
    p=None,
    q=None,
    stop: StopReason = StopReason.REACHED_T_MAX,
    params: Params | None = None,
) -> Trajectory:
    """Trajectory from samples with cubic Hermite dense output (no integration)."""
    t = np.asarray(t, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    p = np.gradient(u, t) if p is None else np.asarray(p, dtype=float)
    q = np.gradient(v, t) if q is None else np.asarray(q, dtype=float)
    y = np.column_stack([u, v, p, q])
    # derivative of (u, v, p, q) in t; p, q themselves are differentiated numerically
    dy = np.column_stack([p, q, np.gradient(p, t), np.gradient(q, t)])
    h = np.diff(t)[:, None]
    delta = y[1:] - y[:-1]
    c2 = h * dy[:-1] - delta
    c3 = delta - h * dy[1:] - c2
    dense = np.stack([y[:-1], delta, c2, c3, np.zeros_like(delta)], axis=1)
    return Trajectory(
        params=params or Params(),
        alpha=None,
        t=t,
        y=y,
        dense=dense,
        events=(),
        stop=stop,
        opts=IntegrateOpts(),
    )


@pytest.fixture
def synth():
    return synthetic_trajectory


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

"""Quantitative conformance checks of computed trajectories.

Integrals of the form ``int s * phi(u, v) ds`` are evaluated in t = ln r as
``int e^{2t} phi dt`` by composite 5-point Gauss-Legendre on the dense
output.  Panel edges are a uniform grid in t merged with the accepted step
points (the interpolant is only piecewise smooth across steps).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .classifier import AsymptoticFit, Classification, Kind, classify
from .integrator import EventKind, OutOfRange, StopReason, Trajectory
from .model import LOG_HALF, Params

CHECKPOINTS = 10
PANEL_WIDTH = 0.02
_GL_X, _GL_W = np.polynomial.legendre.leggauss(5)


class WrongKind(ValueError):
    pass


def _kernels(t: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """Columns e^{2t} f1, e^{2t} f2, e^{2t} F at the given points."""
    u, v = vals[:, 0], vals[:, 1]
    w = 2.0 * t
    a = np.exp(w + u) - 2.0 * np.exp(w + 2.0 * u) + np.exp(w + u + v)
    b = np.exp(w + v) - 2.0 * np.exp(w + 2.0 * v) + np.exp(w + u + v)
    pot = (
        np.exp(w + u) - np.exp(w + 2.0 * u) + np.exp(w + u + v)
        + np.exp(w + v) - np.exp(w + 2.0 * v)
    )
    return np.column_stack([a, b, pot])


def cumulative_integrals(traj: Trajectory, t_points, panel_width: float = PANEL_WIDTH) -> np.ndarray:
    """``int_{t0}^{t} e^{2tau} (f1, f2, F) dtau`` at each requested t, shape (n, 3)."""
    tp = np.atleast_1d(np.asarray(t_points, dtype=float))
    t0, t1 = traj.t_range
    if tp.size and (tp.min() < t0 - 1e-12 or tp.max() > t1 + 1e-12):
        raise OutOfRange("integration point outside trajectory range")
    tp = np.clip(tp, t0, t1)
    n_uniform = max(2, int(math.ceil((t1 - t0) / panel_width)) + 1)
    edges = np.unique(np.concatenate([np.linspace(t0, t1, n_uniform), traj.t, tp]))
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    nodes = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    vals = traj.evaluate(nodes)
    k = _kernels(nodes, vals).reshape(len(a), len(_GL_X), 3)
    panels = np.einsum("pnk,n->pk", k, _GL_W) * half[:, None]
    cum = np.vstack([np.zeros((1, 3)), np.cumsum(panels, axis=0)])
    idx = np.searchsorted(edges, tp)
    return cum[idx]


def checkpoint_times(traj: Trajectory, count: int = CHECKPOINTS) -> np.ndarray:
    t0, t1 = traj.t_range
    return np.linspace(t0, t1, count + 1)[1:]


def _seed_segment(traj: Trajectory) -> float | None:
    """``int_0^{r0} s F ds`` from the leading behaviour ``e^u ~ r^{2N1} e^{alpha1}``."""
    if traj.alpha is None or traj.seed is None:
        return None
    n1, n2 = traj.params.n1, traj.params.n2
    a1, a2 = traj.alpha.alpha1, traj.alpha.alpha2
    r0 = math.exp(traj.t[0])
    total = 0.0
    for coeff, i, j in ((1, 1, 0), (-1, 2, 0), (1, 1, 1), (1, 0, 1), (-1, 0, 2)):
        m = i * n1 + j * n2
        total += coeff * math.exp(i * a1 + j * a2) * r0 ** (2 + 2 * m) / (2 + 2 * m)
    return total


def _pohozaev_sides(traj: Trajectory, t_points) -> tuple[np.ndarray, np.ndarray]:
    tp = np.atleast_1d(np.asarray(t_points, dtype=float))
    vals = traj.evaluate(tp)
    u, v, p, q = vals.T
    pot = _kernels(tp, vals)[:, 2]
    lhs = p * p + p * q + q * q + 3.0 * pot
    integral = cumulative_integrals(traj, tp)[:, 2]
    s0 = _seed_segment(traj)
    if s0 is None:
        # no singular data available: use the identity relative to the first sample
        y0 = traj.y[0]
        pot0 = _kernels(traj.t[:1], traj.y[:1])[0, 2]
        base = y0[2] ** 2 + y0[2] * y0[3] + y0[3] ** 2 + 3.0 * pot0
        rhs = 6.0 * integral + base
    else:
        rhs = 6.0 * (s0 + integral) + traj.params.pohozaev_constant
    return lhs, rhs


def pohozaev_residuals(traj: Trajectory, t_points) -> np.ndarray:
    lhs, rhs = _pohozaev_sides(traj, t_points)
    return np.abs(lhs - rhs) / (1.0 + np.abs(rhs))


def pohozaev_residual(traj: Trajectory, r: float) -> float:
    """Relative Pohozaev residual |LHS - RHS| / (1 + |RHS|) at radius ``r``."""
    if not r > 0:
        raise OutOfRange("radius must be positive")
    return float(pohozaev_residuals(traj, [math.log(r)])[0])


def identity_residuals(traj: Trajectory, t_points=None) -> tuple[float, float, float]:
    """Drift of p + 2q + 3 int s f2, 2p + q + 3 int s f1 and p - q - 3 int s (f2 - f1).

    Each drift is scaled by ``1 + |terms|`` at the checkpoint, so cancellation
    between large terms is measured relative to their size.
    """
    tp = checkpoint_times(traj) if t_points is None else np.atleast_1d(np.asarray(t_points, float))
    tp = np.concatenate([[traj.t[0]], tp])
    vals = traj.evaluate(tp)
    p, q = vals[:, 2], vals[:, 3]
    c = cumulative_integrals(traj, tp)
    c1, c2 = c[:, 0], c[:, 1]
    out = []
    for value, scale in (
        (p + 2 * q + 3 * c2, np.abs(p) + 2 * np.abs(q) + 3 * np.abs(c2)),
        (2 * p + q + 3 * c1, 2 * np.abs(p) + np.abs(q) + 3 * np.abs(c1)),
        (p - q - 3 * (c2 - c1), np.abs(p) + np.abs(q) + 3 * np.abs(c2 - c1)),
    ):
        drift = np.abs(value[1:] - value[0]) / (1.0 + scale[1:])
        out.append(float(drift.max()) if drift.size else 0.0)
    return tuple(out)


def intersection_census(traj: Trajectory) -> tuple[int, float | None]:
    events = traj.events_of(EventKind.INTERSECTION)
    return len(events), (events[-1].t if events else None)


def intersections_after(traj: Trajectory, r: float) -> int:
    t = math.log(r)
    return sum(1 for e in traj.events_of(EventKind.INTERSECTION) if e.t > t)


def apriori_bound(traj: Trajectory, kind: Kind | Classification | None = None) -> float | None:
    """Smallest sampled r beyond which max(u, v) < log 1/2 through the horizon.

    Topological trajectories tend to 0 > log 1/2, so for them (and for the
    trivial solution) the radius returned is where both components become
    nondecreasing for good, the regime in which they increase to 0.
    """
    if traj.stop is StopReason.BLOW_UP:
        raise WrongKind("a priori bound is only defined for non-blow-up trajectories")
    if isinstance(kind, Classification):
        kind = kind.kind
    if kind is Kind.TOPOLOGICAL or traj.is_trivial():
        bad = np.nonzero((traj.p < 0) | (traj.q < 0))[0]
    else:
        bad = np.nonzero(np.maximum(traj.u, traj.v) >= LOG_HALF)[0]
    if bad.size == 0:
        return float(math.exp(traj.t[0]))
    last = int(bad[-1])
    if last == len(traj.t) - 1:
        return None
    return float(math.exp(traj.t[last + 1]))


def nontop_inequality(fit: AsymptoticFit, params: Params) -> float:
    """beta1^2 + beta1 beta2 + beta2^2 - 4(N1^2 + N1 N2 + N2^2) - 6(2(N1 + N2) + beta1 + beta2)."""
    b1, b2 = fit.beta1, fit.beta2
    lhs = b1 * b1 + b1 * b2 + b2 * b2 - params.pohozaev_constant
    return lhs - 6.0 * (2.0 * (params.n1 + params.n2) + b1 + b2)


def _f_values(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    u, v = y[:, 0], y[:, 1]
    a = np.exp(u) - 2.0 * np.exp(2.0 * u) + np.exp(u + v)
    b = np.exp(v) - 2.0 * np.exp(2.0 * v) + np.exp(u + v)
    return a, b


def f_positive_tail(traj: Trajectory, kind: Kind | Classification | None = None) -> float | None:
    """Smallest sampled r from which f1 > 0 and f2 > 0 hold through the horizon."""
    if kind is None:
        kind = classify(traj).kind
    if isinstance(kind, Classification):
        kind = kind.kind
    if kind in (Kind.TOPOLOGICAL, Kind.BLOW_UP):
        raise WrongKind(f"tail positivity is not claimed for {kind.value} trajectories")
    a, b = _f_values(traj.y)
    bad = np.nonzero((a <= 0) | (b <= 0))[0]
    if bad.size == 0:
        return float(math.exp(traj.t[0]))
    last = int(bad[-1])
    if last == len(traj.t) - 1:
        return None
    return float(math.exp(traj.t[last + 1]))


def condition_star_scan(traj: Trajectory, window_fraction: float = 0.3) -> bool:
    """One component decreasing to log 1/2 while the other decreases below -5."""
    if traj.stop is StopReason.BLOW_UP:
        return False
    t0, t1 = traj.t_range
    tail = traj.y[traj.t >= t1 - window_fraction * (t1 - t0)]
    if tail.shape[0] < 2:
        return False
    for a, b, pa, pb in ((0, 1, 2, 3), (1, 0, 3, 2)):
        if (
            np.all(tail[:, pa] < 0)
            and abs(tail[-1, a] - LOG_HALF) < 1e-3
            and np.all(tail[:, pb] < 0)
            and tail[-1, b] < -5.0
        ):
            return True
    return False


def decade_integrals(traj: Trajectory, decade: int = 0) -> tuple[float, float]:
    """``(int s f1 ds, int s f2 ds)`` over the decade ending ``decade`` decades before the horizon."""
    t0, t1 = traj.t_range
    hi = t1 - decade * math.log(10.0)
    lo = max(t0, hi - math.log(10.0))
    if hi <= t0:
        return 0.0, 0.0
    c = cumulative_integrals(traj, [lo, hi])
    return float(c[1, 0] - c[0, 0]), float(c[1, 1] - c[0, 1])


def tail_integrability(traj: Trajectory) -> tuple[float, float]:
    if traj.stop is StopReason.BLOW_UP:
        raise WrongKind("tail integrals are only defined for non-blow-up trajectories")
    return decade_integrals(traj, 0)


def negativity_ok(traj: Trajectory, slack: float = 1e-10) -> bool:
    if traj.is_trivial():
        return True
    rest = traj.y[1:, :2]
    return bool(np.all(rest < slack))


@dataclass(frozen=True)
class DiagnosticsReport:
    pohozaev_max_rel_residual: float
    identity_residuals: tuple[float, float, float]
    intersection_count: int
    last_intersection_t: float | None
    apriori_R0: float | None
    negativity_ok: bool
    f_positive_tail_t: float | None
    nontop_inequality_margin: float | None
    tail_integrals: tuple[float, float] | None
    condition_star_flag: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d["identity_residuals"] = list(self.identity_residuals)
        d["tail_integrals"] = None if self.tail_integrals is None else list(self.tail_integrals)
        return d


def diagnose(traj: Trajectory, classification: Classification | None = None) -> DiagnosticsReport:
    classification = classification or classify(traj)
    kind = classification.kind
    tp = checkpoint_times(traj)
    poh = float(pohozaev_residuals(traj, tp).max())
    ids = identity_residuals(traj, tp)
    count, last = intersection_census(traj)
    blown = traj.stop is StopReason.BLOW_UP
    r0 = None if blown else apriori_bound(traj, kind)
    f_tail = None
    if kind in (Kind.NON_TOPOLOGICAL, Kind.MIXED_U, Kind.MIXED_V):
        r_tail = f_positive_tail(traj, kind)
        f_tail = None if r_tail is None else math.log(r_tail)
    margin = None
    if kind is Kind.NON_TOPOLOGICAL and classification.fit is not None:
        margin = nontop_inequality(classification.fit, traj.params)
    return DiagnosticsReport(
        pohozaev_max_rel_residual=poh,
        identity_residuals=ids,
        intersection_count=count,
        last_intersection_t=last,
        apriori_R0=r0,
        negativity_ok=negativity_ok(traj),
        f_positive_tail_t=f_tail,
        nontop_inequality_margin=margin,
        tail_integrals=None if blown else tail_integrability(traj),
        condition_star_flag=condition_star_scan(traj),
    )

"""Trichotomy verdicts and asymptotic slopes for integrated trajectories."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .integrator import EventKind, StopReason, Trajectory
from .model import LOG_HALF


class Kind(str, Enum):
    TOPOLOGICAL = "Topological"
    NON_TOPOLOGICAL = "NonTopological"
    MIXED_U = "MixedULimit"
    MIXED_V = "MixedVLimit"
    BLOW_UP = "BlowUp"
    UNDETERMINED = "Undetermined"

    @property
    def is_mixed(self) -> bool:
        return self in (Kind.MIXED_U, Kind.MIXED_V)

    def mirrored(self) -> Kind:
        if self is Kind.MIXED_U:
            return Kind.MIXED_V
        if self is Kind.MIXED_V:
            return Kind.MIXED_U
        return self


class WindowTooShort(ValueError):
    pass


class NotTopological(ValueError):
    pass


@dataclass(frozen=True)
class ClassifyTolerances:
    top: float = 1e-6
    mixed: float = 1e-4
    beta_margin: float = 0.05
    window_fraction: float = 0.3
    tail_floor: float = -5.0
    beta_agreement: float = 0.05


@dataclass(frozen=True)
class AsymptoticFit:
    beta1: float
    beta2: float
    intercept1: float
    intercept2: float
    residual: float
    window: tuple[float, float]
    endpoint_beta1: float = math.nan
    endpoint_beta2: float = math.nan
    flagged: bool = False

    def mirrored(self) -> AsymptoticFit:
        return AsymptoticFit(
            self.beta2, self.beta1, self.intercept2, self.intercept1, self.residual,
            self.window, self.endpoint_beta2, self.endpoint_beta1, self.flagged,
        )


@dataclass(frozen=True)
class Classification:
    kind: Kind
    fit: AsymptoticFit | None = None
    reason: str = ""

    def mirrored(self) -> Classification:
        fit = self.fit.mirrored() if self.fit is not None else None
        return replace(self, kind=self.kind.mirrored(), fit=fit)


@dataclass(frozen=True)
class DecayEstimate:
    exponent: float
    identically_zero: bool = False
    window: tuple[float, float] | None = None


_FIT_POINTS = 256
_MIN_WINDOW = 0.5


def fit_log_slope(traj: Trajectory, window_fraction: float = 0.3, agreement: float = 0.05) -> AsymptoticFit:
    """Least-squares lines u ~ -beta1 t + c1 and v ~ -beta2 t + c2 over the tail."""
    if not 0.0 < window_fraction < 1.0:
        raise ValueError("window_fraction must lie in (0, 1)")
    t0, t1 = traj.t_range
    lo = t1 - window_fraction * (t1 - t0)
    if t1 - lo < _MIN_WINDOW or len(traj.t) < 2:
        raise WindowTooShort(f"tail window [{lo:.3f}, {t1:.3f}] shorter than {_MIN_WINDOW}")
    tg = np.linspace(lo, t1, _FIT_POINTS)
    vals = traj.evaluate(tg)
    A = np.vstack([tg, np.ones_like(tg)]).T
    coef, *_ = np.linalg.lstsq(A, vals[:, :2], rcond=None)
    resid = float(np.max(np.abs(A @ coef - vals[:, :2])))
    beta1, beta2 = -float(coef[0, 0]), -float(coef[0, 1])
    end = traj.y[-1]
    e1, e2 = -float(end[2]), -float(end[3])
    flagged = abs(beta1 - e1) > agreement or abs(beta2 - e2) > agreement
    return AsymptoticFit(
        beta1=beta1,
        beta2=beta2,
        intercept1=float(coef[1, 0]),
        intercept2=float(coef[1, 1]),
        residual=resid,
        window=(float(lo), float(t1)),
        endpoint_beta1=e1,
        endpoint_beta2=e2,
        flagged=flagged,
    )


def sum_slope_excluded(traj: Trajectory) -> bool:
    """True when r (u + v)_r fails to stay positive, which rules out a topological limit."""
    if traj.is_trivial():
        return False
    if traj.events_of(EventKind.SUM_SLOPE_ZERO):
        return True
    return bool(np.min(traj.p + traj.q) <= 0.0)


def classify(traj: Trajectory, tol: ClassifyTolerances | None = None) -> Classification:
    tol = tol or ClassifyTolerances()
    excluded = sum_slope_excluded(traj)
    note = "; r(u+v)_r <= 0 somewhere" if excluded else ""

    if traj.stop is StopReason.BLOW_UP:
        return Classification(Kind.BLOW_UP, None, f"{traj.blowup_note} blow-up")
    if traj.stop is StopReason.CONVERGED_TOPOLOGICAL:
        if excluded:
            return Classification(Kind.UNDETERMINED, None, "converged to (0,0) but" + note)
        return Classification(Kind.TOPOLOGICAL, None, "converged to (0,0)")

    t0, t1 = traj.t_range
    lo = t1 - tol.window_fraction * (t1 - t0)
    tail = traj.y[traj.t >= lo]
    if tail.shape[0] < 2:
        tail = traj.evaluate(np.linspace(lo, t1, 16))
    env = np.max(np.abs(tail[:, :2]), axis=1)
    if env.max() < tol.top and env[-1] <= env[0] + tol.top * 1e-3:
        if excluded:
            return Classification(Kind.UNDETERMINED, None, "tail near (0,0) but" + note)
        return Classification(Kind.TOPOLOGICAL, None, "tail within top tolerance of (0,0)")

    try:
        fit = fit_log_slope(traj, tol.window_fraction, tol.beta_agreement)
    except WindowTooShort:
        return Classification(Kind.UNDETERMINED, None, "horizon too short")

    threshold = 2.0 - tol.beta_margin
    if np.max(np.abs(tail[:, 0] - LOG_HALF)) < tol.mixed and fit.beta2 > threshold:
        return Classification(Kind.MIXED_U, fit, "u -> log 1/2, v -> -inf" + note)
    if np.max(np.abs(tail[:, 1] - LOG_HALF)) < tol.mixed and fit.beta1 > threshold:
        return Classification(Kind.MIXED_V, fit, "v -> log 1/2, u -> -inf" + note)

    end = traj.y[-1]
    if fit.beta1 > threshold and fit.beta2 > threshold and end[0] < tol.tail_floor and end[1] < tol.tail_floor:
        if fit.flagged:
            return Classification(Kind.UNDETERMINED, fit, "beta estimators disagree" + note)
        return Classification(Kind.NON_TOPOLOGICAL, fit, "both components -> -inf" + note)

    if 0.0 < min(fit.beta1, fit.beta2) <= threshold:
        reason = "slope between 0 and 2"
    elif end[0] >= tol.tail_floor or end[1] >= tol.tail_floor:
        reason = "tail not settled"
    else:
        reason = "unclassified tail"
    return Classification(Kind.UNDETERMINED, fit, reason + note)


def check_exponential_decay(
    traj: Trajectory,
    classification: Classification | None = None,
    entry: float = 0.1,
) -> DecayEstimate:
    """Slope of log max(|u|, |v|) against r over the decaying approach to (0, 0).

    The window starts where the envelope first drops below ``entry`` and ends
    at its minimum, which for a shooting trajectory is where the unstable mode
    takes over.
    """
    if classification is not None and classification.kind is not Kind.TOPOLOGICAL:
        raise NotTopological(f"trajectory classified {classification.kind.value}")
    if traj.is_trivial():
        return DecayEstimate(0.0, identically_zero=True)
    env = np.max(np.abs(traj.y[:, :2]), axis=1)
    inside = np.nonzero(env < entry)[0]
    if inside.size == 0:
        raise NotTopological("trajectory never approaches (0, 0)")
    i0 = int(inside[0])
    i1 = i0 + int(np.argmin(env[i0:]))
    if i1 - i0 < 1:
        raise NotTopological("no decaying approach to (0, 0)")
    tg = np.linspace(traj.t[i0], traj.t[i1], 200)
    vals = traj.evaluate(tg)
    e = np.max(np.abs(vals[:, :2]), axis=1)
    ok = e > 0
    r = np.exp(tg[ok])
    slope = float(np.polyfit(r, np.log(e[ok]), 1)[0])
    return DecayEstimate(slope, False, (float(tg[0]), float(tg[-1])))

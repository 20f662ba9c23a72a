"""Adaptive Dormand-Prince 5(4) integration in t = ln r with event localization.

The stepper is written out by hand (rather than wrapping ``solve_ivp``) so
that the blow-up ceiling, the exponent guard, early topological convergence
and the event dead-band behave exactly as the classifier expects.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from . import model
from .model import LOG_HALF, BlowUpGuard, Params, State
from .seed import InitialData, SeedState

DEFAULT_T_MAX = math.log(1e6)

# Dormand-Prince tableau (Hairer, Norsett & Wanner)
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_A71, _A73, _A74, _A75, _A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40,
)
_D1, _D3, _D4, _D5, _D6, _D7 = (
    -12715105075 / 11282082432,
    87487479700 / 32700410799,
    -10690763975 / 1880347072,
    701980252875 / 199316789632,
    -1453857185 / 822651844,
    69997945 / 29380423,
)

INTERSECTION_BAND = 1e-11
EVENT_TOL = 1e-10


class StopReason(str, Enum):
    REACHED_T_MAX = "ReachedTMax"
    BLOW_UP = "BlowUp"
    CONVERGED_TOPOLOGICAL = "ConvergedTopological"


class EventKind(str, Enum):
    INTERSECTION = "Intersection"
    F1_ZERO = "F1Zero"
    F2_ZERO = "F2Zero"
    U_EXTREMUM = "UExtremum"
    V_EXTREMUM = "VExtremum"
    U_LOG_HALF_CROSS = "ULogHalfCross"
    V_LOG_HALF_CROSS = "VLogHalfCross"
    SUM_SLOPE_ZERO = "SumSlopeZero"


def _f1(u, v):
    return math.exp(u) - 2.0 * math.exp(2.0 * u) + math.exp(u + v)


def _f2(u, v):
    return math.exp(v) - 2.0 * math.exp(2.0 * v) + math.exp(u + v)


_EVENT_FUNCS: tuple[tuple[EventKind, Callable, float], ...] = (
    (EventKind.INTERSECTION, lambda u, v, p, q: u - v, INTERSECTION_BAND),
    (EventKind.F1_ZERO, lambda u, v, p, q: _f1(u, v), 0.0),
    (EventKind.F2_ZERO, lambda u, v, p, q: _f2(u, v), 0.0),
    (EventKind.U_EXTREMUM, lambda u, v, p, q: p, 0.0),
    (EventKind.V_EXTREMUM, lambda u, v, p, q: q, 0.0),
    (EventKind.U_LOG_HALF_CROSS, lambda u, v, p, q: u - LOG_HALF, 0.0),
    (EventKind.V_LOG_HALF_CROSS, lambda u, v, p, q: v - LOG_HALF, 0.0),
    (EventKind.SUM_SLOPE_ZERO, lambda u, v, p, q: p + q, 0.0),
)


class StepUnderflow(RuntimeError):
    """The step controller went below the minimum step without a guard trip."""

    def __init__(self, message: str, trajectory: Trajectory | None = None):
        super().__init__(message)
        self.trajectory = trajectory


class OutOfRange(ValueError):
    pass


@dataclass(frozen=True)
class IntegrateOpts:
    t_max: float = DEFAULT_T_MAX
    rtol: float = 1e-10
    atol: float = 1e-12
    blowup_ceiling: float = 5.0
    converge_tol: float = 1e-12
    converge_after: float = math.log(1e3)
    h_min: float = 1e-14
    h_max: float = 1.0
    max_steps: int = 5_000_000
    stop_on_certified: bool = False

    def __post_init__(self) -> None:
        for name in ("rtol", "atol", "blowup_ceiling", "converge_tol", "h_min", "h_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def with_horizon(self, t_max: float) -> IntegrateOpts:
        return replace(self, t_max=t_max)


@dataclass(frozen=True)
class Event:
    kind: EventKind
    t: float
    state: State


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Accepted steps plus the Dormand-Prince dense-output coefficients.

    ``y`` has columns (u, v, p, q); ``dense[i]`` holds the five interpolation
    vectors of the step from ``t[i]`` to ``t[i + 1]``.
    """

    params: Params
    alpha: InitialData | None
    t: np.ndarray
    y: np.ndarray
    dense: np.ndarray
    events: tuple[Event, ...]
    stop: StopReason
    seed: SeedState | None = None
    certified_t: float | None = None
    opts: IntegrateOpts = field(default_factory=IntegrateOpts)
    scalar: bool = False

    @property
    def samples(self) -> list[State]:
        return [State(float(t), *map(float, row)) for t, row in zip(self.t, self.y)]

    @property
    def t_range(self) -> tuple[float, float]:
        return float(self.t[0]), float(self.t[-1])

    @property
    def u(self) -> np.ndarray:
        return self.y[:, 0]

    @property
    def v(self) -> np.ndarray:
        return self.y[:, 1]

    @property
    def p(self) -> np.ndarray:
        return self.y[:, 2]

    @property
    def q(self) -> np.ndarray:
        return self.y[:, 3]

    @property
    def blowup_note(self) -> str | None:
        if self.stop is not StopReason.BLOW_UP:
            return None
        return "certified" if self.certified_t is not None else "guard-only"

    def events_of(self, kind: EventKind) -> list[Event]:
        return [e for e in self.events if e.kind is kind]

    def is_trivial(self, tol: float = 1e-14) -> bool:
        return bool(np.max(np.abs(self.y)) <= tol)

    def evaluate(self, t_grid: Sequence[float] | np.ndarray) -> np.ndarray:
        """Dense-output values at ``t_grid`` as an array of shape (len, 4)."""
        tg = np.atleast_1d(np.asarray(t_grid, dtype=float))
        lo, hi = self.t_range
        span = max(1.0, abs(lo), abs(hi))
        if tg.size and (tg.min() < lo - 1e-12 * span or tg.max() > hi + 1e-12 * span):
            raise OutOfRange(f"requested t outside trajectory range [{lo}, {hi}]")
        tg = np.clip(tg, lo, hi)
        if len(self.t) == 1:
            return np.repeat(self.y[:1], tg.size, axis=0)
        idx = np.searchsorted(self.t, tg, side="right") - 1
        idx = np.clip(idx, 0, len(self.t) - 2)
        h = self.t[idx + 1] - self.t[idx]
        theta = ((tg - self.t[idx]) / h)[:, None]
        th1 = 1.0 - theta
        c = self.dense[idx]
        out = c[:, 0] + theta * (c[:, 1] + th1 * (c[:, 2] + theta * (c[:, 3] + th1 * c[:, 4])))
        exact = np.searchsorted(self.t, tg)
        exact = np.clip(exact, 0, len(self.t) - 1)
        hit = self.t[exact] == tg
        out[hit] = self.y[exact[hit]]
        return out

    def truncated(self, t_end: float) -> Trajectory:
        """Cut at the first accepted step at or after ``t_end``."""
        k = int(np.searchsorted(self.t, t_end, side="left"))
        k = min(max(k, 1), len(self.t) - 1)
        keep = k + 1
        t_last = float(self.t[k])
        return replace(
            self,
            t=self.t[:keep].copy(),
            y=self.y[:keep].copy(),
            dense=self.dense[:k].copy(),
            events=tuple(e for e in self.events if e.t <= t_last),
            stop=StopReason.REACHED_T_MAX,
        )


def certify_blowup(state: State | Sequence[float]) -> bool:
    """Finite-time blow-up sufficient conditions, checked for both orderings.

    (1) u = v > 0, u_r > 0 and (u - v)_r > 0;  (2) u > v, u > 0, u_r > 0.
    Signs of u_r equal signs of p = r u_r.
    """
    if len(state) == 5:
        state = state[1:]
    u, v, p, q = (float(x) for x in state)
    for a, b, pa, pb in ((u, v, p, q), (v, u, q, p)):
        if abs(a - b) < 1e-12 and a > 0 and pa > 0 and pa - pb > 0:
            return True
        if a > b and a > 0 and pa > 0:
            return True
    return False


def _system_view(y):
    return y


def _scalar_view(y):
    return (y[0], y[0], y[1], y[1])


def _system_rhs(t, y):
    return model.rhs_log(t, y)


def _scalar_rhs(t, y):
    return model.scalar_rhs_log(t, y[0], y[1])


class _Run:
    """Mutable state of one integration; produces a Trajectory."""

    def __init__(self, f, view, t0, y0, opts: IntegrateOpts):
        self.f = f
        self.view = view
        self.opts = opts
        self.ts = [t0]
        self.ys = [tuple(y0)]
        self.conts: list[tuple] = []
        self.events: list[Event] = []
        self.certified_t: float | None = None
        self.last_sign: list[float] = []
        self.last_t: list[float] = []
        uvpq = view(y0)
        for kind, g, band in _EVENT_FUNCS:
            val = g(*uvpq)
            self.last_sign.append(math.copysign(1.0, val) if abs(val) > band else 0.0)
            self.last_t.append(t0)
        if certify_blowup(uvpq):
            self.certified_t = t0

    def norm(self, err, y0, y1):
        opts = self.opts
        total = 0.0
        for e, a, b in zip(err, y0, y1):
            sc = opts.atol + opts.rtol * max(abs(a), abs(b))
            total += (e / sc) ** 2
        return math.sqrt(total / len(err))

    def initial_step(self, t0, y0, f0):
        opts = self.opts
        sc = [opts.atol + opts.rtol * abs(a) for a in y0]
        d0 = math.sqrt(sum((a / s) ** 2 for a, s in zip(y0, sc)) / len(y0))
        d1 = math.sqrt(sum((a / s) ** 2 for a, s in zip(f0, sc)) / len(y0))
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h0 = min(h0, opts.h_max, opts.t_max - t0)
        try:
            y1 = [a + h0 * b for a, b in zip(y0, f0)]
            f1 = self.f(t0 + h0, y1)
        except BlowUpGuard:
            return max(h0 * 1e-3, opts.h_min * 10)
        d2 = math.sqrt(sum(((b - a) / s) ** 2 for a, b, s in zip(f0, f1, sc)) / len(y0)) / h0
        if d1 <= 1e-15 and d2 <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** (1 / 5)
        return min(100 * h0, h1, opts.h_max, opts.t_max - t0)

    def dense_at(self, t):
        i = bisect.bisect_right(self.ts, t) - 1
        i = min(max(i, 0), len(self.conts) - 1)
        h = self.ts[i + 1] - self.ts[i]
        th = (t - self.ts[i]) / h
        th1 = 1.0 - th
        c0, c1, c2, c3, c4 = self.conts[i]
        return tuple(
            a + th * (b + th1 * (c + th * (d + th1 * e)))
            for a, b, c, d, e in zip(c0, c1, c2, c3, c4)
        )

    def locate(self, g, a, b, ga):
        """Bisection on the dense output for a sign change of g on [a, b]."""
        sa = math.copysign(1.0, ga)
        state = None
        tm = b
        for _ in range(200):
            tm = 0.5 * (a + b)
            uvpq = self.view(self.dense_at(tm))
            gm = g(*uvpq)
            state = (tm, uvpq)
            if gm == 0.0 or (abs(gm) < EVENT_TOL and b - a < 1e-13 * max(1.0, abs(tm))):
                break
            if b - a <= 4e-16 * max(1.0, abs(tm)):
                break
            if math.copysign(1.0, gm) == sa:
                a = tm
            else:
                b = tm
        tm, uvpq = state
        return tm, State(tm, *uvpq)

    def check_events(self, t1, y1):
        uvpq = self.view(y1)
        for i, (kind, g, band) in enumerate(_EVENT_FUNCS):
            val = g(*uvpq)
            if abs(val) <= band or val == 0.0:
                continue
            s = math.copysign(1.0, val)
            if self.last_sign[i] != 0.0 and s != self.last_sign[i]:
                te, st = self.locate(g, self.last_t[i], t1, self.last_sign[i])
                self.events.append(Event(kind, te, st))
            self.last_sign[i] = s
            self.last_t[i] = t1

    def finish(self, stop, params, alpha, seed_state, scalar) -> Trajectory:
        t = np.array(self.ts)
        y = np.array(self.ys, dtype=float)
        dense = np.array(self.conts, dtype=float).reshape(len(self.conts), 5, y.shape[1])
        if scalar:
            y = y[:, [0, 0, 1, 1]]
            dense = dense[:, :, [0, 0, 1, 1]]
        events = tuple(sorted(self.events, key=lambda e: (e.t, list(EventKind).index(e.kind))))
        return Trajectory(
            params=params,
            alpha=alpha,
            t=t,
            y=y,
            dense=dense,
            events=events,
            stop=stop,
            seed=seed_state,
            certified_t=self.certified_t,
            opts=self.opts,
            scalar=scalar,
        )

    def run(self) -> StopReason:
        f, opts = self.f, self.opts
        t = self.ts[0]
        y = self.ys[0]
        try:
            k1 = f(t, y)
        except BlowUpGuard:
            return StopReason.BLOW_UP
        if certify_blowup(self.view(y)):
            self.certified_t = t
            if opts.stop_on_certified:
                return StopReason.BLOW_UP
        if self._guard(y):
            return StopReason.BLOW_UP
        if t >= opts.t_max:
            return StopReason.REACHED_T_MAX
        h = self.initial_step(t, y, k1)
        rejected = False
        n = len(y)
        for _ in range(opts.max_steps):
            if h < opts.h_min:
                raise StepUnderflow(f"step size {h:.3e} below minimum at t={t:.12g}")
            t_new = t + h
            if t_new >= opts.t_max or opts.t_max - t_new < 1e-12 * h:
                t_new = opts.t_max
                h = t_new - t
            try:
                y2 = [y[i] + h * _A21 * k1[i] for i in range(n)]
                k2 = f(t + _C2 * h, y2)
                y3 = [y[i] + h * (_A31 * k1[i] + _A32 * k2[i]) for i in range(n)]
                k3 = f(t + _C3 * h, y3)
                y4 = [y[i] + h * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i]) for i in range(n)]
                k4 = f(t + _C4 * h, y4)
                y5 = [
                    y[i] + h * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
                    for i in range(n)
                ]
                k5 = f(t + _C5 * h, y5)
                y6 = [
                    y[i]
                    + h * (_A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i] + _A64 * k4[i] + _A65 * k5[i])
                    for i in range(n)
                ]
                k6 = f(t_new, y6)
                y7 = tuple(
                    y[i]
                    + h * (_A71 * k1[i] + _A73 * k3[i] + _A74 * k4[i] + _A75 * k5[i] + _A76 * k6[i])
                    for i in range(n)
                )
                k7 = f(t_new, y7)
            except (BlowUpGuard, OverflowError):
                h *= 0.2
                rejected = True
                continue
            err = [
                h * (_E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i] + _E6 * k6[i] + _E7 * k7[i])
                for i in range(n)
            ]
            en = self.norm(err, y, y7)
            if not math.isfinite(en):
                h *= 0.2
                rejected = True
                continue
            if en > 1.0:
                h *= max(0.2, 0.9 * en ** -0.2)
                rejected = True
                continue
            # accepted
            ydiff = [y7[i] - y[i] for i in range(n)]
            bspl = [h * k1[i] - ydiff[i] for i in range(n)]
            self.conts.append(
                (
                    tuple(y),
                    tuple(ydiff),
                    tuple(bspl),
                    tuple(ydiff[i] - h * k7[i] - bspl[i] for i in range(n)),
                    tuple(
                        h * (_D1 * k1[i] + _D3 * k3[i] + _D4 * k4[i] + _D5 * k5[i] + _D6 * k6[i] + _D7 * k7[i])
                        for i in range(n)
                    ),
                )
            )
            self.ts.append(t_new)
            self.ys.append(y7)
            t, y, k1 = t_new, y7, k7
            self.check_events(t, y)
            uvpq = self.view(y)
            if self.certified_t is None and certify_blowup(uvpq):
                self.certified_t = t
                if opts.stop_on_certified:
                    return StopReason.BLOW_UP
            if self._guard(y):
                return StopReason.BLOW_UP
            if t >= opts.t_max:
                return StopReason.REACHED_T_MAX
            if t >= opts.converge_after and all(abs(x) < opts.converge_tol for x in uvpq):
                return StopReason.CONVERGED_TOPOLOGICAL
            fac = 10.0 if en == 0.0 else min(10.0, max(0.2, 0.9 * en ** -0.2))
            if rejected:
                fac = min(fac, 1.0)
            rejected = False
            h = min(h * fac, opts.h_max)
        raise StepUnderflow(f"exceeded max_steps={opts.max_steps} at t={t:.12g}")

    def _guard(self, y) -> bool:
        u, v = self.view(y)[:2]
        if not all(math.isfinite(x) for x in y):
            return True
        return u > self.opts.blowup_ceiling or v > self.opts.blowup_ceiling


def _integrate(f, view, t0, y0, params, alpha, seed_state, opts, scalar) -> Trajectory:
    if not opts.t_max > t0:
        raise ValueError(f"t_max={opts.t_max} must exceed the start t0={t0}")
    run = _Run(f, view, t0, y0, opts)
    try:
        stop = run.run()
    except StepUnderflow as exc:
        stop_traj = run.finish(StopReason.REACHED_T_MAX, params, alpha, seed_state, scalar)
        raise StepUnderflow(str(exc), stop_traj) from None
    return run.finish(stop, params, alpha, seed_state, scalar)


def integrate(
    seed: SeedState | State,
    params: Params,
    opts: IntegrateOpts | None = None,
    alpha: InitialData | None = None,
) -> Trajectory:
    """Integrate the system from a seed (or an arbitrary State) out to ``opts.t_max``."""
    opts = opts or IntegrateOpts()
    if isinstance(seed, SeedState):
        t0, y0, seed_state = seed.t0, seed.y, seed
    else:
        t0, y0, seed_state = seed.t, (seed.u, seed.v, seed.p, seed.q), None
    return _integrate(_system_rhs, _system_view, t0, y0, params, alpha, seed_state, opts, False)


def integrate_scalar(
    seed: SeedState,
    n: float,
    opts: IntegrateOpts | None = None,
    alpha: float | None = None,
) -> Trajectory:
    """Integrate the diagonal reduction; the trajectory is stored with u = v, p = q."""
    opts = opts or IntegrateOpts()
    init = None if alpha is None else InitialData(alpha, alpha)
    return _integrate(
        _scalar_rhs, _scalar_view, seed.t0, (seed.u, seed.p), Params(n, n), init, seed, opts, True
    )


def resample(traj: Trajectory, t_grid: Sequence[float]) -> list[State]:
    values = traj.evaluate(t_grid)
    return [State(float(t), *map(float, row)) for t, row in zip(np.atleast_1d(t_grid), values)]

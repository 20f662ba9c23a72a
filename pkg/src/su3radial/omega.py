"""The set of non-topological initial data: grid scans, boundary bisection,
the scalar oracle and openness probes.

Membership is operational: a point belongs to the map's non-topological
region when its trajectory is classified NonTopological at the working
horizon.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .classifier import AsymptoticFit, Classification, ClassifyTolerances, Kind, classify
from .diagnostics import DiagnosticsReport, diagnose
from .integrator import IntegrateOpts, StepUnderflow, Trajectory, integrate, integrate_scalar
from .model import LOG_HALF, Params
from .seed import DEFAULT_ITERATIONS, DEFAULT_R0, InitialData, scalar_seed, seed


class BadBracket(ValueError):
    pass


class BadCenter(ValueError):
    pass


@dataclass(frozen=True)
class ShootOpts:
    r0: float = DEFAULT_R0
    iterations: int = DEFAULT_ITERATIONS
    integrate: IntegrateOpts = field(default_factory=IntegrateOpts)
    tolerances: ClassifyTolerances = field(default_factory=ClassifyTolerances)

    def doubled(self) -> ShootOpts:
        """Same options with the horizon t_max doubled."""
        t_max = self.integrate.t_max
        t0 = math.log(self.r0)
        new = 2.0 * t_max if t_max > 0 else t0 + 2.0 * (t_max - t0)
        return replace(self, integrate=self.integrate.with_horizon(new))


def shoot(params: Params, alpha: InitialData, opts: ShootOpts | None = None) -> tuple[Trajectory, Classification]:
    """Seed, integrate and classify one point of initial data."""
    opts = opts or ShootOpts()
    start = seed(params, alpha, opts.r0, opts.iterations)
    try:
        traj = integrate(start, params, opts.integrate, alpha=alpha)
    except StepUnderflow as exc:
        return exc.trajectory, Classification(Kind.UNDETERMINED, None, f"step underflow: {exc}")
    return traj, classify(traj, opts.tolerances)


def scalar_oracle(n: float, alpha: float, opts: ShootOpts | None = None) -> tuple[Trajectory, Classification]:
    """Integrate and classify the diagonal reduction u = v with N1 = N2 = n."""
    opts = opts or ShootOpts()
    start = scalar_seed(n, alpha, opts.r0, opts.iterations)
    try:
        traj = integrate_scalar(start, n, opts.integrate, alpha=alpha)
    except StepUnderflow as exc:
        return exc.trajectory, Classification(Kind.UNDETERMINED, None, f"step underflow: {exc}")
    return traj, classify(traj, opts.tolerances)


def shoot_with_rerun(
    params: Params, alpha: InitialData, opts: ShootOpts | None = None
) -> tuple[Trajectory, Classification, bool]:
    """:func:`shoot`, repeated once at doubled horizon when the verdict is Undetermined."""
    opts = opts or ShootOpts()
    traj, cls = shoot(params, alpha, opts)
    if cls.kind is not Kind.UNDETERMINED:
        return traj, cls, False
    traj, cls = shoot(params, alpha, opts.doubled())
    return traj, cls, True


# -- grid scan ---------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    alpha1_range: tuple[float, float] = (-8.0, 2.0)
    alpha2_range: tuple[float, float] = (-8.0, 2.0)
    resolution: tuple[int, int] = (41, 41)

    def __post_init__(self) -> None:
        n1, n2 = self.resolution
        if int(n1) != n1 or int(n2) != n2 or n1 < 2 or n2 < 2:
            raise ValueError(f"resolution must be integers >= 2, got {self.resolution}")
        for name in ("alpha1_range", "alpha2_range"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"{name} must be a nondegenerate finite interval, got {(lo, hi)}")

    @property
    def alpha1_values(self) -> np.ndarray:
        return np.linspace(*self.alpha1_range, int(self.resolution[0]))

    @property
    def alpha2_values(self) -> np.ndarray:
        return np.linspace(*self.alpha2_range, int(self.resolution[1]))

    def points(self) -> list[InitialData]:
        """Grid points, alpha1 varying slowest."""
        return [
            InitialData(float(a1), float(a2))
            for a1 in self.alpha1_values
            for a2 in self.alpha2_values
        ]

    def mirrored(self) -> GridSpec:
        return GridSpec(self.alpha2_range, self.alpha1_range, (self.resolution[1], self.resolution[0]))


@dataclass(frozen=True)
class PointResult:
    alpha: InitialData
    classification: Classification
    report: DiagnosticsReport | None = None
    rerun: bool = False

    @property
    def kind(self) -> Kind:
        return self.classification.kind


@dataclass(frozen=True, eq=False)
class OmegaMap:
    grid: GridSpec
    params: Params
    verdicts: np.ndarray
    points: tuple[PointResult, ...] = ()

    def __post_init__(self) -> None:
        if self.verdicts.shape != tuple(self.grid.resolution):
            raise ValueError("verdict matrix does not match the grid resolution")

    def counts(self) -> dict[Kind, int]:
        out = {k: 0 for k in Kind}
        for k in self.verdicts.ravel():
            out[k] += 1
        return out

    def fraction(self, kind: Kind) -> float:
        return self.counts()[kind] / self.verdicts.size

    def mirrored(self) -> OmegaMap:
        """The map the mirrored problem (N2, N1) over the mirrored grid should produce."""
        verdicts = np.vectorize(Kind.mirrored, otypes=[object])(self.verdicts.T)
        n1, n2 = self.grid.resolution
        order = [i * n2 + j for j in range(n2) for i in range(n1)]
        points = tuple(
            replace(
                self.points[k],
                alpha=self.points[k].alpha.swapped(),
                classification=self.points[k].classification.mirrored(),
            )
            for k in order
        ) if self.points else ()
        return OmegaMap(self.grid.mirrored(), self.params.swapped(), verdicts, points)


def _scan_point(task: tuple[Params, InitialData, ShootOpts, bool]) -> PointResult:
    params, alpha, opts, with_report = task
    traj, cls, rerun = shoot_with_rerun(params, alpha, opts)
    report = diagnose(traj, cls) if with_report else None
    return PointResult(alpha, cls, report, rerun)


def _default_workers() -> int:
    return os.cpu_count() or 1


def scan(
    params: Params,
    grid: GridSpec,
    opts: ShootOpts | None = None,
    workers: int | None = None,
    diagnostics: bool = True,
) -> OmegaMap:
    """Classify every grid point; Undetermined points are re-run once at doubled horizon.

    Each point is independent, so ``workers > 1`` farms them out to a process
    pool; results are assembled in grid order either way.
    """
    opts = opts or ShootOpts()
    tasks = [(params, a, opts, diagnostics) for a in grid.points()]
    workers = _default_workers() if workers is None else workers
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_scan_point, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        results = [_scan_point(t) for t in tasks]
    verdicts = np.empty(tuple(grid.resolution), dtype=object)
    verdicts.ravel()[:] = [r.kind for r in results]
    return OmegaMap(grid, params, verdicts, tuple(results))


# -- boundary bisection ------------------------------------------------------

SPLIT_TOL = 1e-3
LINGER_TOL = 0.05
_SHADOW_POINTS = 8192
_MAX_BISECTIONS = 200


@dataclass(frozen=True)
class Shadow:
    """What the boundary solution looks like before the shooting instability wins.

    ``t_split`` is where the trajectories on either side of the final bracket
    separate by ``SPLIT_TOL``; up to there the midpoint trajectory follows the
    boundary solution.  ``t_linger`` is where it comes closest to a
    topological or mixed end state, with ``score`` measuring that distance.
    """

    kind: Kind | None
    score: float
    t_linger: float
    t_split: float
    divergent_slope: float | None = None


def _scores(vals: np.ndarray) -> dict[Kind, np.ndarray]:
    u, v, p, q = vals.T
    top = np.max(np.abs(vals), axis=1)
    mix_u = np.where(v < LOG_HALF - 1.0, np.maximum(np.abs(u - LOG_HALF), np.abs(p)), np.inf)
    mix_v = np.where(u < LOG_HALF - 1.0, np.maximum(np.abs(v - LOG_HALF), np.abs(q)), np.inf)
    return {Kind.TOPOLOGICAL: top, Kind.MIXED_U: mix_u, Kind.MIXED_V: mix_v}


def shadow_analysis(
    inside: Trajectory,
    outside: Trajectory,
    middle: Trajectory,
    split_tol: float = SPLIT_TOL,
    linger_tol: float = LINGER_TOL,
) -> Shadow:
    t0 = max(inside.t[0], outside.t[0], middle.t[0])
    t1 = min(inside.t[-1], outside.t[-1], middle.t[-1])
    tg = np.linspace(t0, t1, _SHADOW_POINTS)
    a, b = inside.evaluate(tg), outside.evaluate(tg)
    gap = np.max(np.abs(a[:, :2] - b[:, :2]), axis=1)
    over = np.nonzero(gap > split_tol)[0]
    k_split = int(over[0]) if over.size else len(tg) - 1
    seg = middle.evaluate(tg[: k_split + 1])
    best_kind, best_score, best_k = None, math.inf, 0
    for kind, score in _scores(seg).items():
        k = int(np.argmin(score))
        if score[k] < best_score:
            best_kind, best_score, best_k = kind, float(score[k]), k
    t_split = float(tg[k_split])
    if best_score > linger_tol:
        return Shadow(None, best_score, float(tg[best_k]), t_split)
    slope = None
    if best_kind is Kind.MIXED_U:
        slope = -float(seg[-1, 3])
    elif best_kind is Kind.MIXED_V:
        slope = -float(seg[-1, 2])
    return Shadow(best_kind, best_score, float(tg[best_k]), t_split, slope)


def _shadow_classification(shadow: Shadow, t0: float) -> Classification:
    if shadow.kind is Kind.TOPOLOGICAL:
        fit = AsymptoticFit(0.0, 0.0, 0.0, 0.0, shadow.score, (t0, shadow.t_linger))
        return Classification(Kind.TOPOLOGICAL, fit, "lingers near (0,0) before splitting")
    beta = shadow.divergent_slope
    if shadow.kind is Kind.MIXED_U:
        fit = AsymptoticFit(0.0, beta, LOG_HALF, math.nan, shadow.score, (t0, shadow.t_split))
        return Classification(Kind.MIXED_U, fit, "u lingers near log 1/2 while v decreases")
    fit = AsymptoticFit(beta, 0.0, math.nan, LOG_HALF, shadow.score, (t0, shadow.t_split))
    return Classification(Kind.MIXED_V, fit, "v lingers near log 1/2 while u decreases")


@dataclass(frozen=True, eq=False)
class BoundaryPoint:
    alpha: InitialData
    bracket_width: float
    inside_kind: Kind
    outside_kind: Kind
    boundary_kind: Kind
    classification: Classification
    midpoint_classification: Classification
    shadow: Shadow
    anomaly: bool = False
    trajectory: Trajectory | None = None

    def shadow_trajectory(self) -> Trajectory:
        """Midpoint trajectory cut where it is closest to the boundary solution's end state."""
        if self.trajectory is None:
            raise ValueError("no trajectory stored")
        t_end = self.shadow.t_linger if self.boundary_kind is Kind.TOPOLOGICAL else self.shadow.t_split
        steps = self.trajectory.t
        k = max(1, int(np.searchsorted(steps, t_end, side="right")) - 1)
        return self.trajectory.truncated(float(steps[k]))

    @property
    def betas(self) -> tuple[float, float] | None:
        fit = self.classification.fit
        return None if fit is None else (fit.beta1, fit.beta2)


def _bisect(
    inside_at: Callable[[float], bool],
    point: Callable[[float], np.ndarray],
    tol: float,
    refine: bool,
) -> tuple[float, float]:
    """Shrink the parameter bracket [s_in, s_out] = [0, 1] until its image is narrower than tol.

    With ``refine`` the bisection continues to floating-point resolution; the
    longer the shadowing segment, the cleaner the boundary verdict.
    """
    s_in, s_out = 0.0, 1.0
    for _ in range(_MAX_BISECTIONS):
        width = float(np.linalg.norm(point(s_out) - point(s_in)))
        if width < tol and not refine:
            break
        mid = 0.5 * (s_in + s_out)
        pm = point(mid)
        if np.array_equal(pm, point(s_in)) or np.array_equal(pm, point(s_out)):
            break
        if inside_at(mid):
            s_in = mid
        else:
            s_out = mid
    return s_in, s_out


def bisect_boundary(
    params: Params,
    alpha_in: InitialData,
    alpha_out: InitialData,
    tol: float = 1e-6,
    opts: ShootOpts | None = None,
    refine: bool = True,
) -> BoundaryPoint:
    """Bisect the segment from a NonTopological point to a point outside the region."""
    opts = opts or ShootOpts()
    if not tol > 0:
        raise ValueError("tol must be positive")
    _, c_in = shoot(params, alpha_in, opts)
    _, c_out = shoot(params, alpha_out, opts)
    if c_in.kind is not Kind.NON_TOPOLOGICAL:
        raise BadBracket(f"inside endpoint classified {c_in.kind.value}, not NonTopological")
    if c_out.kind is Kind.NON_TOPOLOGICAL:
        raise BadBracket("outside endpoint is NonTopological")

    a = np.array(alpha_in.as_tuple())
    d = np.array(alpha_out.as_tuple()) - a

    def point(s: float) -> np.ndarray:
        return a + s * d if s < 1.0 else a + d

    def inside_at(s: float) -> bool:
        return shoot(params, InitialData(*map(float, point(s))), opts)[1].kind is Kind.NON_TOPOLOGICAL

    s_in, s_out = _bisect(inside_at, point, tol, refine)
    p_in, p_out = point(s_in), point(s_out)
    mid = InitialData(*map(float, 0.5 * (p_in + p_out)))
    width = float(np.linalg.norm(p_out - p_in))

    wide = opts.doubled()
    t_in, _ = shoot(params, InitialData(*map(float, p_in)), wide)
    t_out, _ = shoot(params, InitialData(*map(float, p_out)), wide)
    t_mid, c_mid = shoot(params, mid, wide)
    if c_mid.kind is Kind.UNDETERMINED:
        t_mid, c_mid = shoot(params, mid, wide.doubled())
    shadow = shadow_analysis(t_in, t_out, t_mid)
    return _boundary_result(mid, width, c_in.kind, c_out.kind, shadow, c_mid, t_mid)


def _boundary_result(alpha, width, k_in, k_out, shadow, c_mid, traj) -> BoundaryPoint:
    if shadow.kind is not None:
        cls = _shadow_classification(shadow, float(traj.t[0]))
        anomaly = False
    else:
        cls = c_mid
        anomaly = c_mid.kind in (Kind.BLOW_UP, Kind.NON_TOPOLOGICAL)
    return BoundaryPoint(
        alpha=alpha,
        bracket_width=width,
        inside_kind=k_in,
        outside_kind=k_out,
        boundary_kind=cls.kind,
        classification=cls,
        midpoint_classification=c_mid,
        shadow=shadow,
        anomaly=anomaly,
        trajectory=traj,
    )


def scalar_boundary(
    n: float,
    below: float = -10.0,
    above: float = 5.0,
    tol: float = 1e-6,
    opts: ShootOpts | None = None,
    refine: bool = True,
) -> BoundaryPoint:
    """Bisect the scalar oracle for the value of alpha separating its
    NonTopological data (below) from the rest (above)."""
    opts = opts or ShootOpts()
    _, c_lo = scalar_oracle(n, below, opts)
    _, c_hi = scalar_oracle(n, above, opts)
    if c_lo.kind is not Kind.NON_TOPOLOGICAL or c_hi.kind is Kind.NON_TOPOLOGICAL:
        raise BadBracket(f"scalar bracket classifies {c_lo.kind.value} / {c_hi.kind.value}")

    def point(s: float) -> np.ndarray:
        return np.array([below + s * (above - below) if s < 1.0 else above])

    def inside_at(s: float) -> bool:
        return scalar_oracle(n, float(point(s)[0]), opts)[1].kind is Kind.NON_TOPOLOGICAL

    s_in, s_out = _bisect(inside_at, point, tol, refine)
    lo, hi = float(point(s_in)[0]), float(point(s_out)[0])
    mid = 0.5 * (lo + hi)
    wide = opts.doubled()
    t_lo, _ = scalar_oracle(n, lo, wide)
    t_hi, _ = scalar_oracle(n, hi, wide)
    t_mid, c_mid = scalar_oracle(n, mid, wide)
    shadow = shadow_analysis(t_lo, t_hi, t_mid)
    return _boundary_result(
        InitialData(mid, mid), hi - lo, c_lo.kind, c_hi.kind, shadow, c_mid, t_mid
    )


# -- openness ------------------------------------------------------------------


def circle_points(alpha: InitialData, radius: float, k: int) -> list[InitialData]:
    angles = 2.0 * math.pi * np.arange(k) / k
    return [
        InitialData(alpha.alpha1 + radius * math.cos(a), alpha.alpha2 + radius * math.sin(a))
        for a in angles
    ]


def openness_probe(
    params: Params,
    alpha: InitialData,
    radius: float,
    k: int = 8,
    opts: ShootOpts | None = None,
) -> float:
    """Fraction of ``k`` points on a circle around ``alpha`` that stay NonTopological."""
    opts = opts or ShootOpts()
    if k < 1:
        raise ValueError("k must be at least 1")
    if not radius > 0:
        raise ValueError("radius must be positive")
    if shoot(params, alpha, opts)[1].kind is not Kind.NON_TOPOLOGICAL:
        raise BadCenter(f"centre {alpha.as_tuple()} is not NonTopological")
    hits = sum(
        1 for pt in circle_points(alpha, radius, k)
        if shoot(params, pt, opts)[1].kind is Kind.NON_TOPOLOGICAL
    )
    return hits / k


def interior_points(omega: OmegaMap, count: int) -> list[InitialData]:
    """NonTopological grid points whose four grid neighbours are NonTopological too."""
    n1, n2 = omega.grid.resolution
    a1, a2 = omega.grid.alpha1_values, omega.grid.alpha2_values
    out: list[InitialData] = []
    for i in range(1, n1 - 1):
        for j in range(1, n2 - 1):
            block = [omega.verdicts[i, j], omega.verdicts[i - 1, j], omega.verdicts[i + 1, j],
                     omega.verdicts[i, j - 1], omega.verdicts[i, j + 1]]
            if all(k is Kind.NON_TOPOLOGICAL for k in block):
                out.append(InitialData(float(a1[i]), float(a2[j])))
    return out[:count]


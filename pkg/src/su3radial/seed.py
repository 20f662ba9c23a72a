"""Regular start-up data at a small radius from the singular initial data.

Near the origin ``u = 2 N1 log r + alpha1 + o(1)``.  Writing the radial
equation in integral form,

    r u_r(r) = 2 N1 + int_0^r s h_u(s) ds,
    u(r)     = 2 N1 log r + alpha1 + int_0^r s h_u(s) log(r/s) ds,

with ``h_u = f2 - 2 f1`` (and the mirror for v), the correction terms are
produced by Picard iteration from the leading logarithm.  Quadrature on
``(0, r]`` uses ``s = r y^4``, which turns the log kernel's endpoint
singularity into a smooth-enough ``y^7 log y`` and tames the ``s r^{2N}``
factor.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import Params

DEFAULT_R0 = 1e-3
DEFAULT_ITERATIONS = 2

_NODE_COUNTS = (16, 32, 64)
_QUAD_RTOL = 1e-10
_QUAD_ATOL = 1e-15


class QuadratureFailure(RuntimeError):
    """The correction integrals did not converge; r0 is too large for the expansion."""


@dataclass(frozen=True)
class InitialData:
    alpha1: float
    alpha2: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.alpha1) and math.isfinite(self.alpha2)):
            raise ValueError("initial data must be finite")

    def swapped(self) -> InitialData:
        return InitialData(self.alpha2, self.alpha1)

    def as_tuple(self) -> tuple[float, float]:
        return (self.alpha1, self.alpha2)


@dataclass(frozen=True)
class SeedState:
    t0: float
    u: float
    v: float
    p: float
    q: float
    correction_bound: float

    @property
    def r0(self) -> float:
        return math.exp(self.t0)

    @property
    def y(self) -> tuple[float, float, float, float]:
        return (self.u, self.v, self.p, self.q)

    def swapped(self) -> SeedState:
        return SeedState(self.t0, self.v, self.u, self.q, self.p, self.correction_bound)


Nonlinearity = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]


def system_nonlinearity(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    eu, ev, euv = np.exp(u), np.exp(v), np.exp(u + v)
    a = eu - 2.0 * np.exp(2.0 * u) + euv
    b = ev - 2.0 * np.exp(2.0 * v) + euv
    return b - 2.0 * a, a - 2.0 * b


def scalar_nonlinearity(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    h = np.exp(2.0 * u) - np.exp(u)
    return h, h


def _gauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _iterate(
    h: Nonlinearity,
    n: tuple[float, float],
    alpha: tuple[float, float],
    r: np.ndarray,
    k: int,
    nodes: int,
) -> np.ndarray:
    """Picard iterate ``k`` at radii ``r``; returns shape (4, *r.shape) = (u, v, p, q)."""
    log_r = np.log(r)
    out = np.empty((4,) + r.shape)
    out[0] = 2.0 * n[0] * log_r + alpha[0]
    out[1] = 2.0 * n[1] * log_r + alpha[1]
    out[2] = 2.0 * n[0]
    out[3] = 2.0 * n[1]
    if k == 0:
        return out
    y, w = _gauss(nodes)
    s = r[..., None] * y ** 4
    prev = _iterate(h, n, alpha, s, k - 1, nodes)
    hu, hv = h(prev[0], prev[1])
    # int_0^r s h ds = 4 r^2 int_0^1 y^7 h dy ; log(r/s) = -4 log y
    wp = 4.0 * w * y ** 7
    wu = wp * (-4.0 * np.log(y))
    r2 = r ** 2
    out[0] += r2 * (hu @ wu)
    out[1] += r2 * (hv @ wu)
    out[2] += r2 * (hu @ wp)
    out[3] += r2 * (hv @ wp)
    return out


def _converged_iterate(h, n, alpha, r0: float, k: int) -> np.ndarray:
    r = np.array([r0])
    if k == 0:
        return _iterate(h, n, alpha, r, 0, 1)[:, 0]
    lead = _iterate(h, n, alpha, r, 0, 1)[:, 0]
    previous = None
    for nodes in _NODE_COUNTS:
        if k >= 3 and nodes > 32:
            break
        with np.errstate(over="raise", invalid="raise"):
            try:
                current = _iterate(h, n, alpha, r, k, nodes)[:, 0]
            except FloatingPointError as exc:
                raise QuadratureFailure(f"overflow in seed quadrature at r0={r0:g}") from exc
        if not np.all(np.isfinite(current)):
            raise QuadratureFailure(f"non-finite seed quadrature at r0={r0:g}")
        if previous is not None:
            corr_now = current - lead
            corr_prev = previous - lead
            err = np.abs(corr_now - corr_prev)
            if np.all(err <= _QUAD_ATOL + _QUAD_RTOL * np.abs(corr_now)):
                return current
        previous = current
    raise QuadratureFailure(
        f"seed quadrature did not converge at r0={r0:g} (iteration {k}); decrease r0"
    )


def _seed_with(
    h: Nonlinearity,
    n: tuple[float, float],
    alpha: tuple[float, float],
    r0: float,
    iterations: int,
) -> SeedState:
    if not r0 > 0:
        raise ValueError(f"r0 must be positive, got {r0!r}")
    if iterations < 0:
        raise ValueError(f"iterations must be >= 0, got {iterations!r}")
    last = _converged_iterate(h, n, alpha, r0, iterations)
    if iterations == 0:
        nxt = _converged_iterate(h, n, alpha, r0, 1)
        bound = float(np.max(np.abs(nxt - last)))
    else:
        prev = _converged_iterate(h, n, alpha, r0, iterations - 1)
        bound = float(np.max(np.abs(last - prev)))
    u, v, p, q = (float(x) for x in last)
    return SeedState(math.log(r0), u, v, p, q, bound)


def seed(
    params: Params,
    alpha: InitialData,
    r0: float = DEFAULT_R0,
    iterations: int = DEFAULT_ITERATIONS,
) -> SeedState:
    """State at ``r0`` for the system with singular data ``alpha``."""
    return _seed_with(system_nonlinearity, (params.n1, params.n2), alpha.as_tuple(), r0, iterations)


def scalar_seed(
    n: float,
    alpha: float,
    r0: float = DEFAULT_R0,
    iterations: int = DEFAULT_ITERATIONS,
) -> SeedState:
    """Seed for the diagonal reduction (u = v, N1 = N2 = n)."""
    if n < 0:
        raise ValueError("vortex number must be nonnegative")
    return _seed_with(scalar_nonlinearity, (n, n), (alpha, alpha), r0, iterations)


def seed_self_test(
    params: Params,
    alpha: InitialData,
    r0: float = DEFAULT_R0,
    r_lower: float | None = None,
    iterations: int = DEFAULT_ITERATIONS,
    rtol: float = 1e-12,
) -> bool:
    """Seed at ``r0`` and at ``r_lower`` (default r0/2), integrate the lower
    seed out to ``r0`` and check the two states agree.

    The allowance is ten times the combined correction bounds plus ten times
    the integrator's own tolerance at ``r0``; a seed cannot be certified more
    tightly than the integrator that transports it.
    """
    from .integrator import IntegrateOpts, integrate

    if r_lower is None:
        r_lower = r0 / 2.0
    if not 0 < r_lower < r0:
        raise ValueError("need 0 < r_lower < r0")
    upper = seed(params, alpha, r0, iterations)
    lower = seed(params, alpha, r_lower, iterations)
    opts = IntegrateOpts(t_max=math.log(r0), rtol=rtol, atol=rtol * 1e-2, converge_after=math.inf)
    traj = integrate(lower, params, opts)
    end = traj.samples[-1]
    got = np.array([end.u, end.v, end.p, end.q])
    want = np.array(upper.y)
    allowance = 10.0 * (upper.correction_bound + lower.correction_bound) + 10.0 * (
        opts.rtol * np.abs(want) + opts.atol
    )
    return bool(abs(end.t - upper.t0) < 1e-12 and np.all(np.abs(got - want) <= allowance))

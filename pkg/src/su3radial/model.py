"""Nonlinearities and right-hand sides of the radial SU(3) Chern-Simons system.

With ``t = ln r``, ``p = r u_r`` and ``q = r v_r`` the radial system reads

    u' = p,    p' = e^{2t} (f2 - 2 f1),
    v' = q,    q' = e^{2t} (f1 - 2 f2),

where ``f1 = e^u - 2e^{2u} + e^{u+v}`` and ``f2`` is its u<->v mirror.  The
coupling constant is fixed to 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

LOG_HALF = math.log(0.5)
LOG_QUARTER = math.log(0.25)

# exp() overflows just above 709.78
EXPONENT_CEILING = 700.0


class BlowUpGuard(ArithmeticError):
    """Raised when an exponential in the right-hand side would overflow."""


@dataclass(frozen=True)
class Params:
    """Vortex multiplicities at the origin."""

    n1: float = 0.0
    n2: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.n1) and math.isfinite(self.n2)):
            raise ValueError("vortex numbers must be finite")
        if self.n1 < 0 or self.n2 < 0:
            raise ValueError(f"vortex numbers must be nonnegative, got ({self.n1}, {self.n2})")

    def swapped(self) -> Params:
        return Params(self.n2, self.n1)

    @property
    def pohozaev_constant(self) -> float:
        """4(N1^2 + N1 N2 + N2^2)."""
        return 4.0 * (self.n1 ** 2 + self.n1 * self.n2 + self.n2 ** 2)


class FieldPair(NamedTuple):
    u: float
    v: float


class State(NamedTuple):
    """Phase-space point in log-radius coordinates."""

    t: float
    u: float
    v: float
    p: float
    q: float

    @property
    def r(self) -> float:
        return math.exp(self.t)

    def mirrored(self) -> State:
        return State(self.t, self.v, self.u, self.q, self.p)


class StateDerivative(NamedTuple):
    du: float
    dv: float
    dp: float
    dq: float


def f1(pair: tuple[float, float]) -> float:
    u, v = pair
    return math.exp(u) - 2.0 * math.exp(2.0 * u) + math.exp(u + v)


def f2(pair: tuple[float, float]) -> float:
    u, v = pair
    return math.exp(v) - 2.0 * math.exp(2.0 * v) + math.exp(u + v)


def g(x: float) -> float:
    """Scalar profile e^x - 2e^{2x}; positive left of log 1/2, maximum 1/8 at log 1/4."""
    return math.exp(x) - 2.0 * math.exp(2.0 * x)


def potential(u: float, v: float) -> float:
    """F(u, v) with dF/du = f1 and dF/dv = f2 (the Pohozaev potential)."""
    eu = math.exp(u)
    ev = math.exp(v)
    return eu - math.exp(2.0 * u) + math.exp(u + v) + ev - math.exp(2.0 * v)


def check_exponent(t: float, u: float, v: float) -> None:
    if 2.0 * t + max(2.0 * u, 2.0 * v, u + v) > EXPONENT_CEILING:
        raise BlowUpGuard(f"exponent guard tripped at t={t!r}, u={u!r}, v={v!r}")


def rhs_log(t: float, state: tuple[float, float, float, float]) -> StateDerivative:
    """Right-hand side in t = ln r for the state (u, v, p, q).

    A full :class:`State` is accepted too; its leading ``t`` field is ignored
    in favour of the explicit argument.
    """
    if len(state) == 5:
        state = state[1:]
    u, v, p, q = state
    check_exponent(t, u, v)
    eu = math.exp(u)
    ev = math.exp(v)
    euv = math.exp(u + v)
    a = eu - 2.0 * math.exp(2.0 * u) + euv
    b = ev - 2.0 * math.exp(2.0 * v) + euv
    w = math.exp(2.0 * t)
    return StateDerivative(p, q, w * (b - 2.0 * a), w * (a - 2.0 * b))


def rhs_expanded_consistency(pair: tuple[float, float]) -> tuple[float, float]:
    """Expanded right-hand sides -2e^u + e^v + 4e^{2u} - 2e^{2v} - e^{u+v} and mirror."""
    u, v = pair
    eu, ev, euv = math.exp(u), math.exp(v), math.exp(u + v)
    e2u, e2v = math.exp(2.0 * u), math.exp(2.0 * v)
    first = -2.0 * eu + ev + 4.0 * e2u - 2.0 * e2v - euv
    second = eu - 2.0 * ev - 2.0 * e2u + 4.0 * e2v - euv
    return first, second


def scalar_rhs_log(t: float, u: float, p: float) -> tuple[float, float]:
    """Diagonal reduction u = v: u' = p, p' = e^{2t}(e^{2u} - e^u)."""
    check_exponent(t, u, u)
    return p, math.exp(2.0 * t) * (math.exp(2.0 * u) - math.exp(u))

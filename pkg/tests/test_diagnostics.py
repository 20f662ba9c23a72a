from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest
from conftest import synthetic_trajectory

from su3radial.classifier import AsymptoticFit, Kind
from su3radial.diagnostics import (
    DiagnosticsReport,
    WrongKind,
    apriori_bound,
    condition_star_scan,
    cumulative_integrals,
    decade_integrals,
    diagnose,
    f_positive_tail,
    identity_residuals,
    intersection_census,
    negativity_ok,
    nontop_inequality,
    pohozaev_residual,
    pohozaev_residuals,
    tail_integrability,
)
from su3radial.integrator import IntegrateOpts, OutOfRange, StopReason
from su3radial.model import LOG_HALF, Params, f1, f2
from su3radial.omega import ShootOpts, shoot
from su3radial.seed import InitialData

T = np.linspace(math.log(1e-3), math.log(1e6), 3000)


def fit(b1, b2):
    return AsymptoticFit(b1, b2, 0.0, 0.0, 0.0, (0.0, 1.0))


@pytest.fixture(scope="module")
def trivial():
    return shoot(Params(), InitialData(0.0, 0.0))


@pytest.fixture(scope="module")
def diagonal():
    return shoot(Params(), InitialData(-1.0, -1.0))


@pytest.fixture(scope="module")
def crossing():
    return shoot(Params(0, 1), InitialData(-5.0, -9.0))


def test_trivial_pohozaev_closed_form(trivial):
    traj, _ = trivial
    for r in (1e-3, 1.0, 10.0, 500.0):
        assert pohozaev_residual(traj, r) < 1e-15
    with pytest.raises(OutOfRange):
        pohozaev_residual(traj, 1e9)
    with pytest.raises(OutOfRange):
        pohozaev_residual(traj, -1.0)


def test_pohozaev_at_horizon(diagonal, crossing):
    for traj, _ in (diagonal, crossing):
        assert pohozaev_residual(traj, math.exp(traj.t[-1])) < 1e-6


def test_quadrature_node_doubling():
    traj, _ = shoot(Params(1, 2), InitialData(-3.0, -7.5))
    tp = np.linspace(traj.t[0], traj.t[-1], 11)[1:]
    a = cumulative_integrals(traj, tp)
    b = cumulative_integrals(traj, tp, panel_width=0.01)
    assert np.max(np.abs(a - b) / (1 + np.abs(b))) < 1e-12


def test_vortex_constant_in_pohozaev():
    traj, _ = shoot(Params(1, 1), InitialData(-3.0, -3.0))
    assert pohozaev_residual(traj, 10.0) < 1e-6
    wrong = replace(traj, params=Params(1.1, 1))
    assert pohozaev_residual(wrong, 10.0) > 1e-3


def test_cumulative_integrals_constant_state():
    c = -0.8
    traj = synthetic_trajectory(T, c + 0 * T, c + 0 * T, p=0 * T, q=0 * T)
    tp = np.array([0.0, 2.0, 5.0])
    got = cumulative_integrals(traj, tp)
    grow = (np.exp(2 * tp) - np.exp(2 * T[0])) / 2
    assert got[:, 0] == pytest.approx(f1((c, c)) * grow, rel=1e-12)
    assert got[:, 1] == pytest.approx(f2((c, c)) * grow, rel=1e-12)


@pytest.mark.parametrize(
    "n,alpha", [((0, 0), (-1.0, -1.0)), ((1, 2), (-3.0, -7.5)), ((2, 0), (-3.0, -1.0)), ((0, 1), (-5.0, -9.0))]
)
def test_identities_hold(n, alpha):
    traj, _ = shoot(Params(*n), InitialData(*alpha))
    assert max(identity_residuals(traj)) < 1e-7
    assert pohozaev_residuals(traj, np.linspace(traj.t[0], traj.t[-1], 11)[1:]).max() < 1e-6


def test_intersection_census(diagonal):
    assert intersection_census(diagonal[0]) == (0, None)
    a, _ = shoot(Params(), InitialData(-5.0, -9.0))
    b, _ = shoot(Params(), InitialData(-9.0, -5.0))
    assert intersection_census(a)[0] == intersection_census(b)[0]
    coarse, _ = shoot(Params(2, 0), InitialData(-3.0, -1.0))
    fine, _ = shoot(Params(2, 0), InitialData(-3.0, -1.0),
                    ShootOpts(integrate=IntegrateOpts(rtol=5e-11, atol=5e-13)))
    k = intersection_census(coarse)[0]
    assert k >= 1 and intersection_census(fine)[0] == k


def test_apriori_bound(trivial, diagonal):
    traj, cls = trivial
    assert apriori_bound(traj, cls) == pytest.approx(1e-3)
    nt, ncls = diagonal
    r0 = apriori_bound(nt, ncls)
    assert r0 is not None and math.log(r0) < nt.t[-1]
    assert apriori_bound(synthetic_trajectory(T, 0.2 + 0 * T, -3 * T)) is None
    blown, _ = shoot(Params(), InitialData(1.0, 1.0))
    with pytest.raises(WrongKind):
        apriori_bound(blown)


def test_nontop_inequality_algebra():
    assert nontop_inequality(fit(5, 5), Params()) == pytest.approx(15.0)
    assert nontop_inequality(fit(4, 4), Params()) == pytest.approx(0.0)
    assert nontop_inequality(fit(3, 3), Params(1, 1)) == pytest.approx(-45.0)


def test_diagonal_margin_forces_beta_above_four(diagonal):
    _, cls = diagonal
    assert cls.fit.beta1 > 4
    assert nontop_inequality(cls.fit, Params()) > 0


def test_f_positive_tail(diagonal, trivial):
    nt, ncls = diagonal
    r = f_positive_tail(nt, ncls)
    assert r is not None and r <= math.exp(nt.t[-1])
    pinned = synthetic_trajectory(T, 0.2 + 0 * T, 0.2 + 0 * T)
    assert f_positive_tail(pinned, Kind.NON_TOPOLOGICAL) is None
    with pytest.raises(WrongKind):
        f_positive_tail(*trivial)
    with pytest.raises(WrongKind):
        f_positive_tail(pinned, Kind.BLOW_UP)


def test_condition_star_detector():
    down = synthetic_trajectory(T, LOG_HALF + np.exp(-(T - T[0])), -3 * T)
    assert condition_star_scan(down)
    up = synthetic_trajectory(T, LOG_HALF - np.exp(-(T - T[0])), -3 * T)
    assert not condition_star_scan(up)


def test_condition_star_absent_on_real_runs(diagonal, crossing):
    assert not condition_star_scan(diagonal[0])
    assert not condition_star_scan(crossing[0])


def test_tail_integrability(trivial, diagonal):
    assert tail_integrability(trivial[0]) == (0.0, 0.0)
    nt, _ = diagonal
    last = decade_integrals(nt, 0)
    before = decade_integrals(nt, 1)
    assert 0 < last[0] < before[0] and 0 < last[1] < before[1]


def test_mixed_tail_power_law():
    beta, c = 3.0, 1.0
    t = np.linspace(0.0, math.log(1e6), 3000)
    traj = synthetic_trajectory(t, LOG_HALF + 0 * t, -beta * t + c, p=0 * t, q=-beta + 0 * t)
    _, i2 = tail_integrability(traj)
    hi = t[-1]
    lo = hi - math.log(10)
    # f2 = 1.5 e^v - 2 e^{2v}; int s f2 ds over the last decade in closed form
    lead = 1.5 * math.exp(c) * (math.exp((2 - beta) * hi) - math.exp((2 - beta) * lo)) / (2 - beta)
    sub = -2 * math.exp(2 * c) * (math.exp((2 - 2 * beta) * hi) - math.exp((2 - 2 * beta) * lo)) / (2 - 2 * beta)
    assert i2 == pytest.approx(lead + sub, rel=1e-6)


def test_negativity():
    assert negativity_ok(synthetic_trajectory(T, 0 * T, 0 * T))
    assert not negativity_ok(synthetic_trajectory(T, 0.2 + 0 * T, -T))
    assert negativity_ok(synthetic_trajectory(T, -1 - T * 0, -1 - T * 0))


def test_diagnose_report_fields(trivial, diagonal):
    report = diagnose(*trivial)
    assert isinstance(report, DiagnosticsReport)
    assert set(report.to_dict()) == {
        "pohozaev_max_rel_residual", "identity_residuals", "intersection_count", "last_intersection_t",
        "apriori_R0", "negativity_ok", "f_positive_tail_t", "nontop_inequality_margin", "tail_integrals",
        "condition_star_flag",
    }
    assert report.negativity_ok and not report.condition_star_flag
    assert report.intersection_count == 0
    nt = diagnose(*diagonal)
    assert nt.nontop_inequality_margin > 0
    assert nt.f_positive_tail_t is not None


def test_diagnose_blow_up():
    traj, cls = shoot(Params(), InitialData(1.0, 1.0))
    report = diagnose(traj, cls)
    assert report.apriori_R0 is None and report.tail_integrals is None
    assert traj.stop is StopReason.BLOW_UP
    assert report.pohozaev_max_rel_residual < 1e-6

from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from su3radial.model import Params, f1, f2
from su3radial.seed import (
    InitialData,
    QuadratureFailure,
    scalar_seed,
    seed,
    seed_self_test,
)

vortex = st.floats(0.0, 3.0)
alpha = st.floats(-8.0, 1.0)


@pytest.mark.parametrize("r0", [1e-4, 1e-3, 1e-2])
@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_trivial_seed_is_exact(r0, k):
    s = seed(Params(), InitialData(0.0, 0.0), r0, k)
    assert s.y == (0.0, 0.0, 0.0, 0.0)
    assert s.correction_bound == 0.0
    assert s.t0 == pytest.approx(math.log(r0))


def test_zeroth_iterate():
    s = seed(Params(), InitialData(-1.5, 0.25), 1e-3, 0)
    assert s.y == (-1.5, 0.25, 0.0, 0.0)


def test_first_iterate_closed_form():
    # N=(1,0), alpha=0: first iterate has h_u = -1 - 3 s^2 + 4 s^4 in closed form
    r = 1e-3
    s1 = seed(Params(1, 0), InitialData(0.0, 0.0), r, 1)
    p1 = 2.0 - r**2 / 2 - 3 * r**4 / 4 + 2 * r**6 / 3
    assert s1.p == pytest.approx(p1, abs=1e-15)


def test_vortex_seed_example():
    s2 = seed(Params(1, 0), InitialData(0.0, 0.0), 1e-3, 2)
    s3 = seed(Params(1, 0), InitialData(0.0, 0.0), 1e-3, 3)
    assert abs(s2.p - 2.0) < 1e-5
    assert s2.correction_bound < 1e-10
    assert max(abs(a - b) for a, b in zip(s2.y, s3.y)) < 1e-10


def test_smooth_case_series():
    # N=0: u = a1 + r^2/4 h(a) + O(r^4), r u_r = r^2/2 h(a) + O(r^4)
    a1, a2, r = -0.7, -1.9, 1e-3
    s = seed(Params(), InitialData(a1, a2), r, 2)
    hu = f2((a1, a2)) - 2 * f1((a1, a2))
    hv = f1((a1, a2)) - 2 * f2((a1, a2))
    assert s.u - a1 == pytest.approx(r**2 / 4 * hu, abs=1e-12)
    assert s.v - a2 == pytest.approx(r**2 / 4 * hv, abs=1e-12)
    assert s.p == pytest.approx(r**2 / 2 * hu, abs=1e-12)
    assert s.q == pytest.approx(r**2 / 2 * hv, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(vortex, vortex, alpha, alpha)
def test_swap_symmetry(n1, n2, a1, a2):
    s = seed(Params(n1, n2), InitialData(a1, a2))
    m = seed(Params(n2, n1), InitialData(a2, a1))
    assert s.swapped() == m


@settings(max_examples=40, deadline=None)
@given(vortex, alpha)
def test_diagonal_closure(n, a):
    s = seed(Params(n, n), InitialData(a, a))
    assert s.u == s.v and s.p == s.q
    sc = scalar_seed(n, a)
    assert sc.u == pytest.approx(s.u, abs=1e-15)
    assert sc.p == pytest.approx(s.p, abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(vortex, vortex, alpha, alpha, st.sampled_from([1e-4, 1e-3, 1e-2]), st.integers(0, 2))
def test_monotone_refinement(n1, n2, a1, a2, r0, k):
    low = seed(Params(n1, n2), InitialData(a1, a2), r0, k)
    high = seed(Params(n1, n2), InitialData(a1, a2), r0, k + 1)
    # at the rounding floor successive differences are a few ulps of the state
    floor = 4 * 2.0**-52 * max(1.0, *map(abs, high.y))
    assert high.correction_bound <= low.correction_bound + floor


def test_self_test_examples():
    assert seed_self_test(Params(), InitialData(0.0, 0.0))
    assert seed_self_test(Params(1, 1), InitialData(-2.0, -2.0), 1e-3)
    assert seed_self_test(Params(3, 0), InitialData(1.0, -5.0), 1e-2, r_lower=1e-4)


def test_quadrature_failure_for_huge_radius():
    with pytest.raises(QuadratureFailure):
        seed(Params(0, 0), InitialData(1.0, 1.0), 300.0, 2)


def test_invalid_arguments():
    with pytest.raises(ValueError):
        seed(Params(), InitialData(0, 0), -1.0)
    with pytest.raises(ValueError):
        seed(Params(), InitialData(0, 0), 1e-3, -1)
    with pytest.raises(ValueError):
        InitialData(math.nan, 0.0)
    with pytest.raises(ValueError):
        scalar_seed(-1.0, 0.0)

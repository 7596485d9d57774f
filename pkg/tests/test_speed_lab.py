import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from freebound.errors import ClassificationError, PreconditionError
from freebound.pde_engine import FrontTrajectory, solve_two_sided
from freebound.periodic_state import compute_periodic_state
from freebound.reaction import ReactionSpec
from freebound.speed_lab import (
    DirectNumerics,
    bump_datum,
    cauchy_speed,
    check_u_below_p,
    dichotomy_scan,
    direct_speed,
    front_slope_speed,
    level_position,
    level_set_speed,
    mu_sweep,
)

BENCH = ReactionSpec.homogeneous(1.0, 1.0)


@pytest.fixture(scope="module")
def ps():
    return compute_periodic_state(BENCH, 16, 16)


def synthetic(times, h, **kw):
    kw.setdefault("spreading", True)
    return FrontTrajectory(times=np.asarray(times), g=-np.asarray(h), h=np.asarray(h), snapshots=[],
                           meta={"omega": 1.0}, **kw)


# oracles


def test_direct_speed_is_tail_stable(ps):
    est, tr = direct_speed(BENCH, ps, numerics=DirectNumerics(T=40.0))
    late = front_slope_speed(tr, 0.3)
    assert abs(late.value - est.value) / est.value <= 0.01
    assert est.value == pytest.approx(0.3653, abs=2e-3)


def test_cauchy_speed_level_independent(ps):
    num = DirectNumerics(T=30.0)
    a, tr = cauchy_speed(BENCH, ps, 0.5, num)
    b = level_set_speed(tr, 0.25, min_p=ps.min)
    assert abs(a.value - b.value) / a.value <= 0.02


def test_level_spanning_the_domain_has_no_front():
    x = np.linspace(-5, 5, 101)
    tr = FrontTrajectory(times=np.arange(6.0), g=None, h=None,
                         snapshots=[(float(t), x, np.ones_like(x)) for t in range(6)], meta={"omega": 1.0})
    with pytest.raises(PreconditionError):
        level_set_speed(tr, 0.5, min_p=1.0)
    with pytest.raises(PreconditionError):
        level_set_speed(tr, 1.5, min_p=1.0)


def test_vanished_run_has_no_speed():
    tr = solve_two_sided(BENCH, bump_datum(0.5, 0.1), 30.0, nx=60)
    assert tr.vanished
    with pytest.raises(ClassificationError):
        front_slope_speed(tr)


def test_fit_needs_whole_periods():
    tr = synthetic(np.linspace(0, 2, 21), 0.3 * np.linspace(0, 2, 21))
    with pytest.raises(PreconditionError):
        front_slope_speed(tr)


def test_mu_sweep_preconditions(ps):
    with pytest.raises(PreconditionError):
        mu_sweep(BENCH, [0.5, 1.0, 2.0], pstate=ps)
    with pytest.raises(PreconditionError):
        mu_sweep(BENCH, [0.5, 1.0, 2.0, 5.0], "Guess", pstate=ps)
    with pytest.raises(PreconditionError):
        mu_sweep(BENCH, [0.5, 2.0, 1.0, 5.0], pstate=ps)


def test_below_p_needs_concave_family():
    spec = ReactionSpec.degenerate(1.0)
    ps = compute_periodic_state(spec, 16, 16)
    with pytest.raises(PreconditionError):
        check_u_below_p(spec, ps, bump_datum(4.0, 1.5), 10.0)


def test_dichotomy_widths_increasing():
    with pytest.raises(PreconditionError):
        dichotomy_scan(BENCH, [1.0, 3.0, 2.0], 0.1, 5.0)


# properties


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(-5, 5), st.floats(0, 0.5), st.integers(8, 40))
def test_slope_ignores_the_periodic_wobble(c, offset, wobble, T):
    t = np.linspace(0, T, 20 * T + 1)
    h = offset + c * t + wobble * np.sin(2 * np.pi * t)
    est = front_slope_speed(synthetic(t, h), 0.5)
    assert est.value == pytest.approx(c, abs=1e-9)
    assert est.residual <= 1e-9


@settings(max_examples=100, deadline=None)
@given(st.floats(-3, 3), st.floats(0.1, 5), st.floats(0.05, 0.95))
def test_level_position_on_a_linear_front(x0, slope, level):
    assume(abs(x0) + (1 - level) / slope < 9.0)
    x = np.linspace(-10, 10, 201)
    # unclipped, so no kink sits inside the crossing cell
    u = 1.0 - slope * (x - x0)
    assert level_position(x, u, level) == pytest.approx(x0 + (1 - level) / slope, abs=1e-9)
    v = 1.0 + slope * (x + x0)
    assert level_position(x, v, level, "left") == pytest.approx(-x0 - (1 - level) / slope, abs=1e-9)

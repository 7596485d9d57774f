import csv
import io
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from freebound.errors import DomainTooSmallError, PreconditionError
from freebound.pde_engine import (
    CompactProfile,
    solve_cauchy,
    solve_left,
    solve_right,
    solve_two_sided,
)
from freebound.periodic_state import compute_periodic_state
from freebound.reaction import PeriodicCoefficient, ReactionSpec

BENCH = ReactionSpec.homogeneous(1.0, 1.0)


def bump(half, height):
    return CompactProfile.two_sided(-half, half, lambda x: height * np.cos(np.pi * x / (2 * half)))


# oracles


def test_wide_bump_spreads():
    tr = solve_two_sided(BENCH, bump(2.0, 0.5), 20.0, nx=120, dt=0.01)
    assert tr.spreading and not tr.vanished
    assert tr.h[-1] > 4.0 and tr.g[-1] < -4.0


def test_narrow_low_bump_vanishes():
    tr = solve_two_sided(BENCH, bump(0.25, 0.1), 30.0, nx=80, dt=0.01)
    assert tr.vanished and not tr.spreading
    assert tr.h[-1] - tr.g[-1] < math.pi


def test_symmetric_data_keeps_symmetric_fronts():
    tr = solve_two_sided(BENCH, bump(1.0, 0.5), 5.0, nx=100, dt=0.01)
    assert np.abs(tr.g + tr.h).max() <= 1e-8


def test_tiny_mu_barely_moves():
    tr = solve_two_sided(BENCH.with_mu(1e-3), bump(1.0, 0.5), 5.0, nx=100, dt=0.01)
    assert 0.0 <= tr.h[-1] - 1.0 < 0.01


def test_left_is_mirrored_right():
    spec = ReactionSpec.logistic(PeriodicCoefficient(1.0, ((1, 1, 0.2, 0.0),)), 1.0)
    u0 = CompactProfile.left(0.0, lambda x: 0.5 * np.minimum(x, 1.0), 10.0)
    tl = solve_left(spec, u0, 3.0, window_width=10.0, nx=100)
    tr = solve_right(spec.reflected(), u0.reflected(), 3.0, window_width=10.0, nx=100)
    assert np.array_equal(tl.g, -tr.h)


def test_cauchy_keeps_the_periodic_state():
    spec = ReactionSpec.logistic(PeriodicCoefficient(1.0, ((0, 1, 0.3, 0.0),)), 1.0)
    ps = compute_periodic_state(spec, 32, 64)
    x = np.linspace(-5, 5, 401)
    v0 = CompactProfile.whole_line(x, ps.p0_at(x), tail=ps.p0_at)
    tr = solve_cauchy(spec, v0, 2.0, 5.0, nx=400, dt=0.005, pstate=ps)
    t, xs, u = tr.final
    assert np.abs(u - ps.at(t, xs)).max() <= 1e-2


def test_cauchy_reports_small_domain():
    v0 = CompactProfile.whole_line(np.linspace(-1, 1, 41), np.cos(np.pi * np.linspace(-1, 1, 41) / 2),
                                   g0=-1.0, h0=1.0)
    with pytest.raises(DomainTooSmallError):
        solve_cauchy(BENCH, v0, 20.0, 3.0, nx=120, dt=0.01)


def test_profile_preconditions():
    with pytest.raises(PreconditionError):
        solve_two_sided(BENCH, CompactProfile.right(0.0, lambda x: 0.1 - 0.1 * x / 10, 10.0), 1.0)
    with pytest.raises(PreconditionError):
        CompactProfile(-1.0, 1.0, np.array([-1.0, 0.0, 1.0]), np.array([0.2, 0.5, 0.0]), "TwoSided")
    with pytest.raises(PreconditionError):
        CompactProfile(1.0, -1.0, np.array([-1.0, 1.0]), np.array([0.0, 0.0]), "TwoSided")
    u0 = CompactProfile.right(0.0, lambda x: 0.5 * np.ones_like(x), 10.0, tail_at_p=True)
    with pytest.raises(PreconditionError):
        solve_right(BENCH, u0, 1.0)


def test_fronts_csv_parses():
    tr = solve_two_sided(BENCH, bump(1.0, 0.5), 1.0, nx=60, dt=0.01, record_every=10)
    rows = list(csv.reader(io.StringIO(tr.fronts_csv())))
    assert len(rows) == len(tr.times) + 1
    assert float(rows[-1][0]) == pytest.approx(tr.times[-1])


# properties

quick = settings(max_examples=10, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@quick
@given(st.floats(0.3, 2.0), st.floats(0.05, 1.0), st.floats(0.2, 3.0))
def test_fronts_are_monotone(half, height, mu):
    tr = solve_two_sided(BENCH.with_mu(mu), bump(half, height), 2.0, nx=60, dt=0.01)
    assert np.all(np.diff(tr.h) >= -1e-12)
    assert np.all(np.diff(tr.g) <= 1e-12)


@quick
@given(st.floats(0.5, 1.5), st.floats(0.1, 0.8), st.floats(0.2, 2.0), st.floats(1.1, 3.0))
def test_front_grows_with_mu(half, height, mu, factor):
    u0 = bump(half, height)
    lo = solve_two_sided(BENCH.with_mu(mu), u0, 2.0, nx=60, dt=0.01)
    hi = solve_two_sided(BENCH.with_mu(mu * factor), u0, 2.0, nx=60, dt=0.01)
    assert lo.h[-1] <= hi.h[-1] + 1e-9

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freebound.errors import PreconditionError
from freebound.pde_engine import CompactProfile
from freebound.periodic_state import compute_periodic_state
from freebound.poincare import (
    UNumerics,
    apply_U,
    apply_U_iterates,
    apply_U_truncated,
    eta,
    whole_line_periodic,
)
from freebound.reaction import PeriodicCoefficient, ReactionSpec

BENCH = ReactionSpec.homogeneous(1.0, 1.0)
WAVY = ReactionSpec.logistic(PeriodicCoefficient(1.0, ((1, 1, 0.3, 0.0),)), 1.0)
NUM = UNumerics(dx=0.05, dt=0.005, nx_two_sided=120)


def bump(g0, h0, height=0.5):
    mid, half = 0.5 * (g0 + h0), 0.5 * (h0 - g0)
    return CompactProfile.two_sided(g0, h0, lambda x: height * np.cos(np.pi * (x - mid) / (2 * half)))


# oracles


def test_cutoff_values():
    assert eta(0.0) == 1.0 and eta(0.5) == 1.0
    assert eta(1.0) == 0.0 and eta(3.0) == 0.0
    assert eta(0.75) == pytest.approx(0.5, abs=1e-15)


def test_periodic_state_is_fixed():
    ps = compute_periodic_state(WAVY, 32, 40)
    ny, dx = NUM.grid(WAVY.L)
    phi = whole_line_periodic(ps.p0_at(np.arange(ny) * dx), WAVY.L)
    out = apply_U(WAVY, ps, phi, NUM)
    x = np.linspace(-2, 2, 81)
    assert np.abs(out(x) - ps.p0_at(x)).max() <= 5e-3
    const = apply_U(BENCH, None, whole_line_periodic(np.ones(ny), BENCH.L), NUM)
    assert np.abs(const(x) - 1.0).max() <= 1e-12


def test_period_shift_commutes():
    a = apply_U(WAVY, None, bump(-1.0, 1.5), NUM)
    b = apply_U(WAVY, None, bump(-1.0 + WAVY.L, 1.5 + WAVY.L), NUM)
    assert b.h0 - a.h0 == pytest.approx(WAVY.L, abs=1e-9)
    assert b.g0 - a.g0 == pytest.approx(WAVY.L, abs=1e-9)
    assert np.abs(b.values - a.values).max() <= 1e-9


def test_iterates_chain():
    phi = bump(-1.0, 1.0)
    its = apply_U_iterates(BENCH, None, phi, 3, NUM)
    again = apply_U(BENCH, None, apply_U(BENCH, None, phi, NUM), NUM)
    assert np.array_equal(its[1].values, again.values)
    assert its[0].h0 < its[1].h0 < its[2].h0
    with pytest.raises(PreconditionError):
        apply_U_iterates(BENCH, None, phi, 0, NUM)


def test_right_front_flags_below_p():
    ps = compute_periodic_state(BENCH, 16, 16)
    phi = CompactProfile.right(0.0, lambda x: 0.9 * np.minimum(-x, 1.0), 30.0, tail=lambda x: 0.9 + 0 * x)
    out = apply_U(BENCH, ps, phi, NUM)
    assert out.class_tag == "RightFront" and out.h0 > 0.0
    assert out.below_p


def test_truncated_map_edges():
    phi = bump(-1.0, 1.0)
    with pytest.raises(PreconditionError):
        apply_U_truncated(BENCH, None, phi, 0.0, 0.0, NUM)
    assert apply_U_truncated(BENCH, None, phi, 1.0, 5.0, NUM) == 0.0
    assert apply_U_truncated(BENCH, None, phi, 4.0, 0.0, NUM) > 0.0


# properties


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 5), st.floats(0, 5))
def test_cutoff_range_and_order(r, s):
    lo, hi = sorted((r, s))
    assert 0.0 <= eta(hi) <= eta(lo) <= 1.0


@settings(max_examples=8, deadline=None)
@given(st.floats(0.1, 0.9), st.floats(1.05, 1.8))
def test_map_preserves_order(height, factor):
    small = apply_U(WAVY, None, bump(-1.0, 1.0, height), NUM)
    big = apply_U(WAVY, None, bump(-1.2, 1.3, min(height * factor, 1.2)), NUM)
    assert small.g0 >= big.g0 and small.h0 <= big.h0
    x = np.linspace(small.g0, small.h0, 101)
    assert np.all(small(x) <= big(x) + 1e-4)

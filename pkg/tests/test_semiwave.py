import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freebound.errors import PreconditionError
from freebound.reaction import ReactionSpec
from freebound.semiwave import (
    OVERSHOOT,
    UNDERSHOOT,
    SemiWaveProblem,
    semiwave_profile,
    shoot,
    shoot_semiwave_speed,
    upper_bound_c_plus,
)

# oracles


def test_logistic_benchmark_speed():
    est = shoot_semiwave_speed(SemiWaveProblem.logistic(1.0, 1.0, 1.0, 1.0))
    assert est.value == pytest.approx(0.36437, abs=1e-4)
    assert est.meta["connection_gap"] < 1e-4


def test_shooting_outcomes_straddle_the_speed():
    prob = SemiWaveProblem.logistic()
    c = shoot_semiwave_speed(prob).value
    assert shoot(prob, 0.9 * c)[0] == UNDERSHOOT
    assert shoot(prob, 1.1 * c)[0] == OVERSHOOT


def test_speed_rises_with_mu_below_kpp():
    speeds = [shoot_semiwave_speed(SemiWaveProblem.logistic(mu=m)).value for m in (0.5, 1, 2, 5, 100, 1e3)]
    assert all(np.diff(speeds) > 0)
    assert speeds[-1] < 2.0


def test_profile_is_increasing():
    prob = SemiWaveProblem.logistic()
    c = shoot_semiwave_speed(prob).value
    x, q = semiwave_profile(prob, c)
    assert x[0] == 0.0 and q[0] == 0.0
    assert np.all(np.diff(x) > 0) and np.all(np.diff(q) > 0)


def test_benchmark_upper_bound():
    assert upper_bound_c_plus(ReactionSpec.homogeneous()) == pytest.approx(0.77454, abs=1e-4)


def test_bad_nonlinearity_rejected():
    with pytest.raises(PreconditionError):
        shoot_semiwave_speed(SemiWaveProblem(1.0, 1.0, lambda q: q * (1 - q) + 0.1, 1.0, 1.0))
    with pytest.raises(PreconditionError):
        shoot_semiwave_speed(SemiWaveProblem(1.0, 1.0, lambda q: q * (1 - q) * (q - 0.5), 1.0, 1.0))


# properties


@settings(max_examples=15, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(1.1, 3.0), st.floats(0.3, 3.0), st.floats(0.3, 3.0))
def test_majorant_speed_grows_with_K(K, factor, M, mu):
    lo = shoot_semiwave_speed(SemiWaveProblem.majorant(K, M, mu=mu)).value
    hi = shoot_semiwave_speed(SemiWaveProblem.majorant(K * factor, M, mu=mu)).value
    assert 0 < lo < hi


@settings(max_examples=15, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(0.3, 3.0), st.floats(0.2, 3.0), st.floats(0.1, 10.0))
def test_speed_below_kpp(a, b, d, mu):
    prob = SemiWaveProblem.logistic(a, b, d, mu)
    c = shoot_semiwave_speed(prob).value
    assert 0 < c < prob.kpp_speed

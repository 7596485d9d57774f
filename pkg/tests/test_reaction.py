import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freebound.errors import ConfigError, ReactionDomainError
from freebound.reaction import PeriodicCoefficient, ReactionSpec, eval_f, eval_f_u

# oracles


def test_logistic_zero_and_equilibrium():
    spec = ReactionSpec.homogeneous(1.0, 1.0)
    assert eval_f(spec, 0.3, 0.7, 0.0) == 0.0
    assert eval_f(spec, 0.3, 0.7, 1.0) == 0.0


def test_logistic_series_arithmetic():
    spec = ReactionSpec.logistic(PeriodicCoefficient(1.0, ((0, 1, 0.5, 0.0),)), 1.0)
    assert eval_f(spec, 0.0, 0.0, 0.5) == pytest.approx(0.5, abs=1e-15)


def test_derivative_examples():
    spec = ReactionSpec.homogeneous(1.0, 1.0)
    assert eval_f_u(spec, 0.0, 0.0, 0.0) == 1.0
    assert eval_f_u(spec, 0.0, 0.0, 1.0) == -1.0
    deg = ReactionSpec.degenerate(1.0, k=2.0)
    assert eval_f_u(deg, 0.0, 0.0, 0.0) == 0.0


def test_negative_u_rejected():
    spec = ReactionSpec.homogeneous(1.0, 1.0)
    with pytest.raises(ReactionDomainError):
        eval_f(spec, 0.0, 0.0, -1e-3)
    with pytest.raises(ReactionDomainError):
        eval_f_u(spec, 0.0, 0.0, np.array([0.1, -0.2]))


def test_cap_on_grid():
    spec = ReactionSpec.logistic(PeriodicCoefficient(1.0, ((1, 2, 0.2, 0.1), (0, 1, 0.1, 0.0))), 1.0)
    T, X = spec.period_grid(64)
    assert np.all(spec.rate(T, X, spec.cap_M) <= 1e-12)


def test_default_caps():
    spec = ReactionSpec.logistic(PeriodicCoefficient(1.0, ((0, 1, 0.5, 0.0),)), 1.0)
    assert spec.cap_M == pytest.approx(1.5, rel=1e-12)
    assert ReactionSpec.degenerate(2.0).cap_M == 1.0


def test_config_errors_name_fields():
    with pytest.raises(ConfigError, match="family"):
        ReactionSpec.from_dict({"family": "bistable", "coeffs": {}})
    with pytest.raises(ConfigError, match=r"problem\.coeffs\.a"):
        ReactionSpec.from_dict({"family": "logistic",
                                "coeffs": {"a": {"mean": 0.2, "modes": [[0, 1, 0.5, 0.0]]}, "b": 1.0}})
    with pytest.raises(ConfigError, match=r"problem\.colour"):
        ReactionSpec.from_dict({"family": "logistic", "coeffs": {"a": 1.0, "b": 1.0}, "colour": 1})
    with pytest.raises(ConfigError, match="mu"):
        ReactionSpec.homogeneous(1.0, 1.0, mu=0.0)
    with pytest.raises(ConfigError, match="modes"):
        ReactionSpec.from_dict({"family": "logistic",
                                "coeffs": {"a": {"mean": 1.0, "modes": [[0.5, 1, 0.1, 0.0]]}, "b": 1.0}})


def test_declared_lower_bound_checked():
    with pytest.raises(ConfigError):
        ReactionSpec.logistic(PeriodicCoefficient(1.0, ((0, 1, 0.5, 0.0),), True, 0.8), 1.0)
    ReactionSpec.logistic(PeriodicCoefficient(1.0, ((0, 1, 0.5, 0.0),), True, 0.4), 1.0)


def test_reflection():
    spec = ReactionSpec.logistic(PeriodicCoefficient(1.0, ((1, 1, 0.2, 0.1),)), 1.0, L=2.0)
    r = spec.reflected()
    t, x, u = 0.3, np.linspace(-3, 3, 13), 0.4
    assert np.allclose(r.rate(t, x, u), spec.rate(t, -x, u), atol=1e-14)


# properties

modes = st.lists(
    st.tuples(st.integers(-2, 2), st.integers(-2, 2), st.floats(-0.1, 0.1), st.floats(-0.1, 0.1)),
    max_size=3,
)


@st.composite
def specs(draw):
    family = draw(st.sampled_from(["logistic", "degenerate", "homogeneous_logistic"]))
    a = PeriodicCoefficient(draw(st.floats(0.5, 2.0)), tuple(draw(modes)) if family != "homogeneous_logistic" else ())
    kw = dict(d=draw(st.floats(0.2, 2.0)), mu=draw(st.floats(0.1, 5.0)),
              omega=draw(st.floats(0.3, 3.0)), L=draw(st.floats(0.3, 3.0)))
    if family == "degenerate":
        return ReactionSpec.degenerate(a, k=draw(st.floats(1.2, 3.0)), **kw)
    b = PeriodicCoefficient(draw(st.floats(0.5, 2.0)), tuple(draw(modes)) if family != "homogeneous_logistic" else ())
    return ReactionSpec(family, {"a": a, "b": b}, **kw)


points = st.tuples(st.floats(-5, 5), st.floats(-5, 5))


@settings(max_examples=60, deadline=None)
@given(specs(), points, st.floats(0, 3))
def test_periodic_in_t_and_x(spec, tx, u):
    t, x = tx
    f = eval_f(spec, t, x, u)
    assert math.isclose(eval_f(spec, t + spec.omega, x, u), f, rel_tol=1e-11, abs_tol=1e-12)
    assert math.isclose(eval_f(spec, t, x + spec.L, u), f, rel_tol=1e-11, abs_tol=1e-12)


@settings(max_examples=60, deadline=None)
@given(specs(), points)
def test_zero_state_and_cap(spec, tx):
    t, x = tx
    assert eval_f(spec, t, x, 0.0) == 0.0
    # the cap is a 64-point grid maximum, so probe just above it off the grid
    for s in (1.01, 1.3, 3.0):
        assert eval_f(spec, t, x, s * spec.cap_M) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(specs(), points, st.floats(0.01, 2.0))
def test_derivative_matches_central_difference(spec, tx, u):
    t, x = tx
    h = 1e-5
    fd = (eval_f(spec, t, x, u + h) - eval_f(spec, t, x, u - h)) / (2 * h)
    assert fd == pytest.approx(eval_f_u(spec, t, x, u), rel=1e-6, abs=1e-6)


@settings(max_examples=40, deadline=None)
@given(specs())
def test_linear_bound(spec):
    K = spec.linear_bound()
    T, X = spec.period_grid(16)
    for u in np.linspace(0.0, spec.cap_M, 9):
        assert np.all(spec.rate(T, X, u) <= K * u + 1e-12)


@settings(max_examples=40, deadline=None)
@given(specs(), points)
def test_logistic_per_capita_decreasing(spec, tx):
    if spec.family == "degenerate":
        return
    t, x = tx
    u = np.linspace(0.01, 3.0, 50)
    per_capita = spec.rate(t, x, u) / u
    assert np.all(np.diff(per_capita) < 0)


@settings(max_examples=40, deadline=None)
@given(specs())
def test_round_trip_is_exact(spec):
    back = ReactionSpec.from_json(spec.to_json())
    assert back.to_dict() == spec.to_dict()
    assert json.dumps(back.to_dict(), sort_keys=True) == spec.to_json()

"""Semi-wave speeds by shooting.

A semi-wave solves d q'' - c q' + F(q) = 0 on x > 0 with q(0) = 0,
mu q'(0) = c and q(inf) = target.  Shooting from x = 0 with slope c/mu,
a too large c overshoots the target and a too small c turns back
(q' = 0) below it, so c is found by bisection.  The orbit is followed in
the phase plane with q as the independent variable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .errors import BracketError, ConvergenceError, PreconditionError
from .estimates import SpeedEstimate
from .reaction import ReactionSpec

OVERSHOOT = 1
UNDERSHOOT = -1


@dataclass(frozen=True)
class SemiWaveProblem:
    """d q'' - c q' + F(q) = 0, q(0) = 0, mu q'(0) = c, q(inf) = target."""

    d: float
    mu: float
    F: Callable[[float], float]
    F_prime0: float
    target: float
    label: str = ""

    @classmethod
    def logistic(cls, a: float = 1.0, b: float = 1.0, d: float = 1.0, mu: float = 1.0):
        return cls(d, mu, lambda q: q * (a - b * q), a, a / b, f"logistic(a={a}, b={b})")

    @classmethod
    def majorant(cls, K: float, M: float, d: float = 1.0, mu: float = 1.0):
        """F(u) = (K/M) u (2M - u), the linear-bound majorant."""
        return cls(d, mu, lambda q: K / M * q * (2 * M - q), 2 * K, 2 * M, f"majorant(K={K}, M={M})")

    def check(self, samples: int = 64) -> None:
        F, T = self.F, self.target
        if abs(F(0.0)) > 1e-14 or abs(F(T)) > 1e-12 * max(1.0, T):
            raise PreconditionError("F must vanish at 0 and at the target")
        inner = np.linspace(0, T, samples + 2)[1:-1]
        if min(F(q) for q in inner) <= 0:
            raise PreconditionError("F must be positive between 0 and the target")
        if self.d <= 0 or self.mu <= 0 or self.F_prime0 <= 0:
            raise PreconditionError("d, mu and F'(0) must be positive")

    @property
    def kpp_speed(self) -> float:
        return 2.0 * math.sqrt(self.d * self.F_prime0)


def shoot(prob: SemiWaveProblem, c: float, rtol: float = 1e-11):
    """Follow the orbit leaving (q, q') = (0, c/mu) in the phase plane.

    The slope r = q' is integrated as a function of q,
    dr/dq = (c r - F(q)) / (d r), which turns the infinite-x connection
    into a finite q-interval.  Returns (outcome, q_reached, solution):
    OVERSHOOT if r stays positive up to the target, UNDERSHOOT if r
    reaches 0 (q turns back) at q_reached < target.
    """
    d, F, T = prob.d, prob.F, prob.target

    def rhs(q, r):
        return [(c * r[0] - F(q)) / (d * r[0])]

    def turn(_, r):
        return r[0] - 1e-14 * max(1.0, c / prob.mu)

    turn.terminal = True
    turn.direction = -1
    sol = solve_ivp(
        rhs, (0.0, T), [c / prob.mu], method="RK45", events=turn,
        rtol=rtol, atol=1e-14, dense_output=True,
    )
    if sol.t_events[0].size:
        return UNDERSHOOT, float(sol.t_events[0][0]), sol
    if sol.status != 0:
        # the step size collapsed as r -> 0 before the event fired
        return UNDERSHOOT, float(sol.t[-1]), sol
    return OVERSHOOT, T, sol


MATCH_LEVEL = 0.5


def stable_manifold(prob: SemiWaveProblem, c: float, q_to: float, rtol: float = 1e-11):
    """Slope q' along the orbit entering the saddle (target, 0), integrated down to q_to."""
    d, F, T = prob.d, prob.F, prob.target
    eps = 1e-6 * T
    fT = (F(T + eps) - F(T - eps)) / (2 * eps)
    lam = (c - math.sqrt(c * c - 4 * d * fT)) / (2 * d)
    q0 = T * (1 - 1e-6)
    sol = solve_ivp(
        lambda q, r: [(c * r[0] - F(q)) / (d * r[0])],
        (q0, q_to), [lam * (q0 - T)], method="RK45", rtol=rtol, atol=1e-14,
    )
    return float(sol.y[0, -1])


def connection_gap(prob: SemiWaveProblem, c: float) -> float:
    """|forward slope - stable-manifold slope| at q = MATCH_LEVEL * target."""
    qm = MATCH_LEVEL * prob.target
    _, q_end, sol = shoot(prob, c)
    if q_end < qm:
        return math.inf
    return abs(float(sol.sol(qm)[0]) - stable_manifold(prob, c, qm))


def shoot_semiwave_speed(prob: SemiWaveProblem, tol: float = 1e-10, accept_tol: float = 1e-4) -> SpeedEstimate:
    """Bisection on c over [tol, 2 sqrt(d F'(0))] until the bracket is < tol * c."""
    prob.check()
    lo, hi = tol, prob.kpp_speed
    if shoot(prob, lo)[0] != UNDERSHOOT or shoot(prob, hi)[0] != OVERSHOOT:
        raise BracketError(f"no sign change of the shooting outcome on [{lo:g}, {hi:g}]")
    it = 0
    while hi - lo > tol * hi and it < 200:
        mid = 0.5 * (lo + hi)
        if shoot(prob, mid)[0] == OVERSHOOT:
            hi = mid
        else:
            lo = mid
        it += 1
    c = 0.5 * (lo + hi)
    # q(inf) surrogate.  A forward orbit cannot be followed into the saddle
    # (its closest approach only improves like a fractional power of the
    # bracket width), so the accepted orbit is matched against the saddle's
    # stable manifold at q = MATCH_LEVEL * target.
    closest = float(prob.target - shoot(prob, lo)[1])
    gap = connection_gap(prob, c)
    if not gap < accept_tol:
        raise ConvergenceError(
            f"accepted speed {c:.10g} misses the connection to the target by {gap:.3g}", gap=gap
        )
    return SpeedEstimate(
        value=c, method="SemiWave", residual=hi - lo,
        meta={"problem": prob.label, "d": prob.d, "mu": prob.mu, "target": prob.target,
              "iterations": it, "connection_gap": gap, "closest_approach": closest},
    )


def semiwave_profile(prob: SemiWaveProblem, c: float, n: int = 400, q_stop: float = 0.999):
    """Sampled (x, q) of the orbit with speed c, from q = 0 up to q_stop * target.

    x(q) is recovered from dx/dq = 1/q'.
    """
    _, q_end, sol = shoot(prob, c)
    q = np.linspace(0.0, min(q_end, q_stop * prob.target), n)
    r = sol.sol(q)[0]
    inv = 1.0 / np.maximum(r, 1e-300)
    x = np.concatenate([[0.0], np.cumsum(0.5 * (inv[1:] + inv[:-1]) * np.diff(q))])
    return x, q


def upper_bound_c_plus(spec: ReactionSpec, tol: float = 1e-10) -> float:
    """c* omega, with c* the semi-wave speed of F = (K/M) u (2M - u)."""
    prob = SemiWaveProblem.majorant(spec.linear_bound(), spec.cap_M, spec.d, spec.mu)
    return shoot_semiwave_speed(prob, tol).value * spec.omega

"""The time-omega Poincare map U over compactly or semi-infinitely supported data.

apply_U dispatches on the class tag of the datum to the matching solver;
apply_U_truncated is the cut-off map U_B evaluated at one point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import PreconditionError
from .pde_engine import (
    LEFT_FRONT, RIGHT_FRONT, TWO_SIDED, WHOLE_LINE, CompactProfile, march_front_raw,
    reflect_state, solve_cauchy, solve_two_sided, _steps,
)
from .periodic_state import PeriodicState
from .reaction import ReactionSpec

BELOW_P_SLACK = 1e-6


@dataclass(frozen=True)
class UNumerics:
    """Grids for one application of U.

    dx is the target spacing of every solver grid (rounded so that L/dx is
    an integer); window is the trailing window of one-sided solves.
    """

    dx: float = 0.05
    dt: float = 0.005
    window: float = 30.0
    cauchy_margin: float = 15.0
    nx_two_sided: int = 200

    def grid(self, L: float) -> tuple[int, float]:
        ny = max(4, math.ceil(L / self.dx - 1e-9))
        return ny, L / ny


def eta(r):
    """Cut-off: 1 on [0, 1/2], 0 on [1, inf), quintic smoothstep in between."""
    r = np.asarray(r, dtype=float)
    s = np.clip((r - 0.5) / 0.5, 0.0, 1.0)
    return 1.0 - s**3 * (10.0 - 15.0 * s + 6.0 * s**2)


def periodic_table(spec: ReactionSpec, chunk: np.ndarray, x0: float, dx: float, T: float, dt: float):
    """Evolution of the L-periodic datum ``chunk`` (samples at x0 + j dx) for time T.

    Returned as left-boundary table arguments for the compiled solvers.
    """
    nsteps, dts = _steps(T, dt)
    code, k, am, amodes, bm, bmodes = spec.kernel_args()
    tab = K.march_periodic(
        np.array(chunk, dtype=float), float(x0), float(dx), 0.0, nsteps, dts,
        spec.d, spec.omega, spec.L, code, k, am, amodes, bm, bmodes,
    )
    return (tab, float(T), False, spec.L, float(x0))


def periodic_profile(values, L: float, x0: float = 0.0):
    """Callable L-periodic linear interpolant of samples at x0 + j L / n."""
    v = np.asarray(values, dtype=float)
    n = v.shape[0]

    def f(x):
        r = np.mod(np.asarray(x, dtype=float) - x0, L) / L * n
        j = np.floor(r).astype(int) % n
        fr = r - np.floor(r)
        return v[j] * (1 - fr) + v[(j + 1) % n] * fr

    return f


def whole_line_periodic(values, L: float) -> CompactProfile:
    """Whole-line datum that repeats the given one-period samples."""
    v = np.asarray(values, dtype=float)
    n = v.shape[0]
    x = np.arange(n + 1) * L / n
    return CompactProfile.whole_line(x, np.append(v, v[0]), tail=periodic_profile(v, L), periodic=True)


def _check_below(prof: CompactProfile, pstate: PeriodicState | None) -> CompactProfile:
    if pstate is not None:
        prof.below_p = prof.check_below_p(pstate, BELOW_P_SLACK * pstate.max)
    return prof


def _apply_right(spec, pstate, phi: CompactProfile, num: UNumerics) -> CompactProfile:
    ny, dx = num.grid(spec.L)
    W = math.ceil(num.window / spec.L) * spec.L
    nx = int(round(W / dx))
    X_L = phi.h0 - W
    x = X_L + np.arange(nx + 1) * dx
    U0 = phi(x)
    U0[-1] = 0.0
    if phi.tail_at_p and pstate is not None:
        table = (np.ascontiguousarray(pstate.table()), pstate.omega, True, pstate.L, 0.0)
        tail = None
    else:
        table = periodic_table(spec, U0[:ny], X_L, dx, spec.omega, num.dt)
        tail = periodic_profile(table[0][-1], spec.L, X_L)
    out = march_front_raw(spec, U0, X_L, phi.h0, spec.omega, num.dt, K.LEFT_DIRICHLET_TABLE,
                          width=W, table=table)
    g1, h1, U1 = out[2], out[3], out[12][-1]
    xs = g1 + np.arange(nx + 1) * (h1 - g1) / nx
    if tail is None:
        tail = (lambda z, ps=pstate: ps.p0_at(z))
    prof = CompactProfile(-math.inf, h1, xs, np.maximum(U1, 0.0), RIGHT_FRONT,
                          tail=tail, tail_at_p=phi.tail_at_p)
    return prof


def apply_U(spec: ReactionSpec, pstate: PeriodicState | None, phi: CompactProfile,
            numerics: UNumerics | None = None) -> CompactProfile:
    """Time-omega map of the problem matching phi's supporting points."""
    num = numerics or UNumerics()
    tag = phi.class_tag
    if tag == TWO_SIDED:
        tr = solve_two_sided(spec, phi, spec.omega, num.nx_two_sided, num.dt, pstate=pstate,
                             stop_on_vanish=False)
        _, x, u = tr.final
        u = np.maximum(u, 0.0)
        prof = CompactProfile(float(tr.g[-1]), float(tr.h[-1]), x, u, TWO_SIDED)
    elif tag == RIGHT_FRONT:
        prof = _apply_right(spec, pstate, phi, num)
    elif tag == LEFT_FRONT:
        rstate = None if pstate is None else reflect_state(pstate)
        prof = _apply_right(spec.reflected(), rstate, phi.reflected(), num).reflected()
    elif phi.periodic:
        ny, dx = num.grid(spec.L)
        xg = np.arange(ny) * dx
        nsteps, dts = _steps(spec.omega, num.dt)
        code, k, am, amodes, bm, bmodes = spec.kernel_args()
        tab = K.march_periodic(np.array(phi(xg)), 0.0, dx, 0.0, nsteps, dts, spec.d, spec.omega,
                               spec.L, code, k, am, amodes, bm, bmodes)
        prof = whole_line_periodic(tab[-1], spec.L)
    else:
        # bounded support on at least one side: Cauchy solve on an enlarged window
        X = max(abs(phi.x[0]), abs(phi.x[-1])) + num.cauchy_margin
        nx = int(round(2 * X / num.dx))
        tr = solve_cauchy(spec, phi, spec.omega, X, nx, num.dt, pstate=pstate)
        _, x, u = tr.final
        prof = CompactProfile.whole_line(x, np.maximum(u, 0.0))
    return _check_below(prof, pstate)


def apply_U_iterates(spec: ReactionSpec, pstate: PeriodicState | None, phi: CompactProfile,
                     n: int, numerics: UNumerics | None = None) -> list:
    """[U phi, U^2 phi, ..., U^n phi]; each iterate carries its supporting points."""
    if n < 1:
        raise PreconditionError("n must be at least 1")
    out = []
    cur = phi
    for _ in range(n):
        cur = apply_U(spec, pstate, cur, numerics)
        out.append(cur)
    return out


def apply_U_truncated(spec: ReactionSpec, pstate: PeriodicState | None, phi: CompactProfile,
                      B: float, x: float, numerics: UNumerics | None = None) -> float:
    """U[eta(|. - x| / B) phi](x), by a two-sided solve on [max(g0, x-B), min(h0, x+B)]."""
    if not B > 0:
        raise PreconditionError("B must be positive")
    if not (phi.g0 - B < x < phi.h0 + B):
        return 0.0
    lo = max(phi.g0, x - B)
    hi = min(phi.h0, x + B)
    if not lo < hi:
        return 0.0
    num = numerics or UNumerics()
    datum = CompactProfile.two_sided(
        lo, hi, lambda y: eta(np.abs(y - x) / B) * phi(y), n=num.nx_two_sided + 1
    )
    if datum.sup <= 0:
        return 0.0
    tr = solve_two_sided(spec, datum, spec.omega, num.nx_two_sided, num.dt, pstate=pstate,
                         stop_on_vanish=False)
    _, xs, u = tr.final
    if not (xs[0] < x < xs[-1]):
        return 0.0
    return float(np.interp(x, xs, u))

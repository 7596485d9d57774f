"""Weinberger-type recursion for one-sided spreading speeds.

Profiles a(xi, x) of the front-like class are stored along diagonals:
D(s)(y) = a(s + y, y).  With this parameterization the recursion reads

    D_n(s)(y) = max(phi(s + y, y), U[D_{n-1}(s + c)](y)),

where U is the time-omega map of the right one-sided problem (or of the
Cauchy problem in Cauchy mode), and the x-periodicity of a becomes the
exact shift identity D(s + L)(y) = D(s)(y + L).  Only the s-nodes
s_k = k L / m of one period are stored; any other s is reached by a shift
of L and linear interpolation between neighbouring nodes.  Each stored
node keeps the solver output on its own grid; left of a trusted region
the node continues L-periodically.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels as K
from .errors import (
    BracketError, ConfigError, InconclusiveError, PreconditionError, StepSizeError,
)
from .estimates import SpeedEstimate
from .pde_engine import _steps
from .periodic_state import PeriodicState
from .poincare import eta, periodic_profile, periodic_table
from .reaction import ReactionSpec
from .semiwave import upper_bound_c_plus

BELOW = "Below"
ABOVE_OR_EQUAL = "AboveOrEqual"
UNDECIDED = "Undecided"

PLUS = "plus"
CAUCHY = "cauchy"


# admissible initial profiles

def tau_ramp(xi):
    """max(-xi, 0) / (max(-xi, 0) + 1): positive iff xi < 0, tends to 1 as xi -> -inf."""
    r = np.maximum(-np.asarray(xi, dtype=float), 0.0)
    return r / (r + 1.0)


def clip_ramp(xi):
    """clip(-xi, 0, 1): reaches its plateau at xi = -1."""
    return np.clip(-np.asarray(xi, dtype=float), 0.0, 1.0)


@dataclass
class AdmissiblePhi:
    """phi(xi, x) = ramp(xi) * w(x) with ramp nonincreasing, ramp > 0 iff xi < zero_from.

    w is L-periodic with 0 < w < p(0, .), sampled on [0, L).
    """

    ramp: Callable
    w_values: np.ndarray
    L: float
    zero_from: float = 0.0
    name: str = "phi"

    def __post_init__(self):
        self.w_values = np.asarray(self.w_values, dtype=float)
        self._w = periodic_profile(self.w_values, self.L)

    def w(self, x):
        return self._w(x)

    def value(self, xi, x):
        return self.ramp(xi) * self._w(x)

    def H0(self, xi):
        """phi(xi + x, x) > 0 iff x < H0(xi)."""
        return self.zero_from - np.asarray(xi, dtype=float)

    @property
    def H2(self) -> float:
        """Smallest H with phi(xi, .) identically zero for xi >= H."""
        return self.zero_from

    @property
    def h0_cauchy(self) -> float:
        """phi(xi, .) vanishes identically iff xi >= this value."""
        return self.zero_from

    def to_xi_profile(self, xi_lo: float, xi_hi: float, ds: float, nx: int = 16) -> "XiProfile":
        xi = np.arange(math.floor(xi_lo / ds), math.ceil(xi_hi / ds) + 1) * ds
        x = np.arange(nx) * self.L / nx
        vals = self.value(xi[:, None], x[None, :])
        return XiProfile(xi, x, vals, self.w(x), self.H0(xi), self.L)

    def check(self, pstate: PeriodicState) -> None:
        p0 = pstate.p0_at(np.arange(self.w_values.size) * self.L / self.w_values.size)
        if not (np.all(self.w_values > 0) and np.all(self.w_values < p0)):
            raise PreconditionError(f"{self.name}: plateau must satisfy 0 < w < p(0, .)")
        xi = np.linspace(self.zero_from - 20, self.zero_from + 2, 500)
        r = self.ramp(xi)
        if np.any(np.diff(r) > 1e-15) or np.any(r > 1 + 1e-15):
            raise PreconditionError(f"{self.name}: ramp must be nonincreasing and at most 1")


def default_phi(pstate: PeriodicState, fraction: float = 0.5) -> AdmissiblePhi:
    """tau ramp times fraction * p(0, .)."""
    return AdmissiblePhi(tau_ramp, fraction * pstate.p0, pstate.L, 0.0, "tau*w")


def compact_phi(pstate: PeriodicState, fraction: float = 0.5) -> AdmissiblePhi:
    """clip(-xi, 0, 1) ramp times fraction * p(0, .)."""
    return AdmissiblePhi(clip_ramp, fraction * pstate.p0, pstate.L, 0.0, "clip*w")


# numerics

@dataclass(frozen=True)
class RecursionNumerics:
    """Discretization of the recursion.

    s_nodes: diagonal nodes per period (xi spacing L / s_nodes);
    dx: target solver spacing, rounded so that L / dx is an integer;
    window: trailing window of each solve, rounded up to a multiple of L;
    margin: width next to the window edge that is not trusted and is
    replaced by the periodic continuation;
    cauchy_right: room right of the datum in Cauchy mode.
    """

    s_nodes: int = 8
    dx: float = 0.1
    dt: float = 0.005
    window: float = 30.0
    margin: float = 6.0
    cauchy_right: float = 16.0
    cutoff: float = 1e-13
    check_tol: float = 1e-10

    def grid(self, L: float):
        ny = max(4, math.ceil(L / self.dx - 1e-9))
        dx = L / ny
        W = math.ceil(self.window / L - 1e-9) * L
        margin = math.ceil(self.margin / L - 1e-9) * L
        return ny, dx, W, margin


@dataclass
class _Node:
    xs0: float          # left end of the stored grid
    dx: float
    V: np.ndarray       # solver output (U part of the recursion)
    end: float          # V vanishes for y >= end
    H: float            # support edge of the node (plus mode)
    ref0: float         # trusted region starts here; periodic continuation to the left


@dataclass
class StepCheck:
    """Worst-case margins of the structural invariants at one step.

    Negative values are violations; ``interp_bound`` estimates the linear
    interpolation error of the stored profiles (dx^2 / 8 * max |u''|).
    """

    n: int
    n_monotone: float
    xi_monotone: float
    H_monotone: float
    periodic_x: float
    shift_identity: float
    interp_bound: float
    continuation: float = 0.0

    def ok(self, tol: float) -> bool:
        lim = -(tol + self.interp_bound)
        return (
            self.n_monotone >= lim and self.xi_monotone >= lim and self.H_monotone >= -tol
            and self.periodic_x <= tol + self.interp_bound and self.shift_identity <= tol
        )


@dataclass
class XiProfile:
    """Sampled a(xi_i, x_j) on an L-periodic x grid.

    Left of xi_grid[0] the profile is left_plateau(x); right of
    xi_grid[-1] it is 0.  H0 holds the supporting-point map on xi_grid.
    """

    xi_grid: np.ndarray
    x_grid: np.ndarray
    values: np.ndarray
    left_plateau: np.ndarray
    H0: np.ndarray
    L: float

    def H0_at(self, xi: float) -> float:
        """Supporting-point map, linear between grid values, slope -1 outside."""
        if xi < self.xi_grid[0]:
            return float(self.H0[0] + (self.xi_grid[0] - xi))
        if xi > self.xi_grid[-1]:
            return float(self.H0[-1] - (xi - self.xi_grid[-1]))
        return float(np.interp(xi, self.xi_grid, self.H0))

    def periodic_in_x(self) -> bool:
        return self.values.shape[1] == self.x_grid.size

    def monotone_in_xi(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.diff(self.values, axis=0) <= tol))

    def value(self, xi, x):
        xi = np.asarray(xi, dtype=float)
        x = np.asarray(x, dtype=float)
        nx = self.x_grid.size
        r = np.mod(x, self.L) / self.L * nx
        j0 = np.floor(r).astype(int) % nx
        fr = r - np.floor(r)
        j1 = (j0 + 1) % nx
        out = np.empty(np.broadcast(xi, x).shape)
        xib, j0b, j1b, frb = np.broadcast_arrays(xi, j0, j1, fr)
        for idx in np.ndindex(out.shape):
            col0 = self.values[:, j0b[idx]]
            col1 = self.values[:, j1b[idx]]
            lp = self.left_plateau[j0b[idx]] * (1 - frb[idx]) + self.left_plateau[j1b[idx]] * frb[idx]
            v0 = np.interp(xib[idx], self.xi_grid, col0, left=np.nan, right=0.0)
            v1 = np.interp(xib[idx], self.xi_grid, col1, left=np.nan, right=0.0)
            v = v0 * (1 - frb[idx]) + v1 * frb[idx]
            out[idx] = lp if np.isnan(v) else v
        return out


class Recursion:
    """State of the recursion for one speed c.

    mode PLUS uses the right one-sided free boundary problem, mode CAUCHY
    the Cauchy problem.  Call step() to advance n.
    """

    def __init__(self, spec: ReactionSpec, pstate: PeriodicState, phi: AdmissiblePhi, c: float,
                 numerics: RecursionNumerics | None = None, mode: str = PLUS,
                 record_checks: bool = False):
        if mode not in (PLUS, CAUCHY):
            raise PreconditionError(f"unknown mode {mode!r}")
        self.spec = spec
        self.pstate = pstate
        self.p_max = float(pstate.max)
        self.phi = phi
        self.c = float(c)
        self.num = numerics or RecursionNumerics()
        self.mode = mode
        self.record_checks = record_checks
        self.m = self.num.s_nodes
        self.L = spec.L
        self.ds = self.L / self.m
        self.ny, self.dx, self.W, self.margin = self.num.grid(self.L)
        self.nx = int(round(self.W / self.dx))
        self.s = np.arange(self.m) * self.ds
        self.n = 0
        self.nodes: list = [None] * self.m
        self.H = np.array([float(phi.H0(sk)) for sk in self.s])
        self.xg = np.arange(self.ny) * self.dx
        self.w = phi.w(self.xg)
        self.alpha = self.w.copy()
        self.history: list = []
        self.checks: list = []
        self.code_args = spec.kernel_args()
        self._record()

    # evaluation of the stored profile

    def _node_V(self, k: int, y, nodes=None) -> np.ndarray:
        """Solver part of node k at y; left of the trusted region it repeats one period."""
        nd = (self.nodes if nodes is None else nodes)[k]
        if nd is None:
            return np.zeros(np.shape(y))
        yy = np.where(y < nd.ref0, nd.ref0 + np.mod(y - nd.ref0, self.L), y)
        v = np.interp(yy, nd.xs0 + np.arange(nd.V.size) * nd.dx, nd.V, right=0.0)
        return np.where(yy >= nd.end, 0.0, v)

    def node_eval(self, k: int, y, nodes=None) -> np.ndarray:
        """D_n(s_k)(y) for base node k (or for an older node list)."""
        y = np.asarray(y, dtype=float)
        return np.maximum(self.phi.value(self.s[k] + y, y), self._node_V(k, y, nodes))

    def _split(self, s: float):
        q = s / self.ds
        j = math.floor(q)
        theta = q - j
        if theta > 1 - 1e-12:
            j += 1
            theta = 0.0
        elif theta < 1e-12:
            theta = 0.0
        return j, theta

    def _node_ref(self, j: int):
        r = j % self.m
        shift = (j - r) // self.m * self.L
        return r, shift

    def _V_end(self, s: float, nodes=None) -> float:
        """Right end of the solver part of D(s).

        In PLUS mode the ends of the neighbouring nodes are interpolated
        like the values, so the datum's free boundary sits between them.
        """
        nodes = self.nodes if nodes is None else nodes
        j, theta = self._split(s)
        r0, sh0 = self._node_ref(j)
        if nodes[r0] is None:
            return -math.inf
        e0 = nodes[r0].end - sh0
        if not theta:
            return e0
        r1, sh1 = self._node_ref(j + 1)
        e1 = nodes[r1].end - sh1
        if self.mode == PLUS:
            return (1 - theta) * e0 + theta * e1
        return max(e0, e1)

    def eval_s(self, s: float, y, nodes=None) -> np.ndarray:
        """D_n(s)(y) for any s: shift identity plus linear interpolation in s.

        phi is evaluated exactly; the solver parts of the two neighbouring
        nodes are interpolated and, in PLUS mode, cut at the interpolated end.
        """
        y = np.asarray(y, dtype=float)
        j, theta = self._split(s)
        r0, sh0 = self._node_ref(j)
        v = self._node_V(r0, y + sh0, nodes)
        if theta:
            r1, sh1 = self._node_ref(j + 1)
            v = (1 - theta) * v + theta * self._node_V(r1, y + sh1, nodes)
            if self.mode == PLUS:
                v = np.where(y >= self._V_end(s, nodes), 0.0, v)
        return np.maximum(self.phi.value(s + y, y), v)

    def support_s(self, s: float) -> float:
        """Right end of the support of D(s) (PLUS mode: the free boundary H(s))."""
        return max(float(self.phi.H0(s)), self._V_end(s))

    def a(self, xi, x) -> np.ndarray:
        """a_n(xi, x) = D_n(xi - x)(x)."""
        xi = np.asarray(xi, dtype=float)
        x = np.asarray(x, dtype=float)
        xi, x = np.broadcast_arrays(xi, x)
        out = np.empty(xi.shape)
        flat_xi, flat_x, flat_out = xi.ravel(), x.ravel(), out.reshape(-1)
        for i in range(flat_xi.size):
            flat_out[i] = self.eval_s(flat_xi[i] - flat_x[i], np.array([flat_x[i]]))[0]
        return out

    def diag_at(self, xi: float) -> np.ndarray:
        """a_n(xi, x) on the one-period x grid."""
        return np.array([self.eval_s(xi - x, np.array([x]))[0] for x in self.xg])

    def front_level(self, s: float, level: float) -> float:
        """Rightmost y with D(s)(y) >= level (Cauchy-mode front)."""
        j, _ = self._split(s)
        r, sh = self._node_ref(j)
        nd = self.nodes[r]
        if nd is None:
            return self.H[r] - sh
        ys = nd.xs0 + np.arange(nd.V.size) * nd.dx
        vals = self.eval_s(s, ys - sh)
        idx = np.nonzero(vals >= level)[0]
        return (ys[idx[-1]] - sh) if idx.size else -math.inf

    # one recursion step

    def _solve_node(self, k: int):
        spec, num = self.spec, self.num
        s = self.s[k] + self.c
        E = self.support_s(s)
        code, kk, am, amodes, bm, bmodes = self.code_args
        nsteps, dts = _steps(spec.omega, num.dt)
        if self.mode == PLUS:
            X_L = E - self.W
            x = X_L + np.arange(self.nx + 1) * self.dx
            U0 = self.eval_s(s, x)
            U0[-1] = 0.0
            table = periodic_table(spec, U0[: self.ny], X_L, self.dx, spec.omega, num.dt)
            out = K.march_front(
                U0, float(X_L), float(E), 0.0, nsteps, dts, spec.d, spec.mu, spec.omega, spec.L,
                code, kk, am, amodes, bm, bmodes,
                K.LEFT_DIRICHLET_TABLE, float(self.W), table[0], table[1], False, spec.L, table[4],
                nsteps, nsteps, 0.0, spec.omega,
            )
            if out[0] == K.STATUS_NONFINITE:
                raise StepSizeError("non-finite values in a recursion solve; reduce dt")
            g1, h1, V = out[2], out[3], out[12][-1].copy()
            V = np.maximum(V, 0.0)
            dxn = (h1 - g1) / self.nx
            node = _Node(xs0=g1, dx=dxn, V=V, end=h1, H=max(float(self.phi.H0(self.s[k])), h1),
                         ref0=g1 + self.margin)
        else:
            X_L = E - self.W
            nright = int(math.ceil(num.cauchy_right / self.dx))
            x = X_L + np.arange(self.nx + nright + 1) * self.dx
            U0 = self.eval_s(s, x)
            table = periodic_table(spec, U0[: self.ny], X_L, self.dx, spec.omega, num.dt)
            status, _, _, snaps = K.march_fixed(
                U0, x, 0.0, nsteps, dts, spec.d, spec.omega, spec.L,
                code, kk, am, amodes, bm, bmodes, nsteps, math.inf, False, False, 0.05,
                K.LEFT_DIRICHLET_TABLE, table[0], table[1], False, spec.L, table[4],
            )
            if status == K.STATUS_NONFINITE:
                raise StepSizeError("non-finite values in a recursion solve; reduce dt")
            V = np.maximum(snaps[-1].copy(), 0.0)
            big = np.nonzero(V >= num.cutoff * max(V.max(), 1e-300))[0]
            last = big[-1] if big.size else 0
            V[last + 1:] = 0.0
            end = x[min(last + 1, x.size - 1)]
            if last + 1 >= x.size - 1:
                raise ConfigError("cauchy_right", "Cauchy window too short on the right")
            node = _Node(xs0=X_L, dx=self.dx, V=V, end=end, H=math.inf, ref0=X_L + self.margin)
        return node

    def step(self):
        """Advance n by one."""
        old_nodes = list(self.nodes)
        old_H = self.H.copy()
        new_nodes = [self._solve_node(k) for k in range(self.m)]
        self.nodes = new_nodes
        self.H = np.array([nd.H for nd in new_nodes])
        # plateau: alpha_n = max(w, U_per[alpha_{n-1}])
        code, kk, am, amodes, bm, bmodes = self.code_args
        nsteps, dts = _steps(self.spec.omega, self.num.dt)
        per = K.march_periodic(self.alpha.copy(), 0.0, self.dx, 0.0, nsteps, dts, self.spec.d,
                               self.spec.omega, self.spec.L, code, kk, am, amodes, bm, bmodes)[-1]
        self.alpha = np.maximum(self.w, per)
        self.n += 1
        change = 0.0
        n_mono = math.inf
        for k in range(self.m):
            ys = self._trusted_points(k, old_nodes)
            d = self.node_eval(k, ys) - self.node_eval(k, ys, old_nodes)
            change = max(change, float(np.abs(d).max()))
            n_mono = min(n_mono, float(d.min()))
        if self.record_checks:
            self.checks.append(self._check(n_mono, old_H))
        self._record(change)
        return self

    # diagnostics

    @property
    def probe_xi(self) -> float:
        return self.phi.H2 if self.mode == PLUS else self.phi.h0_cauchy

    def _record(self, change: float = math.inf):
        diag = self.diag_at(self.probe_xi)
        if self.mode == PLUS:
            front = float(self.H[0])
        else:
            front = self.front_level(0.0, 0.5 * float(self.w.min()))
        self.history.append({
            "n": self.n,
            "diag_min": float(diag.min()),
            "diag_max": float(diag.max()),
            "diag_margin": float((diag - self.w).min()),
            "front0": front,
            "change": change,
            "alpha_gap": float(np.abs(self.alpha - self.pstate.p0_at(self.xg)).max()),
            "diag": diag,
        })

    def _trusted_points(self, k: int, other=None) -> np.ndarray:
        """Sample points of node k inside the trusted region of the stored
        solves (and of ``other`` when given), up to the support edge."""
        lo = -math.inf
        hi = -math.inf
        for nodes in (self.nodes, other):
            if nodes is None:
                continue
            nd = nodes[k]
            if nd is None:
                hi = max(hi, float(self.phi.H0(self.s[k])))
                continue
            lo = max(lo, nd.ref0)
            hi = max(hi, nd.end)
        hi = max(hi, float(self.phi.H0(self.s[k])))
        if not math.isfinite(lo):
            lo = hi - self.W + self.margin
        return np.arange(lo, hi + self.dx, self.dx / 4)

    def continuation_jump(self) -> float:
        """Largest mismatch of a stored node over one period at its trusted edge.

        The left continuation repeats one period, so this is the size of the
        seam it introduces; it is a truncation error of the window.
        """
        worst = 0.0
        for nd in self.nodes:
            if nd is None:
                continue
            ys = nd.xs0 + np.arange(nd.V.size) * nd.dx
            a = np.interp(nd.ref0, ys, nd.V)
            b = np.interp(nd.ref0 + self.L, ys, nd.V)
            worst = max(worst, abs(a - b))
        return worst

    def _interp_bound(self) -> float:
        worst = 0.0
        for nd in self.nodes:
            if nd is None or nd.V.size < 3:
                continue
            worst = max(worst, float(np.abs(np.diff(nd.V, 2)).max()) / 8.0)
        return worst

    def _check(self, n_mono: float, old_H) -> StepCheck:
        xi_mono = math.inf
        for k in range(self.m):
            ys = self._trusted_points(k)
            ys = ys[ys >= ys[0] + self.L]
            xi_mono = min(xi_mono, float((self.node_eval(k, ys) - self.eval_s(self.s[k] + self.ds, ys)).min()))
        H_mono = float((self.H - old_H).min()) if self.mode == PLUS else 0.0
        xs = self.xg
        xi = np.full(xs.size, self.probe_xi - 0.5 * self.L)
        per = float(np.abs(self.a(xi, xs) - self.a(xi, xs + self.L)).max())
        if self.mode == PLUS:
            shift = max(abs(self.support_s(sk + self.L) - (self.support_s(sk) - self.L)) for sk in self.s)
        else:
            shift = 0.0
        return StepCheck(self.n, n_mono, xi_mono, H_mono, per, shift, self._interp_bound(),
                         self.continuation_jump())

    def xi_profile(self, xi_lo: float, xi_hi: float) -> XiProfile:
        """Sample a_n on the xi grid of spacing L / s_nodes covering [xi_lo, xi_hi]."""
        k0 = math.floor(xi_lo / self.ds)
        k1 = math.ceil(xi_hi / self.ds)
        xi = np.arange(k0, k1 + 1) * self.ds
        vals = np.array([[self.eval_s(x_i - x, np.array([x]))[0] for x in self.xg] for x_i in xi])
        H0 = np.array([self.support_s(x_i) for x_i in xi])
        return XiProfile(xi, self.xg.copy(), vals, self.alpha.copy(), H0, self.L)


RecursionState = Recursion


def recursion_step(state: Recursion) -> Recursion:
    """a_n -> a_{n+1} = max(phi0, Q_+[a_n](. + c, .)), one solve per diagonal node."""
    return state.step()


def apply_Q_plus(spec: ReactionSpec, pstate: PeriodicState, phi, xi: float,
                 numerics=None) -> np.ndarray:
    """Q_+[phi](xi + y, y) for y on the one-period grid of ``phi``.

    One right one-sided solve from the datum x -> phi(x + xi, x) on
    (-inf, H0(xi)]; ``phi`` is an XiProfile or an AdmissiblePhi.
    """
    from .pde_engine import CompactProfile
    from .poincare import UNumerics, apply_U

    num = numerics or UNumerics()
    if isinstance(phi, AdmissiblePhi):
        h0 = float(phi.H0(xi))
        datum = lambda x: phi.value(x + xi, x)
        plateau = phi.w
        xg = np.arange(phi.w_values.size) * phi.L / phi.w_values.size
    else:
        h0 = phi.H0_at(xi)
        datum = lambda x: phi.value(x + xi, x)
        plateau = periodic_profile(phi.left_plateau, phi.L)
        xg = phi.x_grid
    W = math.ceil(num.window / spec.L) * spec.L
    ny, dx = num.grid(spec.L)
    n = int(round(W / dx))
    prof = CompactProfile.right(h0, datum, W, n=n + 1, tail=plateau)
    out = apply_U(spec, pstate, prof, num)
    return np.asarray(out(xg), dtype=float)


STILL_STEPS = 3
AITKEN_STRIDE = 10
AITKEN_FRACTION = 0.05
AITKEN_TAIL = 5e-3


def decaying_to_zero(changes, stride: int = AITKEN_STRIDE, fraction: float = AITKEN_FRACTION,
                     tail: float = AITKEN_TAIL) -> bool:
    """True if the last 2 * stride + 1 per-step changes decay geometrically,
    their Aitken extrapolated limit is below ``fraction`` of the latest
    change, and the projected remaining total change is below ``tail``.

    A front moving at constant speed in the moving frame leaves a positive
    limit; convergence to a stationary profile leaves zero.
    """
    if len(changes) < 2 * stride + 1:
        return False
    x0, x1, x2 = changes[-2 * stride - 1], changes[-stride - 1], changes[-1]
    d1, d2 = x1 - x0, x2 - x1
    if not (np.isfinite(x0) and d1 < 0 and d2 < 0 and d2 > d1):
        return False
    limit = x2 - d2 * d2 / (d2 - d1)
    r = (d2 / d1) ** (1.0 / stride)
    return limit <= fraction * x2 and x2 * r / (1.0 - r) <= tail


def _advance(rec: Recursion, steps: int, stagnation_tol: float, front_tol: float) -> str:
    """Step rec up to ``steps`` times; Below as soon as the diagonal probe
    exceeds the plateau.  AboveOrEqual once the stored profile and its front
    have stopped changing for STILL_STEPS consecutive steps, or once the
    per-step change has decayed geometrically towards zero for STILL_STEPS
    consecutive steps (see decaying_to_zero)."""
    still = decay = 0
    for _ in range(steps):
        rec.step()
        h = rec.history
        if h[-1]["diag_margin"] > 0:
            return BELOW
        df = h[-1]["front0"] - h[-2]["front0"] if h[-1]["front0"] != h[-2]["front0"] else 0.0
        still = still + 1 if (h[-1]["change"] < stagnation_tol and abs(df) < front_tol) else 0
        decay = decay + 1 if decaying_to_zero([e["change"] for e in h[-2 * AITKEN_STRIDE - 1:]],
                                               tail=AITKEN_TAIL * rec.p_max) else 0
        if still >= STILL_STEPS or decay >= STILL_STEPS:
            return ABOVE_OR_EQUAL
    return UNDECIDED


def classify_c(spec: ReactionSpec, pstate: PeriodicState, phi0: AdmissiblePhi | None, c: float,
               n_max: int = 40, stagnation_tol: float = 1e-6, front_tol: float | None = None,
               numerics: RecursionNumerics | None = None, mode: str = PLUS,
               record_checks: bool = False, return_state: bool = False):
    """Below if a_n(H2, .) > phi(-inf, .) for some n <= n_max (Cauchy mode: at h0),
    AboveOrEqual if the iterates stagnate (sup change below stagnation_tol
    and front change below front_tol for 3 steps), Undecided otherwise."""
    if n_max < 5:
        raise PreconditionError("n_max must be at least 5")
    phi = phi0 or default_phi(pstate)
    rec = Recursion(spec, pstate, phi, c, numerics, mode, record_checks)
    ftol = front_tol if front_tol is not None else 1e-4 * spec.L
    verdict = _advance(rec, n_max, stagnation_tol, ftol)
    if return_state:
        return verdict, rec
    return verdict


@dataclass
class Probe:
    c: float
    verdict: str
    steps: int
    heuristic: bool

    def to_dict(self):
        return {"c": self.c, "verdict": self.verdict, "steps": self.steps, "heuristic": self.heuristic}


def _probe(spec, pstate, phi, c, n_max, extend, numerics, mode, stagnation_tol, record_checks, checks_out):
    verdict, rec = classify_c(spec, pstate, phi, c, n_max, stagnation_tol, numerics=numerics,
                              mode=mode, record_checks=record_checks, return_state=True)
    if verdict == UNDECIDED and extend > 1:
        # continue from the same state rather than restarting
        verdict = _advance(rec, int(n_max * (extend - 1)), stagnation_tol, 1e-4 * spec.L)
    if checks_out is not None:
        checks_out.append({"c": c, "verdict": verdict, "checks": rec.checks, "history": rec.history})
    return Probe(c, verdict, rec.n, verdict == ABOVE_OR_EQUAL)


def _bisect(spec, pstate, phi, bracket, bisect_tol, n_max, extend, numerics, mode,
            stagnation_tol, on_undecided, record_checks, checks_out):
    lo, hi = bracket
    tol = bisect_tol * (hi - lo)
    probes = []
    seen = {}

    def run(c):
        # midpoints of a bracket narrowed from both sides can repeat an earlier probe
        if c in seen:
            return seen[c]
        pr = _probe(spec, pstate, phi, c, n_max, extend, numerics, mode, stagnation_tol,
                    record_checks, checks_out)
        probes.append(pr)
        seen[c] = pr.verdict
        return pr.verdict

    for c, want in ((lo, BELOW), (hi, ABOVE_OR_EQUAL)):
        got = run(c)
        if got != want:
            raise BracketError(f"bracket end c = {c:.6g} classified {got}, expected {want}")
    undecided = []
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        v = run(mid)
        if v == BELOW:
            lo = mid
        elif v == ABOVE_OR_EQUAL:
            hi = mid
        else:
            if on_undecided == "raise":
                raise InconclusiveError(f"probe c = {mid:.6g} undecided after {probes[-1].steps} steps",
                                        c=mid, diagnostics=[p.to_dict() for p in probes])
            # undecided probes are excluded: narrow from both sides by quarter points
            undecided.append(mid)
            moved = False
            if run(0.5 * (lo + mid)) == BELOW:
                lo, moved = 0.5 * (lo + mid), True
            else:
                undecided.append(0.5 * (lo + mid))
            if run(0.5 * (mid + hi)) == ABOVE_OR_EQUAL:
                hi, moved = 0.5 * (mid + hi), True
            else:
                undecided.append(0.5 * (mid + hi))
            if not moved:
                break
    return lo, hi, probes, sorted({u for u in undecided if lo < u < hi})


def estimate_c_plus(spec: ReactionSpec, pstate: PeriodicState, phi0: AdmissiblePhi | None = None,
                    bracket: tuple[float, float] | None = None, bisect_tol: float = 0.01,
                    n_max: int = 40, numerics: RecursionNumerics | None = None,
                    extend: float = 8.0, stagnation_tol: float = 1e-6,
                    on_undecided: str = "bracket", record_checks: bool = False,
                    checks_out: list | None = None, mode: str = PLUS) -> SpeedEstimate:
    """Bisection on c for the one-sided recursion.

    bisect_tol is relative to the initial bracket width (default bracket
    [0, c* omega] from the semi-wave majorant).  Returns the per-time speed
    c_+ / omega; the per-period value is in meta["c_per_period"].
    """
    phi = phi0 or default_phi(pstate)
    if bracket is None:
        bracket = (0.0, upper_bound_c_plus(spec))
    lo, hi, probes, undecided = _bisect(spec, pstate, phi, bracket, bisect_tol, n_max, extend, numerics,
                             mode, stagnation_tol, on_undecided, record_checks, checks_out)
    c = 0.5 * (lo + hi)
    return SpeedEstimate(
        value=c / spec.omega, method="Recursion", fit_window=(lo / spec.omega, hi / spec.omega),
        residual=(hi - lo) / spec.omega,
        meta={"c_per_period": c, "bracket": [lo, hi], "initial_bracket": list(bracket),
              "probes": [p.to_dict() for p in probes], "mode": mode,
              "undecided": undecided, "converged": (hi - lo) <= bisect_tol * (bracket[1] - bracket[0]), "phi": phi.name,
              "above_is_heuristic": True},
    )


def reflected_phi(phi: AdmissiblePhi) -> AdmissiblePhi:
    """Plateau of the mirrored problem: w(-x)."""
    n = phi.w_values.size
    idx = (-np.arange(n)) % n
    return AdmissiblePhi(phi.ramp, phi.w_values[idx], phi.L, phi.zero_from, phi.name + "~")


def estimate_c_minus(spec: ReactionSpec, pstate: PeriodicState, phi0: AdmissiblePhi | None = None,
                     **kw) -> SpeedEstimate:
    """Leftward speed: the rightward recursion for f(t, -x, u)."""
    from .pde_engine import reflect_state

    rspec = spec.reflected()
    rstate = reflect_state(pstate, rspec)
    phi = reflected_phi(phi0) if phi0 is not None else default_phi(rstate)
    est = estimate_c_plus(rspec, rstate, phi, **kw)
    est.meta["direction"] = "left"
    return est


def estimate_c_cauchy(spec: ReactionSpec, pstate: PeriodicState, phi0: AdmissiblePhi | None = None,
                      bracket: tuple[float, float] | None = None, **kw) -> SpeedEstimate:
    """Same bisection with the Cauchy map; the default upper bracket is the
    KPP-type bound 2 sqrt(d K) omega."""
    if bracket is None:
        bracket = (0.0, 2.0 * math.sqrt(spec.d * spec.linear_bound()) * spec.omega * 1.05)
    return estimate_c_plus(spec, pstate, phi0, bracket=bracket, mode=CAUCHY, **kw)


def history_csv(rec: Recursion) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "diag_min", "diag_max", "front0"])
    for h in rec.history:
        w.writerow([h["n"], repr(h["diag_min"]), repr(h["diag_max"]), repr(h["front0"])])
    return buf.getvalue()


def classification_log(est: SpeedEstimate) -> str:
    return json.dumps({"value": est.value, "bracket": est.meta.get("bracket"),
                       "probes": est.meta.get("probes")}, sort_keys=True)


# truncated-operator subsolution chain

@dataclass(frozen=True)
class ChainNumerics:
    """Grids for the truncated chain: data live on y = i * hy with L / hy an
    integer; each truncated solve uses nx cells and time step dt."""

    points_per_period: int = 4
    nx: int = 128
    dt: float = 0.01
    samples_per_side: int = 40
    n_values: tuple = (0, 1)


def truncated_solve(spec: ReactionSpec, lo: float, hi: float, values: np.ndarray, nx: int,
                    dt: float):
    """Two-sided free boundary solve from the datum sampled at nx + 1 equispaced
    points of [lo, hi]; returns (x grid, u(omega), g(omega), h(omega))."""
    nsteps, dts = _steps(spec.omega, dt)
    code, k, am, amodes, bm, bmodes = spec.kernel_args()
    U = np.array(values, dtype=float)
    U[0] = U[-1] = 0.0
    out = K.march_front(
        U, float(lo), float(hi), 0.0, nsteps, dts, spec.d, spec.mu, spec.omega, spec.L,
        code, k, am, amodes, bm, bmodes,
        K.LEFT_FREE, 0.0, np.zeros((1, 1)), 1.0, False, 1.0, 0.0,
        nsteps, nsteps, 0.0, spec.omega,
    )
    if out[0] == K.STATUS_NONFINITE:
        raise StepSizeError("non-finite values in a truncated solve; reduce dt")
    g1, h1 = out[2], out[3]
    return np.linspace(g1, h1, U.size), np.maximum(out[12][-1], 0.0), g1, h1


class _GridFn:
    """Samples on y = i * hy for i in [i0, i0 + len), zero at and beyond ``end``
    (right support end) and, when ``start`` is finite, at and before it."""

    def __init__(self, i0: int, values: np.ndarray, hy: float, end: float, start: float = -math.inf):
        self.i0, self.values, self.hy, self.end, self.start = i0, values, hy, end, start

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        i = y / self.hy - self.i0
        v = np.interp(i, np.arange(self.values.size), self.values, left=np.nan, right=0.0)
        if np.any(np.isnan(v)):
            raise PreconditionError("chain datum evaluated left of its computed range")
        v = np.where((y >= self.end) | (y <= self.start), 0.0, v)
        return v


class TruncatedChain:
    """The truncated recursion a~_n^c for one spec, evaluated along diagonals.

    D(k, j)(y) = a~_k(s_j + y, y) with s_j = s_base + j c; then
    D(k, j)(y) = max(phi0(s_j + y, y), U_B[D(k-1, j+1)](y)), phi0 the clip
    ramp times w.  Values are computed on demand with memoization; windows
    whose datum is identically zero or bitwise equal to the periodic plateau
    w_B^{k-1} reuse the corresponding results.
    """

    def __init__(self, spec: ReactionSpec, w_values: np.ndarray, B: float, c: float, s_base: float,
                 num: ChainNumerics):
        self.spec, self.B, self.c, self.s_base, self.num = spec, float(B), float(c), float(s_base), num
        L = spec.L
        self.ny = num.points_per_period
        self.hy = L / self.ny
        self.nb = int(round(B / self.hy))
        if abs(self.nb * self.hy - B) > 1e-9:
            raise ConfigError("B", "B must be a multiple of L / points_per_period")
        self.w_fn = periodic_profile(w_values, L)
        self.w = self.w_fn(np.arange(self.ny) * self.hy)
        self.wB = [self.w.copy()]      # w_B^n on one period
        self.UBw = []                  # U_B[w_B^n] on one period
        self.iter = [self.w.copy()]    # U_B^n[w] on one period
        self.memo: dict = {}
        self.solves = 0

    # periodic part

    def _ub_point(self, datum: Callable, end: float, y: float) -> tuple[float, float]:
        lo, hi = y - self.B, min(y + self.B, end)
        if not lo < hi:
            return 0.0, -math.inf
        xs = np.linspace(lo, hi, self.num.nx + 1)
        vals = eta(np.abs(xs - y) / self.B) * datum(xs)
        if not np.any(vals > 0):
            return 0.0, -math.inf
        self.solves += 1
        x1, u1, _, h1 = truncated_solve(self.spec, lo, hi, vals, self.num.nx, self.num.dt)
        return (float(np.interp(y, x1, u1)) if x1[0] < y < x1[-1] else 0.0), h1

    def _ub_periodic(self, values: np.ndarray) -> np.ndarray:
        f = periodic_profile(values, self.spec.L)
        return np.array([self._ub_point(f, math.inf, j * self.hy)[0] for j in range(self.ny)])

    def ensure_plateau(self, n: int):
        while len(self.wB) <= n + 1:
            k = len(self.wB)
            ub = self._ub_periodic(self.wB[k - 1])
            self.UBw.append(ub)
            self.wB.append(np.maximum(self.w, ub))
            self.iter.append(self._ub_periodic(self.iter[k - 1]))

    def phi0(self, s: float, y):
        return clip_ramp(s + np.asarray(y)) * self.w_fn(y)

    # diagonal values

    def D(self, k: int, j: int, i_lo: int, i_hi: int) -> _GridFn:
        """D(k, j) on grid indices [i_lo, i_hi] (extends a cached range if needed)."""
        key = (k, j)
        s = self.s_base + j * self.c
        have = self.memo.get(key)
        if have is not None and have.i0 <= i_lo and have.i0 + have.values.size - 1 >= i_hi:
            return have
        if have is not None:
            i_lo, i_hi = min(i_lo, have.i0), max(i_hi, have.i0 + have.values.size - 1)
        idx = np.arange(i_lo, i_hi + 1)
        ys = idx * self.hy
        base = self.phi0(s, ys)
        if k == 0:
            fn = _GridFn(i_lo, base, self.hy, -s)
            self.memo[key] = fn
            return fn
        self.ensure_plateau(k)
        prev = self.D(k - 1, j + 1, i_lo - self.nb, i_hi + self.nb)
        plate = self.wB[k - 1]
        out = np.empty(idx.size)
        ends = []
        for q, (i, y) in enumerate(zip(idx, ys)):
            win = prev.values[i - self.nb - prev.i0: i + self.nb + 1 - prev.i0]
            wwin = plate[np.arange(i - self.nb, i + self.nb + 1) % self.ny]
            if prev.end > y + self.B and np.array_equal(win, wwin):
                out[q] = self.UBw[k - 1][i % self.ny]
                continue
            v, h1 = self._ub_point(prev, prev.end, y)
            out[q] = v
            if v > 0:
                ends.append(h1)
        pos = np.nonzero(out > 0)[0]
        # right support end of the U_B part: the front of the last positive point's solve
        end_u = -math.inf
        if pos.size:
            y_last = ys[pos[-1]]
            end_u = min(max(ends[-1] if ends else y_last + self.hy, y_last), y_last + self.hy)
            if pos[-1] == idx.size - 1:
                end_u = math.inf
        fn = _GridFn(i_lo, np.maximum(base, out), self.hy, max(-s, end_u))
        self.memo[key] = fn
        return fn


def _needed_index(x: float, hy: float, up: bool) -> int:
    return math.ceil(x / hy - 1e-9) if up else math.floor(x / hy + 1e-9)


def verify_subsolution_chain(spec: ReactionSpec, pstate: PeriodicState, B: float, m: int,
                             c: float, c_prime: float, A: float | None = None,
                             A_prime: float | None = None, w_values=None,
                             c_plus: float | None = None, c_minus: float | None = None,
                             numerics: ChainNumerics | None = None, tol: float = 1e-10) -> dict:
    """Build w_B^n, a~_m^c, b~_m^{c'} and e_n and check, at sampled points,

    plateau: U_B^n[w] >= p(0, .) - eps for N1 <= n <= m + 1;
    w_recursion: U_B[w_B^{n-1}] >= w (so w_B^n = U_B[w_B^{n-1}]) for N1 <= n <= m + 1;
    subsolution: e_{n+1} <= U_B[e_n] for the sampled n.

    Also reports the plateau / zero structure of a~_m and of e_n.  Per-time
    speeds c, c' are per-period quantities here (distance per omega).
    """
    num = numerics or ChainNumerics()
    if not B > 0 or m < 1:
        raise ConfigError("B/m", "B must be positive and m at least 1")
    if not (c > 0 and c_prime > 0):
        raise ConfigError("c", "c and c' must be positive")
    if c_plus is not None and not c < c_plus:
        raise ConfigError("c", f"c = {c} must lie below the c_+ estimate {c_plus}")
    if c_minus is not None and not c_prime < c_minus:
        raise ConfigError("c_prime", f"c' = {c_prime} must lie below the c_- estimate {c_minus}")
    A_min = (1 + m * (B + c) + 2 * B) / c
    Ap_min = (1 + m * (B + c_prime) + 2 * B) / c_prime
    A = A_min if A is None else A
    A_prime = Ap_min if A_prime is None else A_prime
    if A < A_min - 1e-12:
        raise ConfigError("A", f"A = {A} violates A >= (1 + m(B+c) + 2B)/c = {A_min}")
    if A_prime < Ap_min - 1e-12:
        raise ConfigError("A_prime", f"A' = {A_prime} violates the size condition {Ap_min}")
    L = spec.L
    if w_values is None:
        w_values = 0.5 * pstate.p0
    w_values = np.asarray(w_values, dtype=float)
    from .pde_engine import reflect_state
    idx = (-np.arange(w_values.size)) % w_values.size
    right = TruncatedChain(spec, w_values, B, c, -A * c, num)
    left = TruncatedChain(spec.reflected(), w_values[idx], B, c_prime, -A_prime * c_prime, num)
    hy, nb = right.hy, right.nb
    right.ensure_plateau(m + 1)
    left.ensure_plateau(m + 1)

    # plateau and w-recursion checks on one period
    xg = np.arange(right.ny) * hy
    p0 = pstate.p0_at(xg)
    w = right.w
    eps = 0.5 * min(float(w.min()), float((p0 - w).min()))
    gaps = [float((it - (p0 - eps)).min()) for it in right.iter]
    N1 = None
    for n in range(len(gaps)):
        if all(g >= -tol for g in gaps[n:m + 2]):
            N1 = n
            break
    plateau = {"eps": eps, "N1": N1, "margins": gaps[: m + 2],
               "pass": N1 is not None and N1 <= m}
    start = N1 if N1 is not None else m + 1
    wrec = [float((right.UBw[n - 1] - w).min()) for n in range(max(start, 1), m + 2)]
    w_rec = {"margins": wrec, "pass": bool(wrec) and min(wrec) > -tol and plateau["pass"]}

    def e_fn(n):
        """Composite e_n as (values on [G, H] grid, support ends)."""
        jr = -n
        lt = (n + A) * c - m * (B + c)
        l = (n + A_prime) * c_prime - m * (B + c_prime)
        R = lt + 2 * m * (B - c) + B
        Lr = l + 2 * m * (B + c_prime) + B
        rfn = right.D(m, jr, 0, _needed_index(R + B, hy, True))
        lfn = left.D(m, jr, 0, _needed_index(Lr + B, hy, True))
        return rfn, lfn, lt, l

    def e_eval(rfn, lfn, y):
        y = np.asarray(y, dtype=float)
        return np.where(y >= 0, rfn(np.maximum(y, 0.0)), lfn(np.maximum(-y, 0.0)))

    sub_margins = []
    pos_margins = []
    struct = []
    worst_x = None
    for n in num.n_values:
        rfn, lfn, lt, l = e_fn(n)
        rfn1, lfn1, _, _ = e_fn(n + 1)
        G, H = -lfn.end, rfn.end
        xs = np.concatenate([
            np.linspace(G - B, 0, num.samples_per_side, endpoint=False),
            np.linspace(0, H + B, num.samples_per_side),
        ])
        xs = np.round(xs / hy) * hy
        for x in xs:
            lo, hi = max(x - B, G), min(x + B, H)
            if lo < hi:
                ys = np.linspace(lo, hi, num.nx + 1)
                vals = eta(np.abs(ys - x) / B) * e_eval(rfn, lfn, ys)
                ub = 0.0
                if np.any(vals > 0):
                    x1, u1, _, _ = truncated_solve(spec, lo, hi, vals, num.nx, num.dt)
                    ub = float(np.interp(x, x1, u1)) if x1[0] < x < x1[-1] else 0.0
            else:
                ub = 0.0
            e1 = float(e_eval(rfn1, lfn1, x))
            margin = ub - e1
            sub_margins.append(margin)
            if e1 > 0:
                pos_margins.append(margin)
            if margin == min(sub_margins):
                worst_x = (n, float(x))
        # structure of e_n: plateau w_B^m on [-l + 1, lt - 1], zero outside the outer interval
        inner = np.arange(_needed_index(-l + 1, hy, True), _needed_index(lt - 1, hy, False) + 1) * hy
        wbm = periodic_profile(right.wB[m], L)(inner)
        plate_err = float(np.abs(e_eval(rfn, lfn, inner) - wbm).max()) if inner.size else 0.0
        outer_lo, outer_hi = -l - 2 * m * (B + c_prime), lt + 2 * m * (B - c)
        zero_ok = (G >= outer_lo - hy) and (H <= outer_hi + hy)
        struct.append({"n": n, "l": l, "l_tilde": lt, "plateau_error": plate_err,
                       "support": [G, H], "outer": [outer_lo, outer_hi], "zero_outside": bool(zero_ok)})

    # left plateau of a~_m: equals w_B^m for xi <= -m(B + c) - 1
    r0 = right.D(m, 0, 0, 4 * right.ny)
    ys = np.arange(r0.i0, r0.i0 + r0.values.size) * hy
    xi = right.s_base + ys
    sel = xi <= -m * (B + c) - 1
    a_plateau_err = float(np.abs(r0.values[sel] - periodic_profile(right.wB[m], L)(ys[sel])).max()) if sel.any() else math.nan

    subs = {"margins_min": float(min(sub_margins)), "worst_at": worst_x,
            "margins_min_where_positive": float(min(pos_margins)) if pos_margins else math.nan,
            "pass": float(min(sub_margins)) >= -tol}
    return {
        "B": B, "m": m, "c": c, "c_prime": c_prime, "A": A, "A_prime": A_prime,
        "plateau": plateau, "w_recursion": w_rec, "subsolution": subs,
        "e_structure": struct, "a_left_plateau_error": a_plateau_err,
        "solves": right.solves + left.solves,
        "pass": plateau["pass"] and w_rec["pass"] and subs["pass"],
    }

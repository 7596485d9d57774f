"""Front-fixing finite-difference solvers.

Two-sided, right one-sided and left one-sided Stefan problems are marched
in the Landau coordinate y = (x - g) / (h - g) on a fixed grid of nx + 1
nodes; the Cauchy problem uses a fixed physical grid with Neumann ends.
Inner loops are compiled (see _kernels).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels as K
from .errors import DomainTooSmallError, PreconditionError, StepSizeError
from .periodic_state import PeriodicState, compute_periodic_state
from .reaction import ReactionSpec

TWO_SIDED = "TwoSided"
RIGHT_FRONT = "RightFront"
LEFT_FRONT = "LeftFront"
WHOLE_LINE = "WholeLine"
CLASS_TAGS = (TWO_SIDED, RIGHT_FRONT, LEFT_FRONT, WHOLE_LINE)

VANISH_FACTOR = 1e-6
SPREAD_FACTOR = 0.5
EDGE_FRACTION = 0.05


@dataclass
class CompactProfile:
    """Piecewise-linear initial datum with supporting points g0 < h0.

    ``x``/``values`` sample the datum on the finite window.  Infinite ends
    are given as -inf / +inf; outside the window the datum continues with
    ``tail`` (a callable of x) on infinite sides and is 0 beyond finite
    supporting points.
    """

    g0: float
    h0: float
    x: np.ndarray
    values: np.ndarray
    class_tag: str
    tail: Callable | None = None
    tail_at_p: bool = False
    below_p: bool = False
    periodic: bool = False

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.class_tag not in CLASS_TAGS:
            raise PreconditionError(f"unknown class tag {self.class_tag!r}")
        if not self.g0 < self.h0:
            raise PreconditionError("need g0 < h0")
        if self.x.shape != self.values.shape or self.x.ndim != 1:
            raise PreconditionError("x and values must be matching 1-d arrays")
        if np.any(np.diff(self.x) <= 0):
            raise PreconditionError("x grid must be increasing")
        if np.any(self.values < 0):
            raise PreconditionError("profile values must be nonnegative")
        expected = {
            TWO_SIDED: (True, True),
            RIGHT_FRONT: (False, True),
            LEFT_FRONT: (True, False),
            WHOLE_LINE: (False, False),
        }[self.class_tag]
        finite = (math.isfinite(self.g0), math.isfinite(self.h0))
        if self.class_tag != WHOLE_LINE and finite != expected:
            raise PreconditionError(f"{self.class_tag} needs finite ends {expected}, got {finite}")
        for end in (self.g0, self.h0):
            if math.isfinite(end):
                if not (self.x[0] - 1e-12 <= end <= self.x[-1] + 1e-12):
                    raise PreconditionError("finite supporting points must lie on the sample window")
                if abs(np.interp(end, self.x, self.values)) > 1e-12:
                    raise PreconditionError("profile must vanish at finite supporting points")

    # constructors
    @classmethod
    def two_sided(cls, g0, h0, func, n: int = 401, **kw) -> "CompactProfile":
        x = np.linspace(g0, h0, n)
        v = np.asarray(func(x), dtype=float)
        v[0] = v[-1] = 0.0
        return cls(g0, h0, x, v, TWO_SIDED, **kw)

    @classmethod
    def right(cls, h0, func, width: float, n: int = 801, tail=None, **kw) -> "CompactProfile":
        x = np.linspace(h0 - width, h0, n)
        v = np.asarray(func(x), dtype=float)
        v[-1] = 0.0
        return cls(-math.inf, h0, x, v, RIGHT_FRONT, tail=tail, **kw)

    @classmethod
    def left(cls, g0, func, width: float, n: int = 801, tail=None, **kw) -> "CompactProfile":
        x = np.linspace(g0, g0 + width, n)
        v = np.asarray(func(x), dtype=float)
        v[0] = 0.0
        return cls(g0, math.inf, x, v, LEFT_FRONT, tail=tail, **kw)

    @classmethod
    def whole_line(cls, x, values, g0=-math.inf, h0=math.inf, tail=None, **kw) -> "CompactProfile":
        return cls(g0, h0, x, values, WHOLE_LINE, tail=tail, **kw)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self.x, self.values)
        left = x < self.x[0]
        right = x > self.x[-1]
        if math.isfinite(self.g0):
            out = np.where(x <= self.g0, 0.0, out)
        elif self.tail is not None:
            out = np.where(left, self.tail(x), out)
        if math.isfinite(self.h0):
            out = np.where(x >= self.h0, 0.0, out)
        elif self.tail is not None:
            out = np.where(right, self.tail(x), out)
        return out

    @property
    def sup(self) -> float:
        return float(self.values.max())

    def check_positive_inside(self) -> bool:
        inside = (self.x > self.g0) & (self.x < self.h0)
        return bool(np.all(self.values[inside] > 0))

    def check_below_p(self, pstate: PeriodicState, slack: float = 0.0) -> bool:
        return bool(np.all(self.values <= pstate.p0_at(self.x) + slack))

    def reflected(self) -> "CompactProfile":
        tag = {LEFT_FRONT: RIGHT_FRONT, RIGHT_FRONT: LEFT_FRONT}.get(self.class_tag, self.class_tag)
        tail = None if self.tail is None else (lambda x, f=self.tail: f(-np.asarray(x)))
        return CompactProfile(
            -self.h0, -self.g0, -self.x[::-1], self.values[::-1].copy(), tag,
            tail=tail, tail_at_p=self.tail_at_p, below_p=self.below_p, periodic=self.periodic,
        )


@dataclass
class FrontTrajectory:
    """Recorded fronts and sparse snapshots of a solve."""

    times: np.ndarray
    g: np.ndarray | None
    h: np.ndarray | None
    snapshots: list
    meta: dict = field(default_factory=dict)
    vanished: bool = False
    spreading: bool = False
    max_u: np.ndarray | None = None
    window_left: np.ndarray | None = None

    @property
    def final(self):
        """(t, x, u) of the last snapshot."""
        return self.snapshots[-1]

    def fronts_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "g", "h"])
        for i, t in enumerate(self.times):
            gv = "" if self.g is None else repr(float(self.g[i]))
            hv = "" if self.h is None else repr(float(self.h[i]))
            w.writerow([repr(float(t)), gv, hv])
        return buf.getvalue()

    def snapshots_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x", "u"])
        for t, x, u in self.snapshots:
            for xi, ui in zip(x, u):
                w.writerow([repr(float(t)), repr(float(xi)), repr(float(ui))])
        return buf.getvalue()

    def sup_u(self) -> float:
        return max(float(np.max(u)) for _, _, u in self.snapshots)


@dataclass(frozen=True)
class FrontNumerics:
    """Grid and step for the front-fixed solvers."""

    nx: int = 300
    dt: float = 0.005
    window: float = 30.0
    snapshot_every: int | None = None
    record_every: int = 1


def _min_p(spec: ReactionSpec, pstate: PeriodicState | None) -> float:
    if pstate is not None:
        return pstate.min
    key = ("min_p",)
    if key not in spec._cache:
        if spec.is_homogeneous:
            spec._cache[key] = spec.default_cap() if spec.family != "degenerate" else 1.0
        else:
            spec._cache[key] = compute_periodic_state(spec, 32, 32, tol=1e-7).min
    return spec._cache[key]


def _steps(T: float, dt: float) -> tuple[int, float]:
    n = max(1, int(round(T / dt)))
    return n, T / n


def p_table(pstate: PeriodicState):
    """Left-boundary table arguments reproducing p(t, x)."""
    return (np.ascontiguousarray(pstate.table()), pstate.omega, True, pstate.L)


def march_front_raw(
    spec: ReactionSpec,
    U0: np.ndarray,
    g0: float,
    h0: float,
    T: float,
    dt: float,
    left_mode: int,
    width: float = 0.0,
    table=None,
    record_every: int = 1,
    snapshot_every: int | None = None,
    vanish_level: float = 0.0,
    t0: float = 0.0,
):
    """Direct access to the compiled march; returns the kernel tuple."""
    nsteps, dt = _steps(T, dt)
    if table is None:
        table = (np.zeros((1, 1)), 1.0, False, 1.0)
    tab, t_span, t_per, L_tab = table[:4]
    x_off = table[4] if len(table) > 4 else 0.0
    code, k, am, amodes, bm, bmodes = spec.kernel_args()
    snap = nsteps if snapshot_every is None else max(1, snapshot_every)
    U = np.array(U0, dtype=float)
    out = K.march_front(
        U, float(g0), float(h0), float(t0), nsteps, dt, spec.d, spec.mu, spec.omega, spec.L,
        code, k, am, amodes, bm, bmodes,
        left_mode, float(width), tab, float(t_span), bool(t_per), float(L_tab), float(x_off),
        max(1, record_every), snap, float(vanish_level), spec.omega,
    )
    if out[0] == K.STATUS_NONFINITE:
        raise StepSizeError(f"non-finite values at t = {out[1]:.6g}; reduce dt")
    return out


def _trajectory(spec, out, n, tag, dt, extra_meta):
    (status, t, g, h, steps, rt, rg, rh, rmax, st, sg, sh, snaps, vmax, gmax) = out
    y = np.linspace(0.0, 1.0, n + 1)
    snapshots = [(float(st[i]), sg[i] + y * (sh[i] - sg[i]), snaps[i].copy()) for i in range(len(st))]
    meta = {"dt": dt, "nx": n, "mu": spec.mu, "omega": spec.omega, "max_front_speed": float(vmax),
            "max_front_gradient": float(gmax), "steps": int(steps)}
    meta.update(extra_meta)
    return FrontTrajectory(
        times=rt.copy(),
        g=rg.copy() if tag == TWO_SIDED else None,
        h=rh.copy(),
        snapshots=snapshots,
        meta=meta,
        vanished=status == K.STATUS_VANISHED,
        max_u=rmax.copy(),
        window_left=None if tag == TWO_SIDED else rg.copy(),
    )


def _spreading_flag(traj: FrontTrajectory, spec: ReactionSpec, min_p: float) -> bool:
    if traj.vanished:
        return False
    last = traj.times >= traj.times[-1] - spec.omega
    grew = traj.h[-1] > traj.h[0]
    return bool(grew and traj.max_u[last].min() >= SPREAD_FACTOR * min_p)


def solve_two_sided(
    spec: ReactionSpec,
    u0: CompactProfile,
    T: float,
    nx: int = 200,
    dt: float = 0.01,
    pstate: PeriodicState | None = None,
    snapshot_every: int | None = None,
    record_every: int = 1,
    stop_on_vanish: bool = True,
) -> FrontTrajectory:
    """Solve the two-sided Stefan problem from u0 on [g0, h0] up to time T."""
    if u0.class_tag != TWO_SIDED:
        raise PreconditionError("solve_two_sided needs a TwoSided profile")
    y = np.linspace(0.0, 1.0, nx + 1)
    U = u0(u0.g0 + y * (u0.h0 - u0.g0))
    U[0] = U[-1] = 0.0
    min_p = _min_p(spec, pstate)
    level = VANISH_FACTOR * min_p if stop_on_vanish else 0.0
    out = march_front_raw(
        spec, U, u0.g0, u0.h0, T, dt, K.LEFT_FREE,
        record_every=record_every, snapshot_every=snapshot_every, vanish_level=level,
    )
    traj = _trajectory(spec, out, nx, TWO_SIDED, _steps(T, dt)[1], {"problem": TWO_SIDED, "T": T})
    traj.spreading = _spreading_flag(traj, spec, min_p)
    return traj


def solve_right(
    spec: ReactionSpec,
    u0: CompactProfile,
    T: float,
    window_width: float = 30.0,
    nx: int = 300,
    dt: float = 0.005,
    pstate: PeriodicState | None = None,
    left_table=None,
    snapshot_every: int | None = None,
    record_every: int = 1,
) -> FrontTrajectory:
    """Right one-sided problem on a window of fixed width trailing the front.

    The left window edge carries p(t, x) when u0.tail_at_p (needs pstate),
    an explicit ``left_table`` when given, and a Neumann condition otherwise.
    """
    if u0.class_tag != RIGHT_FRONT:
        raise PreconditionError("solve_right needs a RightFront profile")
    if left_table is not None:
        mode, table = K.LEFT_DIRICHLET_TABLE, left_table
    elif u0.tail_at_p:
        if pstate is None:
            raise PreconditionError("tail_at_p needs the periodic state")
        mode, table = K.LEFT_DIRICHLET_TABLE, p_table(pstate)
    else:
        mode, table = K.LEFT_NEUMANN, None
    y = np.linspace(0.0, 1.0, nx + 1)
    U = u0(u0.h0 - window_width + y * window_width)
    U[-1] = 0.0
    out = march_front_raw(
        spec, U, u0.h0 - window_width, u0.h0, T, dt, mode, width=window_width, table=table,
        record_every=record_every, snapshot_every=snapshot_every,
    )
    traj = _trajectory(
        spec, out, nx, RIGHT_FRONT, _steps(T, dt)[1],
        {"problem": RIGHT_FRONT, "T": T, "window": window_width,
         "left_boundary": {K.LEFT_NEUMANN: "neumann"}.get(mode, "dirichlet")},
    )
    traj.spreading = _spreading_flag(traj, spec, _min_p(spec, pstate))
    return traj


def reflect_state(pstate: PeriodicState, spec_reflected: ReactionSpec | None = None) -> PeriodicState:
    """p(t, -x) sampled on the same grid."""
    idx = (-np.arange(pstate.nx)) % pstate.nx
    return PeriodicState(
        nt=pstate.nt, nx=pstate.nx, values=pstate.values[:, idx].copy(),
        residual=pstate.residual, tol=pstate.tol, omega=pstate.omega, L=pstate.L,
        closure=pstate.closure, periods=pstate.periods,
        spec=spec_reflected if spec_reflected is not None
        else (pstate.spec.reflected() if pstate.spec is not None else None),
    )


def solve_left(
    spec: ReactionSpec,
    u0: CompactProfile,
    T: float,
    window_width: float = 30.0,
    nx: int = 300,
    dt: float = 0.005,
    pstate: PeriodicState | None = None,
    snapshot_every: int | None = None,
    record_every: int = 1,
) -> FrontTrajectory:
    """Left one-sided problem, solved as the right problem for f(t, -x, u)."""
    if u0.class_tag != LEFT_FRONT:
        raise PreconditionError("solve_left needs a LeftFront profile")
    rspec = spec.reflected()
    rstate = None if pstate is None else reflect_state(pstate, rspec)
    tr = solve_right(
        rspec, u0.reflected(), T, window_width, nx, dt, pstate=rstate,
        snapshot_every=snapshot_every, record_every=record_every,
    )
    snaps = [(t, -x[::-1], u[::-1].copy()) for t, x, u in tr.snapshots]
    meta = dict(tr.meta, problem=LEFT_FRONT)
    return FrontTrajectory(
        times=tr.times, g=-tr.h, h=None, snapshots=snaps, meta=meta,
        vanished=tr.vanished, spreading=tr.spreading, max_u=tr.max_u,
        window_left=-tr.window_left,
    )


def solve_cauchy(
    spec: ReactionSpec,
    v0: CompactProfile,
    T: float,
    domain_halfwidth: float,
    nx: int = 800,
    dt: float = 0.01,
    pstate: PeriodicState | None = None,
    snapshot_every: int | None = None,
    level: float | None = None,
    t0: float = 0.0,
) -> FrontTrajectory:
    """Cauchy problem on [-X, X] with Neumann ends.

    Edges where v0 starts below ``level`` (default 0.5 min p) are watched;
    the run fails with DomainTooSmallError if the level reaches them.
    """
    X = float(domain_halfwidth)
    x = np.linspace(-X, X, nx + 1)
    U = np.asarray(v0(x), dtype=float)
    lev = SPREAD_FACTOR * _min_p(spec, pstate) if level is None else level
    ne = int(math.ceil(EDGE_FRACTION * nx)) + 1
    watch_l = bool(np.all(U[:ne] < lev))
    watch_r = bool(np.all(U[-ne:] < lev))
    nsteps, dts = _steps(T, dt)
    snap = nsteps if snapshot_every is None else max(1, snapshot_every)
    code, k, am, amodes, bm, bmodes = spec.kernel_args()
    status, t, st, snaps = K.march_fixed(
        U, x, float(t0), nsteps, dts, spec.d, spec.omega, spec.L,
        code, k, am, amodes, bm, bmodes, snap, float(lev), watch_l, watch_r, EDGE_FRACTION,
        K.LEFT_NEUMANN, np.zeros((1, 1)), 1.0, False, 1.0, 0.0,
    )
    if status == K.STATUS_NONFINITE:
        raise StepSizeError(f"non-finite values at t = {t:.6g}; reduce dt")
    if status == K.STATUS_EDGE:
        raise DomainTooSmallError(
            f"level {lev:.3g} reached the domain edge at t = {t:.6g}; enlarge the domain", time=t
        )
    snapshots = [(float(st[i]), x, snaps[i].copy()) for i in range(len(st))]
    return FrontTrajectory(
        times=np.array([s[0] for s in snapshots]), g=None, h=None, snapshots=snapshots,
        meta={"dt": dts, "nx": nx, "mu": spec.mu, "omega": spec.omega, "problem": WHOLE_LINE, "T": T,
              "domain_halfwidth": X, "level": lev},
    )

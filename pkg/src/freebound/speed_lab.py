"""Direct speed measurements and the experiment suites built on them."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ClassificationError, FreeboundError, PreconditionError
from .estimates import SpeedEstimate
from .pde_engine import (
    CompactProfile, FrontTrajectory, _min_p, solve_cauchy, solve_left, solve_right,
    solve_two_sided,
)
from .periodic_state import PeriodicState, compute_periodic_state
from .reaction import ReactionSpec

CONCAVE_FAMILIES = ("logistic", "homogeneous_logistic")


@dataclass(frozen=True)
class Tolerances:
    """Named agreement tolerances used by the experiment suites."""

    semiwave_vs_slope: float = 0.03
    tail_stability: float = 0.01
    level_set: float = 0.03
    level_independence: float = 0.02
    three_way: float = 0.07
    mu_top_gap: float = 0.10
    symmetry: float = 0.02
    cone: float = 0.05


def _fit(ts: np.ndarray, ys: np.ndarray):
    A = np.vstack([ts, np.ones_like(ts)]).T
    coef, *_ = np.linalg.lstsq(A, ys, rcond=None)
    res = ys - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(res**2)))


def _period_samples(times: np.ndarray, tail_fraction: float, omega: float) -> np.ndarray:
    T = float(times[-1])
    k0 = math.ceil((T * (1.0 - tail_fraction) - float(times[0])) / omega - 1e-9)
    k0 = max(k0, math.ceil(float(times[0]) / omega - 1e-9))
    k1 = math.floor(T / omega + 1e-9)
    ks = np.arange(k0, k1 + 1)
    return ks * omega


def front_slope_speed(traj: FrontTrajectory, tail_fraction: float = 0.5, side: str = "right",
                      omega: float | None = None) -> SpeedEstimate:
    """Least-squares slope of h(t) (side 'right') or -g(t) (side 'left') over the
    final tail_fraction of the run, sampled at whole multiples of omega."""
    if not 0 < tail_fraction <= 0.9:
        raise PreconditionError("tail_fraction must lie in (0, 0.9]")
    if traj.vanished:
        raise ClassificationError("the trajectory vanished; it has no spreading speed")
    if not traj.spreading:
        raise ClassificationError("the trajectory is not flagged as spreading")
    omega = omega if omega is not None else traj.meta.get("omega", 1.0)
    if side == "right":
        front = traj.h
    elif side == "left":
        if traj.g is None:
            raise PreconditionError("this trajectory has no left front")
        front = -traj.g
    else:
        raise PreconditionError("side must be 'right' or 'left'")
    ts = _period_samples(traj.times, tail_fraction, omega)
    if ts.size < 3:
        raise PreconditionError("fewer than 3 whole periods in the fit window; lengthen the run")
    ys = np.interp(ts, traj.times, front)
    slope, rms = _fit(ts, ys)
    return SpeedEstimate(slope, "FrontSlope", (float(ts[0]), float(ts[-1])), rms,
                         {"side": side, "samples": int(ts.size), "omega": omega,
                          "tail_fraction": tail_fraction, **{k: traj.meta[k] for k in ("nx", "dt", "mu") if k in traj.meta}})


def level_position(x: np.ndarray, u: np.ndarray, level: float, side: str = "right") -> float:
    """Outermost point with u >= level, linearly refined between grid points."""
    idx = np.nonzero(u >= level)[0]
    if idx.size == 0:
        return math.nan
    if side == "right":
        i = idx[-1]
        if i == u.size - 1:
            return float(x[i])
        return float(x[i] + (u[i] - level) / (u[i] - u[i + 1]) * (x[i + 1] - x[i]))
    i = idx[0]
    if i == 0:
        return float(x[0])
    return float(x[i] - (u[i] - level) / (u[i] - u[i - 1]) * (x[i] - x[i - 1]))


def level_set_speed(traj: FrontTrajectory, level: float, tail_fraction: float = 0.5,
                    side: str = "right", min_p: float | None = None,
                    omega: float | None = None) -> SpeedEstimate:
    """Slope of the outermost level crossing over the final tail of a Cauchy run."""
    if not level > 0 or (min_p is not None and not level < min_p):
        raise PreconditionError("level must lie in (0, min p)")
    omega = omega if omega is not None else traj.meta.get("omega", 1.0)
    ts, xs = [], []
    at_edge = 0
    for t, x, u in traj.snapshots:
        pos = level_position(x, u, level, side)
        if math.isnan(pos):
            continue
        if (side == "right" and pos >= x[-1]) or (side == "left" and pos <= x[0]):
            at_edge += 1
            continue
        ts.append(t)
        xs.append(pos if side == "right" else -pos)
    if at_edge and not ts:
        raise PreconditionError("the level is attained up to the domain edge: there is no front")
    if not ts:
        raise ClassificationError(f"level {level:g} is never attained")
    ts, xs = np.array(ts), np.array(xs)
    grid = _period_samples(ts, tail_fraction, omega)
    grid = grid[(grid >= ts[0] - 1e-9) & (grid <= ts[-1] + 1e-9)]
    if grid.size < 3:
        raise PreconditionError("fewer than 3 whole periods with a front in the fit window")
    ys = np.interp(grid, ts, xs)
    slope, rms = _fit(grid, ys)
    return SpeedEstimate(slope, "LevelSet", (float(grid[0]), float(grid[-1])), rms,
                         {"level": level, "side": side, "samples": int(grid.size),
                          **{k: traj.meta[k] for k in ("nx", "dt", "domain_halfwidth") if k in traj.meta}})


# direct runs

@dataclass(frozen=True)
class DirectNumerics:
    """Grids of the direct speed runs."""

    T: float = 60.0
    nx: int = 300
    dt: float = 0.005
    window: float = 30.0
    tail_fraction: float = 0.5
    cauchy_dx: float = 0.1
    cauchy_dt: float = 0.01


def _pstate(spec, pstate):
    return pstate if pstate is not None else compute_periodic_state(spec, 32, 32, tol=1e-9)


def one_sided_datum(pstate: PeriodicState, width: float, side: str = "right") -> CompactProfile:
    """p(0, .) times a linear ramp of length 2 ending at the front, on a window of ``width``."""
    def ramp(x):
        return np.clip(-x / 2.0, 0.0, 1.0) * pstate.p0_at(x)
    prof = CompactProfile.right(0.0, ramp, width, n=801, tail=pstate.p0_at, tail_at_p=True)
    return prof if side == "right" else prof.reflected()


def direct_speed(spec: ReactionSpec, pstate: PeriodicState | None = None, side: str = "right",
                 numerics: DirectNumerics | None = None) -> tuple[SpeedEstimate, FrontTrajectory]:
    """Front slope of the one-sided problem started from a ramp under p(0, .)."""
    num = numerics or DirectNumerics()
    ps = _pstate(spec, pstate)
    every = max(1, int(round(spec.omega / num.dt / 10)))
    if side == "right":
        tr = solve_right(spec, one_sided_datum(ps, num.window), num.T, num.window, num.nx, num.dt,
                         pstate=ps, record_every=every, snapshot_every=None)
        est = front_slope_speed(tr, num.tail_fraction, "right")
    else:
        tr = solve_left(spec, one_sided_datum(ps, num.window, "left"), num.T, num.window, num.nx,
                        num.dt, pstate=ps, record_every=every)
        est = front_slope_speed(tr, num.tail_fraction, "left")
    return est, tr


def cauchy_speed(spec: ReactionSpec, pstate: PeriodicState | None = None, level: float | None = None,
                 numerics: DirectNumerics | None = None, side: str = "right",
                 halfwidth: float | None = None) -> tuple[SpeedEstimate, FrontTrajectory]:
    """Level-set speed of the Cauchy problem from a compact bump under p(0, .)."""
    num = numerics or DirectNumerics()
    ps = _pstate(spec, pstate)
    lev = 0.5 * ps.min if level is None else level
    kpp = 2.0 * math.sqrt(spec.d * spec.linear_bound())
    X = halfwidth if halfwidth is not None else kpp * num.T * 1.1 + 20.0
    nx = int(round(2 * X / num.cauchy_dx))
    v0 = CompactProfile.whole_line(
        np.linspace(-X, X, nx + 1),
        np.where(np.abs(np.linspace(-X, X, nx + 1)) < 5.0, ps.p0_at(np.linspace(-X, X, nx + 1)), 0.0),
    )
    every = max(1, int(round(spec.omega / num.cauchy_dt)))
    tr = solve_cauchy(spec, v0, num.T, X, nx, num.cauchy_dt, pstate=ps, snapshot_every=every, level=lev)
    est = level_set_speed(tr, lev, num.tail_fraction, side, min_p=ps.min * (1 + 1e-12))
    return est, tr


# suites

def bump_datum(width: float, height: float, center: float = 0.0) -> CompactProfile:
    """height * cos(pi (x - center) / width) on [center - width/2, center + width/2]."""
    g0, h0 = center - width / 2, center + width / 2
    return CompactProfile.two_sided(g0, h0, lambda x: height * np.cos(np.pi * (x - center) / width))


def _pmap(fn, args, jobs: int):
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, args))
    return [fn(a) for a in args]


def _dichotomy_point(args):
    spec, wd, height, T, pstate, nx, dt = args
    tr = solve_two_sided(spec, bump_datum(wd, height), T, nx, dt, pstate=pstate)
    outcome = "vanished" if tr.vanished else ("spreading" if tr.spreading else "undecided")
    return {"width": wd, "outcome": outcome, "final_width": float(tr.h[-1] - tr.g[-1]),
            "final_max_u": float(tr.max_u[-1])}


def dichotomy_scan(spec: ReactionSpec, widths, u0_height: float, T: float,
                   pstate: PeriodicState | None = None, nx: int = 200, dt: float = 0.01,
                   jobs: int = 1) -> dict:
    """Spreading or vanishing of two-sided runs from bumps of increasing width."""
    widths = [float(w) for w in widths]
    if any(b <= a for a, b in zip(widths, widths[1:])):
        raise PreconditionError("widths must be increasing")
    rows = _pmap(_dichotomy_point, [(spec, wd, u0_height, T, pstate, nx, dt) for wd in widths], jobs)
    spread = [r["width"] for r in rows if r["outcome"] == "spreading"]
    vanish = [r["width"] for r in rows if r["outcome"] == "vanished"]
    monotone = not (spread and vanish and max(vanish) > min(spread))
    return {
        "rows": rows,
        "threshold_interval": [max(vanish) if vanish else None, min(spread) if spread else None],
        "monotone": monotone,
        "u0_height": u0_height, "T": T,
    }


def _mu_point(args):
    sp, ps, method, numerics, recursion_kw = args
    try:
        if method == "FrontSlope":
            est, _ = direct_speed(sp, ps, "right", numerics)
        else:
            from .weinberger import estimate_c_plus
            est = estimate_c_plus(sp, ps, **(recursion_kw or {}))
        return {"mu": sp.mu, "speed": est.value, "residual": est.residual, "error": None}
    except FreeboundError as exc:
        # a failed point is recorded and the sweep continues
        return {"mu": sp.mu, "speed": math.nan, "residual": math.nan, "error": repr(exc)}


def mu_sweep(spec: ReactionSpec, mu_grid, method: str = "FrontSlope",
             pstate: PeriodicState | None = None, numerics: DirectNumerics | None = None,
             cauchy_ref: SpeedEstimate | None = None, top_gap: float = Tolerances.mu_top_gap,
             recursion_kw: dict | None = None, jobs: int = 1) -> dict:
    """Per-mu rightward speeds against the Cauchy reference."""
    mu_grid = [float(m) for m in mu_grid]
    if len(mu_grid) < 4 or any(b <= a for a, b in zip(mu_grid, mu_grid[1:])):
        raise PreconditionError("mu_grid must be increasing with at least 4 points")
    if method not in ("FrontSlope", "Recursion"):
        raise PreconditionError("method must be FrontSlope or Recursion")
    ps = _pstate(spec, pstate)
    if cauchy_ref is None:
        cauchy_ref, _ = cauchy_speed(spec, ps, numerics=numerics)
    cbar = cauchy_ref.value
    rows = _pmap(_mu_point, [(spec.with_mu(mu), ps, method, numerics, recursion_kw)
                             for mu in mu_grid], jobs)
    ok = [r for r in rows if r["error"] is None]
    violations = []
    for a, b in zip(ok, ok[1:]):
        drop = a["speed"] - b["speed"]
        if drop > a["residual"] + b["residual"]:
            violations.append({"mu": [a["mu"], b["mu"]], "drop": drop})
    gaps = [cbar - r["speed"] for r in ok]
    top = ok[-1] if ok else None
    return {
        "method": method, "rows": rows, "cauchy_reference": cauchy_ref.to_dict(),
        "monotone": not violations, "violations": violations,
        "below_cauchy": all(r["speed"] <= cbar for r in ok),
        "gap_shrinking": all(b <= a for a, b in zip(gaps, gaps[1:])),
        "top_relative_gap": (abs(cbar - top["speed"]) / cbar) if top else math.nan,
        "top_within": bool(top) and abs(cbar - top["speed"]) / cbar <= top_gap,
        "failures": [r for r in rows if r["error"] is not None],
    }


def check_u_below_p(spec: ReactionSpec, pstate: PeriodicState, u0: CompactProfile, T_scan: float,
                    nx: int = 200, dt: float = 0.01) -> dict:
    """First multiple of omega at which the two-sided solution lies strictly below p(0, .)."""
    if spec.family not in CONCAVE_FAMILIES:
        raise PreconditionError(f"family {spec.family!r} is outside the concave-in-u hypothesis")
    steps = max(1, int(round(spec.omega / dt)))
    n_per = int(math.floor(T_scan / spec.omega + 1e-9))
    if n_per < 1:
        raise PreconditionError("T_scan must cover at least one period")
    tr = solve_two_sided(spec, u0, n_per * spec.omega, nx, spec.omega / steps, pstate=pstate,
                         snapshot_every=steps, stop_on_vanish=False)
    margin = -math.inf
    for t, x, u in tr.snapshots:
        k = int(round(t / spec.omega))
        if k < 1:
            continue
        margin = float(np.min(pstate.p0_at(x) - u))
        if margin > 0:
            return {"status": "found", "t0": k * spec.omega, "periods": k, "margin": margin}
    return {"status": "not-yet", "t0": None, "periods": None, "margin": margin}


def cone_check(traj: FrontTrajectory, pstate: PeriodicState, c_right: float, c_left: float,
               c_right_out: float | None = None, c_left_out: float | None = None,
               factor: float = Tolerances.cone) -> dict:
    """Over the final quarter of a two-sided run: |u - p| small on [-c_left t, c_right t]
    and u small beyond (c_right_out t, -c_left_out t)."""
    T = traj.snapshots[-1][0]
    thr = factor * pstate.min
    inside, outside = 0.0, 0.0
    used = 0
    for t, x, u in traj.snapshots:
        if t < 0.75 * T or t <= 0:
            continue
        used += 1
        sel = (x >= -c_left * t) & (x <= c_right * t)
        if np.any(sel):
            inside = max(inside, float(np.abs(u[sel] - pstate.at(np.full(sel.sum(), t), x[sel])).max()))
        if c_right_out is not None and c_left_out is not None:
            out = (x >= c_right_out * t) | (x <= -c_left_out * t)
            if np.any(out):
                outside = max(outside, float(u[out].max()))
    if used == 0:
        raise PreconditionError("no snapshots in the final quarter of the run")
    return {"inside_gap": inside, "outside_sup": outside, "threshold": thr,
            "inside_ok": inside <= thr, "outside_ok": outside <= thr, "snapshots": used}

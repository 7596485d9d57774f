"""Positive space-time periodic state p(t, x) and the principal eigenvalue.

Both use the same x-periodic integrator: Strang splitting with exact
Fourier diffusion and an RK4 reaction half step.  For the linearized
equation the reaction half step is an exact pointwise exponential.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, NoPositiveStateError, PreconditionError
from .reaction import ReactionSpec

MAX_DT = 0.02


def _substeps(omega: float, nt: int) -> int:
    return max(1, math.ceil(omega / nt / MAX_DT - 1e-12))


def _diffusion_factor(d: float, period: float, nx: int, dt: float) -> np.ndarray:
    k = 2.0 * np.pi * np.fft.rfftfreq(nx, d=period / nx)
    return np.exp(-d * k**2 * dt)


def _reaction_half(spec: ReactionSpec, t: float, x, v, h: float):
    f = spec.rate
    k1 = f(t, x, v)
    k2 = f(t + h / 2, x, v + h / 2 * k1)
    k3 = f(t + h / 2, x, v + h / 2 * k2)
    k4 = f(t + h, x, v + h * k3)
    return np.maximum(v + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4), 0.0)


def periodic_march(
    spec: ReactionSpec,
    v0,
    t0: float,
    nsteps: int,
    dt: float,
    period: float | None = None,
    record_every: int = 0,
):
    """March v_t = d v_xx + f on an x-periodic grid of ``period`` (default L).

    v0 sits on x_j = j*period/nx.  Returns the final profile and, when
    ``record_every`` > 0, the stack of profiles at every record_every-th
    step (including the start).
    """
    period = spec.L if period is None else period
    v = np.array(v0, dtype=float)
    nx = v.shape[0]
    x = np.arange(nx) * period / nx
    fac = _diffusion_factor(spec.d, period, nx, dt)
    frames = [v.copy()] if record_every else None
    t = t0
    for i in range(nsteps):
        v = _reaction_half(spec, t, x, v, dt / 2)
        v = np.fft.irfft(np.fft.rfft(v) * fac, n=nx)
        v = _reaction_half(spec, t + dt / 2, x, v, dt / 2)
        t = t0 + (i + 1) * dt
        if record_every and (i + 1) % record_every == 0:
            frames.append(v.copy())
    if not np.all(np.isfinite(v)):
        raise ConvergenceError("periodic march produced non-finite values")
    if record_every:
        return v, np.array(frames)
    return v


def period_map(spec: ReactionSpec, v0, nt: int = 64, period: float | None = None, t0: float = 0.0):
    """Time-omega solution map of the x-periodic problem."""
    nsub = _substeps(spec.omega, nt)
    return periodic_march(spec, v0, t0, nt * nsub, spec.omega / (nt * nsub), period)


@dataclass
class PeriodicState:
    """Samples of p on [0, omega) x [0, L) with its residual certificate."""

    nt: int
    nx: int
    values: np.ndarray
    residual: float
    tol: float
    omega: float
    L: float
    closure: float = 0.0
    periods: int = 0
    spec: ReactionSpec | None = field(default=None, repr=False, compare=False)

    @property
    def t_grid(self) -> np.ndarray:
        return np.arange(self.nt) * self.omega / self.nt

    @property
    def x_grid(self) -> np.ndarray:
        return np.arange(self.nx) * self.L / self.nx

    @property
    def p0(self) -> np.ndarray:
        return self.values[0]

    @property
    def min(self) -> float:
        return float(self.values.min())

    @property
    def max(self) -> float:
        return float(self.values.max())

    def table(self) -> np.ndarray:
        """(nt+1, nx) table with the time-periodic closure row appended."""
        return np.vstack([self.values, self.values[:1]])

    def at(self, t, x):
        """Bilinear periodic interpolation of p."""
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        s = np.mod(t, self.omega) / self.omega * self.nt
        i0 = np.floor(s).astype(int) % self.nt
        fs = s - np.floor(s)
        r = np.mod(x, self.L) / self.L * self.nx
        j0 = np.floor(r).astype(int) % self.nx
        fr = r - np.floor(r)
        i1 = (i0 + 1) % self.nt
        j1 = (j0 + 1) % self.nx
        V = self.values
        v0 = V[i0, j0] * (1 - fr) + V[i0, j1] * fr
        v1 = V[i1, j0] * (1 - fr) + V[i1, j1] * fr
        return v0 * (1 - fs) + v1 * fs

    def p0_at(self, x):
        return self.at(np.zeros_like(np.asarray(x, dtype=float)), x)

    def header(self) -> dict:
        d = {
            "nt": self.nt,
            "nx": self.nx,
            "omega": self.omega,
            "L": self.L,
            "residual": self.residual,
            "tol": self.tol,
            "closure": self.closure,
            "periods": self.periods,
            "min": self.min,
            "max": self.max,
        }
        if self.spec is not None:
            d["spec"] = self.spec.to_dict()
        return d

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x", "p"])
        for i, t in enumerate(self.t_grid):
            for j, x in enumerate(self.x_grid):
                w.writerow([repr(float(t)), repr(float(x)), repr(float(self.values[i, j]))])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(self.header(), sort_keys=True)

    @classmethod
    def from_files(cls, header_json: str, csv_text: str) -> "PeriodicState":
        h = json.loads(header_json)
        rows = list(csv.reader(io.StringIO(csv_text)))[1:]
        vals = np.array([float(r[2]) for r in rows]).reshape(h["nt"], h["nx"])
        spec = ReactionSpec.from_dict(h["spec"]) if "spec" in h else None
        return cls(
            nt=h["nt"], nx=h["nx"], values=vals, residual=h["residual"], tol=h["tol"],
            omega=h["omega"], L=h["L"], closure=h.get("closure", 0.0),
            periods=h.get("periods", 0), spec=spec,
        )


def pde_residual(spec: ReactionSpec, values: np.ndarray) -> float:
    """max |p_t - d p_xx - f| with central stencils on the periodic grid."""
    nt, nx = values.shape
    dt = spec.omega / nt
    dx = spec.L / nx
    pt = (np.roll(values, -1, axis=0) - np.roll(values, 1, axis=0)) / (2 * dt)
    pxx = (np.roll(values, -1, axis=1) - 2 * values + np.roll(values, 1, axis=1)) / dx**2
    T, X = np.meshgrid(np.arange(nt) * dt, np.arange(nx) * dx, indexing="ij")
    return float(np.abs(pt - spec.d * pxx - spec.rate(T, X, values)).max())


def compute_periodic_state(
    spec: ReactionSpec,
    nt: int = 64,
    nx: int = 64,
    tol: float = 1e-8,
    max_periods: int = 200,
    v0=None,
) -> PeriodicState:
    """March from v0 (default the constant cap M) until the period gap < tol."""
    if nt < 16 or nx < 16:
        raise PreconditionError("nt and nx must be at least 16")
    nsub = _substeps(spec.omega, nt)
    dt = spec.omega / (nt * nsub)
    if v0 is None:
        v = np.full(nx, spec.cap_M)
    else:
        v = np.broadcast_to(np.asarray(v0, dtype=float), (nx,)).copy()
    gap = math.inf
    history = []
    for k in range(1, max_periods + 1):
        new = periodic_march(spec, v, 0.0, nt * nsub, dt)
        gap = float(np.abs(new - v).max())
        history.append(gap)
        v = new
        if v.max() < 10 * tol:
            raise NoPositiveStateError(
                f"periodic march collapsed to zero after {k} periods (max {v.max():.3g})"
            )
        if gap < tol:
            break
    else:
        raise ConvergenceError(
            f"period gap {gap:.3g} still above {tol:g} after {max_periods} periods",
            gap=gap, history=history,
        )
    end, frames = periodic_march(spec, v, 0.0, nt * nsub, dt, record_every=nsub)
    values = frames[:nt]
    closure = float(np.abs(end - values[0]).max())
    if values.min() <= 0:
        raise NoPositiveStateError("periodic state is not strictly positive")
    return PeriodicState(
        nt=nt, nx=nx, values=values, residual=pde_residual(spec, values), tol=tol,
        omega=spec.omega, L=spec.L, closure=closure, periods=k, spec=spec,
    )


def principal_eigenvalue(
    spec: ReactionSpec,
    linearize_at: str = "zero",
    nt: int = 64,
    nx: int = 64,
    pstate: PeriodicState | None = None,
    tol: float = 1e-12,
    max_iter: int = 500,
) -> float:
    """lambda_1 = -(1/omega) log(spectral radius of the linearized period map)."""
    if linearize_at not in ("zero", "p"):
        raise PreconditionError("linearize_at must be 'zero' or 'p'")
    if linearize_at == "p" and pstate is None:
        raise PreconditionError("linearizing at p needs a PeriodicState")
    nsub = _substeps(spec.omega, nt)
    n = nt * nsub
    dt = spec.omega / n
    x = np.arange(nx) * spec.L / nx
    fac = _diffusion_factor(spec.d, spec.L, nx, dt)

    def q(t):
        if linearize_at == "zero":
            return spec.rate_u(t, x, np.zeros(nx))
        return spec.rate_u(t, x, pstate.at(np.full(nx, t), x))

    halves = [
        (np.exp(dt / 2 * q(i * dt + dt / 4)), np.exp(dt / 2 * q(i * dt + 3 * dt / 4)))
        for i in range(n)
    ]

    def apply(phi):
        for e1, e2 in halves:
            phi = e1 * phi
            phi = np.fft.irfft(np.fft.rfft(phi) * fac, n=nx)
            phi = e2 * phi
        return phi

    phi = np.ones(nx)
    rho_prev = rho = math.nan
    for _ in range(max_iter):
        nxt = apply(phi)
        rho_prev, rho = rho, float(np.linalg.norm(nxt) / np.linalg.norm(phi))
        phi = nxt / np.linalg.norm(nxt)
        if abs(rho - rho_prev) <= tol * abs(rho):
            return -math.log(rho) / spec.omega
    raise ConvergenceError(
        f"power iteration did not converge: last quotients {rho_prev!r}, {rho!r}",
        gap=abs(rho - rho_prev), history=[rho_prev, rho],
    )

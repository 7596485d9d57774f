"""Space-time periodic reaction terms f(t, x, u).

Coefficients are finite Fourier series in (2*pi*t/omega, 2*pi*x/L), so
periodicity is exact by construction and every spec serializes to a flat
dict of numbers.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .errors import ConfigError, ReactionDomainError

FAMILIES = ("logistic", "degenerate", "homogeneous_logistic")
FAMILY_CODES = {name: i for i, name in enumerate(FAMILIES)}

# coefficient names each family reads
_COEFF_NAMES = {
    "logistic": ("a", "b"),
    "degenerate": ("a",),
    "homogeneous_logistic": ("a", "b"),
}

GRID_SAMPLES = 64


@dataclass(frozen=True)
class PeriodicCoefficient:
    """mean + sum cos_amp*cos(phase) + sin_amp*sin(phase).

    phase = 2*pi*(k_t*t/omega + k_x*x/L) for each mode (k_t, k_x, cos_amp, sin_amp).
    If ``positive`` is set, ``lower_bound`` is checked against the minimum
    over a dense period-cell grid when the owning spec is built.
    """

    mean: float
    modes: tuple[tuple[int, int, float, float], ...] = ()
    positive: bool = False
    lower_bound: float | None = None

    def __post_init__(self):
        modes = tuple(
            (int(kt), int(kx), float(ca), float(sa)) for kt, kx, ca, sa in self.modes
        )
        object.__setattr__(self, "mean", float(self.mean))
        object.__setattr__(self, "modes", modes)

    def __call__(self, t, x, omega: float, L: float):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        out = np.full(np.broadcast(t, x).shape, self.mean)
        # reduce the arguments first so that t + omega and t land on the same phase
        tr = np.mod(t, omega) / omega
        xr = np.mod(x, L) / L
        for kt, kx, ca, sa in self.modes:
            ph = 2.0 * np.pi * (kt * tr + kx * xr)
            if ca:
                out = out + ca * np.cos(ph)
            if sa:
                out = out + sa * np.sin(ph)
        return out

    def reflected(self) -> "PeriodicCoefficient":
        """Coefficient of x -> -x."""
        return dataclasses.replace(
            self, modes=tuple((kt, -kx, ca, sa) for kt, kx, ca, sa in self.modes)
        )

    @property
    def depends_on_t(self) -> bool:
        return any(kt != 0 and (ca or sa) for kt, _, ca, sa in self.modes)

    @property
    def depends_on_x(self) -> bool:
        return any(kx != 0 and (ca or sa) for _, kx, ca, sa in self.modes)

    def mode_array(self) -> np.ndarray:
        """(n_modes, 4) float array, used by the compiled kernels."""
        if not self.modes:
            return np.zeros((0, 4))
        return np.array(self.modes, dtype=float)

    def to_dict(self) -> dict:
        d = {"mean": self.mean, "modes": [list(m) for m in self.modes]}
        if self.positive:
            d["positive"] = True
        if self.lower_bound is not None:
            d["lower_bound"] = self.lower_bound
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], path: str = "coeff") -> "PeriodicCoefficient":
        if isinstance(d, (int, float)):
            return cls(float(d))
        unknown = set(d) - {"mean", "modes", "positive", "lower_bound"}
        if unknown:
            raise ConfigError(f"{path}.{sorted(unknown)[0]}", "unknown key")
        if "mean" not in d:
            raise ConfigError(f"{path}.mean", "missing")
        modes = []
        for i, m in enumerate(d.get("modes", [])):
            if len(m) != 4:
                raise ConfigError(f"{path}.modes[{i}]", "expected [k_t, k_x, cos_amp, sin_amp]")
            if int(m[0]) != m[0] or int(m[1]) != m[1]:
                raise ConfigError(f"{path}.modes[{i}]", "wave numbers must be integers")
            modes.append(tuple(m))
        return cls(
            mean=d["mean"],
            modes=tuple(modes),
            positive=bool(d.get("positive", False)),
            lower_bound=d.get("lower_bound"),
        )


def constant(value: float) -> PeriodicCoefficient:
    return PeriodicCoefficient(float(value))


@dataclass(frozen=True)
class ReactionSpec:
    """Reaction family, its coefficients and the structural constants.

    family: "logistic" u(a - b u), "degenerate" a u^k (1 - u) or
    "homogeneous_logistic" (constant a, b). ``cap_M`` defaults to the
    smallest cap with f <= 0 above it.
    """

    family: str
    coeffs: Mapping[str, PeriodicCoefficient]
    d: float = 1.0
    mu: float = 1.0
    omega: float = 1.0
    L: float = 1.0
    k: float = 2.0
    cap_M: float | None = None
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError("family", f"unknown family {self.family!r}; expected one of {FAMILIES}")
        for name in ("d", "mu", "omega", "L"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(name, f"must be a positive number, got {v!r}")
            object.__setattr__(self, name, float(v))
        if self.family == "degenerate" and not self.k > 1:
            raise ConfigError("k", "degenerate family needs k > 1")
        coeffs = {}
        for name in _COEFF_NAMES[self.family]:
            if name not in self.coeffs:
                raise ConfigError(f"coeffs.{name}", "missing")
            c = self.coeffs[name]
            if not isinstance(c, PeriodicCoefficient):
                c = constant(c)
            coeffs[name] = c
        extra = set(self.coeffs) - set(coeffs)
        if extra:
            raise ConfigError(f"coeffs.{sorted(extra)[0]}", "not used by this family")
        if self.family == "homogeneous_logistic":
            for name, c in coeffs.items():
                if c.modes:
                    raise ConfigError(f"coeffs.{name}", "homogeneous family takes constants")
        object.__setattr__(self, "coeffs", coeffs)
        for name, c in coeffs.items():
            lo = self.coefficient_min(name)
            if lo <= 0:
                raise ConfigError(f"coeffs.{name}", f"must stay positive (min {lo:.3g})")
            if c.lower_bound is not None and lo < c.lower_bound:
                raise ConfigError(f"coeffs.{name}", f"min {lo:.6g} below declared bound {c.lower_bound}")
        if self.cap_M is None:
            object.__setattr__(self, "cap_M", self.default_cap())
        elif not self.cap_M > 0:
            raise ConfigError("cap_M", "must be positive")
        else:
            object.__setattr__(self, "cap_M", float(self.cap_M))

    # constructors
    @classmethod
    def homogeneous(cls, a=1.0, b=1.0, **kw) -> "ReactionSpec":
        return cls("homogeneous_logistic", {"a": constant(a), "b": constant(b)}, **kw)

    @classmethod
    def logistic(cls, a, b=1.0, **kw) -> "ReactionSpec":
        a = a if isinstance(a, PeriodicCoefficient) else constant(a)
        b = b if isinstance(b, PeriodicCoefficient) else constant(b)
        return cls("logistic", {"a": a, "b": b}, **kw)

    @classmethod
    def degenerate(cls, a, k=2.0, **kw) -> "ReactionSpec":
        a = a if isinstance(a, PeriodicCoefficient) else constant(a)
        return cls("degenerate", {"a": a}, k=k, **kw)

    # coefficients
    def coefficient(self, name: str, t, x):
        return self.coeffs[name](t, x, self.omega, self.L)

    def period_grid(self, n: int = GRID_SAMPLES):
        t = np.arange(n) * self.omega / n
        x = np.arange(n) * self.L / n
        return np.meshgrid(t, x, indexing="ij")

    def coefficient_min(self, name: str, n: int = GRID_SAMPLES) -> float:
        T, X = self.period_grid(n)
        return float(self.coefficient(name, T, X).min())

    def coefficient_max(self, name: str, n: int = GRID_SAMPLES) -> float:
        T, X = self.period_grid(n)
        return float(self.coefficient(name, T, X).max())

    def default_cap(self) -> float:
        if self.family == "degenerate":
            return 1.0
        return self.coefficient_max("a") / self.coefficient_min("b")

    @property
    def depends_on_t(self) -> bool:
        return any(c.depends_on_t for c in self.coeffs.values())

    @property
    def depends_on_x(self) -> bool:
        return any(c.depends_on_x for c in self.coeffs.values())

    @property
    def is_homogeneous(self) -> bool:
        return not (self.depends_on_t or self.depends_on_x)

    # reaction
    def rate(self, t, x, u):
        """Vectorized f(t, x, u) without domain checks."""
        u = np.asarray(u, dtype=float)
        a = self.coefficient("a", t, x)
        if self.family == "degenerate":
            return a * u**self.k * (1.0 - u)
        b = self.coefficient("b", t, x)
        return u * (a - b * u)

    def rate_u(self, t, x, u):
        """Vectorized partial derivative of f in u."""
        u = np.asarray(u, dtype=float)
        a = self.coefficient("a", t, x)
        if self.family == "degenerate":
            k = self.k
            return a * (k * u ** (k - 1.0) - (k + 1.0) * u**k)
        b = self.coefficient("b", t, x)
        return a - 2.0 * b * u

    def linear_bound(self, n: int = GRID_SAMPLES) -> float:
        """K = max of f_u over a period-cell by [0, M] grid, so f <= K u on [0, M]."""
        key = ("K", n)
        if key not in self._cache:
            t = np.arange(n) * self.omega / n
            x = np.arange(n) * self.L / n
            u = np.linspace(0.0, self.cap_M, n)
            T, X, U = np.meshgrid(t, x, u, indexing="ij")
            self._cache[key] = float(self.rate_u(T, X, U).max())
        return self._cache[key]

    def kernel_args(self):
        """Packed arguments for the compiled kernels: (code, k, a_mean, a_modes, b_mean, b_modes)."""
        a = self.coeffs["a"]
        b = self.coeffs.get("b", constant(0.0))
        return (
            FAMILY_CODES[self.family],
            float(self.k),
            a.mean,
            a.mode_array(),
            b.mean,
            b.mode_array(),
        )

    # transformations
    def reflected(self) -> "ReactionSpec":
        """Spec of f(t, -x, u)."""
        return dataclasses.replace(
            self, coeffs={n: c.reflected() for n, c in self.coeffs.items()}
        )

    def with_mu(self, mu: float) -> "ReactionSpec":
        return dataclasses.replace(self, mu=mu)

    def replace(self, **kw) -> "ReactionSpec":
        if "cap_M" not in kw and "coeffs" in kw:
            kw["cap_M"] = None
        return dataclasses.replace(self, **kw)

    # serialization
    def to_dict(self) -> dict:
        d = {
            "family": self.family,
            "coeffs": {n: c.to_dict() for n, c in self.coeffs.items()},
            "d": self.d,
            "mu": self.mu,
            "omega": self.omega,
            "L": self.L,
            "cap_M": self.cap_M,
        }
        if self.family == "degenerate":
            d["k"] = self.k
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], path: str = "problem") -> "ReactionSpec":
        allowed = {"family", "coeffs", "d", "mu", "omega", "L", "cap_M", "k"}
        unknown = set(d) - allowed
        if unknown:
            raise ConfigError(f"{path}.{sorted(unknown)[0]}", "unknown key")
        if "family" not in d:
            raise ConfigError(f"{path}.family", "missing")
        coeffs = {
            n: PeriodicCoefficient.from_dict(c, f"{path}.coeffs.{n}")
            for n, c in d.get("coeffs", {}).items()
        }
        kw = {k: d[k] for k in ("d", "mu", "omega", "L", "cap_M", "k") if k in d}
        try:
            return cls(family=d["family"], coeffs=coeffs, **kw)
        except ConfigError as e:
            raise ConfigError(f"{path}.{e.field}", str(e).split(": ", 1)[-1]) from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ReactionSpec":
        return cls.from_dict(json.loads(text))


def _check_u(u):
    arr = np.asarray(u, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ReactionDomainError(f"reaction evaluated at negative u (min {np.nanmin(arr)!r})")
    return arr


def eval_f(spec: ReactionSpec, t, x, u):
    """f(t, x, u) for u >= 0; negative u raises ReactionDomainError."""
    out = spec.rate(t, x, _check_u(u))
    return float(out) if np.ndim(out) == 0 else out


def eval_f_u(spec: ReactionSpec, t, x, u):
    """Partial derivative of f in u, for u >= 0."""
    out = spec.rate_u(t, x, _check_u(u))
    return float(out) if np.ndim(out) == 0 else out

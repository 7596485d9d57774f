"""Command-line runs: declarative configs in, JSON/CSV artifacts out.

    freebound <task> --config run.toml [--jobs N] [--out dir]
    freebound compare result1.json result2.json [...]

FREEBOUND_OUT overrides the output directory.  The exit status is 0 on
success, 1 when an asserted property of the task fails and 2 on
configuration or compute errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, FreeboundError, PreconditionError
from .reaction import ReactionSpec

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

OUT_ENV = "FREEBOUND_OUT"

TASKS = ("solve", "periodic-state", "speed-direct", "speed-recursion", "speed-cauchy", "semiwave",
         "dichotomy", "mu-sweep", "verify-chain", "check-below-p")

# accepted numerics keys per task with their defaults
NUMERICS = {
    "solve": {"kind": "two_sided", "T": 10.0, "nx": 200, "dt": 0.01, "u0_width": 4.0,
              "u0_height": 0.5, "window": 30.0, "halfwidth": 60.0, "snapshot_every": 100},
    "periodic-state": {"nt": 64, "nx": 64, "tol": 1e-8, "max_periods": 200},
    "speed-direct": {"T": 60.0, "nx": 300, "dt": 0.005, "window": 30.0, "tail_fraction": 0.5,
                     "side": "right"},
    "speed-recursion": {"side": "right", "bisect_tol": 0.01, "n_max": 40, "extend": 8.0,
                        "s_nodes": 8, "dx": 0.1, "dt": 0.005, "window": 30.0, "phi": "tau",
                        "bracket": None},
    "speed-cauchy": {"method": "level_set", "T": 60.0, "dx": 0.1, "dt": 0.01, "level": None,
                     "tail_fraction": 0.5, "bisect_tol": 0.01, "n_max": 40},
    "semiwave": {"tol": 1e-10, "accept_tol": 1e-4, "profile_points": 200},
    "dichotomy": {"widths": [1.0, 2.0, 3.0, 4.0, 5.0], "u0_height": 0.1, "T": 30.0, "nx": 200,
                  "dt": 0.01},
    "mu-sweep": {"mu_grid": [0.5, 1.0, 2.0, 5.0, 20.0], "method": "FrontSlope", "T": 60.0,
                 "nx": 300, "dt": 0.005, "window": 30.0, "top_gap": 0.10},
    "verify-chain": {"B": 8.0, "m": 6, "c_fraction": 0.5, "c": None, "c_prime": None,
                        "points_per_period": 4, "nx": 128, "dt": 0.01, "bisect_tol": 0.05},
    "check-below-p": {"u0_width": 4.0, "u0_height_factor": 1.5, "T_scan": 20.0, "nx": 200,
                      "dt": 0.01},
}


@dataclass
class RunConfig:
    """A validated run: the reaction problem, the task and its numerics."""

    problem: ReactionSpec
    task: str
    numerics: dict = field(default_factory=dict)
    output_dir: str = "results"

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        unknown = set(d) - {"problem", "task", "numerics", "output_dir"}
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown key")
        task = d.get("task")
        if task not in TASKS:
            raise ConfigError("task", f"expected one of {', '.join(TASKS)}; got {task!r}")
        if "problem" not in d:
            raise ConfigError("problem", "missing")
        spec = ReactionSpec.from_dict(d["problem"])
        given = dict(d.get("numerics", {}))
        allowed = NUMERICS[task]
        bad = set(given) - set(allowed)
        if bad:
            raise ConfigError(f"numerics.{sorted(bad)[0]}", f"not a setting of task {task}")
        num = {**allowed, **given}
        return cls(spec, task, num, str(d.get("output_dir", "results")))

    def to_dict(self) -> dict:
        return {"problem": self.problem.to_dict(), "task": self.task, "numerics": self.numerics,
                "output_dir": self.output_dir}


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    text = p.read_text()
    if p.suffix == ".toml":
        raw = tomllib.loads(text)
    else:
        raw = json.loads(text)
    return RunConfig.from_dict(raw)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _clean(obj):
    """JSON-safe copy: numpy scalars and arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


# task runners: each returns (result dict, {filename: csv text}, ok flag)

def _pstate(spec, nt=32, nx=32):
    from .periodic_state import compute_periodic_state
    return compute_periodic_state(spec, nt, nx, tol=1e-9)


def _run_solve(cfg, jobs):
    from . import pde_engine as pe
    from .speed_lab import bump_datum
    n, spec = cfg.numerics, cfg.problem
    kind = n["kind"]
    if kind == "two_sided":
        tr = pe.solve_two_sided(spec, bump_datum(n["u0_width"], n["u0_height"]), n["T"], n["nx"],
                                n["dt"], snapshot_every=n["snapshot_every"], stop_on_vanish=False)
    elif kind == "cauchy":
        X = n["halfwidth"]
        x = np.linspace(-X, X, n["nx"] + 1)
        v = np.where(np.abs(x) < n["u0_width"] / 2, n["u0_height"], 0.0)
        tr = pe.solve_cauchy(spec, pe.CompactProfile.whole_line(x, v), n["T"], X, n["nx"], n["dt"],
                             snapshot_every=n["snapshot_every"])
    elif kind in ("right", "left"):
        from .speed_lab import one_sided_datum
        ps = _pstate(spec)
        if kind == "right":
            tr = pe.solve_right(spec, one_sided_datum(ps, n["window"]), n["T"], n["window"], n["nx"],
                                n["dt"], pstate=ps, snapshot_every=n["snapshot_every"])
        else:
            tr = pe.solve_left(spec, one_sided_datum(ps, n["window"], "left"), n["T"], n["window"],
                               n["nx"], n["dt"], pstate=ps, snapshot_every=n["snapshot_every"])
    else:
        raise ConfigError("numerics.kind", "expected two_sided, right, left or cauchy")
    res = {"vanished": tr.vanished, "spreading": tr.spreading, "final_time": tr.snapshots[-1][0],
           "sup_u": tr.sup_u(), "meta": tr.meta}
    if tr.h is not None:
        res["final_h"] = float(tr.h[-1])
    if tr.g is not None:
        res["final_g"] = float(tr.g[-1])
    files = {"snapshots.csv": tr.snapshots_csv()}
    if tr.h is not None:
        files["fronts.csv"] = tr.fronts_csv()
    return res, files, True


def _run_periodic_state(cfg, jobs):
    from .periodic_state import compute_periodic_state, principal_eigenvalue
    n = cfg.numerics
    ps = compute_periodic_state(cfg.problem, n["nt"], n["nx"], n["tol"], n["max_periods"])
    lam = principal_eigenvalue(cfg.problem, "zero", n["nt"], n["nx"])
    res = {**ps.header(), "lambda1_zero": lam}
    return res, {"periodic_state.csv": ps.to_csv()}, True


def _run_speed_direct(cfg, jobs):
    from .speed_lab import DirectNumerics, direct_speed
    n = cfg.numerics
    if n["side"] not in ("right", "left"):
        raise ConfigError("numerics.side", "expected right or left")
    num = DirectNumerics(T=n["T"], nx=n["nx"], dt=n["dt"], window=n["window"],
                         tail_fraction=n["tail_fraction"])
    est, tr = direct_speed(cfg.problem, _pstate(cfg.problem), n["side"], num)
    return {"speed": est.to_dict()}, {"fronts.csv": tr.fronts_csv()}, True


def _recursion_kw(n):
    from .weinberger import RecursionNumerics
    return {"bisect_tol": n["bisect_tol"], "n_max": n["n_max"],
            "numerics": RecursionNumerics(s_nodes=n.get("s_nodes", 8), dx=n.get("dx", 0.1),
                                          dt=n.get("dt", 0.005), window=n.get("window", 30.0))}


def _run_speed_recursion(cfg, jobs):
    from . import weinberger as wb
    n, spec = cfg.numerics, cfg.problem
    ps = _pstate(spec)
    if n["phi"] not in ("tau", "clip"):
        raise ConfigError("numerics.phi", "expected tau or clip")
    kw = _recursion_kw(n)
    kw["extend"] = n["extend"]
    if n["bracket"] is not None:
        kw["bracket"] = tuple(n["bracket"])
    if n["side"] == "right":
        phi = wb.default_phi(ps) if n["phi"] == "tau" else wb.compact_phi(ps)
        est = wb.estimate_c_plus(spec, ps, phi, **kw)
    elif n["side"] == "left":
        phi = wb.default_phi(ps) if n["phi"] == "tau" else wb.compact_phi(ps)
        est = wb.estimate_c_minus(spec, ps, phi, **kw)
    else:
        raise ConfigError("numerics.side", "expected right or left")
    rows = [(p["c"], p["verdict"], p["steps"]) for p in est.meta["probes"]]
    return {"speed": est.to_dict()}, {"probes.csv": _csv(["c", "verdict", "steps"], rows)}, True


def _run_speed_cauchy(cfg, jobs):
    n, spec = cfg.numerics, cfg.problem
    ps = _pstate(spec)
    if n["method"] == "level_set":
        from .speed_lab import DirectNumerics, cauchy_speed
        num = DirectNumerics(T=n["T"], cauchy_dx=n["dx"], cauchy_dt=n["dt"],
                             tail_fraction=n["tail_fraction"])
        est, tr = cauchy_speed(spec, ps, n["level"], num)
        return {"speed": est.to_dict()}, {}, True
    if n["method"] == "recursion":
        from .weinberger import estimate_c_cauchy
        est = estimate_c_cauchy(spec, ps, bisect_tol=n["bisect_tol"], n_max=n["n_max"])
        return {"speed": est.to_dict()}, {}, True
    raise ConfigError("numerics.method", "expected level_set or recursion")


def _run_semiwave(cfg, jobs):
    from .semiwave import SemiWaveProblem, semiwave_profile, shoot_semiwave_speed, upper_bound_c_plus
    n, spec = cfg.numerics, cfg.problem
    res = {"upper_bound_c_plus": upper_bound_c_plus(spec)}
    files = {}
    if spec.is_homogeneous and spec.family != "degenerate":
        a = spec.coeffs["a"].mean
        b = spec.coeffs["b"].mean
        prob = SemiWaveProblem.logistic(a, b, spec.d, spec.mu)
        est = shoot_semiwave_speed(prob, n["tol"], n["accept_tol"])
        x, q = semiwave_profile(prob, est.value, n["profile_points"])
        res["speed"] = est.to_dict()
        files["profile.csv"] = _csv(["x", "q"], zip(x, q))
    return res, files, True


def _run_dichotomy(cfg, jobs):
    from .speed_lab import dichotomy_scan
    n = cfg.numerics
    rep = dichotomy_scan(cfg.problem, n["widths"], n["u0_height"], n["T"], nx=n["nx"], dt=n["dt"],
                         jobs=jobs)
    rows = [(r["width"], r["outcome"], r["final_width"], r["final_max_u"]) for r in rep["rows"]]
    return rep, {"dichotomy.csv": _csv(["width", "outcome", "final_width", "final_max_u"], rows)}, \
        rep["monotone"]


def _run_mu_sweep(cfg, jobs):
    from .speed_lab import DirectNumerics, mu_sweep
    n = cfg.numerics
    num = DirectNumerics(T=n["T"], nx=n["nx"], dt=n["dt"], window=n["window"])
    rep = mu_sweep(cfg.problem, n["mu_grid"], n["method"], _pstate(cfg.problem), num,
                   top_gap=n["top_gap"], jobs=jobs)
    rows = [(r["mu"], r["speed"], r["residual"]) for r in rep["rows"]]
    ok = rep["monotone"] and rep["below_cauchy"] and not rep["failures"]
    return rep, {"mu_sweep.csv": _csv(["mu", "speed", "residual"], rows)}, ok


def _run_verify_chain(cfg, jobs):
    from . import weinberger as wb
    n, spec = cfg.numerics, cfg.problem
    ps = _pstate(spec)
    c, cp = n["c"], n["c_prime"]
    meta = {}
    if c is None or cp is None:
        kw = {"bisect_tol": n["bisect_tol"]}
        cplus = wb.estimate_c_plus(spec, ps, **kw)
        cminus = wb.estimate_c_minus(spec, ps, **kw)
        lo_p = cplus.meta["bracket"][0]
        lo_m = cminus.meta["bracket"][0]
        c = n["c_fraction"] * lo_p if c is None else c
        cp = n["c_fraction"] * lo_m if cp is None else cp
        meta = {"c_plus_bracket": cplus.meta["bracket"], "c_minus_bracket": cminus.meta["bracket"]}
    num = wb.ChainNumerics(points_per_period=n["points_per_period"], nx=n["nx"], dt=n["dt"])
    rep = wb.verify_subsolution_chain(spec, ps, n["B"], n["m"], c, cp, numerics=num)
    rep.update(meta)
    return rep, {}, rep["pass"]


def _run_check_below_p(cfg, jobs):
    from .speed_lab import bump_datum, check_u_below_p
    n, spec = cfg.numerics, cfg.problem
    ps = _pstate(spec)
    u0 = bump_datum(n["u0_width"], n["u0_height_factor"] * ps.max)
    rep = check_u_below_p(spec, ps, u0, n["T_scan"], n["nx"], n["dt"])
    return rep, {}, rep["status"] == "found"


RUNNERS = {
    "solve": _run_solve, "periodic-state": _run_periodic_state, "speed-direct": _run_speed_direct,
    "speed-recursion": _run_speed_recursion, "speed-cauchy": _run_speed_cauchy,
    "semiwave": _run_semiwave, "dichotomy": _run_dichotomy, "mu-sweep": _run_mu_sweep,
    "verify-chain": _run_verify_chain, "check-below-p": _run_check_below_p,
}


def run(cfg: RunConfig, out_dir: str | Path | None = None, jobs: int = 1) -> tuple[int, Path]:
    """Run one task; writes manifest.json, result.json and the task's CSV files."""
    out = Path(os.environ.get(OUT_ENV) or out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    status = 0
    try:
        res, files, ok = RUNNERS[cfg.task](cfg, jobs)
        if not ok:
            status = 1
        result = {"task": cfg.task, "problem": cfg.problem.to_dict(), "ok": ok, "result": res}
    except FreeboundError as exc:
        status = 2
        files = {}
        result = {"task": cfg.task, "problem": cfg.problem.to_dict(), "ok": False,
                  "error": {"type": type(exc).__name__, "module": type(exc).__module__,
                            "origin": _origin(exc), "message": str(exc)}}
    wall = time.perf_counter() - t0
    (out / "result.json").write_text(json.dumps(_clean(result), indent=2, sort_keys=True) + "\n")
    for name, text in files.items():
        (out / name).write_text(text)
    manifest = {
        "config": cfg.to_dict(),
        "versions": {"freebound": __version__, "python": platform.python_version(),
                     "numpy": np.__version__},
        "wall_time_s": wall,
        "files": ["result.json", *sorted(files)],
        "status": status,
    }
    (out / "manifest.json").write_text(json.dumps(_clean(manifest), indent=2, sort_keys=True) + "\n")
    return status, out


def _origin(exc: BaseException) -> str:
    tb = exc.__traceback__
    mod = "?"
    while tb is not None:
        mod = tb.tb_frame.f_globals.get("__name__", mod)
        tb = tb.tb_next
    return mod


def _speed_of(result: dict):
    r = result.get("result", {})
    sp = r.get("speed")
    if isinstance(sp, dict) and "value" in sp:
        return float(sp["value"]), sp.get("method", "?")
    return None


def compare(paths) -> dict:
    """Cross-method table of speeds from result JSON files with pairwise relative gaps."""
    paths = list(paths)
    if len(paths) < 2:
        raise PreconditionError("compare needs at least two result files")
    entries = []
    for p in paths:
        d = json.loads(Path(p).read_text())
        sp = _speed_of(d)
        if sp is None:
            raise PreconditionError(f"{p} carries no speed")
        entries.append({"path": str(p), "task": d["task"], "method": sp[1], "value": sp[0],
                        "problem": d["problem"]})
    ref = entries[0]["problem"]
    for e in entries[1:]:
        diff = sorted(k for k in set(ref) | set(e["problem"]) if ref.get(k) != e["problem"].get(k))
        if diff:
            raise PreconditionError(f"{e['path']} has a different problem; fields: {', '.join(diff)}")
    vals = [e["value"] for e in entries]
    gaps = [[abs(a - b) / max(abs(a), abs(b), 1e-300) for b in vals] for a in vals]
    return {"entries": [{k: e[k] for k in ("path", "task", "method", "value")} for e in entries],
            "gaps": gaps}


def compare_csv(table: dict) -> str:
    labels = [f"{e['method']}:{e['task']}" for e in table["entries"]]
    rows = [[lab, e["value"], *g] for lab, e, g in zip(labels, table["entries"], table["gaps"])]
    return _csv(["run", "speed", *labels], rows)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="freebound", description=__doc__.split("\n")[0])
    ap.add_argument("task", choices=(*TASKS, "compare"))
    ap.add_argument("paths", nargs="*", help="result JSON files (compare only)")
    ap.add_argument("--config", help="TOML or JSON run configuration")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for sweep points")
    ap.add_argument("--out", help="output directory")
    args = ap.parse_args(argv)
    if args.task == "compare":
        try:
            table = compare(args.paths)
        except (FreeboundError, OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        text = compare_csv(table)
        if args.out or os.environ.get(OUT_ENV):
            out = Path(os.environ.get(OUT_ENV) or args.out)
            out.mkdir(parents=True, exist_ok=True)
            (out / "compare.csv").write_text(text)
            (out / "compare.json").write_text(json.dumps(_clean(table), indent=2) + "\n")
        sys.stdout.write(text)
        return 0
    if not args.config:
        print("error: --config is required", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config)
        if cfg.task != args.task:
            raise ConfigError("task", f"config task {cfg.task!r} does not match {args.task!r}")
    except (FreeboundError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    status, out = run(cfg, args.out, args.jobs)
    print(f"{cfg.task}: status {status}, artifacts in {out}")
    return status


if __name__ == "__main__":
    sys.exit(main())

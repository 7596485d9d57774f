"""Front slope, recursion and semi-wave speeds for the homogeneous logistic benchmark."""

import argparse
import time

from freebound.periodic_state import compute_periodic_state
from freebound.reaction import ReactionSpec
from freebound.semiwave import SemiWaveProblem, shoot_semiwave_speed
from freebound.speed_lab import direct_speed
from freebound.weinberger import estimate_c_plus


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--mu", type=float, default=1.0)
    ap.add_argument("--bisect-tol", type=float, default=0.02)
    args = ap.parse_args()

    spec = ReactionSpec.homogeneous(1.0, 1.0, mu=args.mu)
    ps = compute_periodic_state(spec, 16, 16)
    rows = []
    for name, fn in (
        ("semi-wave", lambda: shoot_semiwave_speed(SemiWaveProblem.logistic(mu=args.mu))),
        ("front slope", lambda: direct_speed(spec, ps)[0]),
        ("recursion", lambda: estimate_c_plus(spec, ps, bisect_tol=args.bisect_tol)),
    ):
        t0 = time.perf_counter()
        est = fn()
        rows.append((name, est.value, time.perf_counter() - t0))
    ref = rows[0][1]
    print(f"{'method':<12} {'speed':>9} {'vs semi-wave':>13} {'seconds':>8}")
    for name, v, s in rows:
        print(f"{name:<12} {v:9.5f} {abs(v - ref) / ref:13.3%} {s:8.1f}")


if __name__ == "__main__":
    main()

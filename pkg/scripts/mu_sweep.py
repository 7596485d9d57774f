"""Rightward speed against mu, next to the Cauchy level-set speed."""

import argparse

from freebound.periodic_state import compute_periodic_state
from freebound.reaction import PeriodicCoefficient, ReactionSpec
from freebound.speed_lab import mu_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--mu", type=float, nargs="+", default=[0.5, 1.0, 2.0, 5.0, 20.0])
    ap.add_argument("--amplitude", type=float, default=0.0, help="amplitude of cos(2 pi x) in a")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    a = PeriodicCoefficient(1.0, ((0, 1, args.amplitude, 0.0),) if args.amplitude else ())
    spec = ReactionSpec.logistic(a, 1.0)
    ps = compute_periodic_state(spec, 32, 32)
    rep = mu_sweep(spec, args.mu, "FrontSlope", ps, jobs=args.jobs)
    cbar = rep["cauchy_reference"]["value"]
    print(f"Cauchy level-set speed {cbar:.4f}")
    for r in rep["rows"]:
        print(f"mu {r['mu']:8.3g}  speed {r['speed']:.4f}  gap {(cbar - r['speed']) / cbar:7.2%}")
    print(f"monotone {rep['monotone']}, below Cauchy {rep['below_cauchy']}, "
          f"top gap {rep['top_relative_gap']:.1%}")


if __name__ == "__main__":
    main()

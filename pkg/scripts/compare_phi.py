"""Recursion probes with the tau ramp and the clipped ramp side by side."""

import argparse

from freebound.periodic_state import compute_periodic_state
from freebound.reaction import ReactionSpec
from freebound.weinberger import compact_phi, default_phi, estimate_c_plus


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--bisect-tol", type=float, default=0.05)
    args = ap.parse_args()

    spec = ReactionSpec.homogeneous(1.0, 1.0)
    ps = compute_periodic_state(spec, 16, 16)
    runs = {name: estimate_c_plus(spec, ps, phi(ps), bisect_tol=args.bisect_tol)
            for name, phi in (("tau", default_phi), ("clip", compact_phi))}
    probes = {name: {p["c"]: p["verdict"] for p in est.meta["probes"]} for name, est in runs.items()}
    print(f"{'c':>9} {'tau':>13} {'clip':>13}")
    for c in sorted(set(probes["tau"]) | set(probes["clip"])):
        print(f"{c:9.5f} {probes['tau'].get(c, '-'):>13} {probes['clip'].get(c, '-'):>13}")
    for name, est in runs.items():
        print(f"{name}: bracket {est.meta['bracket']}")


if __name__ == "__main__":
    main()

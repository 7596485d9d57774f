"""Truncated-operator subsolution chain at half the lower recursion bracket end."""

import argparse
import json

from freebound.periodic_state import compute_periodic_state
from freebound.reaction import ReactionSpec
from freebound.weinberger import ChainNumerics, estimate_c_plus, verify_subsolution_chain


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--B", type=float, default=8.0)
    ap.add_argument("--m", type=int, default=6)
    ap.add_argument("--fraction", type=float, default=0.5)
    args = ap.parse_args()

    spec = ReactionSpec.homogeneous(1.0, 1.0)
    ps = compute_periodic_state(spec, 16, 16)
    est = estimate_c_plus(spec, ps, bisect_tol=0.05)
    c = args.fraction * est.meta["bracket"][0]
    rep = verify_subsolution_chain(spec, ps, args.B, args.m, c, c, numerics=ChainNumerics())
    print(f"c = {c:.4f} (bracket {est.meta['bracket']})")
    for key in ("plateau", "w_recursion", "subsolution"):
        part = {k: v for k, v in rep[key].items() if not isinstance(v, list)}
        print(key, json.dumps(part))
    print("pass" if rep["pass"] else "FAIL", f"({rep['solves']} truncated solves)")


if __name__ == "__main__":
    main()

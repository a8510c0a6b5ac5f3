"""Thread one flux quantum through a plaquette and map the density change."""

import argparse
from fractions import Fraction

import numpy as np

from fqhcavity.experiments import System, run_flux_insertion
from fqhcavity.lattice import LatticeSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("durations", nargs="*", type=float, default=[50, 100, 200])
    ap.add_argument("--size", type=int, nargs=2, default=[6, 6])
    ap.add_argument("--boundary", default="open")
    ap.add_argument("--alpha", default="1/4")
    ap.add_argument("--N", type=int, default=2)
    ap.add_argument("--plaquette", type=int, nargs=2, default=[2, 2])
    ap.add_argument("--orientation", choices=["quasihole", "parallel", "antiparallel"], default="quasihole")
    ap.add_argument("--dt", type=float, default=0.02)
    args = ap.parse_args()
    system = System(LatticeSpec(*args.size, args.boundary), Fraction(args.alpha), args.N)
    res = run_flux_insertion(args.durations, system, tuple(args.plaquette), args.orientation, dt=args.dt)
    print(f"region sites {res['region_sites']}  solenoid sign {res['solenoid_sign']:+.0f}")
    for r in res["rows"]:
        print(f"T = {r['T']:6g}/t  depletion {r['depletion_region']:.4f}  round trip {r['round_trip_fidelity']:.6f}")
    dn = np.array(res["rows"][-1]["depletion_map"]).reshape(args.size[1], args.size[0])
    print("depletion n_before - n_after (rows q = Ly-1 .. 0):")
    for row in dn[::-1]:
        print(" ".join(f"{x:+.3f}" for x in row))


if __name__ == "__main__":
    main()

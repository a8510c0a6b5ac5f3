"""Cavity-model fidelity while delta/J = J/omega = 10 s is widened."""

import argparse

from fqhcavity.experiments import run_convergence


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("scales", nargs="*", type=float, default=[1, 2, 4, 8])
    args = ap.parse_args()
    res = run_convergence(args.scales)
    print("delta/J  projector  photon-free")
    for r in res["rows"]:
        print(f"{r['delta_over_J']:7g}  {r['projector']:.6f}   {r['photon_free_weight']:.6f}")
    print(f"hard-core limit {res['ideal_projector']:.6f}; monotone {res['monotone']}")


if __name__ == "__main__":
    main()

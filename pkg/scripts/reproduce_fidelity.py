"""Laughlin fidelities of the hard-core and cavity ground manifolds on the 4x4 torus."""

import argparse
import json

from fqhcavity.experiments import DEFAULT_CAVITY, run_cavity_fidelity, run_ideal_fidelity


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", action="store_true", help="print the full result dictionaries")
    args = ap.parse_args()

    ideal, _ = run_ideal_fidelity(seed=args.seed)
    cavity, _ = run_cavity_fidelity(params=DEFAULT_CAVITY, seed=args.seed)
    if args.json:
        print(json.dumps({"hardcore": ideal, "cavity": cavity}, indent=2, default=str))
        return
    for name, res in (("hard-core", ideal), ("cavity", cavity)):
        f = res["fidelity"]
        print(f"{name:9s} dim {res['dimension']:5d}  projector {f['projector']:.6f}  best sector {f['best_sector']:.6f}")
    print(f"cavity photon-free weight {min(cavity['photon_free_weight']):.5f}")


if __name__ == "__main__":
    main()

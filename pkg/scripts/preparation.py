"""Adiabatic preparation from the pinned product state for a ladder of ramp times."""

import argparse

from fqhcavity.experiments import run_preparation


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("durations", nargs="*", type=float, default=[25, 50, 100, 200, 400])
    ap.add_argument("--eps0", type=float, default=1.0, help="pinning during the drive ramp, units of t")
    ap.add_argument("--dt", type=float, default=0.01)
    ap.add_argument("--shape", choices=["linear", "smoothstep"], default="smoothstep")
    args = ap.parse_args()
    res, _ = run_preparation(args.durations, eps0=args.eps0, dt=args.dt, shape=args.shape)
    print(f"static overlap {res['static_overlap']:.5f}")
    for r in res["rows"]:
        print(f"T = {r['T']:6g}/t  fidelity {r['fidelity']:.8f}  norm drift {r['max_norm_drift']:.1e}")


if __name__ == "__main__":
    main()

"""Energy gap over an eps grid, plus eps_BP and eps*, for one (dv, dc, m)."""

import argparse
import csv
import sys

import numpy as np

from nbsc.de import DeConfig, EnsembleParams, bp_threshold_uncoupled
from nbsc.potential import construct_D, energy_gap, potential_threshold


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dv", type=int, default=3)
    ap.add_argument("--dc", type=int, default=6)
    ap.add_argument("--m", type=int, default=2)
    ap.add_argument("--lo", type=float, default=0.40)
    ap.add_argument("--hi", type=float, default=0.55)
    ap.add_argument("--n", type=int, default=31)
    args = ap.parse_args(argv)

    params = EnsembleParams(args.dv, args.dc, args.m)
    cfg = DeConfig()
    D = construct_D(params)
    eps_bp = bp_threshold_uncoupled(params, cfg)
    eps_star = potential_threshold(D.entries, params, cfg, eps_bp=eps_bp)
    print(f"# D ({D.method}) =\n# " + str(D.entries).replace("\n", "\n# "), file=sys.stderr)
    print(f"# eps_BP = {eps_bp:.6f}, eps* = {eps_star:.6f}", file=sys.stderr)

    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["eps", "delta_E", "n_fixed_points"])
    for eps in np.linspace(args.lo, args.hi, args.n):
        rep = energy_gap(float(eps), D.entries, params, cfg)
        w.writerow([f"{eps:.6g}", f"{rep.delta_E:.10g}", len(rep.fixed_points)])


if __name__ == "__main__":
    main()

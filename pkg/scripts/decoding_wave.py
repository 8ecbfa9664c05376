"""Dump a coupled DE run as a (iteration, position) profile for plotting the decoding wave.

    python scripts/decoding_wave.py --m 2 --eps 0.48 --L 60 --every 20 > wave.csv
"""

import argparse
import csv
import sys

from nbsc.coupled import coupled_fixed_point, profile_rows
from nbsc.de import EnsembleParams


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dv", type=int, default=3)
    ap.add_argument("--dc", type=int, default=6)
    ap.add_argument("--m", type=int, default=1)
    ap.add_argument("--eps", type=float, default=0.47)
    ap.add_argument("--L", type=int, default=50)
    ap.add_argument("--w", type=int, default=3)
    ap.add_argument("--every", type=int, default=10)
    args = ap.parse_args(argv)

    params = EnsembleParams(args.dv, args.dc, args.m)
    res = coupled_fixed_point(args.eps, params, args.L, args.w, record_profile=True,
                              profile_every=args.every)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["iteration", "position", "max_tail"] + [f"x_{i}" for i in range(1, args.m + 1)])
    for row in profile_rows(res):
        w.writerow([row[0], row[1]] + [f"{v:.10g}" for v in row[2:]])
    print(f"# decoded={res.decoded} iterations={res.iterations}", file=sys.stderr)


if __name__ == "__main__":
    main()

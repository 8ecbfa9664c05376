"""Recompute the coupled BP threshold table next to the reference values.

    python scripts/reproduce_table1.py --m-list 1,3 --out table1.csv

m = 5 and m = 8 take a long time per cell; add them with --m-list 1,3,5,8.
"""

import argparse
import csv
import sys
import time

from nbsc.cli import REFERENCE_BP, fmt, table1_rows
from nbsc.de import DeConfig


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m-list", default="1,3")
    ap.add_argument("--L", type=int, default=100)
    ap.add_argument("--w", type=int, default=3)
    ap.add_argument("--tol", type=float, default=1e-5)
    ap.add_argument("--timeout", type=float, default=None, help="seconds per cell")
    ap.add_argument("--out", default="-")
    args = ap.parse_args(argv)

    m_list = [int(t) for t in args.m_list.split(",")]
    ensembles = sorted(REFERENCE_BP)
    t0 = time.time()
    header, rows = table1_rows(ensembles, m_list, args.L, args.w, DeConfig(bisect_tol=args.tol),
                               timeout=args.timeout)
    header = header + [f"ref_m{m}" for m in m_list]
    rows = [r + [REFERENCE_BP[(r[1], r[2])][m] for m in m_list] for r in rows]

    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    w.writerows([fmt(v) for v in r] for r in rows)
    if fh is not sys.stdout:
        fh.close()
    print(f"# {len(rows) * len(m_list)} cells in {time.time() - t0:.0f} s", file=sys.stderr)


if __name__ == "__main__":
    main()

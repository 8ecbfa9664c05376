"""Command-line front end.

Exit codes: 0 success, 2 argument error, 3 coefficient oracle mismatch,
4 a required computation did not converge (or D could not be built).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import __version__
from .coupled import (DeadlineExceeded, bp_threshold_coupled, coupled_fixed_point,
                      profile_rows)
from .de import DeConfig, EnsembleParams, bp_threshold_uncoupled, de_fixed_point
from .errors import DConstructionError, UndefinedBoundError, UnsupportedScaleError
from .potential import construct_D, energy_gap, k_bound, potential_threshold
from .subspaces import ORACLE_MAX_M, build_coeff_tensors, oracle_check

log = logging.getLogger("nbsc")

EXIT_OK, EXIT_ARGS, EXIT_ORACLE, EXIT_NONCONV = 0, 2, 3, 4
SLOW_M = 5

# Reference BP thresholds of the coupled ensembles (L -> infinity) and MAP
# thresholds, keyed by (dv, dc) then m.
REFERENCE_BP = {
    (3, 6): {1: 0.4880, 3: 0.4978, 5: 0.4995, 8: 0.4998},
    (3, 9): {1: 0.3196, 3: 0.3307, 5: 0.3328, 8: 0.3331},
    (3, 12): {1: 0.2372, 3: 0.2476, 5: 0.2495, 8: 0.2497},
    (3, 15): {1: 0.1886, 3: 0.1978, 5: 0.1995, 8: 0.1996},
}
REFERENCE_MAP = {(3, 6): 0.4999, (3, 9): 0.3332, (3, 12): 0.2499, (3, 15): 0.1999}


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


@dataclass
class RunManifest:
    tool_version: str
    command: str
    params: dict
    tolerances: dict
    seed: int
    wall_clock_s: float = 0.0
    started_at: str = ""
    output_sha256: str = ""
    extra: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def fmt(v):
    """10 significant digits; inf/nan spelled out."""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return f"{v:.10g}"


def to_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def to_json_text(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, (np.bool_, bool)):
        return bool(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (float, np.floating)):
        o = float(o)
        return "inf" if math.isinf(o) and o > 0 else o
    return o


# -- argument handling ---------------------------------------------------------

def read_config(path):
    """key=value lines; '#' starts a comment. Keys use flag names (dashes or underscores)."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{n}: expected key=value", EXIT_ARGS)
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _cfg(args):
    return DeConfig(max_iters=args.max_iters, fp_tol=args.fp_tol,
                    zero_tol=args.zero_tol, bisect_tol=args.tol)


def _params(args):
    if args.dv is None or args.dc is None or args.m is None:
        raise CliError("--dv, --dc and --m are required", EXIT_ARGS)
    return EnsembleParams(args.dv, args.dc, args.m)


def _float_list(text):
    text = text.strip()
    if ":" in text:
        a, b, step = (float(t) for t in text.split(":"))
        n = int(round((b - a) / step)) + 1
        return [round(a + i * step, 12) for i in range(n)]
    return [float(t) for t in text.replace(",", " ").split()]


def _ensembles(text):
    out = []
    for tok in text.replace(";", " ").split():
        dv, dc = (int(t) for t in tok.split(","))
        out.append((dv, dc))
    return out


def _require_slow(args, m):
    if m >= SLOW_M and not args.allow_slow:
        raise CliError(f"m={m} is long-running; pass --allow-slow", EXIT_ARGS)


# -- subcommands -----------------------------------------------------------------

def cmd_coeffs(args):
    if args.m is None:
        raise CliError("--m is required", EXIT_ARGS)
    t = build_coeff_tensors(args.m)
    data = t.to_json()
    if args.skip_oracle:
        data["oracle"] = {"checked": False}
    else:
        if args.m > ORACLE_MAX_M:
            raise CliError(f"oracle check is capped at m <= {ORACLE_MAX_M}; use --skip-oracle",
                           EXIT_ARGS)
        bad = oracle_check(args.m)
        data["oracle"] = {"checked": True, "mismatches": len(bad)}
        if bad:
            return to_json_text(data), EXIT_ORACLE
    if args.format == "csv":
        rows = [(i, j, k, t.V[i, j, k], t.C[i, j, k])
                for i in range(args.m + 1) for j in range(args.m + 1) for k in range(args.m + 1)]
        return to_csv(["i", "j", "k", "V", "C"], rows), EXIT_OK
    return to_json_text(data), EXIT_OK


def cmd_de_run(args):
    params, cfg = _params(args), _cfg(args)
    if args.eps is None:
        raise CliError("--eps is required", EXIT_ARGS)
    eps = args.eps[0]
    if args.L is not None:
        res = coupled_fixed_point(eps, params, args.L, args.w, cfg, record_profile=True,
                                  profile_every=args.profile_every)
        code = EXIT_OK if res.converged else EXIT_NONCONV
        if args.format == "csv":
            header = ["iteration", "position", "max_tail"] + [f"x_{i}" for i in range(1, params.m + 1)]
            return to_csv(header, profile_rows(res)), code
        return to_json_text({"eps": eps, "decoded": res.decoded, "converged": res.converged,
                             "iterations": res.iterations, "X": res.state.X}), code
    res = de_fixed_point(eps, params, cfg, record=args.format == "csv")
    code = EXIT_OK if res.converged else EXIT_NONCONV
    if args.format == "csv":
        header = ["iteration"] + [f"x_{i}" for i in range(1, params.m + 1)]
        return to_csv(header, ((it, *x) for it, x in enumerate(res.history))), code
    return to_json_text({"eps": eps, "decoded": res.decoded, "converged": res.converged,
                         "iterations": res.iterations, "x": res.x}), code


def cmd_threshold(args):
    params, cfg = _params(args), _cfg(args)
    eps = bp_threshold_uncoupled(params, cfg)
    row = {"dv": params.dv, "dc": params.dc, "m": params.m, "eps_bp": eps}
    if args.format == "csv":
        return to_csv(list(row), [list(row.values())]), EXIT_OK
    return to_json_text(row), EXIT_OK


def cmd_threshold_coupled(args):
    params, cfg = _params(args), _cfg(args)
    _require_slow(args, params.m)
    eps = bp_threshold_coupled(params, args.L or 100, args.w, cfg)
    row = {"dv": params.dv, "dc": params.dc, "m": params.m, "L": args.L or 100, "w": args.w,
           "eps_bp_coupled": eps}
    if args.format == "csv":
        return to_csv(list(row), [list(row.values())]), EXIT_OK
    return to_json_text(row), EXIT_OK


def _gap_point(job):
    eps, params, cfg = job
    D = construct_D(params)
    rep = energy_gap(eps, D.entries, params, cfg)
    return rep


def _map(fn, jobs, n_workers):
    if n_workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_workers) as ex:
        return list(ex.map(fn, jobs))  # map keeps submission order


def cmd_potential(args):
    params, cfg = _params(args), _cfg(args)
    _require_slow(args, params.m)
    if args.eps is None:
        raise CliError("--eps is required (list or start:stop:step)", EXIT_ARGS)
    D = construct_D(params)
    eps_bp = bp_threshold_uncoupled(params, cfg)
    eps_star = potential_threshold(D.entries, params, cfg, eps_bp=eps_bp)
    reps = _map(_gap_point, [(e, params, cfg) for e in args.eps], args.jobs)
    if args.format == "csv":
        rows = [(r.eps, r.delta_E, r.U_values[0] if r.U_values else None, eps_star, eps_bp)
                for r in reps]
        return to_csv(["eps", "delta_E", "U_at_fp", "eps_star", "eps_bp"], rows), EXIT_OK
    out = {"dv": params.dv, "dc": params.dc, "m": params.m, "D": D.entries,
           "eps_star": eps_star, "eps_bp": eps_bp, "reports": []}
    for r in reps:
        r.eps_star, r.eps_bp = eps_star, eps_bp
        out["reports"].append(r.to_json())
    return to_json_text(out), EXIT_OK


def cmd_potential_threshold(args):
    params, cfg = _params(args), _cfg(args)
    _require_slow(args, params.m)
    D = construct_D(params)
    eps_bp = bp_threshold_uncoupled(params, cfg)
    eps_star = potential_threshold(D.entries, params, cfg, eps_bp=eps_bp)
    row = {"dv": params.dv, "dc": params.dc, "m": params.m, "eps_bp": eps_bp,
           "eps_star": eps_star}
    if args.format == "csv":
        return to_csv(list(row), [list(row.values())]), EXIT_OK
    row["D"] = D.entries
    row["D_method"] = D.method
    return to_json_text(row), EXIT_OK


def _table_cell(job):
    dv, dc, m, L, w, cfg, timeout = job
    deadline = None if timeout is None else time.monotonic() + timeout
    try:
        return bp_threshold_coupled(EnsembleParams(dv, dc, m), L, w, cfg, deadline=deadline)
    except DeadlineExceeded:
        return "TIMEOUT"


def table1_rows(ensembles, m_list, L, w, cfg, timeout=None, jobs=1):
    cells = [(dv, dc, m, L, w, cfg, timeout) for dv, dc in ensembles for m in m_list]
    values = iter(_map(_table_cell, cells, jobs))
    rows = []
    m_last = m_list[-1]
    for dv, dc in ensembles:
        vals = [next(values) for _ in m_list]
        last = vals[-1]
        gap = dv / dc - last if not isinstance(last, str) else "TIMEOUT"
        rows.append([f"({dv},{dc})", dv, dc, 1 - dv / dc, *vals,
                     REFERENCE_MAP.get((dv, dc)), gap])
    header = ["ensemble", "dv", "dc", "rate"] + [f"eps_bp_m{m}" for m in m_list] + \
        ["eps_map_ref", f"shannon_gap_m{m_last}"]
    return header, rows


def cmd_table1(args):
    cfg = _cfg(args)
    m_list = [int(v) for v in _float_list(args.m_list)] if args.m is None else [args.m]
    if any(m >= SLOW_M for m in m_list) and not args.allow_slow:
        raise CliError("m >= 5 columns are long-running; pass --allow-slow", EXIT_ARGS)
    header, rows = table1_rows(_ensembles(args.ensembles), m_list, args.L or 100, args.w, cfg,
                               args.timeout, args.jobs)
    if args.format == "csv":
        return to_csv(header, rows), EXIT_OK
    return to_json_text([dict(zip(header, r)) for r in rows]), EXIT_OK


def cmd_k_bound(args):
    params, cfg = _params(args), _cfg(args)
    if args.eps is None:
        raise CliError("--eps is required", EXIT_ARGS)
    D = construct_D(params)
    try:
        rep = k_bound(args.eps[0], D.entries, params, cfg, seed=args.seed)
    except UndefinedBoundError as e:
        raise CliError(str(e), EXIT_ARGS) from e
    if args.format == "csv":
        d = rep.to_json()
        return to_csv(list(d), [list(d.values())]), EXIT_OK
    return to_json_text(rep.to_json()), EXIT_OK


COMMANDS = {
    "coeffs": cmd_coeffs,
    "de-run": cmd_de_run,
    "threshold": cmd_threshold,
    "threshold-coupled": cmd_threshold_coupled,
    "potential": cmd_potential,
    "potential-threshold": cmd_potential_threshold,
    "table1": cmd_table1,
    "k-bound": cmd_k_bound,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file with defaults; flags override it")
    common.add_argument("--dv", type=int)
    common.add_argument("--dc", type=int)
    common.add_argument("--m", type=int)
    common.add_argument("--L", type=int)
    common.add_argument("--w", type=int, default=3)
    common.add_argument("--eps", type=_float_list, help="value, list 'a,b,c' or 'start:stop:step'")
    common.add_argument("--tol", type=float, default=1e-5, help="bisection tolerance")
    common.add_argument("--fp-tol", type=float, default=1e-12)
    common.add_argument("--zero-tol", type=float, default=1e-9)
    common.add_argument("--max-iters", type=int, default=50000)
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="write output here (plus <out>.manifest.json)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--allow-slow", action="store_true", help="permit m >= 5 runs")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="nbsc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("coeffs", parents=[common], help="dump V/C tensors and check them") \
        .add_argument("--skip-oracle", action="store_true")
    p = sub.add_parser("de-run", parents=[common], help="run (coupled when --L is given) DE")
    p.add_argument("--profile-every", type=int, default=1)
    sub.add_parser("threshold", parents=[common], help="uncoupled BP threshold")
    sub.add_parser("threshold-coupled", parents=[common], help="coupled BP threshold")
    sub.add_parser("potential", parents=[common], help="energy-gap sweep over --eps")
    sub.add_parser("potential-threshold", parents=[common], help="potential threshold")
    p = sub.add_parser("table1", parents=[common], help="coupled BP threshold table")
    p.add_argument("--ensembles", default="3,6 3,9 3,12 3,15")
    p.add_argument("--m-list", default="1,3")
    p.add_argument("--timeout", type=float, default=None, help="seconds per cell")
    sub.add_parser("k-bound", parents=[common], help="Hessian bound and minimal coupling width")
    parser.commands = sub.choices
    return parser


_CONFIG_TYPES = {"dv": int, "dc": int, "m": int, "L": int, "w": int, "jobs": int, "seed": int,
                 "max_iters": int, "tol": float, "fp_tol": float, "zero_tol": float,
                 "timeout": float, "eps": _float_list, "format": str, "ensembles": str,
                 "m_list": str, "profile_every": int}


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            conf = read_config(args.config)
        except OSError as e:
            raise CliError(f"cannot read config: {e}", EXIT_ARGS) from e
        defaults = {}
        for k, v in conf.items():
            key = "L" if k == "l" else k
            if key not in _CONFIG_TYPES:
                raise CliError(f"unknown config key {k!r}", EXIT_ARGS)
            defaults[key] = _CONFIG_TYPES[key](v)
        # re-parse so explicit flags win over the file
        parser.commands[args.command].set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def write_outputs(args, text, started, t0):
    if args.out:
        out = Path(args.out)
        out.write_text(text)
        manifest = RunManifest(
            tool_version=__version__,
            command=args.command,
            params={k: v for k, v in vars(args).items()
                    if k not in ("out", "verbose", "config", "command")},
            tolerances={"bisect_tol": args.tol, "fp_tol": args.fp_tol,
                        "zero_tol": args.zero_tol, "max_iters": args.max_iters},
            seed=args.seed,
            wall_clock_s=round(time.time() - t0, 3),
            started_at=started,
            output_sha256=hashlib.sha256(text.encode()).hexdigest(),
        )
        Path(str(out) + ".manifest.json").write_text(manifest.to_json() + "\n")
    else:
        sys.stdout.write(text)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse_args(argv)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except SystemExit as e:  # argparse
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    t0 = time.time()
    try:
        text, code = COMMANDS[args.command](args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except (ValueError, UnsupportedScaleError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ARGS
    except DConstructionError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NONCONV
    write_outputs(args, text, started, t0)
    if code == EXIT_NONCONV:
        print("warning: iteration did not converge within --max-iters", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())

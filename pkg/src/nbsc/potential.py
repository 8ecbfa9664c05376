"""Potential functions for the uncoupled and coupled systems.

A symmetric positive D is chosen so that ``f(y; eps) D`` and ``g(x) D`` are
gradient fields, i.e. ``D F_d`` and ``D G_d`` are symmetric matrices everywhere.
The scalar antiderivatives F and G are then line integrals from the origin, and

    U(x; eps) = g(x) D x^T - G(x) - F(g(x); eps)

has the DE fixed points as its stationary points.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.optimize import linprog

from .coupled import CouplingMatrix
from .de import (DeConfig, EnsembleParams, channel_ccdf, de_fixed_point,
                 bisect_threshold, bp_threshold_uncoupled, f_ccdf, f_jacobian,
                 g_ccdf, g_jacobian, is_ccdf)
from .errors import DConstructionError, UndefinedBoundError
from . import poly

log = logging.getLogger(__name__)

EPS_GRID = tuple(Fraction(k, 10) for k in range(1, 10))
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)
GL_T = 0.5 * (_GL_NODES + 1.0)
GL_W = 0.5 * _GL_WEIGHTS


@dataclass(frozen=True)
class DMatrix:
    m: int
    entries: np.ndarray
    exact: tuple | None = None  # rational entries when built from exact polynomials
    nullspace: np.ndarray | None = None  # basis of the symmetric solutions, one per row
    method: str = "exact"

    def __post_init__(self):
        D = np.asarray(self.entries, dtype=float)
        if D.shape != (self.m, self.m):
            raise ValueError(f"D must be {self.m}x{self.m}")
        if not np.allclose(D, D.T, rtol=0, atol=1e-14):
            raise ValueError("D must be symmetric")
        if np.any(D <= 0):
            raise ValueError("D must have positive entries")
        if abs(np.linalg.det(D / np.abs(D).max())) <= 1e-10:
            raise ValueError("D must be nonsingular")


def _pairs(m):
    return [(a, b) for a in range(m) for b in range(a, m)]


def _unknown_index(m):
    idx = {}
    for n, (a, b) in enumerate(_pairs(m)):
        idx[a, b] = idx[b, a] = n
    return idx


def _symmetry_rows_numeric(J, idx, n_unknowns):
    """Rows forcing (D J) symmetric, J[i, n] = d h_i / d z_n; batched over J[0]."""
    m = J.shape[-1]
    rows = []
    for s in range(m):
        for n in range(s + 1, m):
            row = np.zeros(J.shape[:-2] + (n_unknowns,))
            for j in range(m):
                row[..., idx[j, s]] += J[..., j, n]
                row[..., idx[j, n]] -= J[..., j, s]
            rows.append(row.reshape(-1, n_unknowns))
    return np.concatenate(rows) if rows else np.zeros((0, n_unknowns))


def _symmetry_rows_exact(components, idx, n_unknowns):
    """Coefficient-matching rows forcing sum_j D[j,s] dh_j/dz_n = sum_j D[j,n] dh_j/dz_s."""
    m = len(components)
    rows = []
    for s in range(m):
        for n in range(s + 1, m):
            acc = {}
            for j, h in enumerate(components):
                for mono, c in h.derivative(n).terms.items():
                    acc.setdefault(mono, {})
                    acc[mono][idx[j, s]] = acc[mono].get(idx[j, s], 0) + c
                for mono, c in h.derivative(s).terms.items():
                    acc.setdefault(mono, {})
                    acc[mono][idx[j, n]] = acc[mono].get(idx[j, n], 0) - c
            for coeffs in acc.values():
                row = [Fraction(0)] * n_unknowns
                for u, c in coeffs.items():
                    row[u] += c
                if any(row):
                    rows.append(row)
    return rows


def rational_nullspace(rows, ncols):
    """Basis of {u : R u = 0} over the rationals (list of Fraction lists)."""
    pivots = {}  # col -> reduced row with 1 at col
    for r in rows:
        r = list(r)
        for col, prow in pivots.items():
            if r[col] != 0:
                f = r[col]
                r = [a - f * b for a, b in zip(r, prow)]
        lead = next((c for c, v in enumerate(r) if v != 0), None)
        if lead is None:
            continue
        r = [v / r[lead] for v in r]
        for col in list(pivots):
            prow = pivots[col]
            if prow[lead] != 0:
                f = prow[lead]
                pivots[col] = [a - f * b for a, b in zip(prow, r)]
        pivots[lead] = r
        if len(pivots) == ncols:
            break
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fc in free:
        u = [Fraction(0)] * ncols
        u[fc] = Fraction(1)
        for col, prow in pivots.items():
            u[col] = -prow[fc]
        basis.append(u)
    return basis


def numeric_nullspace(R, rtol=1e-9):
    if R.shape[0] == 0:
        return np.eye(R.shape[1])
    scale = np.abs(R).max(axis=1, keepdims=True)
    R = R / np.where(scale > 0, scale, 1.0)
    _, s, vt = np.linalg.svd(R, full_matrices=True)
    rank = int(np.sum(s > rtol * s[0])) if s.size else 0
    return vt[rank:]


def _positive_combination(basis):
    """Nonnegative-weight search for a combination with all entries > 0.

    Returns the combination normalised so its largest entry is 1, or None.
    """
    basis = np.atleast_2d(basis)
    k, n = basis.shape
    if k == 0:
        return None
    if k == 1:
        v = basis[0] * np.sign(basis[0].sum() or 1.0)
        return v / v.max() if np.all(v > 0) else None
    # maximise t subject to basis^T c >= t, basis^T c <= 1
    c_obj = np.zeros(k + 1)
    c_obj[-1] = -1.0
    A_ub = np.vstack([np.hstack([-basis.T, np.ones((n, 1))]),
                      np.hstack([basis.T, np.zeros((n, 1))])])
    b_ub = np.concatenate([np.zeros(n), np.ones(n)])
    res = linprog(c_obj, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * k + [(None, 1.0)])
    if not res.success or res.x[-1] <= 1e-12:
        return None
    v = basis.T @ res.x[:k]
    return v / v.max()


def _to_matrix(vec, m):
    D = np.zeros((m, m))
    for n, (a, b) in enumerate(_pairs(m)):
        D[a, b] = D[b, a] = vec[n]
    return D


def _exact_rows(params, diagonal):
    m = params.m
    idx = _unknown_index(m)
    n_unknowns = len(_pairs(m))
    f_polys = poly.expand_f(params)
    g_polys = poly.expand_g(params)
    rows = _symmetry_rows_exact(g_polys, idx, n_unknowns)
    for eps in EPS_GRID:
        rows += _symmetry_rows_exact([q.at_eps(eps) for q in f_polys], idx, n_unknowns)
    if diagonal:
        keep = [idx[a, a] for a in range(m)]
        rows = [[r[c] for c in keep] for r in rows]
    return rows


def _sample_ccdf(rng, n, m, upper=None):
    x = np.sort(rng.random((n, m)), axis=1)[:, ::-1]
    if upper is not None:
        x = x * upper
    return x


def _numeric_rows(params, diagonal, seed, n_points=24):
    m = params.m
    idx = _unknown_index(m)
    n_unknowns = len(_pairs(m))
    rng = np.random.default_rng(seed)
    pts = _sample_ccdf(rng, n_points, m)
    blocks = [_symmetry_rows_numeric(g_jacobian(pts, params), idx, n_unknowns)]
    for eps in EPS_GRID:
        blocks.append(_symmetry_rows_numeric(f_jacobian(pts, float(eps), params), idx, n_unknowns))
    R = np.concatenate(blocks)
    if diagonal:
        R = R[:, [idx[a, a] for a in range(m)]]
    return R


def solution_space(params: EnsembleParams, diagonal=False, method="auto", seed=0):
    """Basis (rows) of the symmetric (or diagonal) D solving the integrability system."""
    if method == "auto":
        method = "exact" if params.m <= poly.MAX_M and params.dc <= poly.MAX_DC \
            and params.dv <= poly.MAX_DV else "numeric"
    m = params.m
    if method == "exact":
        n_unknowns = m if diagonal else len(_pairs(m))
        exact = rational_nullspace(_exact_rows(params, diagonal), n_unknowns)
        basis = np.array([[float(v) for v in u] for u in exact]).reshape(len(exact), n_unknowns)
        return basis, exact, method
    R = _numeric_rows(params, diagonal, seed)
    return numeric_nullspace(R), None, method


def symmetry_residual(D, params, n_points=20, seed=1, eps_values=None):
    """Largest relative asymmetry of D F_d and D G_d at random points."""
    rng = np.random.default_rng(seed)
    pts = _sample_ccdf(rng, n_points, params.m)
    eps_values = rng.random(20) if eps_values is None else eps_values
    worst = 0.0
    mats = [D @ g_jacobian(pts, params)]
    mats += [D @ f_jacobian(pts, float(e), params) for e in eps_values]
    for M in mats:
        scale = max(np.abs(M).max(), 1e-300)
        worst = max(worst, np.abs(M - np.swapaxes(M, -1, -2)).max() / scale)
    return worst


@lru_cache(maxsize=None)
def construct_D(params: EnsembleParams, method="auto") -> DMatrix:
    """Positive symmetric D making f D and g D gradient fields.

    Raises DConstructionError (carrying the nullspace basis) if no positive
    solution exists or the result fails re-validation.
    """
    basis, exact, used = solution_space(params, method=method)
    vec = _positive_combination(basis)
    if vec is None:
        raise DConstructionError(
            f"no positive symmetric D for {params} (solution space dim {len(basis)})",
            nullspace=basis)
    m = params.m
    exact_entries = None
    if exact is not None and len(exact) == 1:
        u = exact[0]
        top = max(u, key=abs)
        u = [v / top for v in u]
        exact_entries = tuple(tuple(u[_unknown_index(m)[a, b]] for b in range(m)) for a in range(m))
        vec = np.array([float(v) for v in u])
    D = DMatrix(m, _to_matrix(vec, m), exact_entries, basis, used)
    res = symmetry_residual(D.entries, params)
    if res > 1e-9:
        raise DConstructionError(f"D fails re-validation (asymmetry {res:.2e})", nullspace=basis)
    gap = path_independence_gap(D.entries, params, n_points=10)
    if gap > 1e-8:
        raise DConstructionError(f"D fails path independence (gap {gap:.2e})", nullspace=basis)
    return D


def diagonal_D_feasible(params: EnsembleParams, method="auto") -> bool:
    """Whether a diagonal positive D solves the integrability system."""
    basis, _, _ = solution_space(params, diagonal=True, method=method)
    return _positive_combination(basis) is not None


# -- scalar potentials ------------------------------------------------------------

def _as_D(D):
    return D.entries if isinstance(D, DMatrix) else np.asarray(D, dtype=float)


def _line_integral(field, z, D):
    """∫_0^1 field(t z) D z^T dt along the straight segment, batched over z."""
    z = np.asarray(z, dtype=float)
    pts = GL_T[:, None] * z[..., None, :]  # (..., nodes, m)
    vals = field(pts)
    integrand = np.einsum("...ti,ij,...j->...t", vals, D, z)
    return integrand @ GL_W


def scalar_G(x, D, params: EnsembleParams):
    return _line_integral(lambda p: g_ccdf(p, params), x, _as_D(D))


def scalar_F(y, eps, D, params: EnsembleParams):
    return _line_integral(lambda p: f_ccdf(p, eps, params), y, _as_D(D))


def _staircase_integral(field, z, D):
    """Same integral along the axis-parallel path 0 -> z_1 e_1 -> ... -> z."""
    z = np.asarray(z, dtype=float)
    m = z.shape[-1]
    total = np.zeros(z.shape[:-1])
    for s in range(m):
        base = z.copy()
        base[..., s + 1:] = 0.0
        pts = np.repeat(base[..., None, :], GL_T.size, axis=-2)
        pts[..., s] = GL_T * z[..., s, None]
        vals = field(pts)  # (..., nodes, m)
        integrand = (vals @ D[:, s]) * z[..., s, None]
        total = total + integrand @ GL_W
    return total


def staircase_G(x, D, params):
    return _staircase_integral(lambda p: g_ccdf(p, params), x, _as_D(D))


def staircase_F(y, eps, D, params):
    return _staircase_integral(lambda p: f_ccdf(p, eps, params), y, _as_D(D))


def path_independence_gap(D, params, n_points=50, seed=2, eps=0.45):
    """Largest |straight - staircase| over random points for both F and G."""
    D = _as_D(D)
    rng = np.random.default_rng(seed)
    pts = _sample_ccdf(rng, n_points, params.m)
    gap_g = np.abs(scalar_G(pts, D, params) - staircase_G(pts, D, params)).max()
    gap_f = np.abs(scalar_F(pts, eps, D, params) - staircase_F(pts, eps, D, params)).max()
    return float(max(gap_g, gap_f))


# -- potential -------------------------------------------------------------------

def potential_U(x, eps, D, params: EnsembleParams):
    D = _as_D(D)
    x = np.asarray(x, dtype=float)
    g = g_ccdf(x, params)
    return (np.einsum("...i,ij,...j->...", g, D, x)
            - scalar_G(x, D, params) - scalar_F(g, eps, D, params))


def potential_gradient(x, eps, D, params: EnsembleParams):
    """U'(x) = (x - f(g(x); eps)) D G_d(x), as a row vector."""
    D = _as_D(D)
    x = np.asarray(x, dtype=float)
    r = x - f_ccdf(g_ccdf(x, params), eps, params)
    return np.einsum("...i,ij,...jn->...n", r, D, g_jacobian(x, params))


def potential_hessian(x, eps, D, params, h=1e-5):
    """Central differences of the analytic gradient; H[..., i, n]."""
    x = np.asarray(x, dtype=float)
    m = x.shape[-1]
    cols = []
    for n in range(m):
        e = np.zeros(m)
        e[n] = h
        cols.append((potential_gradient(x + e, eps, D, params)
                     - potential_gradient(x - e, eps, D, params)) / (2 * h))
    return np.stack(cols, axis=-1)


@dataclass
class PotentialReport:
    eps: float
    fixed_points: list = field(default_factory=list)
    U_values: list = field(default_factory=list)
    delta_E: float = math.inf
    eps_star: float | None = None
    eps_bp: float | None = None
    grid_min: float | None = None

    def to_json(self):
        d = asdict(self)
        d["fixed_points"] = [list(map(float, p)) for p in self.fixed_points]
        d["U_values"] = [float(u) for u in self.U_values]
        d["delta_E"] = _json_float(self.delta_E)
        if self.grid_min is not None:
            d["grid_min"] = _json_float(self.grid_min)
        return d


def _json_float(v):
    return "inf" if v == math.inf else float(v)


def nonzero_fixed_points(eps, params, cfg=DeConfig(), dedupe_tol=1e-6):
    p = channel_ccdf(eps, params.m)
    found = []
    for t in [1.0] + [k / 10 for k in range(1, 10)]:
        res = de_fixed_point(eps, params, cfg, x0=t * p)
        if res.decoded or not res.converged:
            continue
        if all(np.abs(res.x - q).max() > dedupe_tol for q in found):
            found.append(res.x)
    return found


def _boundary_grid_min(eps, D, params, cfg, n=21):
    """Min of U over grid points of X whose DE does not reach zero (m <= 2)."""
    p = channel_ccdf(eps, params.m)
    axes = [np.linspace(0, p_i, n) for p_i in p]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, params.m)
    best = math.inf
    for x in pts:
        if not x.any() or not is_ccdf(x):
            continue
        if de_fixed_point(eps, params, cfg, x0=x).decoded:
            continue
        best = min(best, float(potential_U(x, eps, D, params)))
    return best


def energy_gap(eps, D, params: EnsembleParams, cfg=DeConfig(), scan_grid=False) -> PotentialReport:
    """Minimum of U over the nonzero DE fixed points; +inf when there are none.

    With ``scan_grid`` (m <= 2) the minimum of U over a coarse grid of X
    outside the basin of zero is also recorded in ``grid_min``. It is a
    diagnostic only: ``delta_E`` always comes from the fixed points.
    """
    fps = nonzero_fixed_points(eps, params, cfg)
    us = [float(potential_U(x, eps, D, params)) for x in fps]
    rep = PotentialReport(eps, fps, us, min(us) if us else math.inf)
    if scan_grid and params.m <= 2 and fps:
        rep.grid_min = _boundary_grid_min(eps, D, params, cfg)
        if rep.grid_min < rep.delta_E - 1e-12:
            log.info("eps=%g: grid minimum %.3e below fixed-point minimum %.3e",
                     eps, rep.grid_min, rep.delta_E)
    return rep


def delta_E(eps, D, params: EnsembleParams, cfg=DeConfig()) -> float:
    return energy_gap(eps, D, params, cfg).delta_E


def potential_threshold(D, params: EnsembleParams, cfg=DeConfig(), eps_bp=None) -> float:
    """Largest eps in (eps_BP, 1] with a nonnegative energy gap."""
    if eps_bp is None:
        eps_bp = bp_threshold_uncoupled(params, cfg)
    return bisect_threshold(lambda e: delta_E(e, D, params, cfg) >= 0, eps_bp, 1.0,
                            cfg.bisect_tol)


def potential_report(eps, D, params, cfg=DeConfig(), with_threshold=True):
    rep = energy_gap(eps, D, params, cfg)
    rep.eps_bp = bp_threshold_uncoupled(params, cfg)
    if with_threshold:
        rep.eps_star = potential_threshold(D, params, cfg, eps_bp=rep.eps_bp)
    return rep


# -- coupled potential -----------------------------------------------------------

def coupled_potential(X, eps, D, params: EnsembleParams, M: CouplingMatrix):
    """Tr(G(X) D X^T) - sum_i G(x_i) - sum_t F((A G(X))_t; eps).

    G is summed over all L+w-1 check-side rows and F over the L variable rows,
    which keeps the stationary points equal to the coupled fixed points.
    """
    D = _as_D(D)
    X = np.asarray(X, dtype=float)
    GX = g_ccdf(X, params)
    return float(np.einsum("ij,jk,ik->", GX, D, X)
                 - scalar_G(X, D, params).sum()
                 - scalar_F(M.A @ GX, eps, D, params).sum())


def coupled_potential_gradient(X, eps, D, params, M: CouplingMatrix):
    D = _as_D(D)
    X = np.asarray(X, dtype=float)
    R = X - M.A.T @ f_ccdf(M.A @ g_ccdf(X, params), eps, params)
    return np.einsum("pi,ij,pjn->pn", R, D, g_jacobian(X, params))


# -- coupling-width bound ----------------------------------------------------------

@dataclass
class KBoundReport:
    eps: float
    K: float
    delta_E: float
    w_min: float
    m: int
    norm: str = "entrywise max |U''_ij| over a grid of X plus random points"

    def to_json(self):
        d = asdict(self)
        d["delta_E"] = _json_float(self.delta_E)
        return d


def hessian_sup(eps, D, params, grid_n=None, n_random=200, seed=0):
    m = params.m
    if grid_n is None:
        grid_n = {1: 401, 2: 41, 3: 13}.get(m, 5)
    p = channel_ccdf(eps, m)
    axes = [np.linspace(0, p_i, grid_n) for p_i in p]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, m)
    rng = np.random.default_rng(seed)
    rand = rng.random((n_random, m)) * p
    pts = np.concatenate([grid, rand])
    H = potential_hessian(pts, eps, D, params)
    return float(np.abs(H).max())


def k_bound(eps, D, params: EnsembleParams, cfg=DeConfig(), gap=None, **kw) -> KBoundReport:
    """K = sup ||U''||_inf (entrywise) and w_min = m K / (2 dE)."""
    gap = delta_E(eps, D, params, cfg) if gap is None else gap
    if gap <= 0:
        raise UndefinedBoundError(f"energy gap {gap} <= 0 at eps={eps}")
    K = hessian_sup(eps, D, params, **kw)
    w_min = params.m * K / (2 * gap) if math.isfinite(gap) else 0.0
    return KBoundReport(float(eps), K, gap, w_min, params.m)

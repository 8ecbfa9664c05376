"""Sparse multivariate polynomials and exact expansions of f and g.

Coefficients are ``Fraction`` wherever the inputs are rational, so supports
and the integrability systems built on them are free of rounding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from math import comb

import numpy as np

from .de import EnsembleParams
from .errors import UnsupportedScaleError
from .subspaces import build_coeff_tensors

MAX_M = 4
MAX_DC = 16
MAX_DV = 8


class MultiPoly:
    """Polynomial as a map exponent-tuple -> coefficient; zeros are never stored."""

    __slots__ = ("num_vars", "terms")

    def __init__(self, num_vars, terms=None):
        self.num_vars = num_vars
        self.terms = {}
        for e, c in (terms or {}).items():
            e = tuple(e)
            if len(e) != num_vars:
                raise ValueError(f"exponent {e} does not have {num_vars} entries")
            if c != 0:
                self.terms[e] = self.terms.get(e, 0) + c
        self.terms = {e: c for e, c in self.terms.items() if c != 0}

    @classmethod
    def constant(cls, c, num_vars):
        return cls(num_vars, {(0,) * num_vars: c})

    @classmethod
    def var(cls, index, num_vars):
        e = [0] * num_vars
        e[index] = 1
        return cls(num_vars, {tuple(e): Fraction(1)})

    def _coerce(self, other):
        if isinstance(other, MultiPoly):
            if other.num_vars != self.num_vars:
                raise ValueError("variable count mismatch")
            return other
        return MultiPoly.constant(other, self.num_vars)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            s = out.get(e, 0) + c
            if s == 0:
                out.pop(e, None)
            else:
                out[e] = s
        return _raw(self.num_vars, out)

    __radd__ = __add__

    def __neg__(self):
        return _raw(self.num_vars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, MultiPoly):
            if other == 0:
                return MultiPoly(self.num_vars)
            return _raw(self.num_vars, {e: c * other for e, c in self.terms.items()})
        other = self._coerce(other)
        out = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return _raw(self.num_vars, {e: c for e, c in out.items() if c != 0})

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, MultiPoly):
            other = MultiPoly.constant(other, self.num_vars)
        return self.num_vars == other.num_vars and self.terms == other.terms

    def __repr__(self):
        return f"MultiPoly({self.num_vars}, {len(self.terms)} terms)"

    def __len__(self):
        return len(self.terms)

    def coeff(self, exponents):
        return self.terms.get(tuple(exponents), 0)

    def support(self):
        return frozenset(self.terms)

    def degree(self):
        return max((sum(e) for e in self.terms), default=-1)

    def derivative(self, index):
        out = {}
        for e, c in self.terms.items():
            if e[index]:
                d = list(e)
                d[index] -= 1
                out[tuple(d)] = c * e[index]
        return _raw(self.num_vars, out)

    def substitute(self, index, value):
        """Fix variable ``index`` to ``value``; the variable stays with exponent 0."""
        out = {}
        for e, c in self.terms.items():
            d = list(e)
            d[index] = 0
            d = tuple(d)
            out[d] = out.get(d, 0) + c * value ** e[index]
        return MultiPoly(self.num_vars, out)

    def evaluate(self, point):
        """Float evaluation at one point or a batch of shape (..., num_vars)."""
        point = np.asarray(point, dtype=float)
        if not self.terms:
            return np.zeros(point.shape[:-1]) if point.ndim > 1 else 0.0
        E = np.array(list(self.terms), dtype=int)
        c = np.array([float(v) for v in self.terms.values()])
        monos = np.prod(point[..., None, :] ** E, axis=-1)
        return monos @ c

    def to_json(self):
        return [{"exponents": list(e), "coeff": str(Fraction(c))}
                for e, c in sorted(self.terms.items())]

    @classmethod
    def from_json(cls, items, num_vars=None):
        if num_vars is None:
            num_vars = len(items[0]["exponents"]) if items else 0
        return cls(num_vars, {tuple(t["exponents"]): Fraction(t["coeff"]) for t in items})


def _raw(num_vars, terms):
    p = MultiPoly.__new__(MultiPoly)
    p.num_vars = num_vars
    p.terms = terms
    return p


class PolyInEps:
    """Polynomial in y_1..y_m whose coefficients are polynomials in eps.

    Stored as a MultiPoly over m+1 variables, eps last.
    """

    def __init__(self, poly: MultiPoly):
        self.poly = poly
        self.m = poly.num_vars - 1

    def __repr__(self):
        return f"PolyInEps(m={self.m}, {len(self.poly)} terms)"

    def eps_coeff(self, exponents):
        """Coefficient of y^exponents as a list indexed by eps power."""
        exponents = tuple(exponents)
        out = {}
        for e, c in self.poly.terms.items():
            if e[:-1] == exponents:
                out[e[-1]] = c
        if not out:
            return []
        return [out.get(k, Fraction(0)) for k in range(max(out) + 1)]

    def support(self):
        return frozenset(e[:-1] for e in self.poly.terms)

    def eps_degree(self):
        return max((e[-1] for e in self.poly.terms), default=-1)

    def min_eps_degree(self):
        return min((e[-1] for e in self.poly.terms), default=-1)

    def at_eps(self, eps) -> MultiPoly:
        out = {}
        for e, c in self.poly.terms.items():
            out[e[:-1]] = out.get(e[:-1], 0) + c * eps ** e[-1]
        return MultiPoly(self.m, out)

    def evaluate(self, y, eps):
        y = np.asarray(y, dtype=float)
        e = np.broadcast_to(np.asarray(eps, dtype=float), y.shape[:-1])[..., None]
        return self.poly.evaluate(np.concatenate([y, e], axis=-1))

    def to_json(self):
        return self.poly.to_json()


# -- expansions --------------------------------------------------------------

def _ccdf_vars_to_pmf(m, num_vars):
    """Symbolic pmf (length m+1) for CCDF variables 0..m-1."""
    xs = [MultiPoly.var(i, num_vars) for i in range(m)]
    one = MultiPoly.constant(Fraction(1), num_vars)
    zero = MultiPoly(num_vars)
    padded = [one] + xs + [zero]
    return [padded[i] - padded[i + 1] for i in range(m + 1)]


def _convolve(T, a, b):
    m = len(a) - 1
    out = [MultiPoly(a[0].num_vars) for _ in range(m + 1)]
    for i in range(m + 1):
        if not a[i].terms:
            continue
        for j in range(m + 1):
            if not b[j].terms:
                continue
            weights = [(k, T[i][j][k]) for k in range(m + 1) if T[i][j][k] != 0]
            if not weights:
                continue
            prod = a[i] * b[j]
            for k, wgt in weights:
                out[k] = out[k] + prod * wgt
    return out


def _fold(T, a, n):
    acc = a
    for _ in range(n - 1):
        acc = _convolve(T, acc, a)
    return acc


def _pmf_to_ccdf(p):
    m = len(p) - 1
    out = []
    acc = MultiPoly(p[0].num_vars)
    for k in range(m, 0, -1):
        acc = acc + p[k]
        out.append(acc)
    return out[::-1]


def expand_g(params: EnsembleParams):
    """Exact g_1..g_m as polynomials in x_1..x_m."""
    m, dc = params.m, params.dc
    if m > MAX_M or dc > MAX_DC:
        raise UnsupportedScaleError(f"expand_g supports m <= {MAX_M}, dc <= {MAX_DC}")
    T = build_coeff_tensors(m).C_exact
    return _pmf_to_ccdf(_fold(T, _ccdf_vars_to_pmf(m, m), dc - 1))


def expand_f(params: EnsembleParams):
    """Exact f_1..f_m as polynomials in y_1..y_m and eps."""
    m, dv = params.m, params.dv
    if m > MAX_M or dv > MAX_DV:
        raise UnsupportedScaleError(f"expand_f supports m <= {MAX_M}, dv <= {MAX_DV}")
    n = m + 1
    T = build_coeff_tensors(m).V_exact
    y = _fold(T, _ccdf_vars_to_pmf(m, n), dv - 1)
    eps = MultiPoly.var(m, n)
    one_minus = 1 - eps
    p = []
    for i in range(m + 1):
        term = MultiPoly.constant(Fraction(comb(m, i)), n)
        for _ in range(i):
            term = term * eps
        for _ in range(m - i):
            term = term * one_minus
        p.append(term)
    return [PolyInEps(q) for q in _pmf_to_ccdf(_convolve(T, p, y))]


# -- coefficient sets ----------------------------------------------------------

@dataclass(frozen=True)
class CoefficientSets:
    f: tuple  # f[j] = frozenset of exponent tuples with nonzero coefficient in f_{j+1}
    g: tuple

    def to_json(self):
        return {name: [sorted(list(e) for e in s) for s in sets]
                for name, sets in (("f", self.f), ("g", self.g))}


def _support(p):
    return p.support() if isinstance(p, (MultiPoly, PolyInEps)) else frozenset(p)


def coefficient_sets(f_polys, g_polys) -> CoefficientSets:
    return CoefficientSets(tuple(_support(p) for p in f_polys),
                           tuple(_support(p) for p in g_polys))


def _shift_violation(sets):
    m = len(sets)
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            for e in sorted(sets[i]):
                if e[j] < 1:
                    continue
                shifted = list(e)
                shifted[i] += 1
                shifted[j] -= 1
                if tuple(shifted) not in sets[j]:
                    return i, j, e, tuple(shifted)
    return None


def check_diagonal_condition(sets: CoefficientSets):
    """Support condition a diagonal D would need.

    With diagonal D, integrability of f D requires that whenever y^e appears
    in component i and e_j >= 1, then y^(e + u_i - u_j) appears in component j
    (u = unit vectors), and likewise for g. Returns ``(holds, witness)`` where
    the witness names the first violation found (1-based components).
    """
    for name, family in (("f", sets.f), ("g", sets.g)):
        bad = _shift_violation(family)
        if bad is not None:
            i, j, e, shifted = bad
            return False, {"family": name, "component": i + 1, "exponents": list(e),
                           "target_component": j + 1, "missing": list(shifted)}
    return True, None


def dump_golden(polys, path):
    data = [p.to_json() for p in polys]
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1)

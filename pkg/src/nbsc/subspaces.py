"""Subspace combinatorics over GF(2)^m.

Vectors of GF(2)^m are stored as ``int`` bitmasks. A subspace is stored by its
reduced row-echelon basis: a tuple of row bitmasks sorted by decreasing pivot,
where the pivot of a row is its highest set bit and every pivot column is zero
in all other rows. That basis is unique, so enumeration is duplicate-free.

The V/C tensors describe how the dimension of a message subspace changes when
it is intersected with (V) or added to (C) a uniformly random subspace of a
given dimension.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations, product

import numpy as np

from .errors import UnsupportedScaleError

MAX_M = 16
ORACLE_MAX_M = 4


def gaussian_binomial(n: int, k: int) -> int:
    """Number of k-dimensional subspaces of GF(2)^n."""
    if not (0 <= k <= n <= MAX_M):
        raise ValueError(f"need 0 <= k <= n <= {MAX_M}, got n={n}, k={k}")
    return _gauss(n, k)


@lru_cache(maxsize=None)
def _gauss(n, k):
    if k < 0 or k > n:
        return 0
    if k == 0 or k == n:
        return 1
    return _gauss(n - 1, k - 1) + 2**k * _gauss(n - 1, k)


@dataclass(frozen=True)
class GaussianBinomialTable:
    m: int
    values: tuple  # values[n][k], 0 <= k <= n <= m

    @classmethod
    def build(cls, m):
        if not 1 <= m <= MAX_M:
            raise ValueError(f"m must be in [1, {MAX_M}], got {m}")
        return cls(m, tuple(tuple(_gauss(n, k) for k in range(n + 1)) for n in range(m + 1)))

    def value(self, n, k):
        return self.values[n][k]


# -- exact V/C coefficients -------------------------------------------------

def intersection_count(m, i, j, k):
    """Number of j-dim W with dim(U ∩ W) = k for a fixed i-dim U in GF(2)^m."""
    if not (max(0, i + j - m) <= k <= min(i, j)):
        return 0
    return _gauss(i, k) * _gauss(m - i, j - k) * 2 ** ((i - k) * (j - k))


def exact_v(m, i, j, k):
    return Fraction(intersection_count(m, i, j, k), _gauss(m, j))


def exact_c(m, i, j, k):
    # dim(U + W) = i + j - dim(U ∩ W)
    return exact_v(m, i, j, i + j - k) if 0 <= i + j - k <= m else Fraction(0)


@dataclass(frozen=True)
class CoeffTensors:
    """V[i, j, k] and C[i, j, k] as float arrays of shape (m+1, m+1, m+1).

    ``V_exact``/``C_exact`` keep the rational values (nested tuples of
    Fraction) for the exact polynomial expansions.
    """

    m: int
    V: np.ndarray
    C: np.ndarray
    V_exact: tuple
    C_exact: tuple

    def to_json(self):
        return {"m": self.m, "V": self.V.tolist(), "C": self.C.tolist()}


@lru_cache(maxsize=None)
def build_coeff_tensors(m: int) -> CoeffTensors:
    if not 1 <= m <= MAX_M:
        raise ValueError(f"m must be in [1, {MAX_M}], got {m}")
    r = range(m + 1)
    v_exact = tuple(tuple(tuple(exact_v(m, i, j, k) for k in r) for j in r) for i in r)
    c_exact = tuple(tuple(tuple(exact_c(m, i, j, k) for k in r) for j in r) for i in r)
    V = np.array([[[float(x) for x in row] for row in mat] for mat in v_exact])
    C = np.array([[[float(x) for x in row] for row in mat] for mat in c_exact])
    V.setflags(write=False)
    C.setflags(write=False)
    return CoeffTensors(m, V, C, v_exact, c_exact)


# -- brute-force enumeration oracle ----------------------------------------

def rref(rows):
    """Reduced row-echelon basis of the span of ``rows`` (bitmask ints)."""
    basis = []
    for v in rows:
        for b in basis:
            if v ^ b < v:  # b's pivot bit is set in v
                v ^= b
        if v:
            # clear the new pivot from existing rows
            top = v.bit_length() - 1
            basis = [b ^ v if (b >> top) & 1 else b for b in basis]
            basis.append(v)
            basis.sort(reverse=True)
    return tuple(basis)


def rank(rows):
    return len(rref(rows))


def _subspaces_of_dim(m, k):
    out = []
    for pivots in combinations(range(m - 1, -1, -1), k):
        pivot_set = set(pivots)
        free = [[c for c in range(p) if c not in pivot_set] for p in pivots]
        n_free = sum(len(f) for f in free)
        for bits in product((0, 1), repeat=n_free):
            it = iter(bits)
            rows = []
            for p, cols in zip(pivots, free):
                v = 1 << p
                for c in cols:
                    if next(it):
                        v |= 1 << c
                rows.append(v)
            out.append(tuple(rows))
    return out


@dataclass(frozen=True)
class SubspaceSet:
    m: int
    bases: tuple  # bases[k] is a tuple of canonical bases of k-dim subspaces

    def of_dim(self, k):
        return self.bases[k]

    def __len__(self):
        return sum(len(b) for b in self.bases)


@lru_cache(maxsize=None)
def enumerate_subspaces(m: int) -> SubspaceSet:
    """All subspaces of GF(2)^m, grouped by dimension."""
    if not 1 <= m <= ORACLE_MAX_M:
        raise UnsupportedScaleError(f"subspace enumeration is capped at m <= {ORACLE_MAX_M}")
    return SubspaceSet(m, tuple(tuple(_subspaces_of_dim(m, k)) for k in range(m + 1)))


def _fraction_for(U, candidates, k, kind):
    hits = 0
    for W in candidates:
        s = rank(U + W)
        d = s if kind == "sum" else len(U) + len(W) - s
        hits += d == k
    return Fraction(hits, len(candidates))


def oracle_coeff(m, i, j, k, kind="intersection", all_u=True):
    """Fraction of j-dim W with dim(U ∩ W) = k (or dim(U + W) = k).

    Every i-dim U is tried when ``all_u`` is set and the fractions must agree.
    """
    if m > ORACLE_MAX_M:
        raise UnsupportedScaleError(f"oracle is capped at m <= {ORACLE_MAX_M}, got {m}")
    if kind not in ("intersection", "sum"):
        raise ValueError(f"unknown kind {kind!r}")
    if not (0 <= i <= m and 0 <= j <= m and 0 <= k <= m):
        raise ValueError("indices out of range")
    subs = enumerate_subspaces(m)
    us = subs.of_dim(i) if all_u else subs.of_dim(i)[:1]
    values = {_fraction_for(U, subs.of_dim(j), k, kind) for U in us}
    if len(values) != 1:
        raise AssertionError(f"fraction depends on U: {sorted(values)}")
    return values.pop()


def oracle_check(m):
    """Compare every closed-form V/C entry with enumeration; returns mismatches."""
    t = build_coeff_tensors(m)
    bad = []
    r = range(m + 1)
    for i, j, k in product(r, r, r):
        v = oracle_coeff(m, i, j, k, "intersection", all_u=m <= 3)
        c = oracle_coeff(m, i, j, k, "sum", all_u=m <= 3)
        if v != t.V_exact[i][j][k] or c != t.C_exact[i][j][k]:
            bad.append((i, j, k, v, t.V_exact[i][j][k], c, t.C_exact[i][j][k]))
    return bad

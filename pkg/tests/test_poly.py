import json
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nbsc.de import EnsembleParams, f_ccdf, g_ccdf, g_jacobian
from nbsc.errors import UnsupportedScaleError
from nbsc.poly import (MultiPoly, PolyInEps, check_diagonal_condition, coefficient_sets,
                       expand_f, expand_g)

from conftest import random_ccdf

GOLDEN = Path(__file__).parent / "golden"
EPS_GRID = [k / 10 for k in range(1, 10)]


def test_multipoly_arithmetic():
    x, y = MultiPoly.var(0, 2), MultiPoly.var(1, 2)
    p = (x + y) * (x - y)
    assert p == x * x - y * y
    assert p.coeff((1, 1)) == 0 and (1, 1) not in p.terms
    assert p.degree() == 2
    assert p.derivative(0) == x + x
    assert (p - p).terms == {}
    assert p.substitute(1, Fraction(1, 2)) == x * x - Fraction(1, 4)
    assert p.evaluate([3.0, 2.0]) == 5.0


def test_no_zero_coefficients_stored():
    x = MultiPoly.var(0, 1)
    p = MultiPoly(1, {(0,): 0, (1,): Fraction(3)})
    assert p.terms == {(1,): 3}
    assert all(c != 0 for c in ((x + 1) * (x - 1)).terms.values())


def test_json_roundtrip():
    for q in expand_g(EnsembleParams(3, 6, 2)):
        assert MultiPoly.from_json(json.loads(json.dumps(q.to_json()))) == q


def test_g_binary_expansion():
    (g,) = expand_g(EnsembleParams(3, 6, 1))
    assert g.terms == {(1,): 5, (2,): -10, (3,): 10, (4,): -5, (5,): 1}


def test_f_binary_expansion():
    (f,) = expand_f(EnsembleParams(3, 6, 1))
    assert f.poly.terms == {(2, 1): 1}
    assert f.eps_coeff((2,)) == [0, 1]


@pytest.mark.parametrize("m", [1, 2, 3])
def test_structural_zeros(m):
    p = EnsembleParams(3, 6, m)
    for g in expand_g(p):
        assert g.coeff((0,) * m) == 0
    for f in expand_f(p):
        assert f.min_eps_degree() >= 1
        assert f.eps_degree() <= m


@pytest.mark.parametrize("dv,dc,m", [(3, 6, 2), (2, 3, 2), (3, 6, 3), (4, 8, 2), (2, 5, 4)])
def test_evaluation_matches_numeric_operators(rng, dv, dc, m):
    p = EnsembleParams(dv, dc, m)
    x = random_ccdf(rng, 100, m)
    g = np.stack([q.evaluate(x) for q in expand_g(p)], -1)
    np.testing.assert_allclose(g, g_ccdf(x, p), atol=1e-12)
    fs = expand_f(p)
    for eps in EPS_GRID:
        f = np.stack([q.evaluate(x, eps) for q in fs], -1)
        np.testing.assert_allclose(f, f_ccdf(x, eps, p), atol=1e-12)


@pytest.mark.parametrize("m", [2, 3])
def test_symbolic_jacobian_matches_numeric(rng, m):
    p = EnsembleParams(3, 6, m)
    gs = expand_g(p)
    x = random_ccdf(rng, 50, m)
    J = np.stack([np.stack([g.derivative(n).evaluate(x) for n in range(m)], -1) for g in gs], -2)
    h = 1e-6
    fd = np.stack([(g_ccdf(x + h * e, p) - g_ccdf(x - h * e, p)) / (2 * h) for e in np.eye(m)], -1)
    np.testing.assert_allclose(J, fd, atol=1e-6)
    np.testing.assert_allclose(J, g_jacobian(x, p), atol=1e-12)


def test_guards():
    with pytest.raises(UnsupportedScaleError):
        expand_g(EnsembleParams(3, 6, 5))
    with pytest.raises(UnsupportedScaleError):
        expand_g(EnsembleParams(3, 17, 2))
    with pytest.raises(UnsupportedScaleError):
        expand_f(EnsembleParams(9, 12, 2))


def test_binary_coefficient_sets():
    p = EnsembleParams(3, 6, 1)
    s = coefficient_sets(expand_f(p), expand_g(p))
    assert s.f == (frozenset({(2,)}),)
    assert s.g == (frozenset({(1,), (2,), (3,), (4,), (5,)}),)
    assert check_diagonal_condition(s) == (True, None)


def test_golden_m2():
    p = EnsembleParams(3, 6, 2)
    f, g = expand_f(p), expand_g(p)
    sets = coefficient_sets(f, g)
    assert sets.to_json() == json.loads((GOLDEN / "coeff_sets_m2_3_6.json").read_text())
    golden_g = json.loads((GOLDEN / "g_m2_3_6.json").read_text())
    assert [MultiPoly.from_json(t, 2) for t in golden_g] == g
    golden_f = json.loads((GOLDEN / "f_m2_3_6.json").read_text())
    assert [MultiPoly.from_json(t, 3) for t in golden_f] == [q.poly for q in f]


def test_diagonal_condition_fails_for_m2():
    p = EnsembleParams(3, 6, 2)
    holds, witness = check_diagonal_condition(coefficient_sets(expand_f(p), expand_g(p)))
    assert not holds
    assert witness == {"family": "f", "component": 1, "exponents": [0, 2],
                       "target_component": 2, "missing": [1, 1]}
    # the witness really is a missing term
    f2 = expand_f(p)[1]
    assert f2.eps_coeff((1, 1)) == []


def test_diagonal_condition_fails_for_m3():
    p = EnsembleParams(3, 6, 3)
    holds, witness = check_diagonal_condition(coefficient_sets(expand_f(p), expand_g(p)))
    assert not holds and witness is not None


@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3), st.integers(-5, 5)), max_size=6),
       st.floats(-2, 2), st.floats(-2, 2))
def test_product_evaluates_as_product(terms, a, b):
    p = MultiPoly(2, {})
    for i, j, c in terms:
        p = p + MultiPoly(2, {(i, j): Fraction(c)})
    q = p * p + p
    v = p.evaluate([a, b])
    assert q.evaluate([a, b]) == pytest.approx(v * v + v, rel=1e-9, abs=1e-9)


def test_poly_in_eps_at_eps():
    f = expand_f(EnsembleParams(3, 6, 2))
    for q in f:
        fixed = q.at_eps(Fraction(3, 10))
        pt = np.array([0.7, 0.2])
        assert fixed.evaluate(pt) == pytest.approx(q.evaluate(pt, 0.3), abs=1e-14)
    assert isinstance(f[0], PolyInEps)

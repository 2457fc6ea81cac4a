import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from polyqe.polycore import (Poly, discriminant, factor_irreducible, gcd, groebner_basis,
                             reduce_by, resultant, squarefree_factor)
from support import from_sympy, random_poly, rng, to_sympy

x, y, a, b, c, r, p, q = (Poly.var(n) for n in "x y a b c r p q".split())


def sylvester_resultant(f: Poly, g: Poly, v: str):
    """Determinant of the Sylvester matrix, computed by sympy (Bareiss)."""
    fs = list(reversed(f.coeffs_in(v)))
    gs = list(reversed(g.coeffs_in(v)))
    m, n = len(fs) - 1, len(gs) - 1
    if m == 0:
        return to_sympy(f) ** n
    if n == 0:
        return to_sympy(g) ** m
    size = m + n
    rows = []
    for i in range(n):
        rows.append([0] * i + [to_sympy(t) for t in fs] + [0] * (size - m - 1 - i))
    for i in range(m):
        rows.append([0] * i + [to_sympy(t) for t in gs] + [0] * (size - n - 1 - i))
    return sympy.expand(sympy.Matrix(rows).det(method="bareiss"))


def test_arith_examples():
    assert (x + 1) * (x - 1) == x ** 2 - 1
    assert (x ** 2 + b * x + c).derivative("x") == 2 * x + b
    assert (x ** 2 - 1).exact_div(x - 1) == x + 1


def test_gcd_examples():
    assert gcd(x ** 2 - 1, x - 1) == x - 1
    assert gcd(x ** 2 + 1, x + 1).is_constant()
    assert not resultant(x ** 2 + 1, x + 1, "x").is_zero()
    assert gcd(Poly.const(0), 2 * y) == y


def test_resultant_examples():
    assert resultant(x - a, x - b, "x") == a - b or resultant(x - a, x - b, "x") == b - a
    assert resultant(x ** 2 - 2, x - 1, "x") == Poly.const(-1)
    assert resultant(x ** 2 + 1, Poly.const(3), "x") == Poly.const(9)


def test_resultant_matches_sylvester_oracle():
    g = rng(11)
    for _ in range(60):
        f = random_poly(g, ["x", "y", "z"], maxdeg=3, nterms=3)
        h = random_poly(g, ["x", "y", "z"], maxdeg=3, nterms=3)
        if f.degree("x") <= 0 and h.degree("x") <= 0:
            continue
        got = to_sympy(resultant(f, h, "x"))
        assert sympy.expand(got - sylvester_resultant(f, h, "x")) == 0


def test_resultant_vanishes_iff_common_factor():
    g = rng(12)
    for _ in range(200):
        f = random_poly(g, ["x", "y", "z"], maxdeg=4, nterms=3)
        h = random_poly(g, ["x", "y", "z"], maxdeg=4, nterms=3)
        if g.random() < 0.3:
            k = random_poly(g, ["x", "y"], maxdeg=2, nterms=2)
            f, h = f * k, h * k
        if f.degree("x") <= 0 or h.degree("x") <= 0:
            continue
        common = gcd(f, h).degree("x") > 0
        assert resultant(f, h, "x").is_zero() == common


def test_discriminant_examples():
    assert discriminant(x ** 2 + b * x + c, "x") == b ** 2 - 4 * c
    assert discriminant(x ** 2 - 2 * x + 1, "x").is_zero()
    assert discriminant(x ** 3 + p * x + q, "x") == -4 * p ** 3 - 27 * q ** 2


def test_squarefree_examples():
    assert sorted(squarefree_factor(x ** 3 - x ** 2, "x"), key=lambda t: t[1]) == [(x - 1, 1), (x, 2)]
    assert squarefree_factor(x ** 2 - 1, "x") == [(x ** 2 - 1, 1)]
    got = dict((m, f) for f, m in squarefree_factor((x + y) ** 2 * (x - y), "x"))
    assert got[2] == x + y and got[1] == x - y


def _yun(expr, v):
    """Square-free decomposition by Yun's algorithm (sympy arithmetic only)."""
    f = sympy.Poly(expr, v)
    df = f.diff(v)
    a0 = sympy.gcd(f, df)
    bb = sympy.quo(f, a0)
    cc = sympy.quo(df, a0)
    dd = cc - bb.diff(v)
    out, i = {}, 1
    while bb.degree() > 0:
        ai = sympy.gcd(bb, dd)
        bb = sympy.quo(bb, ai)
        cc = sympy.quo(dd, ai)
        dd = cc - bb.diff(v)
        if ai.degree() > 0:
            out[i] = ai
        i += 1
    return out


def test_squarefree_matches_yun_oracle():
    g = rng(13)
    for _ in range(40):
        base = [random_poly(g, ["x", "y"], maxdeg=2, nterms=2) for _ in range(2)]
        f = base[0] ** g.randint(1, 3) * base[1] ** g.randint(1, 2)
        if f.degree("x") <= 0:
            continue
        ours = {m: h for h, m in squarefree_factor(f, "x")}
        oracle = _yun(to_sympy(f), sympy.Symbol("x"))
        assert set(ours) == set(oracle)
        for m, h in ours.items():
            ratio = sympy.cancel(to_sympy(h) / oracle[m].as_expr())
            assert not ratio.has(sympy.Symbol("x"))
        # multiply back up to a factor free of x
        prod = Poly.const(1)
        for h, m in squarefree_factor(f, "x"):
            prod = prod * h ** m
        assert not sympy.cancel(to_sympy(f) / to_sympy(prod)).has(sympy.Symbol("x"))


def test_factor_piano_common_polynomial():
    big = -a ** 6 + a ** 4 * r ** 2 + 2 * a ** 5 - 2 * a ** 3 * r ** 2 - 2 * a ** 4 + a ** 2 * r ** 2
    cst, fs = factor_irreducible(big)
    quartic = a ** 4 - a ** 2 * r ** 2 - 2 * a ** 3 + 2 * a * r ** 2 + 2 * a ** 2 - r ** 2
    assert dict(fs) == {a: 2, quartic: 1}
    assert cst == -1


def test_factor_examples_and_multiply_back():
    assert factor_irreducible(x ** 2 - 2)[1] == [(x ** 2 - 2, 1)]
    assert {f for f, _ in factor_irreducible(x ** 4 - 1)[1]} == {x - 1, x + 1, x ** 2 + 1}
    g = rng(14)
    for _ in range(40):
        f = random_poly(g, ["x", "y", "z"], maxdeg=2, nterms=3) * random_poly(g, ["x", "y"], maxdeg=2)
        cst, fs = factor_irreducible(f)
        prod = Poly.const(cst)
        for h, m in fs:
            prod = prod * h ** m
            assert len(sympy.factor_list(to_sympy(h))[1]) == 1
        assert prod == f


def test_groebner_examples():
    assert set(groebner_basis([x + y, x - y], ["x", "y"])) == {x, y}
    assert groebner_basis([x ** 2], ["x"]) == [x ** 2]
    assert set(groebner_basis([x * y - 1, y ** 2 - 1], ["x", "y"])) == {x - y, y ** 2 - 1}


def test_groebner_matches_sympy_and_reduces_inputs():
    g = rng(15)
    X, Y, Z = sympy.symbols("x y z")
    for _ in range(15):
        gens = [random_poly(g, ["x", "y", "z"], maxdeg=2, nterms=2) for _ in range(2)]
        ours = groebner_basis(gens, ["x", "y", "z"])
        for f in gens:
            assert reduce_by(f, ours, ["x", "y", "z"]).is_zero()
        oracle = sympy.groebner([to_sympy(f) for f in gens], X, Y, Z, order="lex")
        ours_monic = {sympy.Poly(to_sympy(f), X, Y, Z).monic().as_expr() for f in ours}
        theirs = {sympy.Poly(f, X, Y, Z).monic().as_expr() for f in oracle.exprs}
        assert ours_monic == theirs


coef = st.integers(-6, 6)


@settings(max_examples=60, deadline=None)
@given(st.lists(coef, min_size=1, max_size=5), st.lists(coef, min_size=1, max_size=5))
def test_exact_arithmetic(cs1, cs2):
    f = Poly.from_univariate(cs1, "x") + y * Poly.from_univariate(cs2, "x")
    h = Poly.from_univariate(cs2, "x") * y - x
    assert (f + h) - h == f
    assert from_sympy(to_sympy(f * h)) == f * h

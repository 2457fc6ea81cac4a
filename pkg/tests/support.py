"""Shared generators and independent oracles for the test-suite."""
from __future__ import annotations

import os
import random
from fractions import Fraction

import sympy

from polyqe.formula import QuantifiedFormula, atom, conj, disj, evaluate_ground
from polyqe.polyalg import QeOptions, qe
from polyqe.polycore import Poly

SEED = int(os.environ.get("QE_SEED", "20240917"))


def rng(salt: int = 0) -> random.Random:
    return random.Random(SEED * 7919 + salt)


# ----------------------------------------------------------------- sympy glue

def to_sympy(p: Poly):
    expr = sympy.Integer(0)
    for mono, c in p.terms():
        term = sympy.Rational(int(c.p), int(c.q))
        for v, e in mono.items():
            term *= sympy.Symbol(v) ** e
        expr += term
    return sympy.expand(expr)


def from_sympy(expr) -> Poly:
    expr = sympy.expand(expr)
    gens = sorted(expr.free_symbols, key=str)
    if not gens:
        return Poly.const(Fraction(str(sympy.Rational(expr))))
    sp = sympy.Poly(expr, *gens)
    out = Poly.const(0)
    for monom, c in sp.terms():
        t = Poly.const(Fraction(int(sympy.Rational(c).p), int(sympy.Rational(c).q)))
        for g, e in zip(gens, monom):
            t = t * Poly.var(str(g)) ** e
        out = out + t
    return out


# ------------------------------------------------------------------ generators

RELS = ["<", "<=", ">", ">=", "=", "!="]


def random_poly(r: random.Random, vs, maxdeg: int = 2, nterms: int = 3, coeff: int = 4) -> Poly:
    while True:
        p = Poly.const(0)
        for _ in range(r.randint(1, nterms)):
            t = Poly.const(r.choice([c for c in range(-coeff, coeff + 1) if c]))
            budget = r.randint(0, maxdeg)
            for _ in range(budget):
                t = t * Poly.var(r.choice(vs))
            p = p + t
        if not p.is_constant():
            return p


def random_formula(r: random.Random, vs, natoms: int = 3, **kw):
    parts = [atom(random_poly(r, vs, **kw), r.choice(RELS)) for _ in range(natoms)]
    f = parts[0]
    for a in parts[1:]:
        f = conj(f, a) if r.random() < 0.65 else disj(f, a)
    return f


def random_problem(r: random.Random, nvars: int = 2, nblocks: int = 1, maxdeg: int = 2,
                   natoms: int = 3, nterms: int = 3) -> QuantifiedFormula:
    names = ["x", "y", "z"][:nvars]
    f = random_formula(r, names, natoms, maxdeg=maxdeg, nterms=nterms)
    present = [v for v in names if v in _vars(f)]
    if not present:
        return QuantifiedFormula((), f, frozenset())
    nq = r.randint(1, len(present))
    bound = present[len(present) - nq:]
    blocks = []
    quants = ["exists", "forall"]
    q = r.choice(quants)
    chunks = [bound] if nblocks == 1 or len(bound) < 2 else [bound[:1], bound[1:]]
    for ch in chunks:
        blocks.append((q, tuple(ch)))
        q = "forall" if q == "exists" else "exists"
    free = frozenset(_vars(f) - set(bound))
    return QuantifiedFormula(tuple(blocks), f, free)


def _vars(f) -> set[str]:
    from polyqe.formula import formula_vars
    return formula_vars(f)


# -------------------------------------------------------- sampling equivalence

def sample_points(free, n: int, r: random.Random) -> list[dict[str, Fraction]]:
    free = sorted(free)
    if not free:
        return [{}]
    pts = []
    for _ in range(n):
        pts.append({v: Fraction(r.randint(-12, 12), r.choice([1, 1, 2, 3, 4])) for v in free})
    return pts


def instantiate(problem: QuantifiedFormula, point) -> QuantifiedFormula:
    from polyqe.formula import map_atoms
    m = map_atoms(problem.matrix, lambda a: atom(a.lhs.subs(point), a.rel))
    return QuantifiedFormula(problem.blocks, m, frozenset())


def decide(problem: QuantifiedFormula) -> bool:
    """Ground truth of a closed problem by a plain CAD (no equational constraints)."""
    res = qe(problem, QeOptions(mode="cad", ec_mode="off")).result
    from polyqe.formula import TrueF, FalseF
    assert isinstance(res, (TrueF, FalseF)), res
    return isinstance(res, TrueF)


def agree(f, g, free, n: int = 50, salt: int = 0) -> list:
    """Points where two quantifier-free formulas differ."""
    return [pt for pt in sample_points(free, n, rng(salt))
            if evaluate_ground(f, pt) != evaluate_ground(g, pt)]


def truth_table(problem: QuantifiedFormula, n: int = 50, salt: int = 0) -> list:
    """``(point, truth)`` pairs for sampled values of the free variables."""
    return [(pt, decide(instantiate(problem, pt)))
            for pt in sample_points(problem.free_vars, n, rng(salt))]


def mismatches(problem: QuantifiedFormula, result, n: int = 50, salt: int = 0,
               table: list | None = None) -> list:
    if table is None:
        table = truth_table(problem, n, salt)
    bad = []
    for pt, expected in table:
        got = evaluate_ground(result, pt)
        if expected != got:
            bad.append((pt, expected, got))
    return bad


# ------------------------------------------------------------ Sturm oracle

def sturm_count(coeffs: list[Fraction], a: Fraction, b: Fraction) -> int:
    """Distinct real roots of a squarefree-ized polynomial in ``(a, b]`` (low->high coeffs)."""
    def trim(c):
        c = list(c)
        while c and c[-1] == 0:
            c.pop()
        return c

    def rem(f, g):
        f = list(f)
        while len(f) >= len(g) and f:
            q = f[-1] / g[-1]
            shift = len(f) - len(g)
            for i, gc in enumerate(g):
                f[i + shift] -= q * gc
            f = trim(f)
        return f

    def gcd(f, g):
        while g:
            f, g = g, rem(f, g)
        return f

    def div(f, g):
        f = list(f)
        out = [Fraction(0)] * (len(f) - len(g) + 1)
        while len(f) >= len(g) and f:
            q = f[-1] / g[-1]
            shift = len(f) - len(g)
            out[shift] = q
            for i, gc in enumerate(g):
                f[i + shift] -= q * gc
            f = trim(f)
        return out

    p = trim([Fraction(c) for c in coeffs])
    dp = trim([i * c for i, c in enumerate(p)][1:])
    if not dp:
        return 0
    p = div(p, gcd(p, dp))
    seq = [p, trim([i * c for i, c in enumerate(p)][1:])]
    while seq[-1] and len(seq[-1]) > 1:
        r_ = rem(seq[-2], seq[-1])
        if not r_:
            break
        seq.append([-c for c in r_])

    def ev(c, x):
        return sum(ci * x ** i for i, ci in enumerate(c))

    def var(x):
        signs = [s for s in (ev(c, x) for c in seq if c) if s != 0]
        return sum(1 for u, w in zip(signs, signs[1:]) if (u > 0) != (w > 0))

    return var(a) - var(b)


# ------------------------------------------------------ sign-invariance audit

def _random_between(lo, hi, r: random.Random) -> Fraction:
    if lo is not None and hi is not None:
        while not lo.hi < hi.lo:
            lo, hi = lo.bisect(), hi.bisect()
        a, b = Fraction(str(lo.hi)), Fraction(str(hi.lo))
        return a + (b - a) * Fraction(r.randint(1, 99), 100)
    if lo is None and hi is None:
        return Fraction(r.randint(-9, 9), r.randint(1, 4))
    if lo is None:
        return Fraction(str(hi.lo)) - Fraction(r.randint(1, 40), r.randint(1, 4))
    return Fraction(str(lo.hi)) + Fraction(r.randint(1, 40), r.randint(1, 4))


def resample(cad, cell, r: random.Random):
    """Another point of ``cell``: sectors get random rationals, sections follow their root."""
    from polyqe.realalg import AlgebraicPoint, kp_real_roots

    pt = AlgebraicPoint()
    for c in cell.ancestors():
        var = cad.order[c.level - 1]

        def root(bound):
            if bound is None:
                return None
            poly, k = bound
            roots = kp_real_roots(pt.field, pt.lazard_upoly(poly, var)[0])
            if k > len(roots):
                raise AssertionError(f"root {k} of {poly} vanished at {pt}")
            return roots[k - 1]

        if c.kind == "section":
            pt = pt.extend(var, root(c.section))
        else:
            pt = pt.extend(var, _random_between(root(c.lower), root(c.upper), r))
    return pt


def sign_vector(cad, pt, level: int) -> tuple:
    basis = [p for lv in cad.proj.levels[:level] for p in lv]
    return tuple(pt.sign(p) for p in basis)


def audit_signs(cad, r: random.Random, per_cell: int = 5) -> list:
    """Cells whose resampled points change the sign vector of the basis."""
    bad = []
    for cell in cad.all_cells():
        ref = sign_vector(cad, cad.sample(cell), cell.level)
        for _ in range(per_cell if any(c.kind == "sector" for c in cell.ancestors()) else 1):
            try:
                got = sign_vector(cad, resample(cad, cell, r), cell.level)
            except AssertionError as e:
                bad.append((cell, str(e)))
                break
            if got != ref:
                bad.append((cell, ref, got))
                break
    return bad

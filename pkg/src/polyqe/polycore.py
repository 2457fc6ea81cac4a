"""Exact multivariate polynomials over the rationals.

:class:`Poly` wraps a FLINT ``fmpq_mpoly`` living in a context made of exactly
the variables that occur in it, sorted by name under lex order.  That makes
the representation canonical: two equal polynomials have identical variable
tuples and identical FLINT data, so ``==`` and ``hash`` are structural.

Factorization, gcds and resultants are delegated to FLINT; the Groebner
engine is a plain Buchberger loop written here.
"""
from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from functools import reduce
from typing import Union

from flint import fmpq, fmpq_mpoly, fmpq_mpoly_ctx, fmpq_poly, fmpz, fmpz_poly

Rat = fmpq
Number = Union[int, fmpq, fmpz]


def rat(x, den=None) -> fmpq:
    """Coerce ints, Fractions, strings like ``"3/4"`` and fmpq to ``fmpq``."""
    if den is not None:
        return fmpq(int(x), int(den))
    if isinstance(x, fmpq):
        return x
    if isinstance(x, (int, fmpz)):
        return fmpq(int(x))
    if isinstance(x, str):
        if "/" in x:
            n, d = x.split("/")
            return fmpq(int(n), int(d))
        return fmpq(int(x))
    if hasattr(x, "numerator") and hasattr(x, "denominator"):
        return fmpq(int(x.numerator), int(x.denominator))
    raise TypeError(f"cannot convert {x!r} to a rational")


def _ctx(names: tuple[str, ...]) -> fmpq_mpoly_ctx:
    return fmpq_mpoly_ctx.get(names, "lex")


_EMPTY = _ctx(())


class NotDivisible(ArithmeticError):
    """Exact division was asked of a non-divisor."""


class Poly:
    """Immutable polynomial with rational coefficients."""

    __slots__ = ("vars", "_p", "_hash")

    def __init__(self, p: fmpq_mpoly, names: tuple[str, ...] | None = None):
        # Internal constructor; normalizes the context down to occurring vars.
        if names is None:
            names = p.context().names()
        if names:
            degs = p.degrees()
            if p.is_zero() or any(d <= 0 for d in degs):
                keep = tuple(n for n, d in zip(names, degs) if d > 0)
                p = p.project_to_context(_ctx(keep))
                names = keep
        self.vars: tuple[str, ...] = names
        self._p = p
        self._hash = None

    # ----------------------------------------------------------- constructors
    @classmethod
    def const(cls, c) -> Poly:
        return cls(_EMPTY.constant(rat(c)), ())

    @classmethod
    def var(cls, name: str) -> Poly:
        return cls(_ctx((name,)).gen(0), (name,))

    @classmethod
    def from_terms(cls, terms: Mapping[tuple[tuple[str, int], ...], Number]) -> Poly:
        """Build from ``{((var, exp), ...): coeff}``."""
        names = tuple(sorted({v for mono in terms for v, e in mono if e}))
        idx = {v: i for i, v in enumerate(names)}
        data: dict[tuple[int, ...], fmpq] = {}
        for mono, c in terms.items():
            exp = [0] * len(names)
            for v, e in mono:
                if e:
                    exp[idx[v]] += e
            key = tuple(exp)
            data[key] = data.get(key, fmpq(0)) + rat(c)
        data = {k: c for k, c in data.items() if c != 0}
        return cls(_ctx(names).from_dict(data), names)

    @classmethod
    def from_univariate(cls, coeffs: Sequence[Number], name: str) -> Poly:
        """Coefficients in increasing degree order."""
        ctx = _ctx((name,))
        data = {(i,): rat(c) for i, c in enumerate(coeffs) if c != 0}
        return cls(ctx.from_dict(data), (name,))

    @classmethod
    def from_flint(cls, p: fmpq_mpoly) -> Poly:
        return cls(p)

    @classmethod
    def from_upoly(cls, p: fmpq_poly | fmpz_poly, name: str) -> Poly:
        return cls.from_univariate(list(p.coeffs()), name)

    # -------------------------------------------------------------- coercion
    def _lift(self, names: tuple[str, ...]) -> fmpq_mpoly:
        if names == self.vars:
            return self._p
        return self._p.project_to_context(_ctx(names))

    def _coerce(self, other) -> Poly:
        if isinstance(other, Poly):
            return other
        return Poly.const(other)

    def _binary(self, other, op) -> Poly:
        other = self._coerce(other)
        if self.vars == other.vars:
            return Poly(op(self._p, other._p), self.vars)
        names = tuple(sorted(set(self.vars) | set(other.vars)))
        return Poly(op(self._lift(names), other._lift(names)), names)

    # ------------------------------------------------------------ arithmetic
    def __add__(self, other) -> Poly:
        return self._binary(other, lambda a, b: a + b)

    __radd__ = __add__

    def __sub__(self, other) -> Poly:
        return self._binary(other, lambda a, b: a - b)

    def __rsub__(self, other) -> Poly:
        return self._coerce(other) - self

    def __mul__(self, other) -> Poly:
        if not isinstance(other, Poly):
            return Poly(self._p * rat(other), self.vars)
        return self._binary(other, lambda a, b: a * b)

    __rmul__ = __mul__

    def __neg__(self) -> Poly:
        return Poly(-self._p, self.vars)

    def __pow__(self, k: int) -> Poly:
        if k < 0:
            raise ValueError("negative power")
        return Poly(self._p ** k, self.vars)

    def exact_div(self, other) -> Poly:
        """Exact quotient; raises :class:`NotDivisible` otherwise."""
        other = self._coerce(other)
        if other.is_zero():
            raise ZeroDivisionError("division by the zero polynomial")
        names = tuple(sorted(set(self.vars) | set(other.vars)))
        try:
            q = self._lift(names) / other._lift(names)
        except Exception as exc:  # flint raises DomainError
            raise NotDivisible(f"{other} does not divide {self}") from exc
        return Poly(q, names)

    def scale(self, c) -> Poly:
        return Poly(self._p * rat(c), self.vars)

    # ------------------------------------------------------------- structure
    def is_zero(self) -> bool:
        return self._p.is_zero()

    def is_constant(self) -> bool:
        return not self.vars

    def constant_value(self) -> fmpq:
        if self.vars:
            raise ValueError(f"{self} is not constant")
        if self._p.is_zero():
            return fmpq(0)
        return self._p.coeffs()[0]

    def degree(self, v: str) -> int:
        """Degree in ``v``; 0 for constants in ``v``, -1 for the zero polynomial."""
        if self._p.is_zero():
            return -1
        try:
            return self._p.degrees()[self.vars.index(v)]
        except ValueError:
            return 0

    def total_degree(self) -> int:
        if self._p.is_zero():
            return -1
        return int(self._p.total_degree())

    def nterms(self) -> int:
        return len(self._p)

    def terms(self) -> list[tuple[dict[str, int], fmpq]]:
        """Terms in canonical (lex, name-sorted) order, leading term first."""
        return [({v: e for v, e in zip(self.vars, exp) if e}, c)
                for exp, c in zip(self._p.monoms(), self._p.coeffs())]

    def leading_coeff(self) -> fmpq:
        """Coefficient of the lex-leading term under the canonical name order."""
        if self._p.is_zero():
            return fmpq(0)
        return self._p.coeffs()[0]

    def coeffs_in(self, v: str) -> list[Poly]:
        """Dense coefficient list w.r.t. ``v`` (index = power)."""
        if v not in self.vars:
            return [self]
        i = self.vars.index(v)
        rest = self.vars[:i] + self.vars[i + 1:]
        buckets: dict[int, dict[tuple[int, ...], fmpq]] = {}
        for exp, c in zip(self._p.monoms(), self._p.coeffs()):
            e = exp[i]
            buckets.setdefault(e, {})[exp[:i] + exp[i + 1:]] = c
        ctx = _ctx(rest)
        out = [Poly.const(0)] * (max(buckets) + 1)
        for e, data in buckets.items():
            out[e] = Poly(ctx.from_dict(data), rest)
        return out

    def lc(self, v: str) -> Poly:
        return self.coeffs_in(v)[-1]

    def tc(self, v: str) -> Poly:
        """Trailing (lowest-power nonzero) coefficient w.r.t. ``v``."""
        for c in self.coeffs_in(v):
            if not c.is_zero():
                return c
        return Poly.const(0)

    def derivative(self, v: str) -> Poly:
        if v not in self.vars:
            return Poly.const(0)
        return Poly(self._p.derivative(v), self.vars)

    def subs(self, values: Mapping[str, Number]) -> Poly:
        """Substitute rational values for some variables."""
        vals = {v: rat(c) for v, c in values.items() if v in self.vars}
        if not vals:
            return self
        return Poly(self._p.subs(vals), self.vars)

    def substitute(self, v: str, q: Poly) -> Poly:
        """Replace ``v`` by the polynomial ``q``."""
        if v not in self.vars:
            return self
        acc = Poly.const(0)
        for c in reversed(self.coeffs_in(v)):
            acc = acc * q + c
        return acc

    def evaluate(self, values: Mapping[str, Number]) -> fmpq:
        r = self.subs(values)
        if r.vars:
            raise ValueError(f"unassigned variables {r.vars} in {self}")
        return r.constant_value()

    def content(self) -> fmpq:
        """Positive rational gcd of the coefficients (0 for the zero polynomial)."""
        if self._p.is_zero():
            return fmpq(0)
        cs = self._p.coeffs()
        num = reduce(lambda a, b: a.gcd(b), (c.p for c in cs))
        den = reduce(lambda a, b: a * b // a.gcd(b), (c.q for c in cs))
        return fmpq(abs(num), den)

    def normalize(self) -> tuple[fmpq, Poly]:
        """Return ``(c, q)`` with ``self == c*q``, ``q`` primitive over Z and positive LC."""
        if self._p.is_zero():
            return fmpq(0), self
        c = self.content()
        if self.leading_coeff() < 0:
            c = -c
        return c, Poly(self._p * (1 / c), self.vars)

    def primitive(self) -> Poly:
        return self.normalize()[1]

    def to_flint(self, names: tuple[str, ...]) -> fmpq_mpoly:
        """This polynomial in the context ``names`` (must contain ``self.vars``)."""
        return self._lift(names)

    def to_upoly(self, v: str | None = None) -> fmpq_poly:
        """Univariate FLINT polynomial; ``self`` may only involve ``v``."""
        if not self.vars:
            return fmpq_poly([self.constant_value()])
        if len(self.vars) != 1 or (v is not None and self.vars[0] != v):
            raise ValueError(f"{self} is not univariate in {v}")
        coeffs = [fmpq(0)] * (self._p.degrees()[0] + 1)
        for exp, c in zip(self._p.monoms(), self._p.coeffs()):
            coeffs[exp[0]] = c
        return fmpq_poly(coeffs)

    # ---------------------------------------------------------------- dunder
    def __eq__(self, other) -> bool:
        if not isinstance(other, Poly):
            if isinstance(other, (int, fmpq, fmpz)):
                return not self.vars and self.constant_value() == other
            return NotImplemented
        return self.vars == other.vars and self._p == other._p

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.vars, tuple(self._p.monoms()),
                               tuple((c.p, c.q) for c in self._p.coeffs())))
        return self._hash

    def __bool__(self) -> bool:
        return not self._p.is_zero()

    def __repr__(self) -> str:
        return f"Poly({self})"

    def __str__(self) -> str:
        return str(self._p) if self.vars else str(self.constant_value())

    def sort_key(self):
        """Deterministic ordering key (degree-first, then structure)."""
        return (self.total_degree(), self.nterms(), self.vars,
                tuple(self._p.monoms()), tuple(str(c) for c in self._p.coeffs()))


def poly_vars(*names: str) -> tuple[Poly, ...]:
    return tuple(Poly.var(n) for n in names)


def common_names(*ps: Poly) -> tuple[str, ...]:
    return tuple(sorted(set().union(*(p.vars for p in ps))))


# --------------------------------------------------------------------------
# gcd / resultant / discriminant
# --------------------------------------------------------------------------

def gcd(p: Poly, q: Poly) -> Poly:
    """Primitive, positive-leading-coefficient gcd; ``gcd(0, 0) == 0``."""
    if p.is_zero():
        return q.primitive()
    if q.is_zero():
        return p.primitive()
    names = common_names(p, q)
    g = Poly(p.to_flint(names).gcd(q.to_flint(names)), names)
    return g.primitive()


def resultant(p: Poly, q: Poly, v: str) -> Poly:
    """Sylvester resultant w.r.t. ``v``.

    If one argument is free of ``v`` it is raised to the degree of the other
    (``res_v(p, c) = c**deg_v(p)``).
    """
    dp, dq = p.degree(v), q.degree(v)
    if p.is_zero() or q.is_zero():
        return Poly.const(0)
    if dq == 0:
        return q ** dp
    if dp == 0:
        return p ** dq
    names = common_names(p, q)
    return Poly(p.to_flint(names).resultant(q.to_flint(names), v), names)


def discriminant(p: Poly, v: str) -> Poly:
    """``(-1)^(n(n-1)/2) res_v(p, p') / lc_v(p)`` for ``n = deg_v(p) >= 2``."""
    n = p.degree(v)
    if n < 2:
        raise ValueError(f"discriminant needs degree >= 2 in {v}, got {n}")
    r = resultant(p, p.derivative(v), v)
    if (n * (n - 1) // 2) % 2:
        r = -r
    return r.exact_div(p.lc(v))


# --------------------------------------------------------------------------
# factorization
# --------------------------------------------------------------------------

def factor_irreducible(p: Poly) -> tuple[fmpq, list[tuple[Poly, int]]]:
    """Irreducible factorization over Q.

    Returns ``(c, [(f, m), ...])`` with every ``f`` primitive with positive
    leading coefficient and ``p == c * prod(f**m)``.  Factors are sorted
    deterministically.
    """
    if p.is_zero():
        raise ValueError("cannot factor the zero polynomial")
    if p.is_constant():
        return p.constant_value(), []
    c, fs = p._p.factor()
    const = fmpq(c)
    out = []
    for f, m in fs:
        fc, fp = Poly(f, p.vars).normalize()
        const *= fc ** m
        out.append((fp, int(m)))
    out.sort(key=lambda t: t[0].sort_key())
    return const, out


def irreducible_factors(p: Poly) -> list[Poly]:
    """Distinct non-constant irreducible factors of ``p``."""
    if p.is_zero() or p.is_constant():
        return []
    return [f for f, _ in factor_irreducible(p)[1]]


def squarefree_decomposition(p: Poly, v: str) -> tuple[Poly, list[tuple[Poly, int]]]:
    """Square-free decomposition in ``v``.

    Returns ``(content, [(f, m), ...])``: ``content`` collects everything free
    of ``v`` (rational constant included), the ``f`` are pairwise coprime,
    square-free in ``v``, and ``p == content * prod(f**m)``.
    """
    if p.is_zero():
        raise ValueError("square-free decomposition of the zero polynomial")
    c, fs = p._p.factor_squarefree()
    content = Poly.const(fmpq(c))
    by_mult: dict[int, Poly] = {}
    for f, m in fs:
        f = Poly(f, p.vars)
        if f.degree(v) <= 0:
            content = content * f ** int(m)
            continue
        by_mult[int(m)] = by_mult.get(int(m), Poly.const(1)) * f
    out = []
    for m in sorted(by_mult):
        fc, fp = by_mult[m].normalize()
        content = content * fc ** m
        out.append((fp, m))
    return content, out


def squarefree_factor(p: Poly, v: str) -> list[tuple[Poly, int]]:
    """Square-free factors in ``v`` with multiplicities (content dropped)."""
    return squarefree_decomposition(p, v)[1]


def squarefree_part(p: Poly) -> Poly:
    """Product of the distinct irreducible factors, normalized."""
    out = Poly.const(1)
    for f in irreducible_factors(p):
        out = out * f
    return out


# --------------------------------------------------------------------------
# Groebner bases (Buchberger, lex)
# --------------------------------------------------------------------------

def _lead(f: fmpq_mpoly) -> tuple[tuple[int, ...], fmpq]:
    return f.monoms()[0], f.coeffs()[0]


def _divides(a: tuple[int, ...], b: tuple[int, ...]) -> bool:
    return all(x <= y for x, y in zip(a, b))


def _reduce(f: fmpq_mpoly, basis: list[fmpq_mpoly]) -> fmpq_mpoly:
    """Full multivariate division remainder of ``f`` by ``basis``."""
    ctx = f.context()
    rem = ctx.constant(0)
    while not f.is_zero():
        m, c = _lead(f)
        for g in basis:
            gm, gc = _lead(g)
            if _divides(gm, m):
                shift = tuple(x - y for x, y in zip(m, gm))
                f = f - ctx.term(c / gc, shift) * g
                break
        else:
            lt = ctx.term(c, m)
            rem = rem + lt
            f = f - lt
    return rem


def groebner_basis(polys: Iterable[Poly], order: Sequence[str]) -> list[Poly]:
    """Reduced lex Groebner basis; ``order[0]`` is the most significant variable.

    Every variable occurring in ``polys`` must appear in ``order``.
    """
    names = tuple(order)
    ctx = _ctx(names)
    gens = [p.to_flint(names) for p in polys if not p.is_zero()]
    if not gens:
        return []
    basis: list[fmpq_mpoly] = []
    for g in gens:
        r = _reduce(g, basis)
        if not r.is_zero():
            basis.append(r)
    pairs = [(i, j) for j in range(len(basis)) for i in range(j)]
    while pairs:
        i, j = pairs.pop(0)
        (mi, ci), (mj, cj) = _lead(basis[i]), _lead(basis[j])
        lcm = tuple(max(a, b) for a, b in zip(mi, mj))
        # Buchberger's first criterion: coprime leading monomials.
        if all(a == 0 or b == 0 for a, b in zip(mi, mj)):
            continue
        s = (ctx.term(1 / ci, tuple(a - b for a, b in zip(lcm, mi))) * basis[i]
             - ctx.term(1 / cj, tuple(a - b for a, b in zip(lcm, mj))) * basis[j])
        r = _reduce(s, basis)
        if not r.is_zero():
            basis.append(r)
            k = len(basis) - 1
            pairs.extend((t, k) for t in range(k))
    # minimize
    basis = [g for i, g in enumerate(basis)
             if not any(_divides(_lead(h)[0], _lead(g)[0]) and (k < i or _lead(h)[0] != _lead(g)[0])
                        for k, h in enumerate(basis) if k != i)]
    # interreduce
    reduced = []
    for i, g in enumerate(basis):
        others = basis[:i] + basis[i + 1:]
        r = _reduce(g, others)
        reduced.append(r * (1 / _lead(r)[1]))
    out = [Poly(ctx_to_canonical(r, names)) for r in reduced]
    out = [q.primitive() for q in out]
    return sorted(out, key=lambda q: q.sort_key())


def ctx_to_canonical(f: fmpq_mpoly, names: tuple[str, ...]) -> fmpq_mpoly:
    """Move a polynomial from an arbitrary-order context into the sorted one."""
    canon = tuple(sorted(names))
    perm = [names.index(n) for n in canon]
    data = {tuple(e[k] for k in perm): c for e, c in f.to_dict().items()}
    return _ctx(canon).from_dict(data)


def reduce_by(p: Poly, basis: Sequence[Poly], order: Sequence[str]) -> Poly:
    """Remainder of ``p`` modulo ``basis`` under lex with the given order."""
    names = tuple(order)
    bs = [b.to_flint(names) for b in basis if not b.is_zero()]
    return Poly(ctx_to_canonical(_reduce(p.to_flint(names), bs), names))

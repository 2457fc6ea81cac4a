"""Tarski formulas, quantifier prefixes and the s-expression syntax.

Formulas are immutable trees.  Atoms compare a normalized polynomial with
zero: the left-hand side is primitive with positive leading coefficient, and
the relation is flipped whenever normalization negates the polynomial, so
syntactically equal atoms are semantically equal.

The smart constructors :func:`conj`, :func:`disj` and :func:`neg` flatten,
fold constants and keep negation at the atoms, so every formula built
through them is already in negation normal form.
"""
from __future__ import annotations

import re
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from typing import Union

from flint import fmpq

from .polycore import Poly, rat
from .realalg import AlgebraicPoint, compare

__all__ = [
    "RELATIONS", "Formula", "TrueF", "FalseF", "TRUE", "FALSE", "Atom", "And", "Or", "Not",
    "IndexedRoot", "ExtendedAtom", "QuantifiedFormula", "ParseError", "conj", "disj", "neg",
    "atom", "nnf", "parse", "parse_formula", "to_sexpr", "format_poly", "negate",
    "evaluate_ground", "simplify", "atoms", "polys", "formula_vars", "relation_holds",
    "extended_atoms",
]

RELATIONS = ("=", "!=", "<", "<=", ">", ">=")

# sets of signs of the left-hand side that satisfy each relation
_SIGNS = {
    "=": frozenset({0}), "!=": frozenset({-1, 1}), "<": frozenset({-1}),
    "<=": frozenset({-1, 0}), ">": frozenset({1}), ">=": frozenset({0, 1}),
}
_FROM_SIGNS = {v: k for k, v in _SIGNS.items()}
_FLIP = {"=": "=", "!=": "!=", "<": ">", "<=": ">=", ">": "<", ">=": "<="}
_NEGATE = {"=": "!=", "!=": "=", "<": ">=", "<=": ">", ">": "<=", ">=": "<"}


def relation_holds(rel: str, sign: int) -> bool:
    return sign in _SIGNS[rel]


class Formula:
    """Base class of quantifier-free formula nodes."""

    __slots__ = ()

    def __and__(self, other: Formula) -> Formula:
        return conj(self, other)

    def __or__(self, other: Formula) -> Formula:
        return disj(self, other)

    def __invert__(self) -> Formula:
        return neg(self)

    def __str__(self) -> str:
        return to_sexpr(self)


@dataclass(frozen=True, slots=True)
class TrueF(Formula):
    pass


@dataclass(frozen=True, slots=True)
class FalseF(Formula):
    pass


TRUE = TrueF()
FALSE = FalseF()


@dataclass(frozen=True, slots=True)
class Atom(Formula):
    """``lhs rel 0`` with a normalized, non-constant ``lhs``.  Build with :func:`atom`."""

    lhs: Poly
    rel: str

    @property
    def vars(self) -> tuple[str, ...]:
        return self.lhs.vars

    def holds(self, sign: int) -> bool:
        return sign in _SIGNS[self.rel]


@dataclass(frozen=True, slots=True)
class Not(Formula):
    """Only produced by the parser; :func:`nnf` removes it."""

    arg: Formula


@dataclass(frozen=True, slots=True)
class And(Formula):
    args: tuple[Formula, ...]


@dataclass(frozen=True, slots=True)
class Or(Formula):
    args: tuple[Formula, ...]


@dataclass(frozen=True, slots=True)
class IndexedRoot:
    """The ``index``-th real root (1-based, increasing) of ``poly`` in ``var``."""

    poly: Poly
    var: str
    index: int

    def __str__(self) -> str:
        return f"(root {self.index} {format_poly(self.poly)} {self.var})"


@dataclass(frozen=True, slots=True)
class ExtendedAtom(Formula):
    """``var rel bound`` where ``bound`` is an indexed root.  Output only."""

    var: str
    rel: str
    bound: IndexedRoot


# --------------------------------------------------------------------------
# construction
# --------------------------------------------------------------------------

def atom(p: Poly, rel: str) -> Formula:
    """Normalized atom ``p rel 0``; constant ``p`` folds to TRUE/FALSE."""
    if rel not in _SIGNS:
        raise ValueError(f"unknown relation {rel!r}")
    if p.is_constant():
        v = p.constant_value()
        return TRUE if ((v > 0) - (v < 0)) in _SIGNS[rel] else FALSE
    c, q = p.normalize()
    return Atom(q, rel if c > 0 else _FLIP[rel])


def _flatten(kind, args: Iterable[Formula]) -> Iterator[Formula]:
    for a in args:
        if isinstance(a, kind):
            yield from a.args
        else:
            yield a


def conj(*args: Formula) -> Formula:
    out: list[Formula] = []
    seen = set()
    for a in _flatten(And, args):
        if a is FALSE or isinstance(a, FalseF):
            return FALSE
        if isinstance(a, TrueF) or a in seen:
            continue
        seen.add(a)
        out.append(a)
    if not out:
        return TRUE
    return out[0] if len(out) == 1 else And(tuple(out))


def disj(*args: Formula) -> Formula:
    out: list[Formula] = []
    seen = set()
    for a in _flatten(Or, args):
        if isinstance(a, TrueF):
            return TRUE
        if isinstance(a, FalseF) or a in seen:
            continue
        seen.add(a)
        out.append(a)
    if not out:
        return FALSE
    return out[0] if len(out) == 1 else Or(tuple(out))


def neg(f: Formula) -> Formula:
    """Negation pushed down to the atoms (De Morgan)."""
    match f:
        case TrueF():
            return FALSE
        case FalseF():
            return TRUE
        case Atom(lhs, rel):
            return Atom(lhs, _NEGATE[rel])
        case ExtendedAtom(v, rel, b):
            return ExtendedAtom(v, _NEGATE[rel], b)
        case Not(arg):
            return nnf(arg)
        case And(args):
            return disj(*(neg(a) for a in args))
        case Or(args):
            return conj(*(neg(a) for a in args))
    raise TypeError(f"not a formula: {f!r}")


def nnf(f: Formula) -> Formula:
    match f:
        case Not(arg):
            return neg(arg)
        case And(args):
            return conj(*(nnf(a) for a in args))
        case Or(args):
            return disj(*(nnf(a) for a in args))
    return f


# --------------------------------------------------------------------------
# traversal
# --------------------------------------------------------------------------

def atoms(f: Formula) -> Iterator[Atom]:
    match f:
        case Atom():
            yield f
        case Not(arg):
            yield from atoms(arg)
        case And(args) | Or(args):
            for a in args:
                yield from atoms(a)


def polys(f: Formula) -> list[Poly]:
    """Distinct atom polynomials in order of first occurrence."""
    return list(dict.fromkeys(a.lhs for a in atoms(f)))


def formula_vars(f: Formula) -> set[str]:
    out: set[str] = set()
    for a in atoms(f):
        out.update(a.lhs.vars)
    for e in extended_atoms(f):
        out.add(e.var)
        out.update(e.bound.poly.vars)
    return out


def extended_atoms(f: Formula) -> Iterator[ExtendedAtom]:
    match f:
        case ExtendedAtom():
            yield f
        case Not(arg):
            yield from extended_atoms(arg)
        case And(args) | Or(args):
            for a in args:
                yield from extended_atoms(a)


def map_atoms(f: Formula, fn) -> Formula:
    """Rebuild ``f`` with every atom replaced by ``fn(atom)``."""
    match f:
        case Atom():
            return fn(f)
        case And(args):
            return conj(*(map_atoms(a, fn) for a in args))
        case Or(args):
            return disj(*(map_atoms(a, fn) for a in args))
        case Not(arg):
            return neg(map_atoms(arg, fn))
    return f


# --------------------------------------------------------------------------
# quantified formulas
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class QuantifiedFormula:
    """Prenex formula: ``blocks`` outermost first, each ``(q, vars)`` with q in {"exists", "forall"}."""

    blocks: tuple[tuple[str, tuple[str, ...]], ...]
    matrix: Formula
    free_vars: frozenset[str] = field(default=frozenset())

    def __post_init__(self):
        merged: list[tuple[str, tuple[str, ...]]] = []
        for q, vs in self.blocks:
            if q not in ("exists", "forall"):
                raise ValueError(f"unknown quantifier {q!r}")
            if not vs:
                continue
            if merged and merged[-1][0] == q:
                merged[-1] = (q, merged[-1][1] + tuple(vs))
            else:
                merged.append((q, tuple(vs)))
        object.__setattr__(self, "blocks", tuple(merged))
        bound = self.bound_vars
        if len(set(bound)) != len(bound):
            raise ValueError("a variable is quantified twice")
        free = (formula_vars(self.matrix) - set(bound)) | set(self.free_vars)
        object.__setattr__(self, "free_vars", frozenset(free - set(bound)))

    @property
    def bound_vars(self) -> tuple[str, ...]:
        return tuple(v for _, vs in self.blocks for v in vs)

    @property
    def alternations(self) -> int:
        return max(len(self.blocks) - 1, 0)

    @property
    def is_sentence(self) -> bool:
        return not self.free_vars

    def variables(self) -> tuple[str, ...]:
        """Free variables (sorted) followed by bound ones, outermost first."""
        return tuple(sorted(self.free_vars)) + self.bound_vars

    def negated(self) -> QuantifiedFormula:
        return negate(self)

    def __str__(self) -> str:
        return to_sexpr(self)


def negate(f: QuantifiedFormula | Formula):
    """``not f`` with the quantifiers flipped and the matrix in negation normal form."""
    if isinstance(f, Formula):
        return neg(f)
    flip = {"exists": "forall", "forall": "exists"}
    return QuantifiedFormula(tuple((flip[q], vs) for q, vs in f.blocks), neg(f.matrix), f.free_vars)


# --------------------------------------------------------------------------
# printing
# --------------------------------------------------------------------------

_REL_TEXT = {"=": "=", "!=": "/=", "<": "<", "<=": "<=", ">": ">", ">=": ">="}


def _format_rat(c: fmpq) -> str:
    return str(c.p) if c.q == 1 else f"{c.p}/{c.q}"


def format_poly(p: Poly) -> str:
    if p.is_constant():
        return _format_rat(p.constant_value())
    terms = []
    for mono, c in p.terms():
        factors = [v if e == 1 else f"(^ {v} {e})" for v, e in sorted(mono.items())]
        if c != 1 or not factors:
            factors.insert(0, _format_rat(c))
        terms.append(factors[0] if len(factors) == 1 else "(* " + " ".join(factors) + ")")
    return terms[0] if len(terms) == 1 else "(+ " + " ".join(terms) + ")"


def to_sexpr(f) -> str:
    match f:
        case QuantifiedFormula(blocks, matrix):
            out = to_sexpr(matrix)
            for q, vs in reversed(blocks):
                out = f"({q} ({' '.join(vs)}) {out})"
            return out
        case TrueF():
            return "true"
        case FalseF():
            return "false"
        case Atom(lhs, rel):
            return f"({_REL_TEXT[rel]} {format_poly(lhs)} 0)"
        case ExtendedAtom(v, rel, b):
            return f"({_REL_TEXT[rel]} {v} {b})"
        case Not(arg):
            return f"(not {to_sexpr(arg)})"
        case And(args):
            return "(and " + " ".join(to_sexpr(a) for a in args) + ")"
        case Or(args):
            return "(or " + " ".join(to_sexpr(a) for a in args) + ")"
    raise TypeError(f"cannot print {f!r}")


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------

class ParseError(ValueError):
    """Syntax error; ``pos`` is the character offset in the input."""

    def __init__(self, msg: str, pos: int):
        super().__init__(f"{msg} at position {pos}")
        self.pos = pos


_TOKEN = re.compile(r"\s*(?:(;[^\n]*)|(\()|(\))|([^\s()]+))")
_NUMBER = re.compile(r"^[+-]?\d+(?:/\d+)?$")
_SYMBOL = re.compile(r"^[A-Za-z_][A-Za-z0-9_.'!?]*$")

_Sexp = Union[str, list]


def _read(text: str) -> tuple[_Sexp, dict[int, int]]:
    """Read exactly one s-expression; returns it and a map id(list)->offset."""
    pos_of: dict[int, int] = {}
    stack: list[list] = []
    result = None
    i = 0
    n = len(text)
    while i < n:
        m = _TOKEN.match(text, i)
        if not m or m.end() == i:
            break
        start = m.start(2) if m.group(2) else m.start(3) if m.group(3) else m.start(4)
        i = m.end()
        if m.group(1) is not None:
            continue
        if result is not None:
            raise ParseError("trailing input", start)
        if m.group(2):
            node: list = []
            pos_of[id(node)] = start
            stack.append(node)
        elif m.group(3):
            if not stack:
                raise ParseError("unbalanced ')'", start)
            node = stack.pop()
            if stack:
                stack[-1].append(node)
            else:
                result = node
        else:
            tok = m.group(4)
            pos_of[id(tok)] = start
            if stack:
                stack[-1].append((tok, start))
            else:
                result = (tok, start)
    if text[i:].strip():
        raise ParseError("unexpected character", i)
    if stack:
        raise ParseError("missing ')'", len(text))
    if result is None:
        raise ParseError("empty input", 0)
    return result, pos_of


def _pos(node, pos_of) -> int:
    if isinstance(node, tuple):
        return node[1]
    return pos_of.get(id(node), 0)


_BOOL_OPS = {"and", "or", "not", "=>", "implies"}
_QUANTS = {"exists", "forall"}
_REL_PARSE = {"=": "=", "/=": "!=", "!=": "!=", "distinct": "!=", "<": "<", "<=": "<=", ">": ">", ">=": ">="}


def _term(node, pos_of) -> Poly:
    if isinstance(node, tuple):
        tok, p = node
        if _NUMBER.match(tok):
            return Poly.const(rat(tok))
        if _SYMBOL.match(tok) and tok not in _QUANTS and tok not in _BOOL_OPS:
            return Poly.var(tok)
        raise ParseError(f"bad term {tok!r}", p)
    if not node:
        raise ParseError("empty term", _pos(node, pos_of))
    head = node[0]
    if not isinstance(head, tuple):
        raise ParseError("operator expected", _pos(node, pos_of))
    op = head[0]
    args = node[1:]
    if op == "+":
        acc = Poly.const(0)
        for a in args:
            acc = acc + _term(a, pos_of)
        return acc
    if op == "-":
        if not args:
            raise ParseError("'-' needs an argument", head[1])
        first = _term(args[0], pos_of)
        if len(args) == 1:
            return -first
        for a in args[1:]:
            first = first - _term(a, pos_of)
        return first
    if op == "*":
        acc = Poly.const(1)
        for a in args:
            acc = acc * _term(a, pos_of)
        return acc
    if op == "^":
        if len(args) != 2 or not isinstance(args[1], tuple) or not re.match(r"^\d+$", args[1][0]):
            raise ParseError("'^' needs a base and a non-negative integer exponent", head[1])
        return _term(args[0], pos_of) ** int(args[1][0])
    if op == "/":
        if len(args) != 2:
            raise ParseError("'/' takes two arguments", head[1])
        den = _term(args[1], pos_of)
        if not den.is_constant() or den.constant_value() == 0:
            raise ParseError("non-polynomial term: division by a non-constant", head[1])
        return _term(args[0], pos_of).scale(1 / den.constant_value())
    raise ParseError(f"unknown operator {op!r}", head[1])


def _formula(node, pos_of, bound: dict[str, str], used: set[str]):
    """Return ``(prefix, matrix)`` with ``prefix`` a list of (q, var)."""
    if isinstance(node, tuple):
        tok, p = node
        if tok == "true":
            return [], TRUE
        if tok == "false":
            return [], FALSE
        raise ParseError(f"formula expected, got {tok!r}", p)
    if not node or not isinstance(node[0], tuple):
        raise ParseError("formula expected", _pos(node, pos_of))
    op, p = node[0]
    args = node[1:]
    if op in _QUANTS:
        if len(args) != 2 or isinstance(args[0], tuple):
            raise ParseError(f"({op} (vars) body) expected", p)
        inner = dict(bound)
        prefix = []
        for v in args[0]:
            if not isinstance(v, tuple) or not _SYMBOL.match(v[0]):
                raise ParseError("variable name expected", _pos(v, pos_of))
            name = v[0]
            fresh = name
            k = 1
            while fresh in used:
                fresh = f"{name}_{k}"
                k += 1
            used.add(fresh)
            inner[name] = fresh
            prefix.append((op, fresh))
        sub_prefix, matrix = _formula(args[1], pos_of, inner, used)
        return prefix + sub_prefix, matrix
    if op == "not":
        if len(args) != 1:
            raise ParseError("'not' takes one argument", p)
        sub_prefix, matrix = _formula(args[0], pos_of, bound, used)
        flip = {"exists": "forall", "forall": "exists"}
        return [(flip[q], v) for q, v in sub_prefix], neg(matrix)
    if op in ("and", "or"):
        prefix = []
        parts = []
        for a in args:
            sp, m = _formula(a, pos_of, bound, used)
            prefix += sp
            parts.append(m)
        return prefix, (conj if op == "and" else disj)(*parts)
    if op in ("=>", "implies"):
        if len(args) != 2:
            raise ParseError("'=>' takes two arguments", p)
        return _formula([("or", p), [("not", p), args[0]], args[1]], pos_of, bound, used)
    if op in _REL_PARSE:
        if len(args) != 2:
            raise ParseError(f"relation {op!r} takes two arguments", p)
        lhs = _term(args[0], pos_of) - _term(args[1], pos_of)
        lhs = _rename(lhs, bound)
        return [], atom(lhs, _REL_PARSE[op])
    raise ParseError(f"unknown connective {op!r}", p)


def _rename(p: Poly, bound: Mapping[str, str]) -> Poly:
    for old in p.vars:
        new = bound.get(old, old)
        if new != old:
            p = p.substitute(old, Poly.var(new))
    return p


def _symbols(node) -> set[str]:
    if isinstance(node, tuple):
        return {node[0]} if _SYMBOL.match(node[0]) else set()
    out: set[str] = set()
    for n in node:
        out |= _symbols(n)
    return out


def parse(text: str) -> QuantifiedFormula:
    """Parse an s-expression formula and bring it to prenex form.

    Bound variables that clash with free variables or with other bound
    variables are renamed with a numeric suffix.
    """
    tree, pos_of = _read(text)
    # free names are reserved so that renamed bound variables never capture them
    free = _free_names(tree, set())
    used = set(free)
    prefix, matrix = _formula(tree, pos_of, {}, used)
    blocks = tuple((q, (v,)) for q, v in prefix)
    return QuantifiedFormula(blocks, matrix)


_KEYWORDS = _QUANTS | _BOOL_OPS | {"true", "false", "root"}


def _free_names(node, bound: set[str]) -> set[str]:
    if isinstance(node, tuple):
        tok = node[0]
        if _SYMBOL.match(tok) and tok not in _KEYWORDS and tok not in bound:
            return {tok}
        return set()
    if node and isinstance(node[0], tuple) and node[0][0] in _QUANTS and len(node) == 3 \
            and isinstance(node[1], list):
        names = {v[0] for v in node[1] if isinstance(v, tuple)}
        return _free_names(node[2], bound | names)
    out: set[str] = set()
    for n in node:
        out |= _free_names(n, bound)
    return out


def parse_formula(text: str) -> Formula:
    """Parse a quantifier-free formula."""
    q = parse(text)
    if q.blocks:
        raise ParseError("quantifier-free formula expected", 0)
    return q.matrix


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------

def _as_point(point) -> AlgebraicPoint:
    if isinstance(point, AlgebraicPoint):
        return point
    return AlgebraicPoint.from_map(point)


def evaluate_ground(f: Formula, point) -> bool:
    """Truth of ``f`` at a point given as a map var -> number or an :class:`AlgebraicPoint`."""
    pt = _as_point(point)
    return _eval(f, pt, {})


def _eval(f: Formula, pt: AlgebraicPoint, cache: dict) -> bool:
    match f:
        case TrueF():
            return True
        case FalseF():
            return False
        case Atom(lhs, rel):
            s = cache.get(lhs)
            if s is None:
                s = cache[lhs] = pt.sign(lhs)
            return s in _SIGNS[rel]
        case Not(arg):
            return not _eval(arg, pt, cache)
        case And(args):
            return all(_eval(a, pt, cache) for a in args)
        case Or(args):
            return any(_eval(a, pt, cache) for a in args)
        case ExtendedAtom(v, rel, b):
            return _eval_extended(v, rel, b, pt)
    raise TypeError(f"not a formula: {f!r}")


def _eval_extended(v: str, rel: str, b: IndexedRoot, pt: AlgebraicPoint) -> bool:
    if v not in pt.vars:
        raise KeyError(f"unassigned variable {v}")
    others = [w for w in pt.vars if w != v and w in b.poly.vars]
    base = AlgebraicPoint.from_map({w: pt.as_map()[w] for w in others}, order=others)
    roots = base.real_roots(b.poly, b.var)
    if b.index > len(roots):
        return False
    value = pt.as_map()[v]
    return compare(value, roots[b.index - 1]) in _SIGNS[rel]


# --------------------------------------------------------------------------
# simplification
# --------------------------------------------------------------------------

def _definite_signs(p: Poly) -> frozenset[int]:
    """Signs ``p`` can take, from a sum-of-even-monomials check."""
    terms = p.terms()
    if all(all(e % 2 == 0 for e in mono.values()) for mono, _ in terms):
        cs = [c for _, c in terms]
        has_const = any(not mono for mono, _ in terms)
        if all(c > 0 for c in cs):
            return frozenset({1}) if has_const else frozenset({0, 1})
        if all(c < 0 for c in cs):
            return frozenset({-1}) if has_const else frozenset({-1, 0})
    return frozenset({-1, 0, 1})


def _combine(args: Iterable[Formula], is_and: bool) -> Formula:
    """Merge atoms on the same polynomial within one conjunction/disjunction."""
    allowed: dict[Poly, frozenset[int]] = {}
    order: list[object] = []
    others: list[Formula] = []
    for a in args:
        if isinstance(a, Atom):
            s = _SIGNS[a.rel]
            if a.lhs in allowed:
                allowed[a.lhs] = (allowed[a.lhs] & s) if is_and else (allowed[a.lhs] | s)
            else:
                allowed[a.lhs] = s
                order.append(a.lhs)
        else:
            order.append(len(others))
            others.append(a)
    out: list[Formula] = []
    for key in order:
        if isinstance(key, int):
            out.append(others[key])
            continue
        possible = _definite_signs(key)
        s = allowed[key] & possible
        if not s:
            if is_and:
                return FALSE
            continue
        if s == possible:
            if not is_and:
                return TRUE
            continue
        out.append(Atom(key, _FROM_SIGNS[s]))
    return (conj if is_and else disj)(*out)


def simplify(f: Formula) -> Formula:
    """Sound, incomplete simplification: constants, duplicates, same-polynomial atom merging."""
    match f:
        case Not(arg):
            return simplify(neg(arg))
        case Atom():
            return _combine([f], True)
        case And(args):
            parts = conj(*(simplify(a) for a in args))
            if not isinstance(parts, And):
                return parts
            merged = _combine(parts.args, True)
            if not isinstance(merged, And):
                return merged
            substituted = _substitute_values(merged)
            if substituted is not None:
                return simplify(substituted)
            return _absorb(merged, And)
        case Or(args):
            parts = disj(*(simplify(a) for a in args))
            if not isinstance(parts, Or):
                return parts
            merged = _combine(parts.args, False)
            return _absorb(merged, Or) if isinstance(merged, Or) else merged
    return f


def _absorb(f: Formula, kind) -> Formula:
    """Drop children subsumed by a sibling: ``a & (a | b)`` -> ``a``, and dually."""
    inner = Or if kind is And else And
    direct = {a for a in f.args if not isinstance(a, inner)}
    keep = []
    for a in f.args:
        if isinstance(a, inner) and any(x in direct for x in a.args):
            continue
        keep.append(a)
    return (conj if kind is And else disj)(*keep)


def _substitute_values(f: And) -> Formula | None:
    """Use conjuncts ``x = q`` (q rational) to eliminate ``x`` from the other conjuncts."""
    values: dict[str, fmpq] = {}
    defining: set[Formula] = set()
    for a in f.args:
        if isinstance(a, Atom) and a.rel == "=" and len(a.lhs.vars) == 1:
            v = a.lhs.vars[0]
            if a.lhs.degree(v) == 1 and v not in values:
                c0, c1 = a.lhs.coeffs_in(v)
                values[v] = -c0.constant_value() / c1.constant_value()
                defining.add(a)
    if not values:
        return None
    changed = False
    out = []
    for a in f.args:
        if a in defining or not (formula_vars(a) & values.keys()):
            out.append(a)
            continue
        changed = True
        out.append(map_atoms(a, lambda at: atom(at.lhs.subs(values), at.rel)))
    return conj(*out) if changed else None

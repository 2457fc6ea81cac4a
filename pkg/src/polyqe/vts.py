"""Virtual term substitution for variables of degree at most two.

A block ``Q x1..xk`` is eliminated one variable at a time.  For the chosen
variable every irreducible factor of degree one or two contributes its
roots (for weak relations) or its roots plus an infinitesimal (for strict
ones); together with minus infinity these test points cover every connected
component of the solution set.  Substituting them virtually yields the
children of an IQER node.  Nodes whose remaining variables all have a factor
of degree three or more stall and are handed to the caller.
"""
from __future__ import annotations

import itertools
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

from .formula import (FALSE, TRUE, Atom, Formula, atom, atoms, conj, disj, extended_atoms,
                      formula_vars, map_atoms, neg, simplify)
from .polycore import Poly, factor_irreducible

__all__ = [
    "TestPoint", "IQER", "VtsTree", "BlockOutcome", "eligible_var", "candidate_testpoints",
    "vsub", "eliminate_one", "run_block", "prewitness", "Prewitness", "NotTarski",
]

_WEAK = {"=", "<=", ">="}


class NotTarski(ValueError):
    """The matrix compares a variable with an indexed root, i.e. an algebraic coefficient."""

_ZERO = Poly.const(0)
_ONE = Poly.const(1)


@dataclass(frozen=True)
class TestPoint:
    """``(num + coef*sqrt(rad)) / den`` for ``var``, possibly ``+eps``, or minus infinity."""

    var: str
    kind: str  # "-inf", "root" or "root+eps"
    num: Poly = _ZERO
    coef: Poly = _ZERO
    rad: Poly = _ZERO
    den: Poly = _ONE
    guard: Formula = TRUE

    @property
    def is_radical(self) -> bool:
        return not self.coef.is_zero()

    @property
    def has_eps(self) -> bool:
        return self.kind == "root+eps"

    def __str__(self) -> str:
        if self.kind == "-inf":
            return f"{self.var} -> -oo"
        val = f"({self.num}"
        if self.is_radical:
            val += f" + ({self.coef})*sqrt({self.rad})"
        val += f")/({self.den})"
        return f"{self.var} -> {val}{' + eps' if self.has_eps else ''}"


# --------------------------------------------------------------------------
# eligibility and test points
# --------------------------------------------------------------------------

class _Factors:
    """Memo of irreducible factorizations shared by one elimination run."""

    def __init__(self):
        self._memo: dict[Poly, list[Poly]] = {}

    def __call__(self, p: Poly) -> list[Poly]:
        fs = self._memo.get(p)
        if fs is None:
            fs = [f for f, _ in factor_irreducible(p)[1]]
            self._memo[p] = fs
        return fs


def _max_factor_degree(f: Formula, v: str, factors: _Factors) -> int:
    deg = 0
    for a in atoms(f):
        if v in a.lhs.vars:
            for g in factors(a.lhs):
                deg = max(deg, g.degree(v))
    return deg


def eligible_var(f: Formula, qvars: Sequence[str], factors: _Factors | None = None) -> str | None:
    """Last variable of ``qvars`` whose irreducible factors all have degree <= 2 in it.

    Variables that do not occur are skipped (they are eliminated trivially).
    """
    factors = factors or _Factors()
    present = formula_vars(f)
    for v in reversed(qvars):
        if v in present and _max_factor_degree(f, v, factors) <= 2:
            return v
    return None


def candidate_testpoints(f: Formula, v: str, factors: _Factors | None = None) -> list[TestPoint]:
    """Elimination set for ``exists v. f``: minus infinity, then per-factor points in atom order."""
    factors = factors or _Factors()
    points = [TestPoint(v, "-inf")]
    seen: set[tuple] = set()
    for a in atoms(f):
        if v not in a.lhs.vars:
            continue
        kind = "root" if a.rel in _WEAK else "root+eps"
        for g in factors(a.lhs):
            d = g.degree(v)
            if d == 0:
                continue
            if d > 2:
                raise ValueError(f"{v} is not eligible: factor {g} has degree {d}")
            key = (g, kind)
            if key in seen:
                continue
            seen.add(key)
            points.extend(_factor_points(g, v, kind))
    return points


def _factor_points(g: Poly, v: str, kind: str) -> list[TestPoint]:
    cs = g.coeffs_in(v)
    if len(cs) == 2:
        b, a = cs
        return [TestPoint(v, kind, num=-b, den=a, guard=atom(a, "!="))]
    c, b, a = cs
    out = []
    disc = b * b - a * c * 4
    guard = conj(atom(a, "!="), atom(disc, ">="))
    if guard != FALSE:
        for sgn in (1, -1):
            out.append(TestPoint(v, kind, num=-b, coef=Poly.const(sgn), rad=disc,
                                 den=a * 2, guard=guard))
    if not b.is_zero():
        dguard = conj(atom(a, "="), atom(b, "!="))
        if dguard != FALSE:
            out.append(TestPoint(v, kind, num=-c, den=b, guard=dguard))
    return out


# --------------------------------------------------------------------------
# virtual substitution
# --------------------------------------------------------------------------

def _radical_parts(p: Poly, v: str, t: TestPoint) -> tuple[Poly, Poly]:
    """``(A, B)`` with ``sign p(t) = sign(A + B*sqrt(rad))`` whenever ``den != 0``."""
    cs = p.coeffs_in(v)
    n = len(cs) - 1
    if n <= 0:
        return p, _ZERO
    P, Q, R, S = t.num, t.coef, t.rad, t.den
    A = _ZERO
    B = _ZERO
    X, Y = _ONE, _ZERO
    spow = [_ONE]
    for _ in range(n):
        spow.append(spow[-1] * S)
    for i, c in enumerate(cs):
        if not c.is_zero():
            w = c * spow[n - i]
            A = A + w * X
            if not Y.is_zero():
                B = B + w * Y
        if i < n:
            if Q.is_zero():
                X = X * P
            else:
                X, Y = X * P + Y * Q * R, X * Q + Y * P
    if n % 2 == 1 and not S.is_constant():
        A, B = A * S, B * S
    elif n % 2 == 1 and S.constant_value() < 0:
        A, B = -A, -B
    return A, B


def _sqrt_relation(A: Poly, B: Poly, R: Poly, rel: str) -> Formula:
    """``A + B*sqrt(R) rel 0`` assuming ``R >= 0``."""
    if B.is_zero():
        return atom(A, rel)
    D = A * A - B * B * R
    if rel == "=":
        return conj(atom(A * B, "<="), atom(D, "="))
    if rel == "!=":
        return neg(_sqrt_relation(A, B, R, "="))
    if rel in (">", ">="):
        return _sqrt_relation(-A, -B, R, "<" if rel == ">" else "<=")
    if rel == "<":
        return disj(conj(atom(A, "<"), atom(D, ">")),
                    conj(atom(B, "<"), disj(atom(A, "<"), atom(D, "<"))))
    return disj(conj(atom(A, "<="), atom(D, ">=")),
                conj(atom(B, "<"), disj(atom(A, "<="), atom(D, "<="))))


def _sub_root(p: Poly, v: str, t: TestPoint, rel: str) -> Formula:
    A, B = _radical_parts(p, v, t)
    return _sqrt_relation(A, B, t.rad, rel)


def _identically_zero(p: Poly, v: str) -> Formula:
    return conj(*(atom(c, "=") for c in p.coeffs_in(v)))


def _sub_eps(p: Poly, v: str, t: TestPoint, rel: str) -> Formula:
    if rel == "=":
        return _identically_zero(p, v)
    if rel == "!=":
        return neg(_identically_zero(p, v))
    if rel in ("<=", ">="):
        return disj(_sub_eps(p, v, t, rel[0]), _identically_zero(p, v))

    def strict(q: Poly) -> Formula:
        if q.degree(v) <= 0:
            return atom(q, rel)
        return disj(_sub_root(q, v, t, rel),
                    conj(_sub_root(q, v, t, "="), strict(q.derivative(v))))

    return strict(p)


def _sub_minf(p: Poly, v: str, rel: str) -> Formula:
    cs = p.coeffs_in(v)
    if rel == "=":
        return _identically_zero(p, v)
    if rel == "!=":
        return neg(_identically_zero(p, v))
    if rel in ("<=", ">="):
        return disj(_sub_minf(p, v, rel[0]), _identically_zero(p, v))

    def strict(n: int) -> Formula:
        c = cs[n]
        if n == 0:
            return atom(c, rel)
        lead = c if n % 2 == 0 else -c
        return disj(atom(lead, rel), conj(atom(c, "="), strict(n - 1)))

    return strict(len(cs) - 1)


def _vsub_atom(a: Atom, v: str, t: TestPoint) -> Formula:
    if v not in a.lhs.vars:
        return a
    if t.kind == "-inf":
        return _sub_minf(a.lhs, v, a.rel)
    if t.kind == "root+eps":
        return _sub_eps(a.lhs, v, t, a.rel)
    return _sub_root(a.lhs, v, t, a.rel)


def vsub(f: Formula, v: str, t: TestPoint) -> Formula:
    """Virtual substitution of ``t`` for ``v``; valid wherever ``t.guard`` holds."""
    if t.var != v:
        raise ValueError(f"test point for {t.var} used for {v}")
    return map_atoms(f, lambda a: _vsub_atom(a, v, t))


# --------------------------------------------------------------------------
# the IQER tree
# --------------------------------------------------------------------------

_ids = itertools.count()


@dataclass(eq=False)
class IQER:
    """Node of the elimination tree: ``Q qvars. formula`` within the current block.

    ``formula`` is stated in the block's own polarity: for a universal block
    the node means ``forall qvars. formula``.
    """

    formula: Formula
    qvars: tuple[str, ...]
    level: int = 0
    path: tuple[TestPoint, ...] = ()
    eligible: bool = True
    var: str | None = None
    uid: int = field(default_factory=lambda: next(_ids))
    quantifier_free_equivalent: Formula | None = None

    @property
    def is_leaf(self) -> bool:
        return not self.qvars

    def polys(self) -> list[Poly]:
        return list(dict.fromkeys(a.lhs for a in atoms(self.formula)))


@dataclass
class VtsTree:
    root: IQER
    quantifier: str  # "exists" or "forall"
    block_vars: tuple[str, ...]
    children: dict[int, list[IQER]] = field(default_factory=dict)
    factors: _Factors = field(default_factory=_Factors)
    expansions: int = 0

    @classmethod
    def for_block(cls, quantifier: str, block_vars: Sequence[str], matrix: Formula) -> VtsTree:
        if any(True for _ in extended_atoms(matrix)):
            raise NotTarski("matrix has indexed-root bounds")
        root = _make_node(matrix, tuple(block_vars), len(block_vars), (), None)
        return cls(root, quantifier, tuple(block_vars))

    @property
    def absorbing(self) -> Formula:
        return TRUE if self.quantifier == "exists" else FALSE

    @property
    def neutral(self) -> Formula:
        return FALSE if self.quantifier == "exists" else TRUE

    def combine(self, parts: Iterable[Formula]) -> Formula:
        return disj(*parts) if self.quantifier == "exists" else conj(*parts)


def _make_node(formula: Formula, qvars: tuple[str, ...], nblock: int,
               path: tuple[TestPoint, ...], factors: _Factors | None) -> IQER:
    present = formula_vars(formula)
    remaining = tuple(v for v in qvars if v in present)
    var = eligible_var(formula, remaining, factors) if remaining else None
    node = IQER(formula, remaining, nblock - len(remaining), path, eligible=(var is not None) or not remaining,
                var=var)
    if not remaining:
        node.quantifier_free_equivalent = formula
    return node


def eliminate_one(node: IQER, tree: VtsTree) -> list[IQER]:
    """Children of an eligible node; non-contributing and duplicate children are dropped."""
    v = node.var
    if v is None:
        raise ValueError("node is not eligible")
    tree.expansions += 1
    exists = tree.quantifier == "exists"
    body = node.formula if exists else neg(node.formula)
    rest = tuple(w for w in node.qvars if w != v)
    out: list[IQER] = []
    seen: set[Formula] = set()
    for t in candidate_testpoints(body, v, tree.factors):
        sub = vsub(body, v, t)
        child = simplify(conj(t.guard, sub))
        if not exists:
            child = neg(child)
        if child == tree.neutral or child in seen:
            continue
        seen.add(child)
        out.append(_make_node(child, rest, len(tree.block_vars), node.path + (t,), tree.factors))
        if child == tree.absorbing:
            break
    tree.children[node.uid] = out
    return out


@dataclass
class BlockOutcome:
    """Result of running one block: ``resolved`` or the leaves/stalled decomposition."""

    quantifier: str
    leaves: list[IQER]
    stalled: list[IQER]
    resolved: Formula | None
    tree: VtsTree
    absorbed_by: IQER | None = None

    @property
    def is_resolved(self) -> bool:
        return self.resolved is not None


def run_block(tree: VtsTree, traversal: str = "depth", deadline=None) -> BlockOutcome:
    """Expand every eligible node; stop early on the block's absorbing value."""
    leaves: list[IQER] = []
    stalled: list[IQER] = []
    frontier = [tree.root]
    while frontier:
        if deadline is not None:
            deadline.check()
        node = frontier.pop() if traversal == "depth" else frontier.pop(0)
        if node.is_leaf:
            if node.formula == tree.absorbing:
                return BlockOutcome(tree.quantifier, [node], [], tree.absorbing, tree, node)
            leaves.append(node)
            continue
        if node.var is None:
            stalled.append(node)
            continue
        children = eliminate_one(node, tree)
        if traversal == "depth":
            frontier.extend(reversed(children))
        else:
            frontier.extend(children)
    resolved = None
    if not stalled:
        resolved = simplify(tree.combine(n.formula for n in leaves))
    return BlockOutcome(tree.quantifier, leaves, stalled, resolved, tree)


# --------------------------------------------------------------------------
# prewitnesses
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Prewitness:
    """Symbolic assignment: test points ordered from the first eliminated variable."""

    steps: tuple[TestPoint, ...]

    def as_dict(self) -> dict[str, TestPoint]:
        return {t.var: t for t in self.steps}

    def __str__(self) -> str:
        return "; ".join(str(t) for t in self.steps)


def prewitness(path: Sequence[TestPoint]) -> Prewitness:
    return Prewitness(tuple(path))

"""Cells, stack construction, partial CAD and incremental extension."""
from __future__ import annotations

import json
from collections.abc import Iterator, Sequence
from dataclasses import asdict, dataclass
from functools import cmp_to_key

from ..formula import (And, Atom, ExtendedAtom, FalseF, Formula, Not, Or, QuantifiedFormula, TrueF,
                       evaluate_ground, extended_atoms, polys)
from ..polycore import Poly
from ..realalg import (AlgebraicPoint, RealAlgebraicNumber, compare, kp_real_roots,
                       simplest_between)
from .projection import Projection

__all__ = [
    "Cell", "CadData", "CadStats", "Curtain", "RequiresNewCad", "lazard_eval", "lift_stack",
    "detect_curtain", "partial_cad", "extend_cad", "select_ec", "check_refines",
]


class Curtain(Exception):
    """An equational constraint vanished on a whole fibre over a cell that is not a point."""

    def __init__(self, kind: str, poly: Poly, cell: Cell):
        super().__init__(f"{kind} of {poly} over cell {cell.index}")
        self.kind = kind
        self.poly = poly
        self.cell = cell


class RequiresNewCad(ValueError):
    """The incoming formula has free variables the CAD does not know."""


@dataclass
class CadStats:
    proj_poly_count: int = 0
    ec_count: int = 0
    cells_total: int = 0
    cells_leaf: int = 0
    true_cells: int = 0
    curtain_events: int = 0
    point_curtains: int = 0
    builds: int = 0
    extensions: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


# --------------------------------------------------------------------------
# cells
# --------------------------------------------------------------------------

Bound = tuple[Poly, int]


class Cell:
    """A CAD cell.  ``level`` counts the assigned coordinates (the root has level 0)."""

    __slots__ = ("parent", "pos", "level", "value", "_sample", "kind", "section", "lower", "upper",
                 "children", "truth", "roots", "lifted", "full_top", "signs")

    def __init__(self, parent: Cell | None, pos: int, value: RealAlgebraicNumber | None,
                 kind: str = "root", section: Bound | None = None,
                 lower: Bound | None = None, upper: Bound | None = None):
        self.parent = parent
        self.pos = pos
        self.level = 0 if parent is None else parent.level + 1
        self.value = value
        self._sample: AlgebraicPoint | None = AlgebraicPoint() if parent is None else None
        self.kind = kind
        self.section = section
        self.lower = lower
        self.upper = upper
        self.children: list[Cell] | None = None
        self.truth: bool | None = None
        self.roots: list[tuple[RealAlgebraicNumber, Poly, int]] = []
        self.lifted: tuple[Poly, ...] = ()
        self.full_top = False
        self.signs: dict[Poly, int] = {}

    def sample_in(self, order: Sequence[str]) -> AlgebraicPoint:
        if self._sample is None:
            self._sample = self.parent.sample_in(order).extend(order[self.level - 1], self.value)
        return self._sample

    @property
    def index(self) -> tuple[int, ...]:
        out = []
        c = self
        while c.parent is not None:
            out.append(c.pos)
            c = c.parent
        return tuple(reversed(out))

    def is_point(self) -> bool:
        return all(i % 2 == 0 for i in self.index)

    def walk(self) -> Iterator[Cell]:
        yield self
        for c in self.children or ():
            yield from c.walk()

    def ancestors(self) -> list[Cell]:
        out = []
        c = self
        while c.parent is not None:
            out.append(c)
            c = c.parent
        return list(reversed(out))

    def __repr__(self) -> str:
        return f"Cell{self.index}({self.kind}, truth={self.truth})"


def lazard_eval(f: Poly, point: AlgebraicPoint, var: str):
    """Univariate (over the point's field) Lazard evaluation of ``f``."""
    return point.lazard_upoly(f, var)[0]


def _sort_roots(entries):
    entries.sort(key=cmp_to_key(lambda a, b: compare(a[0], b[0])))
    out = []
    for e in entries:
        if out and compare(out[-1][0], e[0]) == 0:
            continue
        out.append(e)
    return out


def _roots_of(point: AlgebraicPoint, polys: Sequence[Poly], var: str):
    entries = []
    nullified = []
    for f in polys:
        u, nul = point.lazard_upoly(f, var)
        if nul:
            nullified.append(f)
        for k, r in enumerate(kp_real_roots(point.field, u), 1):
            entries.append((r, f, k))
    return entries, nullified


def _between(a: RealAlgebraicNumber | None, b: RealAlgebraicNumber | None):
    if a is not None and b is not None:
        while not a.hi < b.lo:
            if not a.is_rational and (b.is_rational or a.hi - a.lo >= b.hi - b.lo):
                a = a.bisect()
            else:
                b = b.bisect()
    return simplest_between(None if a is None else a.hi, None if b is None else b.lo)


def _build_children(parent: Cell, roots, reuse: list | None = None) -> list[Cell]:
    reuse = reuse if reuse is not None else []
    children: list[Cell] = []
    bounds = [None] + list(roots) + [None]
    for i in range(len(roots) + 1):
        lo, hi = bounds[i], bounds[i + 1]
        key = ("sector", None if lo is None else lo[0], None if hi is None else hi[0])
        cell = _take(reuse, key)
        if cell is None:
            q = _between(None if lo is None else lo[0], None if hi is None else hi[0])
            cell = Cell(parent, 0, RealAlgebraicNumber.from_rational(q), "sector",
                        lower=None if lo is None else (lo[1], lo[2]),
                        upper=None if hi is None else (hi[1], hi[2]))
        cell.pos = len(children) + 1
        children.append(cell)
        if hi is not None:
            cell = _take(reuse, ("section", hi[0]))
            if cell is None:
                cell = Cell(parent, 0, hi[0], "section", section=(hi[1], hi[2]))
            cell.pos = len(children) + 1
            children.append(cell)
    return children


def _take(reuse: list, key):
    for i, (k, cell) in enumerate(reuse):
        if k[0] != key[0]:
            continue
        if key[0] == "section":
            hit = compare(k[1], key[1]) == 0
        else:
            hit = _same(k[1], key[1]) and _same(k[2], key[2])
        if hit:
            del reuse[i]
            return cell
    return None


def _same(a, b) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return compare(a, b) == 0


def lift_stack(parent: Cell, level_polys: Sequence[Poly], var: str,
               order: Sequence[str] | None = None) -> list[Cell]:
    """Children of ``parent`` for ``var``: ``2k+1`` cells for ``k`` distinct roots."""
    order = list(order) if order is not None else None
    point = parent.sample_in(order) if order is not None else parent._sample
    entries, _ = _roots_of(point, level_polys, var)
    roots = _sort_roots(entries)
    parent.roots = roots
    parent.lifted = tuple(level_polys)
    parent.children = _build_children(parent, roots)
    return parent.children


def detect_curtain(f: Poly, parent: Cell, var: str, order: Sequence[str]) -> str:
    """``"none"``, ``"point_curtain"`` or ``"other_curtain"`` for ``f`` over ``parent``."""
    point = parent.sample_in(order)
    vanishes = False
    if f.degree(var) <= 0:
        vanishes = point.is_zero(f)
    else:
        vanishes = not point.upoly(f, var)
    if not vanishes:
        return "none"
    return "point_curtain" if parent.is_point() else "other_curtain"


# --------------------------------------------------------------------------
# equational constraints
# --------------------------------------------------------------------------

def select_ec(matrix: Formula, top: str, quantifier: str | None, multiple: bool = False):
    """EC of ``matrix`` in ``top``: lowest degree in ``top``, then fewest terms.

    For a universally quantified top variable a disjunct ``e != 0`` plays the
    dual role.  Returns a list (all candidates when ``multiple``) or ``[]``.
    """
    if quantifier == "forall":
        parts = matrix.args if isinstance(matrix, Or) else (matrix,)
        rel = "!="
    else:
        parts = matrix.args if isinstance(matrix, And) else (matrix,)
        rel = "="
    cands = [a.lhs for a in parts if isinstance(a, Atom) and a.rel == rel and a.lhs.degree(top) > 0]
    cands = list(dict.fromkeys(cands))
    cands.sort(key=lambda p: (p.degree(top), p.nterms()))
    if multiple:
        return cands
    return cands[:1]


def check_refines(order: Sequence[str], problem: QuantifiedFormula) -> bool:
    rank = {v: 0 for v in problem.free_vars}
    for i, (_, vs) in enumerate(problem.blocks, 1):
        for v in vs:
            rank[v] = i
    seq = [rank[v] for v in order if v in rank]
    return set(rank) <= set(order) and all(a <= b for a, b in zip(seq, seq[1:]))


# --------------------------------------------------------------------------
# the partial CAD
# --------------------------------------------------------------------------

class _Fallback(Exception):
    pass


class CadData:
    """A (partial) CAD together with the formula it currently answers."""

    def __init__(self, order: Sequence[str], quants: Sequence[str | None], ec_mode: str = "single",
                 deadline=None):
        self.order = list(order)
        self.quants = list(quants)
        self.ec_mode = ec_mode
        self.deadline = deadline
        self.proj = Projection(self.order)
        self.proj.tick = self._tick
        self.root = Cell(None, 0, None)
        self.problem: QuantifiedFormula | None = None
        self.stats = CadStats()
        self.ecs_used: list[Poly] = []
        self.unverified = False
        self._ec_for_projection: Poly | None = None
        self._building = False

    # -------------------------------------------------------------- helpers
    @property
    def n(self) -> int:
        return len(self.order)

    @property
    def n_free(self) -> int:
        return sum(1 for q in self.quants if q is None)

    def sample(self, cell: Cell) -> AlgebraicPoint:
        return cell.sample_in(self.order)

    def _tick(self):
        if self.deadline is not None:
            self.deadline.check()

    def _sign(self, cell: Cell, p: Poly) -> int:
        s = cell.signs.get(p)
        if s is None:
            s = cell.signs[p] = self.sample(cell).sign(p)
        return s

    def _eval3(self, f: Formula, cell: Cell, assigned: set[str]) -> bool | None:
        match f:
            case TrueF():
                return True
            case FalseF():
                return False
            case Atom(lhs, rel):
                if not set(lhs.vars) <= assigned:
                    return None
                return a_holds(rel, self._sign(cell, lhs))
            case And(args):
                res = True
                for a in args:
                    t = self._eval3(a, cell, assigned)
                    if t is False:
                        return False
                    if t is None:
                        res = None
                return res
            case Or(args):
                res = False
                for a in args:
                    t = self._eval3(a, cell, assigned)
                    if t is True:
                        return True
                    if t is None:
                        res = None
                return res
            case Not(arg):
                t = self._eval3(arg, cell, assigned)
                return None if t is None else not t
            case ExtendedAtom(v, _, b):
                if v != b.var or any(self.order.index(w) > self.order.index(v) for w in b.poly.vars):
                    # root order is only invariant if the bound variable is projected first
                    raise ValueError(f"indexed root in {v} needs {v} after {b.poly.vars}")
                if v not in assigned:
                    return None
                return evaluate_ground(f, self.sample(cell))
        raise TypeError(f"cannot evaluate {f!r}")

    # -------------------------------------------------------------- lifting
    def _lifting_set(self, cell: Cell) -> list[Poly]:
        k = cell.level
        lv = list(self.proj.levels[k])
        if k == self.n - 1 and self.proj.reduced and cell.full_top:
            lv += [p for p in self.proj.top_others if p not in lv]
        return lv

    def _check_curtain(self, cell: Cell) -> None:
        """Reduced top level: detect curtains of the EC over ``cell``."""
        var = self.order[-1]
        point = self.sample(cell)
        hit = None
        for f in self.proj.ec_parts:
            if not point.upoly(f, var):
                hit = f
                break
        if hit is None:
            for f, tags in self.proj.tags.items():
                if "ec_factor" in tags and set(f.vars) <= set(self.order[:-1]) and point.is_zero(f):
                    hit = f
                    break
        if hit is None:
            return
        if cell.is_point():
            cell.full_top = True
            self.stats.point_curtains += 1
            return
        raise Curtain("other_curtain", hit, cell)

    def _ensure_stack(self, cell: Cell) -> list[Cell]:
        k = cell.level
        if k == self.n - 1 and self.proj.reduced and not cell.full_top:
            self._check_curtain(cell)
        wanted = self._lifting_set(cell)
        if cell.children is None:
            return lift_stack(cell, wanted, self.order[k], self.order)
        new = [p for p in wanted if p not in cell.lifted]
        if not new:
            return cell.children
        entries, _ = _roots_of(self.sample(cell), new, self.order[k])
        fresh = [e for e in entries if all(compare(e[0], r[0]) != 0 for r in cell.roots)]
        cell.lifted = tuple(wanted)
        if not fresh:
            return cell.children
        roots = _sort_roots(list(cell.roots) + fresh)
        reuse = []
        for ch in cell.children:
            if ch.kind == "section":
                reuse.append((("section", ch.value), ch))
        old = [None] + [r[0] for r in cell.roots] + [None]
        sectors = [ch for ch in cell.children if ch.kind == "sector"]
        for i, ch in enumerate(sectors):
            reuse.append((("sector", old[i], old[i + 1]), ch))
        cell.roots = roots
        cell.children = _build_children(cell, roots, reuse)
        return cell.children

    # ------------------------------------------------------------ evaluation
    def _solve(self, cell: Cell, matrix: Formula, visit_sections_first: bool) -> bool | None:
        self._tick()
        assigned = set(self.order[:cell.level])
        t = self._eval3(matrix, cell, assigned)
        if t is not None:
            cell.truth = t
            return t
        if cell.level >= self.n:
            raise RuntimeError("matrix undecided at a full-dimensional sample")
        children = self._ensure_stack(cell)
        q = self.quants[cell.level]
        if visit_sections_first and cell.level == self.n - 1 and q is not None:
            children = [c for c in children if c.kind == "section"] + \
                       [c for c in children if c.kind == "sector"]
        if q == "exists":
            res = False
            for c in children:
                if self._solve(c, matrix, visit_sections_first):
                    res = True
                    break
        elif q == "forall":
            res = True
            for c in children:
                if not self._solve(c, matrix, visit_sections_first):
                    res = False
                    break
        else:
            ts = [self._solve(c, matrix, visit_sections_first) for c in children]
            res = True if all(t is True for t in ts) else False if all(t is False for t in ts) else None
        cell.truth = res
        return res

    def evaluate(self, problem: QuantifiedFormula) -> bool | None:
        """(Re)answer ``problem`` on this CAD, lifting lazily where needed."""
        self.problem = problem
        for c in self.root.walk():
            c.truth = None
        top = self.order[-1] if self.order else None
        ec = []
        if top is not None and self.ec_mode != "off":
            ec = select_ec(problem.matrix, top, self.quants[-1], self.ec_mode == "multiple_unsafe")
        if self.proj.reduced:
            ok = self._ec_for_projection is not None and any(
                e == self._ec_for_projection for e in ec)
            if not ok:
                self.proj.make_full()
        for e in ec:
            if e not in self.ecs_used:
                self.ecs_used.append(e)
        self.proj.add(polys(problem.matrix) + [e.bound.poly for e in extended_atoms(problem.matrix)])
        res = self._solve(self.root, problem.matrix, bool(ec))
        self._refresh_stats()
        return res

    def _refresh_stats(self):
        cells = list(self.root.walk())[1:]
        leaves = [c for c in cells if not c.children]
        self.stats.proj_poly_count = self.proj.count()
        self.stats.ec_count = len(self.ecs_used)
        self.stats.cells_total = len(cells)
        self.stats.cells_leaf = len(leaves)
        self.stats.true_cells = sum(1 for c in leaves if c.truth is True)

    # ------------------------------------------------------------- results
    @property
    def truth(self) -> bool | None:
        return self.root.truth

    def decided_free_cells(self) -> list[Cell]:
        """Maximal cells over the free variables whose truth is decided."""
        out = []

        def rec(c: Cell):
            if c.truth is not None or c.level >= self.n_free or not c.children:
                out.append(c)
                return
            for ch in c.children:
                rec(ch)

        rec(self.root)
        return out

    def true_leaf(self) -> Cell | None:
        """A full-dimensional true cell below a true root (for witnesses)."""
        c = self.root
        if c.truth is not True:
            return None
        while c.level < self.n:
            nxt = None
            for ch in c.children or ():
                if ch.truth is True:
                    nxt = ch
                    break
            if nxt is None:
                # decided early by trial evaluation: any sample below will do
                break
            c = nxt
        return c

    def solution_formula(self, output: str = "tarski") -> Formula:
        from .solution import solution_formula
        return solution_formula(self, output)

    def all_cells(self) -> list[Cell]:
        return list(self.root.walk())[1:]


def a_holds(rel: str, s: int) -> bool:
    return (rel == "=" and s == 0) or (rel == "!=" and s != 0) or (rel == "<" and s < 0) \
        or (rel == "<=" and s <= 0) or (rel == ">" and s > 0) or (rel == ">=" and s >= 0)


def _quants_for(order: Sequence[str], problem: QuantifiedFormula) -> list[str | None]:
    qmap: dict[str, str | None] = {v: None for v in problem.free_vars}
    for q, vs in problem.blocks:
        for v in vs:
            qmap[v] = q
    return [qmap.get(v) for v in order]


def _default_order(problem: QuantifiedFormula) -> list[str]:
    return list(problem.variables())


def partial_cad(problem: QuantifiedFormula, ordering: Sequence[str] | None = None,
                ec_mode: str = "single", deadline=None) -> CadData:
    """Build a partial CAD answering ``problem``.

    With ``ec_mode="single"`` a top-level equational constraint in the
    innermost variable reduces the top projection.  A curtain over a cell
    that is not a point abandons the reduction and rebuilds with the full
    operator, counting one ``curtain_event``.
    """
    if ec_mode not in ("off", "single", "multiple_unsafe"):
        raise ValueError(f"unknown ec_mode {ec_mode!r}")
    order = list(ordering) if ordering is not None else _default_order(problem)
    if not check_refines(order, problem):
        raise ValueError(f"ordering {order} does not refine the quantifier blocks")
    quants = _quants_for(order, problem)
    events = 0
    mode = ec_mode
    while True:
        cad = CadData(order, quants, mode, deadline)
        if order and mode != "off":
            ecs = select_ec(problem.matrix, order[-1], quants[-1], mode == "multiple_unsafe")
            if ecs:
                cad.proj.set_ec(ecs if mode == "multiple_unsafe" else ecs[0])
                cad._ec_for_projection = ecs[0]
                if mode == "multiple_unsafe" and len(ecs) > 1:
                    cad.unverified = True
        try:
            cad.evaluate(problem)
        except Curtain:
            events += 1
            mode = "off"
            continue
        cad.stats.curtain_events = events
        cad.stats.builds = 1
        return cad


def extend_cad(cad: CadData, problem: QuantifiedFormula) -> CadData:
    """Reuse ``cad`` for ``problem``: new polynomials are merged, new bound variables appended."""
    n_free = cad.n_free
    if not problem.free_vars <= set(cad.order[:n_free]):
        raise RequiresNewCad(f"new free variables {sorted(problem.free_vars - set(cad.order))}")
    new_quants = _quants_for(cad.order, problem)
    # levels beyond the free ones keep their quantifier (variables may simply not occur)
    for i, v in enumerate(cad.order):
        if cad.quants[i] is None and new_quants[i] is not None:
            raise RequiresNewCad(f"{v} is free in the CAD but bound in the new problem")
    bound_here = [v for _, vs in problem.blocks for v in vs]
    for v in bound_here:
        if v not in cad.proj.pos:
            cad.proj.add_variable(v)
            cad.order = cad.proj.order
    qmap = {v: q for q, vs in problem.blocks for v in vs}
    blocks = [q for q, _ in problem.blocks]
    if len(set(blocks)) > 1:
        raise RequiresNewCad("extension needs a single quantifier block")
    q = blocks[0] if blocks else "exists"
    cad.quants = [None if i < n_free else qmap.get(v, q) for i, v in enumerate(cad.order)]
    # bound variables that do not occur are harmless under a single block quantifier
    full = QuantifiedFormula(((q, tuple(cad.order[n_free:])),), problem.matrix,
                             frozenset(cad.order[:n_free]))
    try:
        cad.evaluate(full)
    except Curtain:
        cad.stats.curtain_events += 1
        cad.proj.make_full()
        cad.evaluate(full)
    cad.stats.extensions += 1
    return cad

"""The poly-algorithm: VTS on the innermost block, CAD for the IQERs it cannot reach.

Modes
-----
``poly``   stalled IQERs are solved one by one, reusing a held CAD when the
           incoming IQER shares enough polynomials with the last one sent.
``whole``  the VTS state on termination is collapsed into one formula and
           handed to a single partial CAD.
``vts``    VTS only; a stall raises :class:`VtsIncomplete`.
``cad``    the input goes straight to a partial CAD.
"""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

from flint import fmpq, fmpq_poly

from .cad import CadData, RequiresNewCad, extend_cad, partial_cad, solution_formula
from .formula import (FALSE, TRUE, And, Atom, ExtendedAtom, Formula, Not, Or, QuantifiedFormula,
                      atom, atoms, conj, evaluate_ground, formula_vars, polys, simplify)
from .ordering import blocks_of, choose_order
from .polycore import Poly, gcd, groebner_basis
from .realalg import (AlgebraicPoint, RealAlgebraicNumber, cauchy_bound, compare, interruptible,
                      kp_norm, simplest_between)
from .vts import IQER, BlockOutcome, NotTarski, TestPoint, VtsTree, run_block

__all__ = [
    "QeOptions", "QeStats", "QeResult", "Witness", "PolyState", "Deadline", "QeTimeout",
    "VtsIncomplete", "WitnessError", "qe", "select_iqer", "poly_share", "solve_iqer", "assemble",
    "whole_mode", "witness", "groebner_preprocess", "MODES",
]

MODES = ("poly", "whole", "vts", "cad")


class QeTimeout(Exception):
    """Raised when the deadline passes; ``stats`` holds what was gathered so far."""

    def __init__(self, stats: QeStats | None = None):
        super().__init__("time limit exceeded")
        self.stats = stats


class VtsIncomplete(Exception):
    """VTS-only mode met an IQER it cannot eliminate."""


class WitnessError(AssertionError):
    """A constructed witness failed exact verification."""


class Deadline:
    def __init__(self, seconds: float | None):
        self.limit = None if seconds is None else time.monotonic() + seconds

    def check(self) -> None:
        if self.limit is not None and time.monotonic() > self.limit:
            raise QeTimeout()


@dataclass
class QeOptions:
    mode: str = "poly"
    ordering: str = "brown"
    traversal: str = "depth"
    ec_mode: str = "single"
    share_threshold: float = 0.5
    groebner: bool = False
    witness: bool = False
    output: str = "tarski"
    timeout: float | None = None

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.traversal not in ("depth", "breadth"):
            raise ValueError(f"unknown traversal {self.traversal!r}")
        if self.ec_mode not in ("off", "single", "multiple_unsafe"):
            raise ValueError(f"unknown ec mode {self.ec_mode!r}")
        if self.output not in ("tarski", "extended"):
            raise ValueError(f"unknown output format {self.output!r}")
        if not 0.0 <= self.share_threshold <= 1.0:
            raise ValueError("share threshold must lie in [0, 1]")
        if self.groebner and self.ordering == "greedy":
            raise ValueError("Groebner preprocessing cannot be combined with the greedy ordering")


@dataclass
class QeStats:
    mode: str = "poly"
    cad_builds: int = 0
    cad_extensions: int = 0
    proj_poly_count: int = 0
    ec_count: int = 0
    cells_total: int = 0
    cells_leaf: int = 0
    true_cells: int = 0
    curtain_events: int = 0
    point_curtains: int = 0
    vts_expansions: int = 0
    vts_eliminated: int = 0
    iqers_stalled: int = 0
    iqers_solved: int = 0
    fallback_whole: bool = False
    unverified: bool = False
    time_ms: float = 0.0

    def add_cad(self, cad: CadData) -> None:
        s = cad.stats
        self.cad_builds += s.builds
        self.cad_extensions += s.extensions
        self.proj_poly_count += s.proj_poly_count
        self.ec_count += s.ec_count
        self.cells_total += s.cells_total
        self.cells_leaf += s.cells_leaf
        self.true_cells += s.true_cells
        self.curtain_events += s.curtain_events
        self.point_curtains += s.point_curtains
        self.unverified = self.unverified or cad.unverified

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass
class Witness:
    assignment: dict[str, RealAlgebraicNumber]
    verified: bool
    sources: dict[str, str] = field(default_factory=dict)


@dataclass
class QeResult:
    result: Formula
    stats: QeStats
    witness: Witness | None = None


@dataclass
class PolyState:
    """Controller state for one stalled innermost block."""

    outcome: BlockOutcome
    free_vars: frozenset[str]
    options: QeOptions
    deadline: Deadline | None = None
    active_cad: CadData | None = None
    last_iqer_polys: list[Poly] = field(default_factory=list)
    solved: dict[int, Formula] = field(default_factory=dict)
    cads: list[CadData] = field(default_factory=list)
    cad_of: dict[int, CadData] = field(default_factory=dict)
    decisive: IQER | None = None

    @property
    def quantifier(self) -> str:
        return self.outcome.quantifier

    def unsolved(self) -> list[IQER]:
        return [n for n in self.outcome.stalled if n.uid not in self.solved]


# --------------------------------------------------------------------------
# preprocessing and orderings
# --------------------------------------------------------------------------

def groebner_preprocess(problem: QuantifiedFormula, order: list[str]) -> QuantifiedFormula:
    """Replace two or more top-level equations by their reduced lex basis."""
    m = problem.matrix
    if not isinstance(m, And):
        return problem
    eqs = [a.lhs for a in m.args if isinstance(a, Atom) and a.rel == "="]
    if len(eqs) < 2:
        return problem
    rest = [a for a in m.args if not (isinstance(a, Atom) and a.rel == "=")]
    basis = groebner_basis(eqs, list(reversed(order)))
    if any(b.is_constant() and not b.is_zero() for b in basis):
        return QuantifiedFormula(problem.blocks, FALSE, problem.free_vars)
    matrix = simplify(conj(*(atom(b, "=") for b in basis), *rest))
    return QuantifiedFormula(problem.blocks, matrix, problem.free_vars)


def _top_equations(f: Formula) -> list[Poly]:
    parts = f.args if isinstance(f, And) else (f,)
    return [a.lhs for a in parts if isinstance(a, Atom) and a.rel == "="]


def _order_for(problem: QuantifiedFormula, opts: QeOptions) -> list[str]:
    return choose_order(opts.ordering, polys(problem.matrix), blocks_of(problem),
                        _top_equations(problem.matrix))


def _build(problem: QuantifiedFormula, opts: QeOptions, deadline) -> CadData:
    return partial_cad(problem, _order_for(problem, opts), opts.ec_mode, deadline)


def _cad_answer(cad: CadData, opts: QeOptions) -> Formula:
    if cad.truth is not None:
        return TRUE if cad.truth else FALSE
    return solution_formula(cad, opts.output)


def _is_extended(f: Formula) -> bool:
    match f:
        case ExtendedAtom():
            return True
        case And(args) | Or(args):
            return any(_is_extended(a) for a in args)
        case Not(arg):
            return _is_extended(arg)
    return False


# --------------------------------------------------------------------------
# the controller
# --------------------------------------------------------------------------

def select_iqer(candidates: list[IQER], traversal: str = "depth") -> IQER:
    """Depth: most eliminated variables first; breadth: fewest.  Ties by creation."""
    if not candidates:
        raise ValueError("no IQER to select")
    if traversal == "depth":
        return min(candidates, key=lambda n: (-n.level, n.uid))
    return min(candidates, key=lambda n: (n.level, n.uid))


def _share_ratio(incoming: list[Poly], last: list[Poly]) -> float:
    if not incoming:
        return 1.0
    hits = sum(1 for p in incoming if any(not gcd(p, q).is_constant() for q in last))
    return hits / len(incoming)


def poly_share(iqer: IQER, state: PolyState) -> str:
    """``"reuse"`` the held CAD or ``"rebuild"``."""
    cad = state.active_cad
    if cad is None:
        return "rebuild"
    free = formula_vars(iqer.formula) - set(iqer.qvars)
    if not free <= set(cad.order[:cad.n_free]):
        return "rebuild"
    ratio = _share_ratio(iqer.polys(), state.last_iqer_polys)
    return "reuse" if ratio >= state.options.share_threshold else "rebuild"


def _iqer_problem(iqer: IQER, quantifier: str) -> QuantifiedFormula:
    free = frozenset(formula_vars(iqer.formula) - set(iqer.qvars))
    blocks = ((quantifier, iqer.qvars),) if iqer.qvars else ()
    return QuantifiedFormula(blocks, iqer.formula, free)


def solve_iqer(iqer: IQER, state: PolyState) -> Formula:
    problem = _iqer_problem(iqer, state.quantifier)
    decision = poly_share(iqer, state)
    cad = None
    if decision == "reuse":
        try:
            cad = extend_cad(state.active_cad, problem)
        except RequiresNewCad:
            cad = None
    if cad is None:
        cad = _build(problem, state.options, state.deadline)
        state.cads.append(cad)
    state.active_cad = cad
    state.last_iqer_polys = iqer.polys()
    res = _cad_answer(cad, state.options)
    state.solved[iqer.uid] = res
    state.cad_of[iqer.uid] = cad
    return res


def assemble(state: PolyState) -> Formula:
    tree = state.outcome.tree
    if state.decisive is not None:
        return tree.absorbing
    parts = [n.formula for n in state.outcome.leaves] + list(state.solved.values())
    return simplify(tree.combine(parts))


def _run_poly(state: PolyState) -> Formula:
    absorbing = state.outcome.tree.absorbing
    while state.unsolved():
        iqer = select_iqer(state.unsolved(), state.options.traversal)
        if solve_iqer(iqer, state) == absorbing:
            state.decisive = iqer
            break
    return assemble(state)


def _collapse(outcome: BlockOutcome, outer: tuple, free_vars: frozenset[str]) -> QuantifiedFormula:
    """Eq.-(4) state of a block as one quantified formula over the remaining variables."""
    parts = [n.formula for n in outcome.leaves] + [n.formula for n in outcome.stalled]
    matrix = simplify(outcome.tree.combine(parts))
    present = formula_vars(matrix)
    rest = tuple(v for v in outcome.tree.block_vars if v in present)
    blocks = tuple(outer) + (((outcome.quantifier, rest),) if rest else ())
    return QuantifiedFormula(blocks, matrix, free_vars)


def whole_mode(problem: QuantifiedFormula, opts: QeOptions | None = None,
               deadline: Deadline | None = None) -> tuple[Formula, CadData | None]:
    """VTS on the innermost block, then one CAD for everything that is left."""
    opts = opts or QeOptions(mode="whole")
    if not problem.blocks:
        return simplify(problem.matrix), None
    q, vs = problem.blocks[-1]
    try:
        tree = VtsTree.for_block(q, vs, problem.matrix)
    except NotTarski:
        cad = _build(problem, opts, deadline)
        return _cad_answer(cad, opts), cad
    out = run_block(tree, opts.traversal, deadline)
    if out.is_resolved and len(problem.blocks) == 1:
        return out.resolved, None
    collapsed = _collapse(out, problem.blocks[:-1], problem.free_vars)
    if not collapsed.blocks:
        return simplify(collapsed.matrix), None
    cad = _build(collapsed, opts, deadline)
    return _cad_answer(cad, opts), cad


class _Run:
    """Mutable bookkeeping shared by one call of :func:`qe`."""

    def __init__(self, opts: QeOptions, deadline: Deadline):
        self.opts = opts
        self.deadline = deadline
        self.stats = QeStats(mode=opts.mode)
        self.cads: list[CadData] = []
        # data for witness construction (only meaningful for one-block problems)
        self.outcome: BlockOutcome | None = None
        self.state: PolyState | None = None
        self.whole_cad: CadData | None = None

    def cad_stats(self) -> None:
        for c in self.cads:
            self.stats.add_cad(c)


def _qe(problem: QuantifiedFormula, run: _Run) -> Formula:
    opts = run.opts
    if not problem.blocks:
        return simplify(problem.matrix)
    q, vs = problem.blocks[-1]
    outer = problem.blocks[:-1]
    try:
        tree = None if opts.mode == "cad" else VtsTree.for_block(q, vs, problem.matrix)
    except NotTarski:
        if opts.mode == "vts":
            raise
        tree = None
    if tree is None:
        cad = _build(problem, opts, run.deadline)
        run.cads.append(cad)
        run.whole_cad = cad
        return _cad_answer(cad, opts)
    out = run_block(tree, opts.traversal, run.deadline)
    run.outcome = out
    run.stats.vts_expansions += tree.expansions
    run.stats.iqers_stalled += len(out.stalled)
    if out.is_resolved:
        run.stats.vts_eliminated += len(vs)
        inner = out.resolved
    else:
        run.stats.vts_eliminated += max((n.level for n in out.stalled), default=0)
        if opts.mode == "vts":
            raise VtsIncomplete(f"{len(out.stalled)} IQER(s) need CAD")
        if opts.mode == "whole":
            collapsed = _collapse(out, outer, problem.free_vars)
            if not collapsed.blocks:
                return simplify(collapsed.matrix)
            cad = _build(collapsed, opts, run.deadline)
            run.cads.append(cad)
            run.whole_cad = cad
            return _cad_answer(cad, opts)
        free = problem.free_vars | {v for _, bvs in outer for v in bvs}
        state = PolyState(out, frozenset(free), opts, run.deadline)
        run.state = state
        inner = _run_poly(state)
        run.cads.extend(state.cads)
        run.stats.iqers_solved += len(state.solved)
        if outer and _is_extended(inner):
            # indexed-root output cannot be quantified again
            run.stats.fallback_whole = True
            run.cads.clear()
            run.state = None
            collapsed = _collapse(out, outer, problem.free_vars)
            cad = _build(collapsed, opts, run.deadline)
            run.cads.append(cad)
            run.whole_cad = cad
            return _cad_answer(cad, opts)
    if not outer:
        return inner
    residual = QuantifiedFormula(outer, inner, problem.free_vars)
    run.outcome = None
    run.state = None
    return _qe(residual, run)


def qe(problem: QuantifiedFormula, opts: QeOptions | None = None) -> QeResult:
    """Quantifier elimination; the result is equivalent to ``problem`` over the reals."""
    opts = opts or QeOptions()
    opts.validate()
    t0 = time.monotonic()
    deadline = Deadline(opts.timeout)
    run = _Run(opts, deadline)
    work = problem
    if opts.groebner and problem.blocks:
        work = groebner_preprocess(problem, _order_for(problem, opts))
    try:
        with interruptible(deadline.check if opts.timeout is not None else None):
            result = _qe(work, run)
    except QeTimeout as e:
        run.cad_stats()
        run.stats.time_ms = (time.monotonic() - t0) * 1000
        e.stats = run.stats
        raise
    run.cad_stats()
    wit = None
    if opts.witness and _witness_applies(problem, result):
        wit = witness(problem, run, work)
    run.stats.time_ms = (time.monotonic() - t0) * 1000
    return QeResult(result, run.stats, wit)


# --------------------------------------------------------------------------
# witnesses
# --------------------------------------------------------------------------

def _witness_applies(problem: QuantifiedFormula, result: Formula) -> bool:
    if problem.free_vars or len(problem.blocks) != 1:
        return False
    q = problem.blocks[0][0]
    return (q == "exists" and result == TRUE) or (q == "forall" and result == FALSE)


def _decisive_cell(cad: CadData, target: bool):
    c = cad.root
    if c.truth is not target:
        return None
    while c.children and c.level < cad.n:
        nxt = next((ch for ch in c.children if ch.truth is target), None)
        if nxt is None:
            break
        c = nxt
    return c


def _chain(tree: VtsTree, node: IQER) -> list[IQER]:
    """Nodes from the root down to ``node`` (inclusive)."""
    out = [tree.root]
    while out[-1] is not node:
        k = len(out[-1].path)
        nxt = next((c for c in tree.children.get(out[-1].uid, ())
                    if c.path[:k + 1] == node.path[:k + 1]), None)
        if nxt is None:
            raise WitnessError("test point path not found in the tree")
        out.append(nxt)
    return out


def _rational_image(pt: AlgebraicPoint, p: Poly, v: str):
    """A rational polynomial in ``v`` whose real roots include those of ``p`` at ``pt``."""
    kp = pt.upoly(p, v)
    if len(kp) <= 1:
        return None
    if pt.field is None:
        return fmpq_poly([c.coeffs()[0] if not c.is_zero() else 0 for c in kp])
    return kp_norm(pt.field, kp)


def _fill(pt: AlgebraicPoint, vs, sources: dict[str, str]) -> AlgebraicPoint:
    for w in vs:
        if w not in pt:
            pt = pt.extend(w, fmpq(0))
            sources.setdefault(w, "free")
    return pt


def _root_value(pt: AlgebraicPoint, t: TestPoint) -> RealAlgebraicNumber:
    v = Poly.var(t.var)
    lin = t.den * v - t.num
    q = lin if t.coef.is_zero() else lin * lin - t.coef * t.coef * t.rad
    sc = pt.sign(t.coef) if not t.coef.is_zero() else 0
    for r in pt.real_roots(q, t.var):
        ext = pt.extend(t.var, r)
        s = ext.sign(lin)
        if sc == 0 and s == 0 or sc != 0 and s * sc >= 0:
            return r
    raise WitnessError(f"test point {t} has no real value at the witness")


def _roots_of_all(pt: AlgebraicPoint, ps, v: str) -> list[RealAlgebraicNumber]:
    out = []
    for p in ps:
        if v not in p.vars:
            continue
        kp = pt.upoly(p, v)
        if len(kp) <= 1:
            continue
        out.extend(pt.real_roots(p, v))
    return out


def witness(problem: QuantifiedFormula, run: _Run, work: QuantifiedFormula | None = None) -> Witness:
    """Resolve the prewitness of the decisive branch to exact real values and verify it."""
    work = work or problem
    q, vs = problem.blocks[0]
    target = q == "exists"
    sources: dict[str, str] = {}
    pt = AlgebraicPoint()
    node: IQER | None = None
    out = run.outcome
    if run.whole_cad is not None or (run.state is None and out is not None and not out.is_resolved):
        cad = run.whole_cad
        cell = _decisive_cell(cad, target)
        if cell is None:
            raise WitnessError("no decisive cell in the CAD")
        sample = cell.sample_in(cad.order)
        for v, r in sample.as_map().items():
            pt = pt.extend(v, r)
            sources[v] = "cad"
        pt = _fill(pt, cad.order, sources)
        if out is not None and run.opts.mode == "whole":
            for n in out.stalled:
                if evaluate_ground(n.formula, _fill(pt, formula_vars(n.formula), {})) == target:
                    node = n
                    break
    elif run.state is not None and run.state.decisive is not None:
        node = run.state.decisive
        cad = run.state.cad_of[node.uid]
        cell = _decisive_cell(cad, target)
        if cell is None:
            raise WitnessError("no decisive cell in the IQER's CAD")
        sample = cell.sample_in(cad.order).as_map()
        for v in node.qvars:
            if v in sample:
                pt = pt.extend(v, sample[v])
                sources[v] = "cad"
        pt = _fill(pt, node.qvars, sources)
    elif out is not None and out.absorbed_by is not None:
        node = out.absorbed_by
    else:
        raise WitnessError("no decisive branch recorded")

    if node is not None:
        chain = _chain(out.tree, node)
        for parent, t in reversed(list(zip(chain, node.path))):
            pt = _resolve(pt, parent, t, sources)
    pt = _fill(pt, list(vs) + sorted(formula_vars(problem.matrix)), sources)
    ok = evaluate_ground(problem.matrix, pt) == target
    if not ok:
        raise WitnessError(f"witness {pt.as_map()} does not verify")
    assignment = {v: r for v, r in pt.as_map().items() if v in set(vs)}
    return Witness(assignment, True, {v: sources.get(v, "free") for v in assignment})


def _resolve(pt: AlgebraicPoint, parent: IQER, t: TestPoint, sources: dict[str, str]) -> AlgebraicPoint:
    v = t.var
    needed = (t.num.vars + t.coef.vars + t.rad.vars + t.den.vars)
    pt = _fill(pt, [w for w in needed if w != v], sources)
    body = parent.formula
    ps = list(dict.fromkeys(a.lhs for a in atoms(body)))
    others = [w for p in ps for w in p.vars if w != v]
    pt = _fill(pt, others, sources)
    if t.kind == "-inf":
        bound = fmpq(0)
        for p in ps:
            if v in p.vars:
                img = _rational_image(pt, p, v)
                if img is not None and img.degree() >= 1:
                    bound = max(bound, cauchy_bound(img))
        sources[v] = "inf"
        return pt.extend(v, -(bound + 1))
    r = _root_value(pt, t)
    if t.kind == "root":
        sources[v] = "root"
        return pt.extend(v, r)
    roots = _roots_of_all(pt, ps, v)
    sources[v] = "eps"
    return pt.extend(v, _rational_above(r, roots))


def _rational_above(r: RealAlgebraicNumber, roots: list[RealAlgebraicNumber]) -> fmpq:
    """A rational strictly inside ``(r, next root above r)``."""
    nxt = None
    for s in roots:
        if compare(s, r) > 0 and (nxt is None or compare(s, nxt) < 0):
            nxt = s
    # for irrational numbers the isolating interval is open around the root
    while True:
        a = r.hi
        if nxt is None:
            return simplest_between(a, None)
        if a < nxt.lo:
            return simplest_between(a, nxt.lo)
        r, nxt = r.bisect(), nxt.bisect()

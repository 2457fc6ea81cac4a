"""Variable orderings that refine the quantifier-block partial order.

An ordering is a list of variables from outermost to innermost; the last
variable is projected first.  Blocks are ``(quantifier, vars)`` pairs, the
free variables forming a leading block with quantifier ``None``.
"""
from __future__ import annotations

import itertools
from collections.abc import Iterable, Sequence

from .cad.projection import irreducible_parts, lazard_project
from .formula import QuantifiedFormula
from .polycore import Poly
from .realalg import compare, isolate_roots

__all__ = [
    "Block", "blocks_of", "check_refines", "brown_order", "sotd_order", "ndrr_order",
    "greedy_order", "ec_order", "choose_order", "sotd", "full_projection", "OrderingError",
    "FACTORIAL_CAP", "STRATEGIES",
]

Block = tuple[str | None, tuple[str, ...]]
FACTORIAL_CAP = 7
STRATEGIES = ("brown", "sotd", "ndrr", "greedy", "ec")


class OrderingError(ValueError):
    pass


def blocks_of(problem: QuantifiedFormula) -> list[Block]:
    """Block structure of ``problem``; free variables come first in sorted order."""
    out: list[Block] = [(None, tuple(sorted(problem.free_vars)))]
    out += [(q, tuple(vs)) for q, vs in problem.blocks]
    return [b for b in out if b[1]]


def check_refines(total: Sequence[str], blocks: Sequence[Block]) -> bool:
    rank = {v: i for i, (_, vs) in enumerate(blocks) for v in vs}
    if set(total) != set(rank) or len(total) != len(rank):
        return False
    seq = [rank[v] for v in total]
    return all(a <= b for a, b in zip(seq, seq[1:]))


def _factors(polys: Iterable[Poly]) -> list[Poly]:
    return list(dict.fromkeys(f for p in polys for f in irreducible_parts(p)))


# ------------------------------------------------------------------- brown

def _brown_key(v: str, polys: Sequence[Poly]) -> tuple[int, int, int]:
    maxdeg = max((p.degree(v) for p in polys), default=0)
    with_v = [sum(mono.values()) for p in polys for mono, _ in p.terms() if v in mono]
    return maxdeg, max(with_v, default=0), len(with_v)


def _brown_sort(vs: Sequence[str], polys: Sequence[Poly]) -> list[str]:
    # ascending score: cheap variables outermost, projected last
    return sorted(vs, key=lambda v: _brown_key(v, polys))


def brown_order(polys: Iterable[Poly], blocks: Sequence[Block]) -> list[str]:
    ps = list(polys)
    return [v for _, vs in blocks for v in _brown_sort(vs, ps)]


# ------------------------------------------------------------ full scoring

def full_projection(polys: Iterable[Poly], order: Sequence[str],
                    counter: list[int] | None = None) -> list[list[Poly]]:
    """Lazard projection factor sets per level for ``order``."""
    pos = {v: i for i, v in enumerate(order)}
    levels: list[list[Poly]] = [[] for _ in order]

    def put(f: Poly):
        if f.is_constant():
            return
        lv = max(pos[v] for v in f.vars)
        if f not in levels[lv]:
            levels[lv].append(f)

    for f in _factors(polys):
        put(f)
    for k in range(len(order) - 1, 0, -1):
        if levels[k]:
            if counter is not None:
                counter[0] += 1
            for f in lazard_project(levels[k], order[k]):
                put(f)
    return levels


def sotd(polys: Iterable[Poly]) -> int:
    """Sum of total degrees of all monomials."""
    return sum(sum(mono.values()) for p in polys for mono, _ in p.terms())


def _ndrr(levels: list[list[Poly]], order: Sequence[str], sample: int) -> int:
    if not order:
        return 0
    v = order[0]
    roots = []
    for f in levels[0]:
        g = f.subs({w: sample for w in f.vars if w != v})
        if g.is_constant():
            continue
        roots.extend(isolate_roots(g.to_upoly(v)))
    distinct: list = []
    for r in roots:
        if not any(compare(r, s) == 0 for s in distinct):
            distinct.append(r)
    return len(distinct)


def _admissible(blocks: Sequence[Block]):
    perms = [list(itertools.permutations(vs)) for _, vs in blocks]
    for combo in itertools.product(*perms):
        yield [v for part in combo for v in part]


def _exhaustive(polys, blocks, score, cap):
    ps = list(polys)
    n = sum(len(vs) for _, vs in blocks)
    if n > cap:
        raise OrderingError(f"{n} variables exceed the exhaustive cap of {cap}; use greedy")
    best = None
    for order in _admissible(blocks):
        s = score(ps, order)
        if best is None or (s, order) < best:
            best = (s, order)
    return best[1] if best else []


def sotd_order(polys: Iterable[Poly], blocks: Sequence[Block], cap: int = FACTORIAL_CAP) -> list[str]:
    return _exhaustive(polys, blocks,
                       lambda ps, o: sotd(p for lv in full_projection(ps, o) for p in lv), cap)


def ndrr_order(polys: Iterable[Poly], blocks: Sequence[Block], cap: int = FACTORIAL_CAP,
               sample: int = 0) -> list[str]:
    return _exhaustive(polys, blocks,
                       lambda ps, o: _ndrr(full_projection(ps, o), o, sample), cap)


# ------------------------------------------------------------------ greedy

def greedy_order(polys: Iterable[Poly], blocks: Sequence[Block],
                 counter: list[int] | None = None) -> list[str]:
    """Choose the projected variable one step at a time by the sotd of the result."""
    current = _factors(polys)
    inner_first: list[str] = []
    for _, vs in reversed(blocks):
        remaining = list(vs)
        while remaining:
            best = None
            for v in remaining:
                if counter is not None:
                    counter[0] += 1
                mine = [p for p in current if p.degree(v) > 0]
                rest = [p for p in current if p.degree(v) <= 0]
                nxt = list(dict.fromkeys(rest + (lazard_project(mine, v) if mine else [])))
                s = sotd(nxt)
                if best is None or s < best[0]:
                    best = (s, v, nxt)
            _, v, current = best
            remaining.remove(v)
            inner_first.append(v)
    return inner_first[::-1]


# ---------------------------------------------------------------------- ec

def ec_order(polys: Iterable[Poly], ecs: Iterable[Poly], blocks: Sequence[Block]) -> list[str]:
    """Brown, except that the innermost variable is one the EC actually contains.

    Among innermost-block variables of positive degree in some EC the one with
    the lowest EC degree goes innermost (Brown breaks ties).
    """
    ps = list(polys)
    ecs = list(ecs)
    order = brown_order(ps, blocks)
    if not ecs or not blocks:
        return order
    inner = list(blocks[-1][1])
    cands = [v for v in inner if any(e.degree(v) > 0 for e in ecs)]
    if not cands:
        return order
    brown_rank = {v: i for i, v in enumerate(order)}
    pick = min(cands, key=lambda v: (min(e.degree(v) for e in ecs if e.degree(v) > 0),
                                     -brown_rank[v]))
    head = order[:len(order) - len(inner)]
    tail = [v for v in order[len(head):] if v != pick]
    return head + tail + [pick]


def choose_order(strategy: str, polys: Iterable[Poly], blocks: Sequence[Block],
                 ecs: Iterable[Poly] = ()) -> list[str]:
    """Dispatch on a strategy name; ``user:x,y,z`` gives an explicit order."""
    ps = list(polys)
    if strategy.startswith("user:"):
        order = [v.strip() for v in strategy[5:].split(",") if v.strip()]
        known = {v for _, vs in blocks for v in vs}
        order = [v for v in order if v in known] + [v for _, vs in blocks for v in vs
                                                     if v not in order]
        if not check_refines(order, blocks):
            raise OrderingError(f"ordering {order} does not refine the quantifier blocks")
        return order
    if strategy == "brown":
        return brown_order(ps, blocks)
    if strategy == "sotd":
        return sotd_order(ps, blocks)
    if strategy == "ndrr":
        return ndrr_order(ps, blocks)
    if strategy == "greedy":
        return greedy_order(ps, blocks)
    if strategy == "ec":
        return ec_order(ps, ecs, blocks)
    raise OrderingError(f"unknown ordering strategy {strategy!r}")

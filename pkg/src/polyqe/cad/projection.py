"""Lazard projection, the single-EC reduced operator, and an incremental basis."""
from __future__ import annotations

from collections.abc import Iterable, Sequence

from ..polycore import Poly, discriminant, factor_irreducible, resultant

__all__ = ["lazard_project", "ec_project", "Projection", "irreducible_parts"]


def irreducible_parts(p: Poly) -> list[Poly]:
    """Normalized non-constant irreducible factors."""
    if p.is_zero() or p.is_constant():
        return []
    return [f for f, _ in factor_irreducible(p)[1] if not f.is_constant()]


def _single(a: Poly, v: str) -> list[Poly]:
    cs = a.coeffs_in(v)
    out = [cs[-1], next(c for c in cs if not c.is_zero())]
    if len(cs) > 2:
        out.append(discriminant(a, v))
    return out


def lazard_project(A: Iterable[Poly], v: str) -> list[Poly]:
    """Irreducible factors of leading/trailing coefficients, discriminants and resultants."""
    A = [a for a in dict.fromkeys(A)]
    for a in A:
        if a.degree(v) <= 0:
            raise ValueError(f"{a} has no positive degree in {v}")
    raw: list[Poly] = []
    for i, a in enumerate(A):
        raw.extend(_single(a, v))
        for b in A[i + 1:]:
            raw.append(resultant(a, b, v))
    return list(dict.fromkeys(f for p in raw for f in irreducible_parts(p)))


def ec_project(f_ec: Poly, others: Iterable[Poly], v: str) -> list[Poly]:
    """Reduced projection for an equational constraint ``f_ec``."""
    if f_ec.degree(v) <= 0:
        raise ValueError(f"equational constraint {f_ec} has no positive degree in {v}")
    ec_parts = [f for f in irreducible_parts(f_ec) if f.degree(v) > 0]
    out = list(lazard_project(ec_parts, v))
    out += [f for f in irreducible_parts(f_ec) if f.degree(v) <= 0]
    for g in others:
        for e in ec_parts:
            if g.degree(v) > 0 and g != e:
                out.extend(irreducible_parts(resultant(e, g, v)))
    return list(dict.fromkeys(out))


class Projection:
    """Per-level projection factor sets, closed incrementally.

    ``levels[i]`` holds the lifting polynomials whose main variable is
    ``order[i]``.  When ``ec`` is set the top level is reduced: it lifts only
    with the EC factors, and the remaining top-level factors (``top_others``)
    enter projection only through their resultants with the EC.
    """

    def __init__(self, order: Sequence[str]):
        self.order = list(order)
        self.pos = {v: i for i, v in enumerate(self.order)}
        self.levels: list[list[Poly]] = [[] for _ in self.order]
        self.tags: dict[Poly, set[str]] = {}
        self.ec_parts: list[Poly] = []
        self.top_others: list[Poly] = []
        self._projected: list[int] = [0 for _ in self.order]
        self._others_done = 0
        self.projection_calls = 0
        self.tick = None

    # ---------------------------------------------------------------- levels
    @property
    def n(self) -> int:
        return len(self.order)

    @property
    def reduced(self) -> bool:
        return bool(self.ec_parts)

    def level_of(self, p: Poly) -> int:
        if p.is_constant():
            return -1
        return max(self.pos[v] for v in p.vars)

    def add_variable(self, v: str):
        """Append a new innermost variable; a reduced top level becomes full first."""
        if v in self.pos:
            raise ValueError(f"{v} already in the ordering")
        self.make_full()
        self.pos[v] = len(self.order)
        self.order.append(v)
        self.levels.append([])
        self._projected.append(0)

    def all_polys(self) -> list[Poly]:
        return [p for lv in self.levels for p in lv]

    def count(self) -> int:
        return sum(len(lv) for lv in self.levels)

    # ------------------------------------------------------------- insertion
    def _insert(self, f: Poly, tag: str, top_reduced_ok: bool = True) -> bool:
        lv = self.level_of(f)
        if lv < 0:
            return False
        self.tags.setdefault(f, set()).add(tag)
        if lv == self.n - 1 and self.reduced and top_reduced_ok and f not in self.ec_parts:
            if f not in self.top_others and f not in self.levels[lv]:
                self.top_others.append(f)
                return True
            return False
        if f in self.levels[lv]:
            return False
        self.levels[lv].append(f)
        return True

    def add(self, polys: Iterable[Poly], tag: str = "input") -> None:
        for p in polys:
            for f in irreducible_parts(p):
                self._insert(f, tag)
        self.close()

    def set_ec(self, ec: Poly | Sequence[Poly]) -> None:
        """Use the EC(s) for a reduced top level.  Must precede :meth:`add`."""
        if self.all_polys():
            raise RuntimeError("the EC must be fixed before polynomials are added")
        ecs = [ec] if isinstance(ec, Poly) else list(ec)
        top = self.order[-1]
        for e in ecs:
            for f in irreducible_parts(e):
                if f.degree(top) > 0:
                    if f not in self.ec_parts:
                        self.ec_parts.append(f)
                    self.tags.setdefault(f, set()).add("ec")
                    if f not in self.levels[-1]:
                        self.levels[-1].append(f)
                else:
                    self._insert(f, "ec_factor")

    def make_full(self) -> bool:
        """Turn a reduced top level into a full Lazard level; returns True if it changed."""
        if not self.reduced:
            return False
        others = self.top_others
        self.ec_parts = []
        self.top_others = []
        self._others_done = 0
        for f in others:
            if f not in self.levels[-1]:
                self.levels[-1].append(f)
        # pairs among the former EC polys were already projected; redo the top with full pairs
        self._projected[-1] = 0
        self.close()
        return True

    # --------------------------------------------------------------- closure
    def close(self) -> None:
        for k in range(self.n - 1, 0, -1):
            v = self.order[k]
            lv = self.levels[k]
            start = self._projected[k]
            for i in range(start, len(lv)):
                if self.tick is not None:
                    self.tick()
                f = lv[i]
                raw = list(_single(f, v))
                for g in lv[:i]:
                    raw.append(resultant(f, g, v))
                self.projection_calls += 1
                for r in raw:
                    for h in irreducible_parts(r):
                        self._insert(h, "projection")
            self._projected[k] = len(lv)
            if k == self.n - 1 and self.reduced:
                for g in self.top_others[self._others_done:]:
                    for e in self.ec_parts:
                        for h in irreducible_parts(resultant(e, g, v)):
                            self._insert(h, "ec_resultant")
                self._others_done = len(self.top_others)

    def snapshot(self) -> list[int]:
        return [len(lv) for lv in self.levels]

"""Quantifier-free descriptions of the true region of a CAD."""
from __future__ import annotations

from ..formula import (FALSE, TRUE, ExtendedAtom, Formula, IndexedRoot, atom, conj, disj,
                       simplify)
from .core import CadData, Cell

_REL = {-1: "<", 0: "=", 1: ">"}


def _signature(cad: CadData, cell: Cell) -> tuple[int, ...]:
    polys = [p for lv in cad.proj.levels[:cell.level] for p in lv]
    return tuple(cad._sign(cell, p) for p in polys)


def _ancestor(cell: Cell, level: int) -> Cell:
    while cell.level > level:
        cell = cell.parent
    return cell


def _sign_description(cad: CadData, cell: Cell) -> Formula:
    polys = [p for lv in cad.proj.levels[:cell.level] for p in lv]
    return conj(*(atom(p, _REL[cad._sign(cell, p)]) for p in polys))


def _root_description(cad: CadData, cell: Cell) -> Formula:
    parts = []
    for c in cell.ancestors():
        v = cad.order[c.level - 1]
        if c.kind == "section":
            p, k = c.section
            parts.append(ExtendedAtom(v, "=", IndexedRoot(p, v, k)))
        else:
            if c.lower is not None:
                parts.append(ExtendedAtom(v, ">", IndexedRoot(c.lower[0], v, c.lower[1])))
            if c.upper is not None:
                parts.append(ExtendedAtom(v, "<", IndexedRoot(c.upper[0], v, c.upper[1])))
    return conj(*parts)


def solution_formula(cad: CadData, output: str = "tarski") -> Formula:
    """Disjunction of descriptions of the true free-variable cells.

    With ``output="tarski"`` a true cell is described by the signs of the
    projection polynomials whenever no false cell shares that sign vector;
    otherwise (and always with ``output="extended"``) indexed-root bounds are
    used.
    """
    if cad.root.truth is not None:
        return TRUE if cad.root.truth else FALSE
    cells = cad.decided_free_cells()
    if any(c.truth is None for c in cells):
        raise ValueError("CAD has undecided free-variable cells")
    true_cells = [c for c in cells if c.truth]
    false_cells = [c for c in cells if not c.truth]
    if not true_cells:
        return FALSE
    if not false_cells:
        return TRUE
    parts = []
    for c in true_cells:
        if output == "tarski" and not _conflicts(cad, c, false_cells):
            parts.append(_sign_description(cad, c))
        else:
            parts.append(_root_description(cad, c))
    return simplify(disj(*parts))


def _conflicts(cad: CadData, cell: Cell, false_cells: list[Cell]) -> bool:
    for f in false_cells:
        m = min(cell.level, f.level)
        a, b = _ancestor(cell, m), _ancestor(f, m)
        if m == cell.level:
            # the false cell lies inside a cylinder whose base shares the signs of ``cell``
            if _signature(cad, a) == _signature(cad, b):
                return True
        elif _signature(cad, a) == _signature(cad, b):
            return True
    return False

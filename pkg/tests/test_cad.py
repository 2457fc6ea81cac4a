import pytest

from polyqe.cad import (Cell, RequiresNewCad, detect_curtain, ec_project, extend_cad, lazard_eval,
                        lazard_project, lift_stack, partial_cad, select_ec)
from polyqe.formula import (FALSE, TRUE, ExtendedAtom, QuantifiedFormula, atom, conj, disj,
                            evaluate_ground, parse)
from polyqe.polycore import Poly
from flint import fmpq_poly
from polyqe.realalg import AlgebraicPoint, compare, isolate_roots
from support import agree, audit_signs, random_formula, random_poly, rng

x, y, z = Poly.var("x"), Poly.var("y"), Poly.var("z")


def qf(text):
    return parse(text)


def coeffs(kp):
    return [c.coeffs()[0] if not c.is_zero() else 0 for c in kp]


# ------------------------------------------------------------ projection

def test_lazard_project_examples():
    assert set(lazard_project([y ** 2 + x ** 2 - 1], "y")) == {x - 1, x + 1}
    assert lazard_project([y - x], "y") == [x]
    assert set(lazard_project([y - x, y + x], "y")) == {x}


def test_ec_project_examples():
    assert ec_project(y - x, [y + x], "y") == [x]
    assert set(ec_project(y ** 2 + x ** 2 - 1, [], "y")) == set(lazard_project([y ** 2 + x ** 2 - 1], "y"))
    # the pairwise resultant of two non-EC polynomials is not included
    others = [y - 2 * x - 3, y + 5]
    full = set(lazard_project([y] + others, "y"))
    reduced = set(ec_project(y, others, "y"))
    assert reduced < full and x + 4 in full and x + 4 not in reduced


# --------------------------------------------------------------- lifting

def test_lazard_eval_examples():
    zero = AlgebraicPoint.from_map({"x": 0}, ["x"])
    assert coeffs(lazard_eval(x * y, zero, "y")) == [0, 1]
    four = AlgebraicPoint.from_map({"x": 4}, ["x"])
    assert coeffs(lazard_eval(y ** 2 - x, four, "y")) == [-4, 0, 1]
    assert coeffs(lazard_eval((y - x) * x ** 2, zero, "y")) in ([0, 1], [0, 2])
    with pytest.raises(ValueError):
        lazard_eval(Poly.const(0), zero, "y")


def test_lift_stack_examples():
    root = Cell(None, 0, None)
    cells = lift_stack(root, [x ** 2 - 1], "x", ["x"])
    assert [c.kind for c in cells] == ["sector", "section", "sector", "section", "sector"]
    assert [c.index for c in cells] == [(i,) for i in range(1, 6)]
    assert [float(c.value) for c in cells[1::2]] == [-1.0, 1.0]
    assert float(cells[0].value) < -1 < float(cells[2].value) < 1 < float(cells[4].value)

    (only,) = lift_stack(Cell(None, 0, None), [], "x", ["x"])
    assert only.kind == "sector" and float(only.value) == 0

    one = cells[3]
    above = lift_stack(one, [y - x], "y", ["x", "y"])
    assert len(above) == 3 and float(above[1].value) == 1.0


def test_stacks_are_odd_and_sections_are_roots():
    g = rng(51)
    for _ in range(15):
        f = random_formula(g, ["x", "y"], natoms=2, maxdeg=3)
        cad = partial_cad(QuantifiedFormula((), f))
        for cell in cad.all_cells():
            if cell.children:
                assert len(cell.children) % 2 == 1
                assert [c.pos for c in cell.children] == list(range(1, len(cell.children) + 1))
            if cell.kind == "section":
                poly, _ = cell.section
                assert cad.sample(cell).sign(poly) == 0


def test_detect_curtain_examples():
    order = ["x", "y"]
    root = Cell(None, 0, None)
    cells = lift_stack(root, [x, x + 1, x - 1], "x", order)
    at_zero = [c for c in cells if c.kind == "section" and float(c.value) == 0][0]
    assert detect_curtain(x * y, at_zero, "y", order) == "point_curtain"
    sector = [c for c in cells if c.kind == "sector" and -1 < float(c.value) < 0][0]
    assert detect_curtain(x * y, sector, "y", order) == "none"
    assert detect_curtain(y ** 2 - x, at_zero, "y", order) == "none"

    # a curtain over a one-dimensional cell
    plane = Cell(None, 0, None)
    xs = lift_stack(plane, [], "x", ["x", "y", "z"])
    ys = lift_stack(xs[0], [y], "y", ["x", "y", "z"])
    line = [c for c in ys if c.kind == "section"][0]
    assert detect_curtain(y * z, line, "z", ["x", "y", "z"]) == "other_curtain"


def test_select_ec_prefers_low_degree():
    lin, quad = atom(z - y, "="), atom(z ** 2 + x, "=")
    f = conj(quad, lin, atom(z, ">"))
    assert select_ec(f, "z", "exists") == [lin.lhs]
    assert select_ec(f, "z", "exists", multiple=True) == [lin.lhs, quad.lhs]
    assert select_ec(disj(atom(z, "!="), atom(x, ">")), "z", "forall") == [z]
    assert select_ec(atom(z, "<"), "z", "exists") == []


# ------------------------------------------------------------ partial CAD

def test_partial_cad_examples():
    cad = partial_cad(qf("(exists (x) (< (+ (^ x 2) 1) 0))"))
    assert cad.truth is False and cad.stats.cells_leaf <= 3
    cad = partial_cad(qf("(exists (x) (= (- (^ x 2) 2) 0))"))
    assert cad.truth is True
    leaf = cad.true_leaf()
    assert leaf.kind == "section" and compare(leaf.value, isolate_roots(fmpq_poly([-2, 0, 1]))[0]) in (0, 1)
    cad = partial_cad(qf("(forall (x) (>= (^ x 2) 0))"))
    assert cad.truth is True


def test_partial_cad_rejects_bad_ordering():
    with pytest.raises(ValueError):
        partial_cad(qf("(exists (x) (> (+ x c) 0))"), ["x", "c"])


def test_solution_formula_examples():
    cad = partial_cad(qf("(exists (x) (= (+ (* x x) (* b x) c) 0))"))
    sol = cad.solution_formula()
    for b in range(-5, 6):
        for c in range(-5, 6):
            assert evaluate_ground(sol, {"b": b, "c": c}) == (b * b - 4 * c >= 0)
    assert partial_cad(qf("(exists (x) (> (+ (^ x 2) (^ c 2) 1) 0))")).solution_formula() == TRUE
    assert partial_cad(qf("(exists (x) (< (+ (^ x 2) (^ c 2) 1) 0))")).solution_formula() == FALSE


def test_extended_output_uses_indexed_roots():
    cad = partial_cad(qf("(exists (y) (and (< (- (^ y 3) x) 0) (> (- (^ y 3) (* 2 x) 1) 0)))"))
    ext = cad.solution_formula("extended")
    tar = cad.solution_formula("tarski")
    assert any(isinstance(a, ExtendedAtom) for a in _leaves(ext)) or ext == tar
    assert not agree(ext, tar, {"x"}, 40, salt=52)


def _leaves(f):
    args = getattr(f, "args", None)
    if args is None:
        yield f
    else:
        for a in args:
            yield from _leaves(a)


def test_truth_propagation_matches_exhaustion():
    g = rng(53)
    for _ in range(25):
        f = random_formula(g, ["x", "y"], natoms=2, maxdeg=2)
        quantified = QuantifiedFormula((("exists", ("x", "y")),), f)
        open_ = partial_cad(QuantifiedFormula((), f), ["x", "y"], ec_mode="off")
        leaves = [c for c in open_.all_cells() if not c.children]
        expected = any(c.truth for c in leaves)
        assert partial_cad(quantified, ["x", "y"]).truth is expected
        universal = QuantifiedFormula((("forall", ("x", "y")),), f)
        assert partial_cad(universal, ["x", "y"]).truth is all(c.truth for c in leaves)


def test_sign_invariance_on_small_builds():
    g = rng(54)
    for _ in range(12):
        f = random_formula(g, ["x", "y", "z"][:g.randint(2, 3)], natoms=g.randint(1, 3), maxdeg=3)
        cad = partial_cad(QuantifiedFormula((), f), ec_mode="off")
        assert not audit_signs(cad, g, per_cell=3)


# --------------------------------------------------------------- curtains

def test_point_curtain_completes(corpus):
    problem = parse((corpus / "point_curtain.smt").read_text())
    cad = partial_cad(problem)
    off = partial_cad(problem, ec_mode="off")
    assert cad.stats.point_curtains >= 1 and cad.stats.curtain_events == 0
    assert not agree(cad.solution_formula(), off.solution_formula(), problem.free_vars, 40)


def test_other_curtain_falls_back(corpus):
    problem = parse((corpus / "other_curtain.smt").read_text())
    cad = partial_cad(problem)
    off = partial_cad(problem, ec_mode="off")
    assert cad.stats.curtain_events >= 1
    assert not agree(cad.solution_formula(), off.solution_formula(), problem.free_vars, 40)


def test_multiple_unsafe_flags_unverified():
    problem = qf("(exists (y) (and (= (- y x) 0) (= (+ (^ y 2) x -2) 0)))")
    cad = partial_cad(problem, ec_mode="multiple_unsafe")
    assert cad.unverified
    assert not partial_cad(problem).unverified


def test_ec_mode_agrees_with_full_projection():
    g = rng(55)
    done = 0
    while done < 15:
        ec = random_poly(g, ["x", "y"], maxdeg=2)
        if ec.degree("y") <= 0:
            continue
        rest = random_formula(g, ["x", "y"], natoms=2, maxdeg=2)
        problem = QuantifiedFormula((("exists", ("y",)),), conj(atom(ec, "="), rest))
        if not select_ec(problem.matrix, "y", "exists"):
            continue
        single = partial_cad(problem, ec_mode="single")
        off = partial_cad(problem, ec_mode="off")
        assert not agree(single.solution_formula(), off.solution_formula(), problem.free_vars, 30, done)
        done += 1


# ------------------------------------------------------------- extension

def test_extend_by_same_formula_keeps_cells():
    problem = qf("(exists (y) (and (< (+ (^ x 2) (^ y 2)) 1) (> y x)))")
    cad = partial_cad(problem)
    before = cad.stats.cells_total
    extend_cad(cad, problem)
    assert cad.stats.cells_total == before and cad.stats.extensions == 1


def test_extend_adds_a_new_level():
    base = partial_cad(QuantifiedFormula((), atom(x ** 2 - 1, "<")))
    ext = extend_cad(base, QuantifiedFormula((("exists", ("y",)),), conj(atom(x ** 2 - 1, "<"),
                                                                        atom(y - x, ">"))))
    assert ext.order == ["x", "y"]
    assert ext.solution_formula() is not None
    assert not agree(ext.solution_formula(), atom(x ** 2 - 1, "<"), {"x"}, 30)


def test_extend_rejects_new_free_variables():
    cad = partial_cad(qf("(exists (y) (> (+ y x) 0))"))
    with pytest.raises(RequiresNewCad):
        extend_cad(cad, qf("(exists (y) (> (+ y x c) 0))"))


def test_extension_matches_fresh_build():
    g = rng(56)
    for k in range(10):
        atoms1 = [atom(random_poly(g, ["x", "y"], maxdeg=2), g.choice(["<", ">", "=", "<="]))
                  for _ in range(3)]
        atoms2 = atoms1[:2] + [atom(random_poly(g, ["x", "y"], maxdeg=2), g.choice(["<", ">="]))]
        f1 = conj(*atoms1) if g.random() < 0.5 else disj(*atoms1)
        f2 = disj(conj(atoms2[0], atoms2[2]), atoms2[1])
        p1 = QuantifiedFormula((("exists", ("y",)),), f1, frozenset({"x"}))
        p2 = QuantifiedFormula((("exists", ("y",)),), f2, frozenset({"x"}))
        fresh = partial_cad(p2)
        ext = extend_cad(partial_cad(p1), p2)
        assert not agree(ext.solution_formula(), fresh.solution_formula(), {"x"}, 30, k)


def test_stats_json_schema():
    import json
    cad = partial_cad(qf("(exists (x) (= (+ (* x x) (* b x) 1) 0))"))
    data = json.loads(cad.stats.to_json())
    for key in ("proj_poly_count", "ec_count", "cells_total", "cells_leaf", "true_cells",
                "curtain_events"):
        assert isinstance(data[key], int)
    assert data["ec_count"] == 1

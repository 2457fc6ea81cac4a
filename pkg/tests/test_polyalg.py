from fractions import Fraction

import pytest

from polyqe.cad import partial_cad
from polyqe.formula import FALSE, TRUE, atom, evaluate_ground, parse, to_sexpr
from polyqe.polyalg import (PolyState, QeOptions, QeTimeout, VtsIncomplete, groebner_preprocess,
                            poly_share, qe, select_iqer, whole_mode)
from polyqe.polycore import Poly
from polyqe.vts import IQER, VtsTree, run_block
from support import mismatches, random_problem, rng, truth_table

x, y, b, c = (Poly.var(n) for n in "x y b c".split())

EARLY_EXIT = ("(exists (y x) (and (or (= (- x y) 0) (= (- x (* 2 y)) 0))"
              " (> (+ (* x y y) (^ y 3) -1) 0)))")
SAME_POLYS = ("(exists (y x) (and (or (= (- x 1) 0) (= (- x 2) 0))"
              " (> (* (- (^ y 3) y 1) (- (* 2 x) 3)) 0) (> y 5)))")


def run(text, **kw):
    return qe(parse(text), QeOptions(**kw))


# ---------------------------------------------------------------- examples

def test_qe_examples():
    res = run("(exists (x) (= (+ (* x x) (* b x) c) 0))")
    for bb in range(-4, 5):
        for cc in range(-4, 5):
            assert evaluate_ground(res.result, {"b": bb, "c": cc}) == (bb * bb - 4 * cc >= 0)
    res = run("(forall (x) (>= (^ x 2) 0))")
    assert res.result == TRUE and res.stats.cad_builds == 0


def test_piano_movers_poly_and_whole(corpus):
    problem = parse((corpus / "piano_movers.smt").read_text())
    poly = qe(problem, QeOptions(mode="poly"))
    whole = qe(problem, QeOptions(mode="whole"))
    assert poly.stats.ec_count == 1 and whole.stats.ec_count == 0
    assert poly.stats.vts_eliminated == 3
    for r in ("1/2", "1", "2", "3"):
        pt = {"r": Fraction(r)}
        assert evaluate_ground(poly.result, pt) == evaluate_ground(whole.result, pt)


def _node(level, uid):
    return IQER(TRUE, ("z",), level=level, uid=uid)


def test_select_iqer_examples():
    nodes = [_node(3, 10), _node(3, 11), _node(1, 12)]
    assert select_iqer(nodes, "depth").uid == 10
    assert select_iqer(nodes, "breadth").uid == 12
    assert select_iqer(nodes[2:], "depth").uid == 12
    with pytest.raises(ValueError):
        select_iqer([], "depth")


def _state(problem_text, threshold=0.5):
    problem = parse(problem_text)
    q, vs = problem.blocks[-1]
    out = run_block(VtsTree.for_block(q, vs, problem.matrix))
    st = PolyState(out, problem.free_vars, QeOptions(share_threshold=threshold))
    cad = partial_cad(problem)
    st.active_cad = cad
    st.last_iqer_polys = [p for p in (atom(x ** 3 - y, ">").lhs, atom(x - 1, ">").lhs)]
    return st


def test_poly_share_examples():
    st = _state("(exists (x) (and (> (- (^ x 3) y) 0) (> (- x 1) 0)))")
    same = IQER(atom(x ** 3 - y, ">") & atom(x - 1, ">"), ("x",))
    assert poly_share(same, st) == "reuse"
    coprime = IQER(atom(x ** 3 + y + 7, ">") & atom(x + 5, ">"), ("x",))
    assert poly_share(coprime, st) == "rebuild"
    new_free = IQER(atom(x ** 3 - y, ">") & atom(x - Poly.var("w"), ">"), ("x",))
    assert poly_share(new_free, st) == "rebuild"
    new_bound = IQER(atom(x ** 3 - y, ">") & atom(x - Poly.var("w"), ">"), ("x", "w"))
    assert poly_share(new_bound, st) == "reuse"


def test_early_exit_builds_one_cad():
    res = run(EARLY_EXIT)
    assert res.result == TRUE
    assert res.stats.iqers_stalled == 2 and res.stats.iqers_solved == 1
    assert res.stats.cad_builds == 1


def test_identical_polys_reuse_at_full_threshold():
    res = run(SAME_POLYS, share_threshold=1.0)
    assert res.result == TRUE
    assert res.stats.iqers_solved == 2
    assert res.stats.cad_builds == 1 and res.stats.cad_extensions == 1
    rebuilt = run(SAME_POLYS, share_threshold=1.0, traversal="breadth")
    assert rebuilt.result == TRUE


def test_reuse_with_same_formula_keeps_cells():
    from polyqe.cad import extend_cad
    problem = parse("(exists (y) (and (> (- (^ y 3) x) 0) (< y 2)))")
    cad = partial_cad(problem)
    cells = cad.stats.cells_total
    extend_cad(cad, problem)
    assert cad.stats.cells_total == cells


def test_whole_mode_matches_cad_mode_when_root_is_ineligible():
    text = "(exists (x) (and (> (- (^ x 3) (* 3 x) c) 0) (< x 1)))"
    whole = run(text, mode="whole")
    cad = run(text, mode="cad")
    assert to_sexpr(whole.result) == to_sexpr(cad.result)
    assert whole.stats.cells_total == cad.stats.cells_total


def test_whole_mode_skips_cad_when_vts_resolves():
    result, cad = whole_mode(parse("(exists (x) (> (+ (* b x) c) 0))"))
    assert cad is None and result != FALSE


def test_vts_mode_raises_on_stall():
    assert run("(exists (x) (> x 0))", mode="vts").result == TRUE
    with pytest.raises(VtsIncomplete):
        run("(exists (x) (= (- (^ x 3) 2) 0))", mode="vts")


def test_options_validation():
    with pytest.raises(ValueError):
        run("(exists (x) (> x 0))", groebner=True, ordering="greedy")
    with pytest.raises(ValueError):
        run("(exists (x) (> x 0))", mode="fast")


def test_groebner_preprocessing():
    problem = parse("(exists (x y) (and (= (- (* x y) 1) 0) (= (- (^ y 2) 1) 0) (> x 0)))")
    pre = groebner_preprocess(problem, ["x", "y"])
    assert to_sexpr(pre) != to_sexpr(problem)
    assert run(to_sexpr(problem), groebner=True).result == TRUE
    inconsistent = parse("(exists (x) (and (= (- x 1) 0) (= (- x 2) 0)))")
    assert groebner_preprocess(inconsistent, ["x"]).matrix == FALSE


def test_timeout_reports_stats(corpus):
    problem = parse((corpus / "piano_movers.smt").read_text())
    with pytest.raises(QeTimeout) as e:
        qe(problem, QeOptions(mode="cad", timeout=0.5))
    assert e.value.stats is not None


# ------------------------------------------------------------- agreement

def test_modes_agree_on_random_problems():
    g = rng(72)
    for k in range(12):
        problem = random_problem(g, nvars=g.randint(2, 3), nblocks=g.randint(1, 2), maxdeg=3)
        if not problem.blocks:
            continue
        table = truth_table(problem, n=12, salt=k)
        for m in ("poly", "whole", "cad"):
            r = qe(problem, QeOptions(mode=m)).result
            assert not mismatches(problem, r, table=table), (m, to_sexpr(problem))


def test_residual_blocks_are_handled():
    res = run("(exists (a) (forall (x) (> (+ (* x x) (* a x) 1) 0)))")
    assert res.result == TRUE
    res = run("(forall (a) (exists (x) (= (+ (* x x) (* a x) 1) 0)))")
    assert res.result == FALSE


# --------------------------------------------------------------- witnesses

def _check(res, problem):
    w = res.witness
    assert w is not None and w.verified
    assert evaluate_ground(parse(problem).matrix, w.assignment) == (res.result == TRUE)
    return w


def test_witness_examples():
    text = "(exists (x) (> x 0))"
    w = _check(run(text, witness=True), text)
    assert w.assignment["x"].is_rational and w.assignment["x"].value > 0
    assert w.sources["x"] == "eps"

    text = "(exists (x) (= (- (^ x 2) 2) 0))"
    w = _check(run(text, witness=True), text)
    assert not w.assignment["x"].is_rational

    text = "(forall (x) (> x 0))"
    w = _check(run(text, witness=True), text)
    assert w.assignment["x"].value <= 0


def test_witness_sources_cover_infinity_and_cad(corpus):
    inf = (corpus / "inf_witness.smt").read_text()
    w = _check(run(inf, witness=True), inf)
    assert "inf" in w.sources.values()
    w = _check(run(SAME_POLYS, witness=True), SAME_POLYS)
    assert w.sources["y"] == "cad"
    for mode in ("whole", "cad"):
        _check(run(EARLY_EXIT, witness=True, mode=mode), EARLY_EXIT)


def test_witness_only_for_decisive_sentences():
    assert run("(exists (x) (< (^ x 2) 0))", witness=True).witness is None
    assert run("(exists (x) (> (+ x c) 0))", witness=True).witness is None


def test_algebraic_coefficients_route_to_cad():
    from polyqe.formula import ExtendedAtom, IndexedRoot, QuantifiedFormula, conj
    from polyqe.vts import NotTarski
    # exists y: y^2 = x and x > plastic number (about 1.3247)
    bound = IndexedRoot(x**3 - x - 1, "x", 1)
    matrix = conj(ExtendedAtom("x", ">", bound), atom(y * y - x, "="))
    problem = QuantifiedFormula((("exists", ("y",)),), matrix, frozenset({"x"}))
    for mode in ("poly", "whole"):
        r = qe(problem, QeOptions(mode=mode))
        assert r.stats.cad_builds >= 1 and r.stats.vts_eliminated == 0
        for v, want in ((Fraction(4, 3), True), (Fraction(13, 10), False), (Fraction(-2), False)):
            assert evaluate_ground(r.result, {"x": v}) is want
    with pytest.raises(NotTarski):
        qe(problem, QeOptions(mode="vts"))

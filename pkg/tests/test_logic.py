from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srkit.algebra import DirectSum, FullMatrix, Tuple, disk_field, interval_field, random_element
from srkit.errors import BudgetError, ContractViolation, ParseError, SortError, UnboundVariableError
from srkit.logic import (
    Adj, Ball, Max, Mul, Norm, One, PosBall, Quant, Sub, Var, build_phi_n, eval_formula, evaluate_at,
    free_variables, inner_inf_candidate, match_phi_n, parse_formula, phi_body_value, rename_bound, to_text,
)

CORPUS = Path(__file__).parent / "data" / "formulas.txt"


def corpus():
    lines = [ln.strip() for ln in CORPUS.read_text().splitlines()]
    return [ln for ln in lines if ln and not ln.startswith("#")]


# ------------------------------------------------------------------ parsing


def test_parse_simple_sentence():
    f = parse_formula("sup x:ball1(A^1). norm(x)")
    assert f == Quant("sup", "x", Ball(1), Norm(Var("x")))


def test_corpus_has_twenty_sentences():
    assert len(corpus()) == 20


@pytest.mark.parametrize("text", corpus())
def test_corpus_round_trip(text):
    f = parse_formula(text)
    canon = to_text(f)
    assert parse_formula(canon) == f
    assert to_text(parse_formula(canon)) == canon
    assert not free_variables(f)


@pytest.mark.parametrize(
    "text, offset",
    [
        ("sup x. norm(", 5),
        ("sup x:ball1(A^1). norm(", 23),
        ("sup x:ball1(A^1). norm(x", 24),
        ("sup x:ball1(A^1). norm(x) $", 26),
        ("sup x:ball1(A^1) norm(x)", 17),
    ],
)
def test_syntax_errors_carry_offset(text, offset):
    with pytest.raises(ParseError) as info:
        parse_formula(text)
    assert info.value.position == offset
    assert f"offset {offset}" in str(info.value)


def test_unbound_variable_rejected():
    with pytest.raises(UnboundVariableError):
        parse_formula("sup x:ball1(A^1). norm(y)")


@pytest.mark.parametrize(
    "text",
    [
        "sup x:ball1(A^2). norm(x*x)",
        "sup x:ball1(A^2). sup y:posball1(A). norm(sub(x, y))",
        "sup x:ball1(A^1). sup x:ball1(A^1). norm(x)",
    ],
)
def test_sort_errors(text):
    with pytest.raises(SortError):
        parse_formula(text)


def test_keyword_is_not_a_variable():
    with pytest.raises(ParseError):
        parse_formula("sup norm:ball1(A^1). norm(norm)")


# ------------------------------------------------------------------ phi_n structure


@pytest.mark.parametrize("n", [1, 2, 3])
def test_build_phi_shape(n):
    f = build_phi_n(n)
    assert f.kind == "sup" and f.sort == Ball(n)
    assert f.body.kind == "inf" and f.body.sort == Ball(n)
    assert f.body.body.kind == "inf" and f.body.body.sort == PosBall()
    x, v, y = Var("x"), Var("v"), Var("y")
    assert f.body.body.body == Max(Norm(Sub(x, Mul(v, y))), Norm(Sub(Mul(Adj(v), v), One())))
    assert parse_formula(to_text(f)) == f
    assert match_phi_n(f) == n


def test_phi_recognised_up_to_renaming():
    f = parse_formula(
        "sup a:ball1(A^2). inf b:ball1(A^2). inf c:posball1(A). max(norm(sub(a, b*c)), norm(sub(adj(b)*b, one)))"
    )
    assert match_phi_n(f) == 2
    assert rename_bound(f) == rename_bound(build_phi_n(2))
    assert match_phi_n(parse_formula("sup x:ball1(A^1). norm(x)")) is None


def test_build_phi_rejects_zero():
    with pytest.raises(ContractViolation):
        build_phi_n(0)


# ------------------------------------------------------------------ inner candidate


def test_inner_candidate_isometry_exact():
    alg = FullMatrix(2)
    u = np.array([[0, 1], [1j, 0]], dtype=complex) / np.sqrt(2)
    x = Tuple(alg, np.stack([u, u])[None])  # x* x = 1
    v, y = inner_inf_candidate(x)
    assert np.allclose(v.data, x.data, atol=1e-12)
    assert np.allclose(y[0], np.eye(2), atol=1e-12)
    assert phi_body_value(alg, 2, x, v, y).hi <= 1e-10


def test_inner_candidate_zero():
    alg = FullMatrix(2)
    v, y = inner_inf_candidate(alg.zeros(1))
    assert np.allclose(y, 0)
    assert phi_body_value(alg, 1, alg.zeros(1), v, y).hi <= 1.0


def test_inner_candidate_full_rank_m4():
    alg = FullMatrix(4)
    eps = 1e-3
    for s in range(20):
        x = random_element(alg, 1, s)
        x = x * (1 / x.norm())
        sv = np.linalg.svd(x.stacked()[0], compute_uv=False)
        if sv.min() < 10 * eps:
            continue
        v, y = inner_inf_candidate(x, eps)
        assert phi_body_value(alg, 1, x, v, y).hi <= 2 * eps


# ------------------------------------------------------------------ evaluation


def test_sup_norm_on_m2():
    r = eval_formula(FullMatrix(2), parse_formula("sup x:ball1(A^1). norm(x)"))
    assert r.lower >= 1 - 1e-6 and r.upper <= 1 + 1e-9
    assert r.lower_certified and not r.upper_certified


def test_frozen_values_on_m2():
    # analytic values: inf_y ||1 - y|| = 0; sup ||[x*, x]|| = 1 (x = E12); inf_y ||x - y|| = 0
    alg = FullMatrix(2)
    r = eval_formula(alg, parse_formula("inf y:posball1(A). norm(sub(one, y))"))
    assert r.upper <= 1e-12 and r.upper_certified
    r = eval_formula(alg, parse_formula("sup x:ball1(A^1). norm(sub(adj(x)*x, x*adj(x)))"))
    assert 1 - 1e-6 <= r.lower <= 1 + 1e-9
    r = eval_formula(alg, parse_formula("sup x:ball1(A^1). inf y:ball1(A^1). norm(sub(x, y))"))
    assert r.upper <= 1e-12
    # commutators in M_2 have norm at most 2 on the unit ball; the certified side must respect it
    r = eval_formula(alg, parse_formula("sup x:ball1(A^1). sup y:ball1(A^1). norm(sub(x*y, y*x))"), 64)
    assert 1.0 <= r.lower <= 2 + 1e-9


def test_commutative_algebra_has_zero_commutators():
    r = eval_formula(DirectSum([1, 1]), parse_formula("sup x:ball1(A^1). sup y:ball1(A^1). norm(sub(x*y, y*x))"))
    assert r.lower == r.upper == 0.0


def test_budget_errors():
    f = parse_formula("sup x:ball1(A^1). norm(x)")
    with pytest.raises(BudgetError):
        eval_formula(FullMatrix(2), f, 0)


def test_free_variable_rejected_by_evaluator():
    with pytest.raises(UnboundVariableError):
        eval_formula(FullMatrix(2), Norm(Var("x")))


def test_sort_violation_at_evaluation():
    alg = FullMatrix(2)
    body = Norm(Var("x"))
    with pytest.raises(ContractViolation):
        evaluate_at(alg, body, {"x": (Ball(1), 2 * alg.unit_tuple(1))})
    with pytest.raises(ContractViolation):
        evaluate_at(alg, Norm(Var("y")), {"y": (PosBall(), -np.eye(2)[None])})
    with pytest.raises(ContractViolation):
        evaluate_at(alg, Norm(Var("y")), {"y": (PosBall(), np.array([[[0, 1], [0, 0]]], dtype=complex))})


@pytest.mark.parametrize(
    "text",
    ["sup x:ball1(A^1). norm(sub(adj(x)*x, x*adj(x)))", "sup x:ball1(A^2). norm(tuple(one, adj(x)*x))",
     "inf v:ball1(A^2). norm(sub(adj(v)*v, one))"],
)
@pytest.mark.parametrize("alg", [FullMatrix(2), DirectSum([1, 2]), interval_field(8)])
def test_witnesses_reproduce_certified_bounds(text, alg):
    f = parse_formula(text)
    r = eval_formula(alg, f, 32)
    if f.kind == "sup":
        got = evaluate_at(alg, f.body, {f.var: (f.sort, r.witnesses["lower"][f.var])})
        assert got.lo == pytest.approx(r.lower, abs=1e-6)
    else:
        got = evaluate_at(alg, f.body, {f.var: (f.sort, r.witnesses["upper"][f.var])})
        assert got.hi == pytest.approx(r.upper, abs=1e-6)


def test_phi_witnesses_reproduce():
    alg = FullMatrix(3)
    r = eval_formula(alg, build_phi_n(1), 32)
    w = r.witnesses["upper"]
    assert phi_body_value(alg, 1, w["x"], w["v"], w["y"]).hi == pytest.approx(r.upper, abs=1e-6)
    alg = disk_field(16)
    r = eval_formula(alg, build_phi_n(1), 8)
    assert r.notes["lower_method"] == "winding"
    from srkit.algebra import boundary_obstruction

    x = r.witnesses["lower"]["x"]
    obs = boundary_obstruction(Tuple(alg, x.reshape(x.shape[0], 1, 1, 1)))
    assert min(1.0, obs.rho) == pytest.approx(r.lower, abs=1e-6)


@pytest.mark.parametrize("text", ["sup x:ball1(A^1). norm(sub(x*x, adj(x)))", "inf x:ball1(A^2). norm(sub(x, tuple(one, 0.5*one)))"])
def test_budget_monotonicity(text):
    f = parse_formula(text)
    alg = FullMatrix(2)
    budgets = [4, 8, 16, 32, 64, 128]
    res = [eval_formula(alg, f, b, seed=3) for b in budgets]
    if f.kind == "sup":
        lows = [r.lower for r in res]
        assert all(b >= a - 1e-12 for a, b in zip(lows, lows[1:]))
    else:
        ups = [r.upper for r in res]
        assert all(b <= a + 1e-12 for a, b in zip(ups, ups[1:]))


def test_phi_budget_monotone_lower_on_disk():
    alg = disk_field(12)
    lows = [eval_formula(alg, build_phi_n(1), b).lower for b in (2, 4, 8)]
    assert lows == sorted(lows)


@settings(max_examples=8, deadline=None)
@given(st.integers(1, 3), st.integers(1, 2), st.integers(0, 1000))
def test_phi_values_in_range(k, n, seed):
    r = eval_formula(FullMatrix(k), build_phi_n(n), 4, seed=seed)
    assert 0 <= r.lower <= r.upper <= 2


def test_evaluation_is_deterministic():
    f = parse_formula("sup x:ball1(A^1). inf y:posball1(A). norm(sub(x, y))")
    a = eval_formula(FullMatrix(2), f, 16, seed=5)
    b = eval_formula(FullMatrix(2), f, 16, seed=5)
    assert (a.lower, a.upper, a.budget_used) == (b.lower, b.upper, b.budget_used)


# ------------------------------------------------------------------ field interval semantics


def _dense_sup(alg, func, xs, samples=6):
    """Max over dense barycentric points of ``func`` applied to interpolated values."""
    mesh = alg.mesh
    cells = mesh.cells
    d = cells.shape[1]
    if d == 2:
        weights = [(1 - t, t) for t in np.linspace(0, 1, samples + 1)]
    else:
        weights = [(i / samples, j / samples, (samples - i - j) / samples)
                   for i in range(samples + 1) for j in range(samples + 1 - i)]
    best = 0.0
    for w in weights:
        vals = [sum(wi * x[cells[:, i]] for i, wi in enumerate(w)) for x in xs]
        out = func(*vals)
        best = max(best, float(np.linalg.norm(out, 2, axis=(-2, -1)).max()))
    return best


@pytest.mark.parametrize("alg", [interval_field(6), interval_field(3, 2), disk_field(3)])
@pytest.mark.parametrize("seed", range(4))
def test_field_slack_is_sound(alg, seed):
    rng = np.random.default_rng(seed)
    x = random_element(alg, 1, rng).stacked()
    y = random_element(alg, 1, rng).stacked()
    x = x / max(1.0, float(np.linalg.norm(x, 2, axis=(-2, -1)).max()))
    y = y / max(1.0, float(np.linalg.norm(y, 2, axis=(-2, -1)).max()))
    env = {"x": (Ball(1), x), "y": (Ball(1), y)}
    cases = [
        (Norm(Mul(Var("x"), Var("y"))), lambda a, b: a @ b),
        (Norm(Sub(Mul(Var("x"), Var("y")), Mul(Var("y"), Var("x")))), lambda a, b: a @ b - b @ a),
        (Norm(Mul(Mul(Adj(Var("x")), Var("x")), Var("y"))), lambda a, b: a.conj().swapaxes(-1, -2) @ a @ b),
    ]
    for f, func in cases:
        iv = evaluate_at(alg, f, env)
        true_sup = _dense_sup(alg, func, [x, y])
        assert iv.lo <= true_sup + 1e-12
        assert true_sup <= iv.hi + 1e-12

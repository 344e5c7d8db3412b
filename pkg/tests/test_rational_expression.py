import numpy as np
import pytest

from NCPoly import MatrixTuple, parse_poly
from RationalExpression import (Add, Const, DomainError, ExprBuilder, ExpressionSyntaxError, Inv, Mul, RatExpr, Var,
                                eval_dag, expected_dimension, expr_from_poly, expr_to_json, linearize, parse,
                                random_expression, rep_eval_consistency, rep_inverse, rep_product, rep_scale,
                                rep_sum, to_text)


def hermitian_tuple(n, d, seed):
    rng = np.random.default_rng(seed)
    mats = []
    for _ in range(n):
        G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        mats.append((G + G.conj().T) / 2)
    return MatrixTuple.from_arrays(mats)


def test_parse_builds_shared_nodes():
    r = parse("x1*x2 + x1*x2")
    assert r.nvars == 2
    assert r.count(Mul) == 1
    assert r.count(Add) == 1
    assert r.nodes[r.root] == Add(2, 2)


def test_parse_letters_and_inverse():
    r = parse("inv(x + y)*x")
    assert r.nvars == 2
    assert isinstance(r.nodes[r.root], Mul)
    assert r.count(Inv) == 1
    assert parse("x1", 3).nvars == 3
    with pytest.raises(ValueError):
        parse("x2", 1)


def test_products_nest_to_the_right():
    r = parse("x1*x2*x3")
    root = r.nodes[r.root]
    assert r.nodes[root.left] == Var(1)
    assert isinstance(r.nodes[root.right], Mul)


@pytest.mark.parametrize("text", ["inv(x1", "x1 +", "x1 ** x2", "(x1", "x1 x2"])
def test_syntax_errors_carry_position(text):
    with pytest.raises(ExpressionSyntaxError) as info:
        parse(text)
    assert info.value.line == 1
    assert info.value.column >= 1


def test_dag_validation():
    with pytest.raises(ValueError):
        RatExpr((Var(1), Add(0, 2), Var(2)), 1, 2)
    with pytest.raises(ValueError):
        RatExpr((Var(1), Var(2), Add(0, 0)), 2, 2)


def test_builder_prunes_unreachable_nodes():
    builder = ExprBuilder()
    x1, x2 = builder.var(1), builder.var(2)
    builder.mul(x1, x2)
    r = builder.build(builder.inv(x2), 2)
    assert r.nodes == (Var(2), Inv(0))
    assert r.root == 1


@pytest.mark.parametrize("text", ["inv(x1 + x2)*x1", "x1*(x2 + 1/2)", "inv(inv(x1))", "(1+2i)*x1 + x2*x1"])
def test_pretty_print_round_trip(text):
    r = parse(text)
    assert parse(to_text(r), r.nvars) == r


def test_negation_prints_stably():
    r = parse("x1 - x2")
    text = to_text(r)
    assert to_text(parse(text, 2)) == text


def test_pretty_print_of_shared_squares():
    builder = ExprBuilder()
    node = builder.var(1)
    for _ in range(10):
        node = builder.mul(node, node)
    r = builder.build(node, 1)
    assert len(r.nodes) == 11
    text = to_text(r)
    assert text.count("x1") == 2 ** 10
    reparsed = parse(text, 1)
    assert len(reparsed.nodes) == 11
    assert to_text(reparsed) == text


def test_pretty_print_of_deep_chain():
    builder = ExprBuilder()
    node = builder.var(1)
    one = builder.const(1)
    for _ in range(1500):
        node = builder.inv(builder.add(node, one))
    text = to_text(builder.build(node, 1))
    assert text.startswith("inv(inv(")
    assert text.count("inv(") == 1500


def test_eval_matches_numpy():
    X = hermitian_tuple(2, 3, seed=1)
    X1, X2 = X.mats
    expected = np.linalg.inv(X1 + X2) @ X1 - 2 * X2
    np.testing.assert_allclose(eval_dag(parse("inv(x1 + x2)*x1 - 2*x2"), X), expected, atol=1e-10)


def test_eval_raises_on_singular_inverse():
    X = hermitian_tuple(2, 3, seed=2)
    with pytest.raises(DomainError):
        eval_dag(parse("inv(x1 - x1)"), X)
    # cancellation to roundoff still counts as singular
    with pytest.raises(DomainError) as info:
        eval_dag(parse("inv(1 - y*inv(x*y)*x)"), X)
    assert info.value.node is not None


def test_linearize_leaves():
    X = hermitian_tuple(1, 2, seed=3)
    rep = linearize(parse("x1"))
    assert rep.dimension == 2
    np.testing.assert_allclose(rep.evaluate(X), X.mats[0], atol=1e-12)
    const = linearize(parse("3/2"))
    np.testing.assert_allclose(const.evaluate(X), 1.5 * np.eye(2), atol=1e-12)


@pytest.mark.parametrize("text", ["x1*x2", "x1 + x2", "inv(x1)", "inv(x1*x2 - x2*x1 + 3)", "x1*inv(x2)*x1",
                                  "inv(inv(x1) + inv(x2))"])
def test_linearize_matches_evaluation(text):
    r = parse(text)
    rep = linearize(r)
    assert rep.dimension == expected_dimension(r)
    assert rep.A.is_exact
    for seed in range(3):
        assert rep_eval_consistency(r, rep, hermitian_tuple(r.nvars, 3, seed))


def test_linearize_random_expressions():
    rng = np.random.default_rng(11)
    checked = 0
    for _ in range(25):
        r = random_expression(2, 3, rng)
        rep = linearize(r)
        assert rep.dimension == expected_dimension(r)
        try:
            assert rep_eval_consistency(r, rep, hermitian_tuple(2, 3, int(rng.integers(1 << 30))))
        except DomainError:
            continue
        checked += 1
    assert checked > 0


def test_representation_combinators():
    X = hermitian_tuple(2, 3, seed=4)
    X1, X2 = X.mats
    a, b = linearize(parse("x1")), linearize(parse("x2", 2))
    np.testing.assert_allclose(rep_sum(a, b).evaluate(X), X1 + X2, atol=1e-10)
    np.testing.assert_allclose(rep_product(a, b).evaluate(X), X1 @ X2, atol=1e-10)
    np.testing.assert_allclose(rep_inverse(b).evaluate(X), np.linalg.inv(X2), atol=1e-8)
    np.testing.assert_allclose(rep_scale(a, "-1/2").evaluate(X), -X1 / 2, atol=1e-10)


def test_expr_from_poly():
    p = parse_poly("x1*x2 - 2*x1 + 1/3")
    r = expr_from_poly(p)
    assert r.nvars == 2
    X = hermitian_tuple(2, 2, seed=5)
    X1, X2 = X.mats
    np.testing.assert_allclose(eval_dag(r, X), X1 @ X2 - 2 * X1 + np.eye(2) / 3, atol=1e-12)
    zero = expr_from_poly(parse_poly("x1 - x1", 1))
    assert len(zero.nodes) == 1 and isinstance(zero.nodes[0], Const)


def test_expr_to_json():
    out = expr_to_json(parse("inv(x1)"))
    assert out["nodes"] == [{"op": "var", "index": 1}, {"op": "inv", "child": 0}]
    assert out["root"] == 1
    assert out["text"] == "inv(x1)"

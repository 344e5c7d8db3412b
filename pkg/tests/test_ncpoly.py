import numpy as np
import pytest

from ExactLinalg import ExactScalar
from NCPoly import (MatrixTuple, NCPoly, PolyMatrix, PolynomialSyntaxError, VariableCountError, adjoint,
                    d_independence_reduce, eval_poly, eval_poly_matrix, format_poly, is_d_independent,
                    left_transduction, matrix_tuple_from_json, matrix_tuple_to_json, parse_poly, poly_arith,
                    poly_matrix_from_json, poly_matrix_to_json, probe_d_independence, random_poly)


def x(j, n=3):
    return NCPoly.variable(n, j)


def test_monomial_concatenation():
    p = poly_arith(x(1), x(2), 'mul')
    assert p.terms == (((1, 2), ExactScalar(1)),)


def test_one_variable_product():
    a = NCPoly.variable(1, 1)
    assert poly_arith(a + 1, a - 1, 'mul') == parse_poly("x1^2 - 1")


def test_noncommutative_product():
    assert x(1) * x(2) != x(2) * x(1)
    assert (x(1) * x(2) - x(2) * x(1)).degree == 2


def test_zero_coefficients_are_dropped():
    p = NCPoly(2, [((1,), 1), ((1,), -1), ((), 0)])
    assert p.is_zero
    assert p.degree == float('-inf')


def test_variable_count_is_checked():
    with pytest.raises(VariableCountError):
        NCPoly(1, [((2,), 1)])
    with pytest.raises(VariableCountError):
        NCPoly.variable(1, 1) + NCPoly.variable(2, 1)


def test_adjoint_examples():
    p = NCPoly(2, [((1, 2), "i")])
    assert adjoint(p) == NCPoly(2, [((2, 1), "-i")])
    assert adjoint(x(1)) == x(1)


def test_adjoint_reverses_products():
    rng = np.random.default_rng(3)
    for _ in range(10):
        p, q = random_poly(2, 2, rng), random_poly(2, 2, rng)
        assert adjoint(p * q) == adjoint(q) * adjoint(p)


def test_left_transduction():
    assert left_transduction((1,), parse_poly("x2*x1")) == parse_poly("x2", 2)
    assert left_transduction((1,), parse_poly("x1*x2")).is_zero
    assert left_transduction((2, 1), parse_poly("x3*x2*x1 + x1")) == parse_poly("x3", 3)
    assert left_transduction((), parse_poly("x1 + 1")) == parse_poly("x1 + 1")


def test_parse_and_format():
    p = parse_poly("(3/2+1/2i)*x1*x2^3 - 2*x1 + 1/3")
    assert p.nvars == 2
    assert p.coefficient((1, 2, 2, 2)) == ExactScalar.parse("3/2+1/2i")
    assert p.coefficient((1,)) == -2
    assert parse_poly(format_poly(p), 2) == p
    assert parse_poly("x*y - y*x") == x(1, 2) * x(2, 2) - x(2, 2) * x(1, 2)


@pytest.mark.parametrize("text", ["x1 + * 2", "x1^", "2x", "x1 ++"])
def test_parse_errors(text):
    with pytest.raises(PolynomialSyntaxError):
        parse_poly(text)


def test_eval_poly_matrix_single_entry():
    P = PolyMatrix.from_rows([["x1"]], 1)
    X = MatrixTuple.from_arrays([np.array([[0, 1], [1, 0]])])
    np.testing.assert_allclose(eval_poly_matrix(P, X), [[0, 1], [1, 0]])


def test_eval_poly_matrix_blocks():
    P = PolyMatrix.from_rows([["1", "x1"], ["x1", "x1^2"]], 1)
    X1 = np.array([[1, 2], [3, 4]], dtype=complex)
    M = eval_poly_matrix(P, MatrixTuple.from_arrays([X1]))
    np.testing.assert_allclose(M[:2, :2], np.eye(2))
    np.testing.assert_allclose(M[2:, 2:], X1 @ X1)
    np.testing.assert_allclose(eval_poly(parse_poly("x1*x2 - x2*x1"), MatrixTuple.from_arrays([X1, X1.T])),
                               X1 @ X1.T - X1.T @ X1)


def test_poly_matrix_arithmetic():
    A = PolyMatrix.from_rows([["x1", 1], [0, "x2"]], 2)
    I = PolyMatrix.identity(2, 2)
    assert A @ I == A
    assert (A - A).is_zero
    assert (A @ A)[0, 1] == parse_poly("x1 + x2", 2)
    assert A.adjoint().adjoint() == A


def test_json_codecs():
    P = PolyMatrix.from_rows([["1", "x1"], ["x1", "x1^2"]], 1)
    assert poly_matrix_from_json(poly_matrix_to_json(P)) == P
    X = MatrixTuple.from_arrays([np.diag([1.0, -1.0])])
    Y = matrix_tuple_from_json(matrix_tuple_to_json(X))
    np.testing.assert_allclose(Y.mats[0], X.mats[0])
    assert Y.selfadjoint


def test_d_independence_reduce_equal_entries():
    a = NCPoly.variable(1, 1)
    result = d_independence_reduce([a, a])
    assert result.reduced == (a, NCPoly.zero(1))
    assert result.transform == PolyMatrix.from_rows([[1, -1], [0, 1]], 1)
    row = PolyMatrix.from_rows([[a, a]], 1)
    assert row @ result.transform == PolyMatrix.from_rows([[a, 0]], 1)
    assert result.transform @ result.inverse == PolyMatrix.identity(2, 1)


def test_d_independent_pair_is_unchanged():
    pair = [x(1, 2), x(2, 2)]
    assert is_d_independent(pair)
    result = d_independence_reduce(pair)
    assert list(result.reduced) == pair
    assert result.transform == PolyMatrix.identity(2, 2)


def test_constant_and_variable_are_dependent():
    # 1*x1 - x1*1 = 0 drops the degree, so the reduction clears the variable
    pair = [NCPoly.constant(1), NCPoly.variable(1, 1)]
    assert not is_d_independent(pair)
    assert d_independence_reduce(pair).reduced == (NCPoly.constant(1), NCPoly.zero(1))


@pytest.mark.parametrize("side", ["right", "left"])
def test_reduction_reaches_independence(side):
    polys = [parse_poly("x1*x2"), parse_poly("x1", 2)]
    result = d_independence_reduce(polys, side)
    survivors = [p for p in result.reduced if not p.is_zero]
    assert is_d_independent(survivors, side)
    assert probe_d_independence(survivors, side, trials=30, seed=1)
    product = (PolyMatrix.from_rows([polys], 2) @ result.transform if side == 'right'
               else result.transform @ PolyMatrix.from_rows([[p] for p in polys], 2))
    flat = [product[0, j] for j in range(2)] if side == 'right' else [product[i, 0] for i in range(2)]
    assert tuple(flat) == result.reduced


def hermitian_tuple(n, d, rng):
    mats = []
    for _ in range(n):
        G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        mats.append((G + G.conj().T) / 2)
    return MatrixTuple.from_arrays(mats)


def nonzero_poly(nvars, max_degree, rng):
    while True:
        p = random_poly(nvars, max_degree, rng)
        if not p.is_zero:
            return p


def random_poly_matrix(rows, cols, nvars, rng):
    return PolyMatrix.from_rows([[random_poly(nvars, 2, rng) for _ in range(cols)] for _ in range(rows)], nvars)


def test_degree_of_product_example():
    a, b = parse_poly("x1*x2 + 1", 3), x(3)
    assert (a * b).degree == 3 == a.degree + b.degree


@pytest.mark.parametrize("seed", range(10))
def test_degree_is_additive(seed):
    rng = np.random.default_rng(seed)
    for nvars in (1, 2, 3):
        a, b = nonzero_poly(nvars, 2, rng), nonzero_poly(nvars, 2, rng)
        assert (a * b).degree == a.degree + b.degree


@pytest.mark.parametrize("seed", range(5))
def test_independent_entries_keep_the_degree_of_combinations(seed):
    rng = np.random.default_rng(20 + seed)
    survivors = [p for p in d_independence_reduce([nonzero_poly(2, 2, rng) for _ in range(3)]).reduced
                 if not p.is_zero]
    assert is_d_independent(survivors)
    for _ in range(10):
        multipliers = [nonzero_poly(2, 2, rng) for _ in survivors]
        combo = NCPoly.zero(2)
        for a, b in zip(survivors, multipliers):
            combo = combo + a * b
        assert combo.degree == max(a.degree + b.degree for a, b in zip(survivors, multipliers))


@pytest.mark.parametrize("seed", range(5))
def test_evaluation_is_a_unital_homomorphism(seed):
    rng = np.random.default_rng(40 + seed)
    X = hermitian_tuple(2, 3, rng)
    p, q = random_poly(2, 2, rng), random_poly(2, 2, rng)
    np.testing.assert_allclose(eval_poly(NCPoly.constant(2), X), np.eye(3))
    np.testing.assert_allclose(eval_poly(p + q, X), eval_poly(p, X) + eval_poly(q, X), rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose(eval_poly(p * q, X), eval_poly(p, X) @ eval_poly(q, X), rtol=1e-10, atol=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_matrix_evaluation_respects_products_and_adjoints(seed):
    rng = np.random.default_rng(60 + seed)
    X = hermitian_tuple(2, 2, rng)
    P, Q = random_poly_matrix(2, 3, 2, rng), random_poly_matrix(3, 2, 2, rng)
    np.testing.assert_allclose(eval_poly_matrix(P @ Q, X), eval_poly_matrix(P, X) @ eval_poly_matrix(Q, X),
                               rtol=1e-10, atol=1e-9)
    np.testing.assert_allclose(eval_poly_matrix(P.adjoint(), X), eval_poly_matrix(P, X).conj().T,
                               rtol=1e-10, atol=1e-10)

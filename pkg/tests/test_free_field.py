import numpy as np
import pytest

from FreeField import (DivisionByZeroFunctionError, NotRegularError, equals, evaluate_rf, from_expr, from_poly,
                       is_zero, is_zero_batch, rf_arith, rf_inv, rf_neg, rf_sub, zero_test_report)
from NCPoly import MatrixTuple, parse_poly
from RationalExpression import DomainError, parse, random_expression


def point(n, d=3, seed=0):
    rng = np.random.default_rng(seed)
    mats = []
    for _ in range(n):
        G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        mats.append((G + G.conj().T) / 2)
    return MatrixTuple.from_arrays(mats)


def rf(text, nvars=None):
    return from_expr(parse(text, nvars))


def test_variable_is_nonzero():
    assert not is_zero(rf("x1"))


def test_cancelling_difference_is_zero():
    assert is_zero(rf("x1 - x1"))
    assert is_zero(rf("x*y - x*y"))


def test_commutator_is_nonzero():
    assert not is_zero(rf("x*y - y*x"))


def test_hua_identity():
    # x^{-1} - (x + x y^{-1} x)^{-1} = (x + y)^{-1}
    lhs = rf("inv(x) - inv(x + x*inv(y)*x)")
    assert equals(lhs, rf("inv(x + y)"))


def test_inverse_cancellation_is_zero():
    assert is_zero(rf("1 - y*inv(x*y)*x"))
    assert is_zero(rf("x*inv(x) - 1"))


def test_inverse_of_zero_is_not_regular():
    with pytest.raises(NotRegularError) as info:
        rf("inv(x1 - x1)")
    assert info.value.certificate is not None
    assert not info.value.certificate.is_full


@pytest.mark.parametrize("text, nvars", [("inv(0)", 1), ("inv(1 - y*inv(x*y)*x)", None)])
def test_inverses_of_vanishing_expressions_are_not_regular(text, nvars):
    with pytest.raises(NotRegularError):
        rf(text, nvars)


def test_arithmetic_matches_evaluation():
    X = point(2, seed=1)
    X1, X2 = X.mats
    a, b = rf("x1"), rf("x2", 2)
    np.testing.assert_allclose(evaluate_rf(a + b, X), X1 + X2, atol=1e-9)
    np.testing.assert_allclose(evaluate_rf(a * b, X), X1 @ X2, atol=1e-9)
    np.testing.assert_allclose(evaluate_rf(-a, X), -X1, atol=1e-9)
    np.testing.assert_allclose(evaluate_rf(rf_inv(b), X), np.linalg.inv(X2), atol=1e-8)
    assert rf_arith(a, b, 'add').dimension == a.dimension + b.dimension


def test_unknown_operation_rejected():
    with pytest.raises(ValueError):
        rf_arith(rf("x1"), rf("x1"), 'div')


def test_field_operations_compose_to_zero():
    a, b = rf("x1"), rf("x2", 2)
    assert is_zero(rf_sub(a * b, a * b))
    assert is_zero(a * b + rf_neg(a * b))
    assert equals(rf_inv(rf_inv(a)), a)
    assert not equals(a * b, b * a)


def test_inverse_of_zero_function_raises():
    with pytest.raises(DivisionByZeroFunctionError):
        rf_inv(rf("x1 - x1"))


def test_polynomials_embed():
    p = from_poly(parse_poly("x1*x2 - x2*x1"))
    assert not is_zero(p)
    assert is_zero(from_poly(parse_poly("x1 - x1", 1)))


def test_full_block_mode_agrees():
    assert is_zero(rf("0", 1), method='full_block')
    assert is_zero(rf("x1 - x1"), method='full_block')
    assert not is_zero(rf("x1"), method='full_block')


def test_batch_zero_tests():
    functions = [rf("x1"), rf("x1 - x1"), rf("x*y - y*x"), rf("1 - y*inv(x*y)*x")]
    assert is_zero_batch(functions, n_jobs=2) == [False, True, False, True]


def test_zero_test_report():
    report = zero_test_report(rf("x1 - x1"))
    assert report["zero"] is True
    assert report["certificate"]["kind"] in ("ShrunkSubspace", "Hollow")
    assert zero_test_report(rf("x1"))["certificate"]["kind"] == "Full"


def test_evaluation_cross_check_logs_nothing_when_consistent(caplog):
    X = point(2, seed=2)
    r = rf("inv(x1 + 3)*x2")
    value = evaluate_rf(r, X)
    np.testing.assert_allclose(value, np.linalg.inv(X.mats[0] + 3 * np.eye(3)) @ X.mats[1], atol=1e-9)
    assert "differ" not in caplog.text


def test_full_block_mode_accepts_rank_options():
    assert is_zero(rf("0", 1), method='full_block', probes=4, n_jobs=2, trials=2, seed=1)
    assert not is_zero(rf("x1"), method='full_block', probes=4, tol=1e-9)
    assert is_zero(rf("x1 - x1"), method='full_block', probes=4, n_jobs=2)
    functions = [rf("x1"), rf("0", 1), rf("x1 - x1")]
    assert is_zero_batch(functions, method='full_block', probes=4) == [False, True, True]


def test_inverse_of_product_reverses_factors():
    assert equals(rf("inv(x*y)"), rf("inv(y)*inv(x)"))
    assert not equals(rf("inv(x*y)"), rf("inv(x)*inv(y)"))


@pytest.mark.parametrize("count", [5, pytest.param(50, marks=pytest.mark.slow)])
def test_inverse_round_trip_on_random_expressions(count):
    rng = np.random.default_rng(7)
    one = rf("1", 2)
    checked = 0
    while checked < count:
        try:
            r = from_expr(random_expression(2, 2, rng))
            r_inv = rf_inv(r)
        except (NotRegularError, DivisionByZeroFunctionError):
            continue
        assert equals(r * r_inv, one)
        assert equals(r_inv * r, one)
        checked += 1


@pytest.mark.parametrize("text", [
    "x*y - x*y",
    "1 - y*inv(x*y)*x",
    "inv(x*y) - inv(y)*inv(x)",
    "x*y - y*x",
    "inv(x + y) - inv(x)",
    "x*x*y - y",
])
def test_zero_test_agrees_with_sampling(text):
    r = rf(text)
    norms = []
    for seed in range(20):
        for d in (2, 3, 4):
            try:
                norms.append(np.linalg.norm(evaluate_rf(r, point(r.nvars, d, seed))))
            except DomainError:
                continue
    assert norms
    if is_zero(r):
        assert max(norms) <= 1e-6
    else:
        assert max(norms) > 1e-3

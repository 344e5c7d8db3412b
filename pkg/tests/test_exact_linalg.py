from fractions import Fraction

import numpy as np
import pytest

import ExactLinalg
from ExactLinalg import I_UNIT, ONE, ZERO, ExactScalar, SingularMatrixError


@pytest.mark.parametrize("text, real, imag", [
    ("3/2", Fraction(3, 2), 0),
    ("-0.5", Fraction(-1, 2), 0),
    ("2i", 0, 2),
    ("-i", 0, -1),
    ("3/2+1/2i", Fraction(3, 2), Fraction(1, 2)),
    ("(1-2i)", 1, -2),
])
def test_parse_literals(text, real, imag):
    z = ExactScalar.parse(text)
    assert z.real == real
    assert z.imag == imag


def test_parse_rejects_garbage():
    with pytest.raises(ValueError):
        ExactScalar.parse("3/0")
    with pytest.raises(ValueError):
        ExactScalar.parse("")


def test_coercions():
    assert ExactScalar.of(["1/3", 2]) == ExactScalar(Fraction(1, 3), Fraction(2))
    assert ExactScalar.of(0.5) == ExactScalar(Fraction(1, 2))
    assert ExactScalar.of(1 + 2j) == ExactScalar(1, 2)
    assert ExactScalar.of(True) == ONE
    with pytest.raises(TypeError):
        ExactScalar.of(object())


def test_field_arithmetic():
    z = ExactScalar(1, 1)
    assert z * z.conjugate() == 2
    assert (ONE / z) * z == ONE
    assert I_UNIT * I_UNIT == -1
    assert z - z == ZERO
    assert not ZERO
    with pytest.raises(ZeroDivisionError):
        ONE / ZERO


def test_text_round_trip():
    for z in [ExactScalar(Fraction(3, 2), Fraction(-1, 2)), ExactScalar(0, 1), ExactScalar(-4), ExactScalar(0, -3)]:
        assert ExactScalar.parse(z.to_text()) == z


def test_hash_agrees_with_fractions():
    assert hash(ExactScalar(Fraction(1, 2))) == hash(Fraction(1, 2))
    assert len({ExactScalar(1), ExactScalar.of("2/2")}) == 1


def test_rank_nullspace_and_solve():
    A = ExactLinalg.exact_array([[1, 2, 3], [2, 4, 6], [1, 0, 1]])
    assert ExactLinalg.rank(A) == 2
    kernel = ExactLinalg.nullspace(A)
    assert len(kernel) == 1
    assert all(x == 0 for x in ExactLinalg.matmul(A, kernel[0].reshape(3, 1))[:, 0])

    x = ExactLinalg.solve(A, [1, 2, 0])
    assert x is not None
    assert list(ExactLinalg.matmul(A, x.reshape(3, 1))[:, 0]) == [1, 2, 0]
    assert ExactLinalg.solve(A, [1, 0, 0]) is None


def test_inverse_exact_and_singular():
    A = ExactLinalg.exact_array([[2, 1], [1, 1]])
    inv = ExactLinalg.inverse(A)
    assert np.array_equal(ExactLinalg.matmul(A, inv), ExactLinalg.identity(2))
    with pytest.raises(SingularMatrixError):
        ExactLinalg.inverse([[1, 2], [2, 4]])


def test_to_complex_and_conj_transpose():
    A = ExactLinalg.exact_array([[ExactScalar(1, 2), 0], ["1/4", "-i"]])
    np.testing.assert_allclose(ExactLinalg.to_complex(ExactLinalg.conj_transpose(A)),
                               ExactLinalg.to_complex(A).conj().T)


def test_scalars_are_immutable():
    z = ExactScalar(1, 2)
    with pytest.raises(AttributeError):
        z.value = ONE.value


def test_domain_matrix_adapter():
    A = ExactLinalg.exact_array([["1/2", "i"], [3, "1-i"]])
    dm = ExactLinalg.to_domain(A)
    assert dm.shape == (2, 2)
    assert np.array_equal(ExactLinalg.from_domain(dm), A)


def test_rref_has_unit_pivots_over_gaussian_rationals():
    r, pivots = ExactLinalg.rref([["2i", 4], [1, "-2i"]])
    assert pivots == [0]
    assert r[0, 0] == ONE
    assert r[0, 1] == ExactScalar(0, -2)
    assert r[1, 0] == ZERO and r[1, 1] == ZERO


def test_complex_inverse():
    A = ExactLinalg.exact_array([["1+i", 2], [0, "i"]])
    inv = ExactLinalg.inverse(A)
    assert np.array_equal(ExactLinalg.matmul(inv, A), ExactLinalg.identity(2))
    assert ExactLinalg.inverse(np.empty((0, 0), dtype=object)).shape == (0, 0)

"""
Exact Linear Algebra
Complex rationals and elimination over them, for reductions that must not round.

Scalars wrap elements of sympy's Gaussian rational field QQ_I; matrices stay numpy
object arrays of ExactScalar and go through DomainMatrix for rref, rank and inverse.
"""

import logging
import numbers
from fractions import Fraction
from typing import Any, List, Optional, Sequence, Tuple, Union

import numpy as np
from sympy.polys.domains import QQ, QQ_I
from sympy.polys.matrices import DomainMatrix
from sympy.polys.matrices.exceptions import DMNonInvertibleMatrixError

logger = logging.getLogger(__name__)


class SingularMatrixError(ValueError):
    """Raised when an exact inverse is requested for a singular matrix"""


def _rational(x) -> Any:
    """QQ element from an int, Fraction, float or QQ element"""

    if isinstance(x, float):
        # Fraction(float) is exact: the binary expansion is kept
        x = Fraction(x)
    return QQ(int(x.numerator), int(x.denominator))


def _fraction(q) -> Fraction:
    return Fraction(int(q.numerator), int(q.denominator))


class ExactScalar:
    """Complex number with arbitrary-precision rational parts"""

    __slots__ = ('value',)

    def __init__(self, real=0, imag=0):
        object.__setattr__(self, 'value', QQ_I(_rational(real), _rational(imag)))

    @classmethod
    def wrap(cls, value) -> "ExactScalar":
        """Adopt an element of QQ_I without conversion"""
        out = object.__new__(cls)
        object.__setattr__(out, 'value', value)
        return out

    def __setattr__(self, name, value):
        raise AttributeError("ExactScalar is immutable")

    @property
    def real(self) -> Fraction:
        return _fraction(self.value.x)

    @property
    def imag(self) -> Fraction:
        return _fraction(self.value.y)

    @classmethod
    def of(cls, value: "ScalarLike") -> "ExactScalar":
        """Coerce ints, Fractions, floats, complex numbers, strings and [re, im] pairs"""

        if isinstance(value, ExactScalar):
            return value
        if isinstance(value, str):
            return cls.parse(value)
        if isinstance(value, (list, tuple)):
            if len(value) != 2:
                raise ValueError(f"Complex entry must be a [re, im] pair, got {value!r}")
            re_part, im_part = cls.of(value[0]), cls.of(value[1])
            return re_part + im_part * I_UNIT
        if isinstance(value, bool):
            return cls(Fraction(int(value)))
        if isinstance(value, numbers.Rational):
            return cls(Fraction(int(value.numerator), int(value.denominator)))
        if isinstance(value, numbers.Real):
            # Fraction(float) is exact: the binary expansion is kept
            return cls(Fraction(float(value)))
        if isinstance(value, numbers.Complex):
            z = complex(value)
            return cls(Fraction(z.real), Fraction(z.imag))
        raise TypeError(f"Cannot convert {type(value).__name__} to an exact scalar")

    @classmethod
    def parse(cls, text: str) -> "ExactScalar":
        """Parse '3/2', '-0.5', '2i', '-i', '3/2+1/2i' or '(1-2i)'"""

        body = text.strip()
        if body.startswith('(') and body.endswith(')'):
            body = body[1:-1]
        body = body.replace(' ', '')
        if not body:
            raise ValueError(f"Empty scalar literal {text!r}")

        # Split into signed summands, keeping the sign with each part
        parts: List[str] = []
        current = ''
        for ch in body:
            if ch in '+-' and current and current[-1] not in '+-/':
                parts.append(current)
                current = ch
            else:
                current += ch
        parts.append(current)

        real, imag = Fraction(0), Fraction(0)
        for part in parts:
            try:
                if part.endswith('i'):
                    magnitude = part[:-1]
                    if magnitude in ('', '+'):
                        imag += 1
                    elif magnitude == '-':
                        imag -= 1
                    else:
                        imag += Fraction(magnitude)
                else:
                    real += Fraction(part)
            except (ValueError, ZeroDivisionError) as e:
                raise ValueError(f"Malformed scalar literal {text!r}: {e}") from e
        return cls(real, imag)

    # Arithmetic

    def _coerce(self, other) -> Optional["ExactScalar"]:
        try:
            return ExactScalar.of(other)
        except (TypeError, ValueError):
            return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return ExactScalar.wrap(self.value + o.value)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return ExactScalar.wrap(self.value - o.value)

    def __rsub__(self, other):
        return ExactScalar.of(other) - self

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return ExactScalar.wrap(self.value * o.value)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = ExactScalar.of(other)
        if not o:
            raise ZeroDivisionError("Division by exact zero")
        return ExactScalar.wrap(QQ_I.quo(self.value, o.value))

    def __rtruediv__(self, other):
        return ExactScalar.of(other) / self

    def __neg__(self):
        return ExactScalar.wrap(-self.value)

    def conjugate(self) -> "ExactScalar":
        return ExactScalar.wrap(QQ_I(self.value.x, -self.value.y))

    def __eq__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self.value == o.value

    def __hash__(self):
        if self.value.y == 0:
            return hash(self.real)
        return hash((self.real, self.imag))

    def __bool__(self):
        return self.value.x != 0 or self.value.y != 0

    def __complex__(self):
        return complex(float(self.real), float(self.imag))

    @property
    def is_real(self) -> bool:
        return self.value.y == 0

    def to_text(self) -> str:
        """Canonical literal accepted by parse (no surrounding parentheses)"""

        if self.imag == 0:
            return str(self.real)
        if self.imag == 1:
            imag_text = 'i'
        elif self.imag == -1:
            imag_text = '-i'
        else:
            imag_text = f"{self.imag}i"
        if self.real == 0:
            return imag_text
        joiner = '' if imag_text.startswith('-') else '+'
        return f"{self.real}{joiner}{imag_text}"

    def __str__(self):
        return self.to_text()

    def __repr__(self):
        return f"ExactScalar({self.to_text()})"


ScalarLike = Union[ExactScalar, int, Fraction, float, complex, str, Sequence]

ZERO = ExactScalar()
ONE = ExactScalar(Fraction(1))
I_UNIT = ExactScalar(Fraction(0), Fraction(1))


def exact_array(rows) -> np.ndarray:
    """Object array of ExactScalar built from nested sequences or a numeric array"""

    source = np.asarray(rows, dtype=object)
    out = np.empty(source.shape, dtype=object)
    for idx in np.ndindex(source.shape):
        out[idx] = ExactScalar.of(source[idx])
    return out


def zeros(rows: int, cols: int) -> np.ndarray:
    out = np.empty((rows, cols), dtype=object)
    out.fill(ZERO)
    return out


def identity(n: int) -> np.ndarray:
    out = zeros(n, n)
    for i in range(n):
        out[i, i] = ONE
    return out


def to_domain(matrix) -> DomainMatrix:
    """DomainMatrix over QQ_I holding the entries of a 2-D array"""

    a = exact_array(matrix)
    if a.ndim != 2:
        raise ValueError(f"Expected a 2-D matrix, got shape {a.shape}")
    rows, cols = a.shape
    return DomainMatrix([[a[i, j].value for j in range(cols)] for i in range(rows)], (rows, cols), QQ_I)


def from_domain(matrix: DomainMatrix) -> np.ndarray:
    rows, cols = matrix.shape
    out = zeros(rows, cols)
    for i, row in enumerate(matrix.to_list()):
        for j, value in enumerate(row):
            out[i, j] = ExactScalar.wrap(QQ_I.convert(value))
    return out


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact matrix product of two 2-D object arrays"""

    if a.shape[1] != b.shape[0]:
        raise ValueError(f"Shape mismatch in exact product: {a.shape} @ {b.shape}")
    if 0 in a.shape or 0 in b.shape:
        return zeros(a.shape[0], b.shape[1])
    return from_domain(to_domain(a).matmul(to_domain(b)))


def to_complex(a: np.ndarray) -> np.ndarray:
    out = np.zeros(a.shape, dtype=complex)
    for idx in np.ndindex(a.shape):
        out[idx] = complex(a[idx])
    return out


def conj_transpose(a: np.ndarray) -> np.ndarray:
    out = np.empty((a.shape[1], a.shape[0]), dtype=object)
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            out[j, i] = a[i, j].conjugate()
    return out


def rref(matrix: np.ndarray) -> Tuple[np.ndarray, List[int]]:
    """Reduced row echelon form and pivot columns"""

    reduced, pivots = to_domain(matrix).rref()
    r = from_domain(reduced)
    for row, c in enumerate(pivots):
        # unit pivots, whatever normalization the backend picked
        if r[row, c] != ONE:
            p = r[row, c]
            r[row] = [x / p for x in r[row]]
    return r, list(pivots)


def rank(matrix: np.ndarray) -> int:
    matrix = np.asarray(matrix, dtype=object)
    if matrix.size == 0:
        return 0
    return to_domain(matrix).rank()


def nullspace(matrix: np.ndarray) -> List[np.ndarray]:
    """Basis of the right kernel, one vector per free column with a 1 in that column"""

    matrix = np.asarray(matrix, dtype=object)
    cols = matrix.shape[1]
    if matrix.shape[0] == 0:
        return [identity(cols)[:, k] for k in range(cols)]
    r, pivots = rref(matrix)
    basis = []
    for free in (c for c in range(cols) if c not in pivots):
        vec = np.empty(cols, dtype=object)
        vec.fill(ZERO)
        vec[free] = ONE
        for row, pc in enumerate(pivots):
            vec[pc] = -r[row, free]
        basis.append(vec)
    return basis


def solve(matrix: np.ndarray, rhs: Sequence) -> Optional[np.ndarray]:
    """One exact solution of matrix·x = rhs, or None when the system is inconsistent"""

    matrix = exact_array(matrix)
    rows, cols = matrix.shape
    augmented = np.empty((rows, cols + 1), dtype=object)
    augmented[:, :cols] = matrix
    augmented[:, cols] = exact_array(list(rhs))
    r, pivots = rref(augmented)
    if cols in pivots:
        return None
    x = np.empty(cols, dtype=object)
    x.fill(ZERO)
    for row, pc in enumerate(pivots):
        x[pc] = r[row, cols]
    return x


def inverse(matrix: np.ndarray) -> np.ndarray:
    dm = to_domain(matrix)
    n = dm.shape[0]
    if dm.shape != (n, n):
        raise SingularMatrixError(f"Only square matrices have inverses, got {dm.shape}")
    if n == 0:
        return zeros(0, 0)
    try:
        return from_domain(dm.inv())
    except DMNonInvertibleMatrixError as e:
        raise SingularMatrixError("Matrix is singular over the exact field") from e

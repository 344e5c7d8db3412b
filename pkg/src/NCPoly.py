"""
Noncommutative Polynomials
==========================

Exact arithmetic in the free algebra C<x1,...,xn> and in matrices over it.

Features:
- Polynomials as sorted maps from words to exact complex coefficients
- Involution (word reversal plus conjugation) and degree bookkeeping
- Evaluation on tuples of complex matrices
- Left transductions and d-independence reduction by the weak algorithm
- Text and JSON codecs
"""

import itertools
import logging
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from arpeggio import EOF, NoMatch, Optional as Opt, ParserPython, PTNodeVisitor, Terminal, ZeroOrMore, visit_parse_tree
from arpeggio import RegExMatch as _

import ExactLinalg
from ExactLinalg import ONE, ZERO, ExactScalar, ScalarLike

logger = logging.getLogger(__name__)

Word = Tuple[int, ...]
NEG_INF = float('-inf')


class VariableCountError(ValueError):
    """Operands disagree on the number of variables"""


class DimensionMismatchError(ValueError):
    """Matrix shapes or evaluation dimensions do not fit together"""


class PolynomialSyntaxError(ValueError):
    """Polynomial text could not be parsed"""

    def __init__(self, message: str, position: int = 0):
        super().__init__(message)
        self.position = position


def word_key(word: Word) -> Tuple[int, Word]:
    """Graded lexicographic sort key"""
    return (len(word), word)


@dataclass(frozen=True)
class NCPoly:
    """Noncommutative polynomial with exact complex coefficients"""
    nvars: int
    terms: Tuple[Tuple[Word, ExactScalar], ...] = ()

    def __post_init__(self):
        if self.nvars < 0:
            raise ValueError(f"Variable count must be nonnegative, got {self.nvars}")
        source = self.terms.items() if isinstance(self.terms, Mapping) else self.terms
        merged: Dict[Word, ExactScalar] = {}
        for word, coeff in source:
            word = tuple(int(letter) for letter in word)
            for letter in word:
                if not 1 <= letter <= self.nvars:
                    raise VariableCountError(
                        f"Letter x{letter} outside x1..x{self.nvars}")
            merged[word] = merged.get(word, ZERO) + ExactScalar.of(coeff)
        canonical = tuple(sorted(((w, c) for w, c in merged.items() if c), key=lambda t: word_key(t[0])))
        object.__setattr__(self, 'terms', canonical)

    # Constructors

    @classmethod
    def zero(cls, nvars: int) -> "NCPoly":
        return cls(nvars)

    @classmethod
    def constant(cls, nvars: int, value: ScalarLike = 1) -> "NCPoly":
        return cls(nvars, (((), value),))

    @classmethod
    def variable(cls, nvars: int, index: int) -> "NCPoly":
        return cls(nvars, (((index,), ONE),))

    @classmethod
    def monomial(cls, nvars: int, word: Sequence[int], coeff: ScalarLike = 1) -> "NCPoly":
        return cls(nvars, ((tuple(word), coeff),))

    # Structure

    @cached_property
    def coefficients(self) -> Dict[Word, ExactScalar]:
        return dict(self.terms)

    def coefficient(self, word: Sequence[int]) -> ExactScalar:
        return self.coefficients.get(tuple(word), ZERO)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def degree(self) -> Union[int, float]:
        """Length of the longest word, -inf for the zero polynomial"""
        if not self.terms:
            return NEG_INF
        return len(self.terms[-1][0])

    @property
    def is_constant(self) -> bool:
        return all(len(w) == 0 for w, _ in self.terms)

    def homogeneous_part(self, k: int) -> "NCPoly":
        return NCPoly(self.nvars, tuple((w, c) for w, c in self.terms if len(w) == k))

    def leading_part(self) -> "NCPoly":
        if self.is_zero:
            return self
        return self.homogeneous_part(int(self.degree))

    def with_nvars(self, nvars: int) -> "NCPoly":
        if nvars == self.nvars:
            return self
        return NCPoly(nvars, self.terms)

    # Arithmetic

    def _check(self, other: "NCPoly"):
        if self.nvars != other.nvars:
            raise VariableCountError(
                f"Polynomials in {self.nvars} and {other.nvars} variables cannot be combined")

    def _coerce(self, other) -> "NCPoly":
        if isinstance(other, NCPoly):
            self._check(other)
            return other
        return NCPoly.constant(self.nvars, other)

    def __add__(self, other):
        other = self._coerce(other)
        return NCPoly(self.nvars, self.terms + other.terms)

    __radd__ = __add__

    def __neg__(self):
        return NCPoly(self.nvars, tuple((w, -c) for w, c in self.terms))

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        products: Dict[Word, ExactScalar] = {}
        for w1, c1 in self.terms:
            for w2, c2 in other.terms:
                word = w1 + w2
                products[word] = products.get(word, ZERO) + c1 * c2
        return NCPoly(self.nvars, products)

    def __rmul__(self, other):
        return self._coerce(other) * self

    def scale(self, c: ScalarLike) -> "NCPoly":
        c = ExactScalar.of(c)
        return NCPoly(self.nvars, tuple((w, c * coeff) for w, coeff in self.terms))

    def adjoint(self) -> "NCPoly":
        return NCPoly(self.nvars, tuple((w[::-1], c.conjugate()) for w, c in self.terms))

    def __str__(self):
        return format_poly(self)


def poly_arith(a: NCPoly, b: NCPoly, op: str) -> NCPoly:
    """Exact sum, difference or product of two polynomials"""

    a._check(b)
    if op == 'add':
        return a + b
    if op == 'sub':
        return a - b
    if op == 'mul':
        return a * b
    raise ValueError(f"Unknown polynomial operation '{op}'")


def adjoint(a: NCPoly) -> NCPoly:
    return a.adjoint()


def left_transduction(suffix: Sequence[int], b: NCPoly) -> NCPoly:
    """Truncate the suffix word from every monomial ending in it; other monomials vanish"""

    suffix = tuple(suffix)
    if not suffix:
        return b
    k = len(suffix)
    kept = tuple((w[:-k], c) for w, c in b.terms if len(w) >= k and w[-k:] == suffix)
    return NCPoly(b.nvars, kept)


@dataclass(frozen=True)
class PolyMatrix:
    """Matrix with NCPoly entries sharing one variable count"""
    rows: int
    cols: int
    nvars: int
    entries: Tuple[Tuple[NCPoly, ...], ...]

    def __post_init__(self):
        if len(self.entries) != self.rows or any(len(r) != self.cols for r in self.entries):
            raise DimensionMismatchError(f"Entries do not form a {self.rows}x{self.cols} grid")
        for row in self.entries:
            for entry in row:
                if entry.nvars != self.nvars:
                    raise VariableCountError(
                        f"Entry in {entry.nvars} variables inside a matrix over {self.nvars}")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence], nvars: int) -> "PolyMatrix":
        """Build from nested rows of NCPoly, scalars or polynomial text"""

        grid = []
        for row in rows:
            grid.append(tuple(_as_poly(entry, nvars) for entry in row))
        n_cols = len(grid[0]) if grid else 0
        return cls(len(grid), n_cols, nvars, tuple(grid))

    @classmethod
    def zeros(cls, rows: int, cols: int, nvars: int) -> "PolyMatrix":
        z = NCPoly.zero(nvars)
        return cls(rows, cols, nvars, tuple(tuple(z for _ in range(cols)) for _ in range(rows)))

    @classmethod
    def identity(cls, n: int, nvars: int) -> "PolyMatrix":
        return cls.from_scalars(ExactLinalg.identity(n), nvars)

    @classmethod
    def from_scalars(cls, matrix: np.ndarray, nvars: int) -> "PolyMatrix":
        matrix = np.asarray(matrix, dtype=object)
        return cls.from_rows([[NCPoly.constant(nvars, matrix[i, j]) for j in range(matrix.shape[1])]
                              for i in range(matrix.shape[0])], nvars)

    def __getitem__(self, index: Tuple[int, int]) -> NCPoly:
        i, j = index
        return self.entries[i][j]

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def degree(self) -> Union[int, float]:
        return max((e.degree for row in self.entries for e in row), default=NEG_INF)

    @property
    def is_zero(self) -> bool:
        return all(e.is_zero for row in self.entries for e in row)

    def with_entry(self, i: int, j: int, value: NCPoly) -> "PolyMatrix":
        grid = [list(r) for r in self.entries]
        grid[i][j] = value
        return PolyMatrix(self.rows, self.cols, self.nvars, tuple(tuple(r) for r in grid))

    def submatrix(self, row_idx: Sequence[int], col_idx: Sequence[int]) -> "PolyMatrix":
        return PolyMatrix(len(row_idx), len(col_idx), self.nvars,
                          tuple(tuple(self.entries[i][j] for j in col_idx) for i in row_idx))

    def transpose(self) -> "PolyMatrix":
        return PolyMatrix(self.cols, self.rows, self.nvars,
                          tuple(tuple(self.entries[i][j] for i in range(self.rows)) for j in range(self.cols)))

    def adjoint(self) -> "PolyMatrix":
        """Conjugate transpose with the involution applied entrywise"""
        return PolyMatrix(self.cols, self.rows, self.nvars,
                          tuple(tuple(self.entries[i][j].adjoint() for i in range(self.rows))
                                for j in range(self.cols)))

    def __add__(self, other: "PolyMatrix") -> "PolyMatrix":
        if self.shape != other.shape:
            raise DimensionMismatchError(f"Cannot add {self.shape} and {other.shape}")
        return PolyMatrix(self.rows, self.cols, self.nvars,
                          tuple(tuple(a + b for a, b in zip(ra, rb)) for ra, rb in zip(self.entries, other.entries)))

    def __sub__(self, other: "PolyMatrix") -> "PolyMatrix":
        return self + other.scale(-1)

    def scale(self, c: ScalarLike) -> "PolyMatrix":
        return PolyMatrix(self.rows, self.cols, self.nvars,
                          tuple(tuple(e.scale(c) for e in row) for row in self.entries))

    def __matmul__(self, other: "PolyMatrix") -> "PolyMatrix":
        if self.cols != other.rows:
            raise DimensionMismatchError(f"Cannot multiply {self.shape} by {other.shape}")
        if self.nvars != other.nvars:
            raise VariableCountError("Matrix factors disagree on the variable count")
        grid = []
        for i in range(self.rows):
            row = []
            for j in range(other.cols):
                acc = NCPoly.zero(self.nvars)
                for k in range(self.cols):
                    a, b = self.entries[i][k], other.entries[k][j]
                    if not a.is_zero and not b.is_zero:
                        acc = acc + a * b
                row.append(acc)
            grid.append(tuple(row))
        return PolyMatrix(self.rows, other.cols, self.nvars, tuple(grid))

    def __str__(self):
        return '[' + '; '.join(', '.join(str(e) for e in row) for row in self.entries) + ']'


def block_diag(*blocks: PolyMatrix) -> PolyMatrix:
    nvars = blocks[0].nvars
    rows = sum(b.rows for b in blocks)
    cols = sum(b.cols for b in blocks)
    grid = [[NCPoly.zero(nvars) for _ in range(cols)] for _ in range(rows)]
    r0 = c0 = 0
    for b in blocks:
        for i in range(b.rows):
            for j in range(b.cols):
                grid[r0 + i][c0 + j] = b.entries[i][j]
        r0 += b.rows
        c0 += b.cols
    return PolyMatrix(rows, cols, nvars, tuple(tuple(r) for r in grid))


def _as_poly(entry, nvars: int) -> NCPoly:
    if isinstance(entry, NCPoly):
        return entry.with_nvars(nvars) if entry.nvars < nvars else entry
    if isinstance(entry, str):
        return parse_poly(entry, nvars)
    return NCPoly.constant(nvars, entry)


@dataclass(frozen=True, eq=False)
class MatrixTuple:
    """Evaluation point X = (X1, ..., Xn) of square complex matrices"""
    mats: Tuple[np.ndarray, ...]
    selfadjoint: bool = False
    dim_hint: Optional[int] = field(default=None, repr=False)

    def __post_init__(self):
        mats = tuple(np.asarray(m, dtype=complex) for m in self.mats)
        object.__setattr__(self, 'mats', mats)
        if not mats:
            if self.dim_hint is None:
                raise DimensionMismatchError("An empty tuple needs an explicit dimension")
            return
        d = mats[0].shape[0]
        for m in mats:
            if m.shape != (d, d):
                raise DimensionMismatchError(f"Expected {d}x{d} matrices, got {m.shape}")
        if self.selfadjoint:
            for j, m in enumerate(mats, start=1):
                scale = max(1.0, float(np.linalg.norm(m)))
                if np.linalg.norm(m - m.conj().T) > 1e-12 * scale:
                    raise ValueError(f"Matrix X{j} is not selfadjoint")

    @classmethod
    def from_arrays(cls, arrays: Iterable[np.ndarray], selfadjoint: Optional[bool] = None,
                    dim: Optional[int] = None) -> "MatrixTuple":
        mats = tuple(np.asarray(a, dtype=complex) for a in arrays)
        if selfadjoint is None:
            selfadjoint = all(np.allclose(m, m.conj().T, atol=1e-12) for m in mats)
        return cls(mats, selfadjoint, dim)

    @property
    def n(self) -> int:
        return len(self.mats)

    @property
    def dim(self) -> int:
        return self.mats[0].shape[0] if self.mats else int(self.dim_hint)


def _word_product(word: Word, X: MatrixTuple, cache: Dict[Word, np.ndarray]) -> np.ndarray:
    if word in cache:
        return cache[word]
    if not word:
        value = np.eye(X.dim, dtype=complex)
    else:
        value = _word_product(word[:-1], X, cache) @ X.mats[word[-1] - 1]
    cache[word] = value
    return value


def eval_poly(a: NCPoly, X: MatrixTuple, cache: Optional[Dict[Word, np.ndarray]] = None) -> np.ndarray:
    if X.n < a.nvars:
        raise DimensionMismatchError(f"Polynomial in {a.nvars} variables evaluated at a {X.n}-tuple")
    cache = {} if cache is None else cache
    result = np.zeros((X.dim, X.dim), dtype=complex)
    for word, coeff in a.terms:
        result += complex(coeff) * _word_product(word, X, cache)
    return result


def eval_poly_matrix(P: PolyMatrix, X: MatrixTuple) -> np.ndarray:
    """Entrywise evaluation assembled into a (rows*d) x (cols*d) block matrix"""

    if X.n < P.nvars:
        raise DimensionMismatchError(f"Matrix over {P.nvars} variables evaluated at a {X.n}-tuple")
    d = X.dim
    cache: Dict[Word, np.ndarray] = {}
    out = np.zeros((P.rows * d, P.cols * d), dtype=complex)
    for i in range(P.rows):
        for j in range(P.cols):
            entry = P.entries[i][j]
            if not entry.is_zero:
                out[i * d:(i + 1) * d, j * d:(j + 1) * d] = eval_poly(entry, X, cache)
    return out


# Text format: terms like (3/2+1/2i)*x1*x2^3 joined by + and -

def sign():
    return _(r'[+-]')


def number():
    return _(r'(?:\d+(?:\.\d*)?|\.\d+)(?:/\d+)?i?|i(?![A-Za-z0-9_])')


def complex_literal():
    return "(", Opt(sign), number, Opt(sign, number), ")"


def variable():
    return _(r'x\d+|[xyz](?![A-Za-z0-9_])')


def exponent():
    return _(r'\d+')


def power():
    return variable, Opt("^", exponent)


def factor():
    return [complex_literal, number, power]


def term():
    return factor, ZeroOrMore("*", factor)


def polynomial():
    return Opt(sign), term, ZeroOrMore(sign, term), EOF


_LETTER_NAMES = {'x': 1, 'y': 2, 'z': 3}
_PUNCTUATION = {'(', ')', '*', '^', ''}


def _flatten(children) -> list:
    flat = []
    for child in children:
        if isinstance(child, list):
            flat.extend(_flatten(child))
        elif child is not None and not (isinstance(child, str) and child in _PUNCTUATION):
            flat.append(child)
    return flat


class _PolyVisitor(PTNodeVisitor):

    def visit__default__(self, node, children):
        if isinstance(node, Terminal):
            return node.value
        return list(children)

    def visit_number(self, node, children):
        return ExactScalar.parse(node.value)

    def visit_sign(self, node, children):
        return node.value

    def visit_variable(self, node, children):
        name = node.value
        return _LETTER_NAMES[name] if name in _LETTER_NAMES else int(name[1:])

    def visit_exponent(self, node, children):
        return int(node.value)

    def visit_complex_literal(self, node, children):
        total, pending = ZERO, ONE
        for item in _flatten(children):
            if isinstance(item, str):
                pending = ONE if item == '+' else -ONE
            else:
                total = total + pending * item
                pending = ONE
        return total

    def visit_power(self, node, children):
        items = _flatten(children)
        letter = items[0]
        reps = items[1] if len(items) > 1 else 1
        if reps < 1:
            raise PolynomialSyntaxError("Exponents must be positive integers", node.position)
        return (letter,) * reps

    def visit_factor(self, node, children):
        return _flatten(children)[0]

    def visit_term(self, node, children):
        coeff, word = ONE, ()
        for item in _flatten(children):
            if isinstance(item, tuple):
                word = word + item
            else:
                coeff = coeff * item
        return [('term', coeff, word)]

    def visit_polynomial(self, node, children):
        signed, pending = [], ONE
        for item in _flatten(children):
            if isinstance(item, str):
                pending = ONE if item == '+' else -ONE
            else:
                _, coeff, word = item
                signed.append((word, pending * coeff))
                pending = ONE
        return [signed]


@lru_cache(maxsize=1)
def _poly_parser() -> ParserPython:
    return ParserPython(polynomial, skipws=True)


def parse_poly(text: str, nvars: Optional[int] = None) -> NCPoly:
    """Parse the polynomial text format; nvars defaults to the largest letter used"""

    parser = _poly_parser()
    try:
        tree = parser.parse(text)
    except NoMatch as e:
        line, col = parser.pos_to_linecol(e.position)
        raise PolynomialSyntaxError(f"Cannot parse polynomial at line {line}, column {col}: {text!r}",
                                    e.position) from e
    signed = _flatten([visit_parse_tree(tree, _PolyVisitor())])
    used = max((max(w) for w, _ in signed if w), default=0)
    if nvars is None:
        nvars = used
    elif used > nvars:
        raise VariableCountError(f"Letter x{used} used in a polynomial over {nvars} variables")
    return NCPoly(nvars, signed)


def _format_word(word: Word) -> str:
    parts = []
    for letter, run in itertools.groupby(word):
        reps = len(list(run))
        parts.append(f"x{letter}" if reps == 1 else f"x{letter}^{reps}")
    return '*'.join(parts)


def format_poly(a: NCPoly) -> str:
    """Canonical text, graded lexicographic term order, parseable by parse_poly"""

    if a.is_zero:
        return '0'
    pieces = []
    for word, coeff in a.terms:
        negative = coeff.is_real and coeff.real < 0
        if negative:
            coeff = -coeff
        mono = _format_word(word)
        if coeff == ONE and mono:
            text = mono
        else:
            lit = coeff.to_text()
            if not coeff.is_real:
                lit = f"({lit})"
            text = f"{lit}*{mono}" if mono else lit
        if not pieces:
            pieces.append(f"-{text}" if negative else text)
        else:
            pieces.append(f"{'-' if negative else '+'} {text}")
    return ' '.join(pieces)


# JSON codecs

def poly_matrix_from_json(data: Mapping) -> PolyMatrix:
    try:
        rows, cols, nvars = int(data['rows']), int(data['cols']), int(data['nvars'])
        entries = data['entries']
    except (KeyError, TypeError, ValueError) as e:
        raise ValueError(f"Malformed PolyMatrix JSON: {e}") from e
    matrix = PolyMatrix.from_rows([[parse_poly(str(t), nvars) for t in row] for row in entries], nvars)
    if matrix.shape != (rows, cols):
        raise DimensionMismatchError(f"Declared {rows}x{cols} but entries form {matrix.shape}")
    return matrix


def poly_matrix_to_json(P: PolyMatrix) -> Dict:
    return {"rows": P.rows, "cols": P.cols, "nvars": P.nvars,
            "entries": [[format_poly(e) for e in row] for row in P.entries]}


def matrix_tuple_from_json(data: Mapping) -> MatrixTuple:
    try:
        n, dim = int(data['n']), int(data['dim'])
        raw = data['mats']
    except (KeyError, TypeError, ValueError) as e:
        raise ValueError(f"Malformed tuple JSON: {e}") from e
    mats = []
    for m in raw:
        mats.append(np.array([[complex(ExactScalar.of(x)) for x in row] for row in m], dtype=complex))
    if len(mats) != n:
        raise DimensionMismatchError(f"Declared {n} matrices, found {len(mats)}")
    X = MatrixTuple(tuple(mats), bool(data.get('selfadjoint', False)), dim)
    if X.n and X.dim != dim:
        raise DimensionMismatchError(f"Declared dimension {dim}, matrices are {X.dim}x{X.dim}")
    return X


def complex_to_json(z: complex) -> List[float]:
    return [float(np.real(z)), float(np.imag(z))]


def matrix_to_json(m: np.ndarray) -> List[List[List[float]]]:
    return [[complex_to_json(z) for z in row] for row in np.asarray(m)]


def matrix_tuple_to_json(X: MatrixTuple) -> Dict:
    return {"n": X.n, "dim": X.dim, "selfadjoint": X.selfadjoint,
            "mats": [matrix_to_json(m) for m in X.mats]}


# d-independence

@dataclass(frozen=True)
class DIndependenceReduction:
    """Outcome of the weak-algorithm reduction: reduced = tuple·transform (right side)"""
    reduced: Tuple[NCPoly, ...]
    transform: PolyMatrix
    inverse: PolyMatrix
    side: str


def _words_of_length(nvars: int, k: int) -> Iterable[Word]:
    return itertools.product(range(1, nvars + 1), repeat=k)


def _right_dependency(polys: Sequence[NCPoly], i: int) -> Optional[Dict[int, NCPoly]]:
    """Homogeneous multipliers b_j with lead(a_i) = sum lead(a_j) b_j, if they exist"""

    target = polys[i]
    deg = int(target.degree)
    nvars = target.nvars
    others = [j for j, p in enumerate(polys) if j != i and not p.is_zero and p.degree <= deg]
    if not others:
        return None

    generators = []
    for j in others:
        lead = polys[j].leading_part()
        for u in _words_of_length(nvars, deg - int(polys[j].degree)):
            generators.append((j, u, lead * NCPoly.monomial(nvars, u)))

    goal = target.leading_part()
    support = set(goal.coefficients)
    for _, _, g in generators:
        support.update(g.coefficients)
    words = sorted(support, key=word_key)

    system = ExactLinalg.zeros(len(words), len(generators))
    for col, (_, _, g) in enumerate(generators):
        for row, w in enumerate(words):
            system[row, col] = g.coefficient(w)
    solution = ExactLinalg.solve(system, [goal.coefficient(w) for w in words])
    if solution is None:
        return None

    multipliers: Dict[int, NCPoly] = {}
    for (j, u, _), x in zip(generators, solution):
        if x:
            multipliers[j] = multipliers.get(j, NCPoly.zero(nvars)) + NCPoly.monomial(nvars, u, x)
    return multipliers


def _candidate_order(polys: Sequence[NCPoly]) -> List[int]:
    # Highest degree first; ties by the lexicographically largest leading word, then later index
    live = [i for i, p in enumerate(polys) if not p.is_zero]
    return sorted(live, key=lambda i: (polys[i].degree, polys[i].leading_part().terms[-1][0], i), reverse=True)


def _reduce_right(polys: Sequence[NCPoly]) -> Tuple[List[NCPoly], PolyMatrix, PolyMatrix]:
    polys = list(polys)
    m, nvars = len(polys), polys[0].nvars
    transform = PolyMatrix.identity(m, nvars)
    inverse = PolyMatrix.identity(m, nvars)

    rounds = 0
    while True:
        step = None
        for i in _candidate_order(polys):
            multipliers = _right_dependency(polys, i)
            if multipliers:
                step = (i, multipliers)
                break
        if step is None:
            break

        i, multipliers = step
        old_degree = polys[i].degree
        for j, b in multipliers.items():
            polys[i] = polys[i] - polys[j] * b
        if not polys[i].degree < old_degree:
            raise RuntimeError("d-independence reduction failed to lower the degree")

        # Elementary column operation: column i gets -b_j in row j
        elementary = PolyMatrix.identity(m, nvars)
        elementary_inv = PolyMatrix.identity(m, nvars)
        for j, b in multipliers.items():
            elementary = elementary.with_entry(j, i, -b)
            elementary_inv = elementary_inv.with_entry(j, i, b)
        transform = transform @ elementary
        inverse = elementary_inv @ inverse
        rounds += 1
        logger.debug(f"d-reduction round {rounds}: entry {i} dropped from degree {old_degree} "
                     f"to {polys[i].degree}")

    return polys, transform, inverse


def d_independence_reduce(polys: Sequence[NCPoly], side: str = 'right') -> DIndependenceReduction:
    """Reduce a tuple by invertible polynomial transforms until its nonzero entries are d-independent"""

    if not polys:
        raise ValueError("d-independence reduction needs a nonempty tuple")
    nvars = polys[0].nvars
    for p in polys:
        if p.nvars != nvars:
            raise VariableCountError("Tuple entries disagree on the variable count")

    if side == 'right':
        reduced, transform, inverse = _reduce_right(polys)
        return DIndependenceReduction(tuple(reduced), transform, inverse, side)
    if side == 'left':
        # Left reduction is the right reduction of the adjoint tuple, read back through the involution
        reduced, transform, inverse = _reduce_right([p.adjoint() for p in polys])
        return DIndependenceReduction(tuple(p.adjoint() for p in reduced),
                                      transform.adjoint(), inverse.adjoint(), side)
    raise ValueError(f"side must be 'left' or 'right', got '{side}'")


def is_d_independent(polys: Sequence[NCPoly], side: str = 'right') -> bool:
    """Exact test: no entry is zero and none is d-dependent on the others"""

    if any(p.is_zero for p in polys):
        return False
    family = list(polys) if side == 'right' else [p.adjoint() for p in polys]
    return all(_right_dependency(family, i) is None for i in range(len(family)))


def random_poly(nvars: int, max_degree: int, rng: np.random.Generator, density: float = 0.5) -> NCPoly:
    """Small integer-coefficient polynomial for probes and property tests"""

    terms = []
    for k in range(max_degree + 1):
        for word in _words_of_length(nvars, k):
            if rng.random() < density:
                terms.append((word, int(rng.integers(-3, 4))))
    return NCPoly(nvars, terms)


def probe_d_independence(polys: Sequence[NCPoly], side: str = 'right', trials: int = 50,
                         max_degree: int = 3, seed: int = 0) -> bool:
    """Randomized check that no multiplier tuple produces a degree drop"""

    rng = np.random.default_rng(seed)
    nvars = polys[0].nvars
    for _ in range(trials):
        multipliers = [random_poly(nvars, int(rng.integers(0, max_degree + 1)), rng) for _ in polys]
        if all(b.is_zero for b in multipliers):
            continue
        combo = NCPoly.zero(nvars)
        bound = NEG_INF
        for a, b in zip(polys, multipliers):
            combo = combo + (a * b if side == 'right' else b * a)
            bound = max(bound, a.degree + b.degree)
        if combo.degree < bound:
            logger.debug(f"Degree drop found: {combo.degree} < {bound}")
            return False
    return True

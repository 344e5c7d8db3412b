"""
Linear Pencils
==============

Linear matrices A = A0 + A1*x1 + ... + An*xn with complex coefficients.

Features:
- Exact or floating coefficient storage with lossless JSON codecs
- Hollowness detection through maximum bipartite matching (Koenig duality)
- The quantum operator b -> sum A_i b A_i^* and its flatness constants
- Monic reduction U*P*Q = diag(B, 1_s) by exact elimination
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

import ExactLinalg
from ExactLinalg import ONE, ZERO, ExactScalar
from NCPoly import MatrixTuple, NCPoly, PolyMatrix, block_diag, DimensionMismatchError

logger = logging.getLogger(__name__)

DEFAULT_RESTARTS = 64
DEFAULT_ITERS = 500
DEFAULT_STEP = 0.1
SEMI_FLAT_THRESHOLD = 1e-9


class NotLinearError(ValueError):
    """A matrix entry has degree two or more"""


class NotSquareError(ValueError):
    """Operation needs a square matrix"""


class NotReducibleError(ValueError):
    """Monic reduction met a non-full pencil"""


class NotSelfadjointError(ValueError):
    """Selfadjointness was required or claimed but does not hold"""


class PencilFormatError(ValueError):
    """Pencil JSON is malformed"""


@dataclass(frozen=True, eq=False)
class LinearPencil:
    """A0 + A1*x1 + ... + An*xn; coeffs[0] is the constant term"""
    coeffs: Tuple[np.ndarray, ...]
    selfadjoint: bool = False
    exact: Optional[Tuple[np.ndarray, ...]] = field(default=None, repr=False)

    def __post_init__(self):
        if not self.coeffs:
            raise PencilFormatError("A pencil needs at least the constant coefficient")
        coeffs = tuple(np.array(A, dtype=complex) for A in self.coeffs)
        N = coeffs[0].shape[0] if coeffs[0].ndim == 2 else -1
        for A in coeffs:
            if A.shape != (N, N):
                raise NotSquareError(f"Pencil coefficients must be square and equal sized, got {A.shape}")
        object.__setattr__(self, 'coeffs', coeffs)
        if self.exact is not None:
            exact = tuple(np.asarray(A, dtype=object) for A in self.exact)
            if len(exact) != len(coeffs) or any(A.shape != (N, N) for A in exact):
                raise PencilFormatError("Exact coefficients do not match the floating ones")
            object.__setattr__(self, 'exact', exact)
        if self.selfadjoint and not self._is_hermitian():
            raise NotSelfadjointError("Pencil flagged selfadjoint has a non-Hermitian coefficient")

    def _is_hermitian(self) -> bool:
        if self.exact is not None:
            return all(np.array_equal(A, ExactLinalg.conj_transpose(A)) for A in self.exact)
        return all(np.allclose(A, A.conj().T, atol=1e-12 * max(1.0, np.linalg.norm(A))) for A in self.coeffs)

    @classmethod
    def from_arrays(cls, arrays: Sequence[np.ndarray], selfadjoint: bool = False) -> "LinearPencil":
        return cls(tuple(np.asarray(A, dtype=complex) for A in arrays), selfadjoint)

    @classmethod
    def from_exact(cls, matrices: Sequence, selfadjoint: bool = False) -> "LinearPencil":
        exact = tuple(ExactLinalg.exact_array(A) for A in matrices)
        return cls(tuple(ExactLinalg.to_complex(A) for A in exact), selfadjoint, exact)

    @property
    def N(self) -> int:
        return self.coeffs[0].shape[0]

    @property
    def n(self) -> int:
        return len(self.coeffs) - 1

    @property
    def constant(self) -> np.ndarray:
        return self.coeffs[0]

    @property
    def homogeneous(self) -> Tuple[np.ndarray, ...]:
        return self.coeffs[1:]

    @property
    def is_exact(self) -> bool:
        return self.exact is not None

    def exact_coeffs(self) -> Tuple[np.ndarray, ...]:
        """Exact coefficients; floating ones convert losslessly to their binary rationals"""
        if self.exact is not None:
            return self.exact
        return tuple(ExactLinalg.exact_array(A) for A in self.coeffs)

    def homogeneous_part(self) -> "LinearPencil":
        return self._replace_constant(np.zeros((self.N, self.N)), ExactLinalg.zeros(self.N, self.N))

    def shift(self, lam: Union[complex, ExactScalar]) -> "LinearPencil":
        """P - lam*1"""
        exact_const = None
        if self.exact is not None:
            exact_const = self.exact[0] - ExactLinalg.identity(self.N) * ExactScalar.of(lam)
        return self._replace_constant(self.coeffs[0] - complex(lam) * np.eye(self.N), exact_const)

    def _replace_constant(self, const: np.ndarray, exact_const: Optional[np.ndarray]) -> "LinearPencil":
        exact = None
        if self.exact is not None and exact_const is not None:
            exact = (exact_const,) + self.exact[1:]
        selfadjoint = self.selfadjoint and np.allclose(const, np.conj(const).T)
        return LinearPencil((np.asarray(const, dtype=complex),) + self.coeffs[1:], selfadjoint, exact)

    def with_nvars(self, n: int) -> "LinearPencil":
        """Pad with zero coefficients up to n variables"""
        if n < self.n:
            raise DimensionMismatchError(f"Cannot shrink a pencil in {self.n} variables to {n}")
        extra = n - self.n
        coeffs = self.coeffs + tuple(np.zeros((self.N, self.N), dtype=complex) for _ in range(extra))
        exact = None
        if self.exact is not None:
            exact = self.exact + tuple(ExactLinalg.zeros(self.N, self.N) for _ in range(extra))
        return LinearPencil(coeffs, self.selfadjoint, exact)

    def evaluate(self, X: MatrixTuple) -> np.ndarray:
        """A0 (x) 1_d + sum A_i (x) X_i"""
        if X.n < self.n:
            raise DimensionMismatchError(f"Pencil in {self.n} variables evaluated at a {X.n}-tuple")
        out = np.kron(self.coeffs[0], np.eye(X.dim))
        for A, Xi in zip(self.coeffs[1:], X.mats):
            if np.any(A):
                out = out + np.kron(A, Xi)
        return out

    def stacked_homogeneous(self) -> np.ndarray:
        if self.n == 0:
            return np.zeros((0, self.N), dtype=complex)
        return np.vstack(self.coeffs[1:])

    def coefficient_scale(self) -> float:
        return max([float(np.linalg.norm(A, 2)) for A in self.coeffs if A.size] + [1.0])

    def support_mask(self, tol: float = 0.0) -> np.ndarray:
        """Boolean pattern of entries that are not identically zero"""
        if self.exact is not None and tol == 0.0:
            patterns = [np.vectorize(bool, otypes=[bool])(A) for A in self.exact]
        else:
            patterns = [np.abs(A) > tol for A in self.coeffs]
        mask = np.zeros((self.N, self.N), dtype=bool)
        for pattern in patterns:
            mask |= pattern
        return mask


def _linear_poly(values: Sequence[ExactScalar], nvars: int) -> NCPoly:
    return NCPoly(nvars, [((), values[0])] + [((k,), c) for k, c in enumerate(values[1:], start=1)])


def pencil_from_poly_matrix(P: PolyMatrix) -> LinearPencil:
    """Read off A0..An from a square matrix of degree at most one"""

    if P.rows != P.cols:
        raise NotSquareError(f"Pencils are square, got {P.rows}x{P.cols}")
    mats = [ExactLinalg.zeros(P.rows, P.cols) for _ in range(P.nvars + 1)]
    for i in range(P.rows):
        for j in range(P.cols):
            for word, coeff in P.entries[i][j].terms:
                if len(word) > 1:
                    raise NotLinearError(f"Entry ({i}, {j}) has degree {len(word)}")
                mats[word[0] if word else 0][i, j] = coeff
    selfadjoint = all(np.array_equal(A, ExactLinalg.conj_transpose(A)) for A in mats)
    return LinearPencil.from_exact(mats, selfadjoint)


def pencil_to_poly_matrix(pencil: LinearPencil) -> PolyMatrix:
    exact = pencil.exact_coeffs()
    return PolyMatrix.from_rows(
        [[_linear_poly([A[i, j] for A in exact], pencil.n) for j in range(pencil.N)] for i in range(pencil.N)],
        pencil.n)


def _rational_to_json(q) -> Union[int, str]:
    if q.denominator == 1:
        return int(q)
    return f"{q.numerator}/{q.denominator}"


def scalar_to_json(z: ExactScalar) -> List[Union[int, str]]:
    """[re, im] with integers kept as numbers and other rationals as "p/q" strings"""
    return [_rational_to_json(z.real), _rational_to_json(z.imag)]


def _is_exact_literal(value) -> bool:
    if isinstance(value, (list, tuple)):
        return all(_is_exact_literal(v) for v in value)
    return isinstance(value, (int, str)) and not isinstance(value, bool)


def pencil_from_json(data: Mapping) -> LinearPencil:
    """Accepts floats, ints, "p/q" strings and [re, im] pairs"""

    try:
        N, n = int(data['N']), int(data['n'])
        raw = data['coeffs']
        selfadjoint = bool(data.get('selfadjoint', False))
    except (KeyError, TypeError, ValueError) as e:
        raise PencilFormatError(f"Malformed pencil JSON: {e}") from e
    if len(raw) != n + 1:
        raise PencilFormatError(f"Expected {n + 1} coefficient matrices, found {len(raw)}")

    exact_input = True
    mats = []
    try:
        for A in raw:
            if len(A) != N or any(len(row) != N for row in A):
                raise PencilFormatError(f"Coefficient is not {N}x{N}")
            grid = ExactLinalg.zeros(N, N)
            for i, row in enumerate(A):
                for j, entry in enumerate(row):
                    exact_input = exact_input and _is_exact_literal(entry)
                    grid[i, j] = ExactScalar.of(entry)
            mats.append(grid)
    except (TypeError, ValueError) as e:
        if isinstance(e, PencilFormatError):
            raise
        raise PencilFormatError(f"Bad pencil entry: {e}") from e

    try:
        if exact_input:
            return LinearPencil.from_exact(mats, selfadjoint)
        return LinearPencil.from_arrays([ExactLinalg.to_complex(A) for A in mats], selfadjoint)
    except NotSelfadjointError:
        raise
    except ValueError as e:
        raise PencilFormatError(str(e)) from e


def pencil_to_json(pencil: LinearPencil) -> Dict:
    coeffs = []
    if pencil.exact is not None:
        for A in pencil.exact:
            coeffs.append([[scalar_to_json(z) for z in row] for row in A])
    else:
        for A in pencil.coeffs:
            coeffs.append([[[float(z.real), float(z.imag)] for z in row] for row in A])
    return {"N": pencil.N, "n": pencil.n, "coeffs": coeffs, "selfadjoint": pencil.selfadjoint}


# Hollowness

@dataclass(frozen=True)
class HollowWitness:
    """Rows R and columns S (0-based) spanning an all-zero block with |R|+|S| > max(m, n)"""
    rows: Tuple[int, ...]
    cols: Tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.rows) + len(self.cols)


def max_zero_block(mask: np.ndarray) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    """Zero block maximizing |R|+|S| via a maximum matching and its Koenig vertex cover"""

    m, n = mask.shape
    if m == 0 or n == 0 or not mask.any():
        return tuple(range(m)), tuple(range(n))

    graph = csr_matrix(mask.astype(np.int8))
    row_to_col = maximum_bipartite_matching(graph, perm_type='column')
    col_to_row = np.full(n, -1)
    for i, j in enumerate(row_to_col):
        if j >= 0:
            col_to_row[j] = i

    # Alternating search from unmatched rows
    seen_rows = {i for i in range(m) if row_to_col[i] < 0}
    seen_cols = set()
    frontier = list(seen_rows)
    while frontier:
        i = frontier.pop()
        for j in np.flatnonzero(mask[i]):
            if j in seen_cols:
                continue
            seen_cols.add(int(j))
            k = col_to_row[j]
            if k >= 0 and k not in seen_rows:
                seen_rows.add(int(k))
                frontier.append(int(k))

    rows = tuple(sorted(int(i) for i in seen_rows))
    cols = tuple(j for j in range(n) if j not in seen_cols)
    return rows, cols


def _pattern(P: Union[PolyMatrix, LinearPencil, np.ndarray], tol: float) -> np.ndarray:
    if isinstance(P, PolyMatrix):
        return np.array([[not e.is_zero for e in row] for row in P.entries], dtype=bool).reshape(P.rows, P.cols)
    if isinstance(P, LinearPencil):
        return P.support_mask(tol)
    return np.asarray(P, dtype=bool)


def is_hollow(P: Union[PolyMatrix, LinearPencil, np.ndarray], tol: float = 0.0) -> Optional[HollowWitness]:
    """Witness (R, S) of a zero block with |R|+|S| > max(m, n), or None"""

    mask = _pattern(P, tol)
    m, n = mask.shape
    rows, cols = max_zero_block(mask)
    if len(rows) + len(cols) > max(m, n):
        return HollowWitness(rows, cols)
    return None


# Quantum operator and flatness

def quantum_operator(P: LinearPencil, b: np.ndarray) -> np.ndarray:
    """L(b) = sum_{i>=1} A_i b A_i^*; the constant term is excluded"""

    b = np.asarray(b, dtype=complex)
    if b.shape != (P.N, P.N):
        raise DimensionMismatchError(f"Expected a {P.N}x{P.N} argument, got {b.shape}")
    out = np.zeros((P.N, P.N), dtype=complex)
    for A in P.homogeneous:
        out += A @ b @ A.conj().T
    return out


def homogenized_operator(P: LinearPencil, b: np.ndarray) -> np.ndarray:
    """L+(b) = sum_{i>=0} A_i b A_i^*, the operator of the homogenized family"""
    return quantum_operator(P, b) + P.constant @ np.asarray(b, dtype=complex) @ P.constant.conj().T


@dataclass
class FlatnessReport:
    c_lower: float
    c_upper: float
    flat: bool
    semi_flat: bool
    witness_vector: np.ndarray
    upper_witness: np.ndarray
    restarts: int
    iters: int


def _extreme_pair(P: LinearPencil, v: np.ndarray, lower: bool) -> Tuple[float, np.ndarray]:
    values, vectors = np.linalg.eigh(quantum_operator(P, np.outer(v, v.conj())))
    k = 0 if lower else -1
    return float(values[k]), vectors[:, k]


def _dual_operator(P: LinearPencil, w: np.ndarray) -> np.ndarray:
    # G_w = sum A_i^* w w^* A_i, so that w^* L(vv^*) w = v^* G_w v
    ww = np.outer(w, w.conj())
    return sum((A.conj().T @ ww @ A for A in P.homogeneous), np.zeros((P.N, P.N), dtype=complex))


def _sphere_search(P: LinearPencil, v: np.ndarray, lower: bool, iters: int, step: float) -> Tuple[float, np.ndarray]:
    sign = 1.0 if lower else -1.0
    value, w = _extreme_pair(P, v, lower)
    for _ in range(iters):
        G = _dual_operator(P, w)
        grad = G @ v - value * v
        if np.linalg.norm(grad) < 1e-13:
            break
        eta, moved = step, False
        while eta > 1e-10:
            trial = v - sign * eta * grad
            trial = trial / np.linalg.norm(trial)
            trial_value, trial_w = _extreme_pair(P, trial, lower)
            if sign * trial_value < sign * value - 1e-15:
                v, value, w, moved = trial, trial_value, trial_w, True
                break
            eta /= 2
        if not moved:
            break

    # Alternating eigenvector polish of sum |w^* A_i v|^2
    for _ in range(20):
        vals, vecs = np.linalg.eigh(_dual_operator(P, w))
        candidate = vecs[:, 0 if lower else -1]
        cand_value, cand_w = _extreme_pair(P, candidate, lower)
        if sign * cand_value < sign * value - 1e-15:
            v, value, w = candidate, cand_value, cand_w
        else:
            break
    return value, v


def _flatness_restart(P: LinearPencil, seed: np.random.SeedSequence, iters: int, step: float):
    rng = np.random.default_rng(seed)
    start = rng.standard_normal(P.N) + 1j * rng.standard_normal(P.N)
    start /= np.linalg.norm(start)
    low = _sphere_search(P, start, True, iters, step)
    high = _sphere_search(P, start, False, iters, step)
    return low, high


def flatness_constants(P: LinearPencil, restarts: int = DEFAULT_RESTARTS, iters: int = DEFAULT_ITERS,
                       step: float = DEFAULT_STEP, seed: int = 0, n_jobs: int = 1,
                       threshold: float = SEMI_FLAT_THRESHOLD) -> FlatnessReport:
    """Estimate c1, c2 with c1 tr_N(b) 1 <= L(b) <= c2 tr_N(b) 1 over rank-one extreme points"""

    if P.n < 1:
        raise ValueError("Flatness constants need at least one variable")
    seeds = np.random.SeedSequence(seed).spawn(restarts)
    results = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_flatness_restart)(P, s, iters, step) for s in seeds)

    (low_value, low_vec) = min((r[0] for r in results), key=lambda t: t[0])
    (high_value, high_vec) = max((r[1] for r in results), key=lambda t: t[0])
    c_lower = max(0.0, P.N * low_value)
    c_upper = P.N * high_value
    semi_flat = c_lower > threshold
    logger.info(f"Flatness estimate over {restarts} restarts: c_lower={c_lower:.6g}, c_upper={c_upper:.6g}")
    return FlatnessReport(c_lower=c_lower, c_upper=c_upper, flat=semi_flat and np.isfinite(c_upper),
                          semi_flat=semi_flat, witness_vector=low_vec, upper_witness=high_vec,
                          restarts=restarts, iters=iters)


# Monic reduction

def is_left_monic(P: LinearPencil) -> bool:
    """Stacked homogeneous coefficients have full column rank"""
    exact = P.exact_coeffs()
    if P.N == 0:
        return True
    if P.n == 0:
        return False
    return ExactLinalg.rank(np.vstack(exact[1:])) == P.N


@dataclass(frozen=True, eq=False)
class MonicReduction:
    """U*P*Q = diag(B, 1_s) with U scalar, Q invertible over the free algebra"""
    U: np.ndarray
    Q: PolyMatrix
    Q_inverse: PolyMatrix
    B: LinearPencil
    s: int

    def verify(self, P: LinearPencil) -> bool:
        """Exact check of the block identity and of Q*Q^{-1} = 1"""
        n = P.n
        lhs = PolyMatrix.from_scalars(self.U, n) @ pencil_to_poly_matrix(P) @ self.Q
        blocks = []
        if self.B.N:
            blocks.append(pencil_to_poly_matrix(self.B.with_nvars(n)))
        if self.s:
            blocks.append(PolyMatrix.identity(self.s, n))
        rhs = block_diag(*blocks) if blocks else PolyMatrix.zeros(0, 0, n)
        identity = PolyMatrix.identity(P.N, n)
        return lhs == rhs and (self.Q @ self.Q_inverse) == identity and (self.Q_inverse @ self.Q) == identity


def _embed(block: np.ndarray, N: int) -> np.ndarray:
    full = ExactLinalg.identity(N)
    k = block.shape[0]
    full[:k, :k] = block
    return full


def _swap(n: int, a: int, b: int) -> np.ndarray:
    perm = ExactLinalg.identity(n)
    if a != b:
        perm[[a, b]] = perm[[b, a]]
    return perm


def monic_reduce(P: LinearPencil) -> MonicReduction:
    """Peel trailing unit blocks off a full pencil until the rest is left monic"""

    if P.N != P.coeffs[0].shape[1]:
        raise NotSquareError("monic_reduce expects a square pencil")
    N, n = P.N, P.n
    mats = [A.copy() for A in P.exact_coeffs()]
    U = ExactLinalg.identity(N)
    Q = PolyMatrix.identity(N, n)
    Q_inv = PolyMatrix.identity(N, n)

    size = N
    while size > 0:
        active = [A[:size, :size] for A in mats]
        stacked = np.vstack(active[1:]) if n else ExactLinalg.zeros(0, size)
        kernel = ExactLinalg.nullspace(stacked)
        if not kernel:
            break
        k = kernel[0]
        last = size - 1

        # Column operation moving the kernel vector into the last column
        p = next(i for i in range(size) if k[i])
        col_perm = _swap(size, p, last)
        E = ExactLinalg.identity(size)
        E[:, last] = ExactLinalg.matmul(col_perm, k.reshape(size, 1))[:, 0]
        C = ExactLinalg.matmul(col_perm, E)
        c = ExactLinalg.matmul(active[0], C)[:, last]
        if not any(c):
            raise NotReducibleError("A kernel vector of the homogeneous part is also killed by A0; "
                                    "the pencil is not full")

        # Row operation sending A0*k to the last unit vector
        q = next(i for i in range(size) if c[i])
        row_perm = _swap(size, q, last)
        cp = ExactLinalg.matmul(row_perm, c.reshape(size, 1))[:, 0]
        L = ExactLinalg.identity(size)
        for i in range(last):
            L[i, last] = -cp[i] / cp[last]
        L[last, last] = ONE / cp[last]
        U_step = ExactLinalg.matmul(L, row_perm)

        reduced = [ExactLinalg.matmul(ExactLinalg.matmul(U_step, A), C) for A in active]

        # Clear the last row with linear column operations against the unit column
        elim = PolyMatrix.identity(N, n)
        elim_inv = PolyMatrix.identity(N, n)
        for j in range(last):
            r_j = _linear_poly([A[last, j] for A in reduced], n)
            if not r_j.is_zero:
                elim = elim.with_entry(last, j, -r_j)
                elim_inv = elim_inv.with_entry(last, j, r_j)

        C_full = PolyMatrix.from_scalars(_embed(C, N), n)
        C_inv_full = PolyMatrix.from_scalars(_embed(ExactLinalg.inverse(C), N), n)
        U = ExactLinalg.matmul(_embed(U_step, N), U)
        Q = Q @ C_full @ elim
        Q_inv = elim_inv @ C_inv_full @ Q_inv

        for idx, A in enumerate(mats):
            block = reduced[idx].copy()
            block[last, :] = ZERO
            block[:, last] = ZERO
            if idx == 0:
                block[last, last] = ONE
            A[:size, :size] = block
        size -= 1
        logger.debug(f"Monic reduction peeled a unit block, active size now {size}")

    B = LinearPencil.from_exact([A[:size, :size] for A in mats])
    return MonicReduction(U=U, Q=Q, Q_inverse=Q_inv, B=B, s=N - size)

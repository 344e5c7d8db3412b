"""
Noncommutative Rank
===================

Fullness certification for linear pencils and inner rank of polynomial matrices.

Features:
- Blow-up rank: numeric rank of A0 (x) 1_d + sum A_i (x) X_i at random X
- Shrunk-subspace search by the second Wong sequence on blow-up kernels
- Rank-decreasing probe for the homogenized quantum operator
- Hollow certificates from shrunk subspaces via unitary completions
- Bordered-pencil test deciding u*A^{-1}*v = 0 in the free field
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.linalg import null_space

import ExactLinalg
from ExactLinalg import ExactScalar
from LinearPencil import (LinearPencil, homogenized_operator, is_hollow,
                          pencil_from_poly_matrix, pencil_to_poly_matrix)
from NCPoly import MatrixTuple, PolyMatrix, eval_poly_matrix

logger = logging.getLogger(__name__)

DEFAULT_TRIALS = 3
TOL_FACTOR = 1e-10
CERTIFICATE_TOL = 1e-9
HOLLOW_TOL = 1e-8
MAX_DOUBLINGS = 2
DEFAULT_PROBES = 16
FULL_BLOCK_LIMIT = 5
# is_full options that the block search also understands
BLOCK_SEARCH_OPTIONS = ("trials", "seed")


class InconsistentRankError(RuntimeError):
    """Fullness testers disagree even after enlarging the blow-up"""


class CertificateInvalidError(ValueError):
    """A certificate fails its own verification"""


class CertificateKind(str, Enum):
    FULL = "Full"
    SHRUNK = "ShrunkSubspace"
    HOLLOW = "Hollow"


@dataclass(frozen=True)
class Confidence:
    mode: str = "randomized"
    trials: int = 0
    tol: float = 0.0
    dim: int = 0

    def to_json(self) -> Dict:
        if self.mode == "exact":
            return {"mode": "exact"}
        return {"mode": self.mode, "trials": self.trials, "tol": self.tol, "dim": self.dim}


@dataclass(frozen=True, eq=False)
class RankCertificate:
    """Outcome of a fullness test together with the evidence behind it"""
    kind: CertificateKind
    value: int
    size: int
    confidence: Confidence
    V_basis: Optional[np.ndarray] = field(default=None, repr=False)
    W_basis: Optional[np.ndarray] = field(default=None, repr=False)
    row_unitary: Optional[np.ndarray] = field(default=None, repr=False)
    col_unitary: Optional[np.ndarray] = field(default=None, repr=False)
    hollow_rows: Tuple[int, ...] = ()
    hollow_cols: Tuple[int, ...] = ()

    @property
    def is_full(self) -> bool:
        return self.kind == CertificateKind.FULL

    @property
    def deficiency(self) -> int:
        if self.V_basis is None or self.W_basis is None:
            return self.size - self.value
        return self.V_basis.shape[1] - self.W_basis.shape[1]

    def to_json(self) -> Dict:
        out = {"rho": self.value, "kind": self.kind.value, "N": self.size,
               "confidence": self.confidence.to_json()}
        if self.V_basis is not None:
            out["dim_V"] = int(self.V_basis.shape[1])
            out["dim_W"] = int(self.W_basis.shape[1])
        if self.kind == CertificateKind.HOLLOW:
            out["hollow_rows"] = list(self.hollow_rows)
            out["hollow_cols"] = list(self.hollow_cols)
        return out


# Numeric helpers

def _complex_gaussian(rng: np.random.Generator, d: int) -> np.ndarray:
    return (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2 * d)


def numeric_rank(M: np.ndarray, tol: float) -> int:
    """Count of singular values above tol * sigma_max"""
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


def _null_basis(M: np.ndarray, atol: float) -> np.ndarray:
    cols = M.shape[1]
    if M.shape[0] == 0:
        return np.eye(cols, dtype=complex)
    _, s, vh = np.linalg.svd(M, full_matrices=True)
    r = int(np.sum(s > atol))
    return vh[r:].conj().T


def _range_basis(M: np.ndarray, atol: float) -> np.ndarray:
    if M.shape[1] == 0:
        return np.zeros((M.shape[0], 0), dtype=complex)
    u, s, _ = np.linalg.svd(M, full_matrices=False)
    r = int(np.sum(s > atol))
    return u[:, :r]


# Blow-up rank

@dataclass
class _BlowupRun:
    rho: int
    rank: int
    matrix: np.ndarray


def _default_tol(P: LinearPencil, d: int) -> float:
    return max(P.N * d, 1) * TOL_FACTOR


def _blowup_trial(P: LinearPencil, d: int, seed: np.random.SeedSequence, tol: float) -> _BlowupRun:
    rng = np.random.default_rng(seed)
    X = MatrixTuple(tuple(_complex_gaussian(rng, d) for _ in range(P.n)), dim_hint=d)
    T = P.evaluate(X)
    rank = numeric_rank(T, tol)
    return _BlowupRun(rho=math.ceil(rank / d), rank=rank, matrix=T)


def _blowup_runs(P: LinearPencil, d: int, trials: int, tol: float, seed: int, n_jobs: int) -> List[_BlowupRun]:
    seeds = np.random.SeedSequence(seed).spawn(trials)
    runs = Parallel(n_jobs=n_jobs, prefer="threads")(delayed(_blowup_trial)(P, d, s, tol) for s in seeds)
    logger.debug(f"Blow-up ranks at d={d}: {[r.rank for r in runs]}")
    return runs


def blowup_rank(P: LinearPencil, d: Optional[int] = None, trials: int = DEFAULT_TRIALS,
                tol: Optional[float] = None, seed: int = 0, n_jobs: int = 1) -> int:
    """max over trials of ceil(numeric_rank(P(X)) / d) at complex Gaussian X"""

    if trials < 1:
        raise ValueError("blowup_rank needs at least one trial")
    d = d or max(P.N, 1)
    if d < 1:
        raise ValueError("Blow-up dimension must be positive")
    if P.N == 0:
        return 0
    tol = _default_tol(P, d) if tol is None else tol
    return max(run.rho for run in _blowup_runs(P, d, trials, tol, seed, n_jobs))


# Shrunk subspaces

def _compress(basis: np.ndarray, N: int, d: int) -> np.ndarray:
    # Each vector of C^N (x) C^d seen as an N x d matrix; the compression is their joint column space
    if basis.shape[1] == 0:
        return np.zeros((N, 0), dtype=complex)
    return np.hstack([basis[:, k].reshape(N, d) for k in range(basis.shape[1])])


def second_wong_sequence(P: LinearPencil, T: np.ndarray, d: int, atol_blowup: float,
                         atol: float) -> Tuple[np.ndarray, np.ndarray]:
    """Limit of W_{j+1} = span A_i pi(T^{-1}(W_j (x) C^d)), returned with the last preimage compression"""

    N = P.N
    W = np.zeros((N, 0), dtype=complex)
    V = np.zeros((N, 0), dtype=complex)
    for step in range(N + 1):
        if W.shape[1]:
            Qw = np.kron(W, np.eye(d))
            residual = T - Qw @ (Qw.conj().T @ T)
        else:
            residual = T
        preimage = _null_basis(residual, atol_blowup)
        V = _range_basis(_compress(preimage, N, d), 1e-7)
        if V.shape[1]:
            W_next = _range_basis(np.hstack([A @ V for A in P.coeffs]), atol)
        else:
            W_next = np.zeros((N, 0), dtype=complex)
        logger.debug(f"Wong step {step}: dim V={V.shape[1]}, dim W={W_next.shape[1]}")
        grew = W_next.shape[1] > W.shape[1]
        W = W_next
        if not grew:
            break
    return V, W


def tighten_shrunk_pair(P: LinearPencil, W: np.ndarray, atol: float) -> Tuple[np.ndarray, np.ndarray]:
    """Largest V with A_i V in W for all i, then W replaced by the span of the A_i V"""

    N = P.N
    proj = np.eye(N) - W @ W.conj().T
    V = _null_basis(np.vstack([proj @ A for A in P.coeffs]), atol)
    if not V.shape[1]:
        return V, np.zeros((N, 0), dtype=complex)
    W_tight = _range_basis(np.hstack([A @ V for A in P.coeffs]), atol)
    return V, W_tight


def shrunk_residual(P: LinearPencil, V: np.ndarray, W: np.ndarray) -> float:
    """max_i || A_i V - proj_W A_i V ||"""
    if not V.shape[1]:
        return 0.0
    proj = W @ W.conj().T
    return max(float(np.linalg.norm(A @ V - proj @ (A @ V), 2)) for A in P.coeffs)


def find_shrunk_subspace(P: LinearPencil, T: np.ndarray, d: int, tol: float) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    atol = 1e-8 * P.coefficient_scale()
    s_max = np.linalg.norm(T, 2) if T.size else 0.0
    _, W = second_wong_sequence(P, T, d, tol * s_max, atol)
    V, W = tighten_shrunk_pair(P, W, atol)
    if V.shape[1] > W.shape[1]:
        return V, W
    return None


def rank_decreasing_probe(P: LinearPencil, V_basis: Optional[np.ndarray] = None, probes: int = DEFAULT_PROBES,
                          seed: int = 0) -> int:
    """min of rank(L+(b)) - rank(b) over random PSD b and the projector onto V_basis"""

    rng = np.random.default_rng(seed)
    N = P.N
    scale = P.coefficient_scale() ** 2
    candidates = []
    for _ in range(probes):
        k = int(rng.integers(1, N + 1))
        G = rng.standard_normal((N, k)) + 1j * rng.standard_normal((N, k))
        candidates.append(G @ G.conj().T)
    if V_basis is not None and V_basis.shape[1]:
        candidates.append(V_basis @ V_basis.conj().T)

    best = N
    for b in candidates:
        b_norm = np.linalg.norm(b, 2)
        rank_b = int(np.sum(np.linalg.eigvalsh(b) > 1e-9 * b_norm))
        image = homogenized_operator(P, b)
        rank_image = int(np.sum(np.abs(np.linalg.eigvalsh(image)) > 1e-9 * scale * b_norm))
        best = min(best, rank_image - rank_b)
    return best


def _certify(P: LinearPencil, d: int, trials: int, tol: Optional[float], seed: int, probes: int,
             n_jobs: int) -> Optional[RankCertificate]:
    N = P.N
    tol = _default_tol(P, d) if tol is None else tol
    runs = _blowup_runs(P, d, trials, tol, seed, n_jobs)
    rho = max(run.rho for run in runs)
    best = max(runs, key=lambda run: run.rank)
    confidence = Confidence("randomized", trials, tol, d)

    pair = find_shrunk_subspace(P, best.matrix, d, tol)
    if pair is not None and shrunk_residual(P, *pair) >= CERTIFICATE_TOL:
        logger.warning(f"Shrunk subspace residual {shrunk_residual(P, *pair):.2e} too large")
        pair = None
    deficit = rank_decreasing_probe(P, pair[0] if pair else None, probes, seed)

    if rho == N:
        if pair is None and deficit >= 0:
            return RankCertificate(CertificateKind.FULL, N, N, confidence)
        logger.warning(f"Blow-up says full but shrunk search/probe disagree (deficit {deficit})")
        return None

    if pair is None or deficit >= 0:
        logger.warning(f"Blow-up rank {rho} < {N} but no verified shrunk subspace")
        return None
    V, W = pair
    if N - (V.shape[1] - W.shape[1]) != rho:
        logger.warning(f"Shrunk subspace deficiency {V.shape[1] - W.shape[1]} disagrees with blow-up rank {rho}")
        return None
    return RankCertificate(CertificateKind.SHRUNK, rho, N, confidence, V_basis=V, W_basis=W)


def is_full(P: LinearPencil, d: Optional[int] = None, trials: int = DEFAULT_TRIALS, tol: Optional[float] = None,
            seed: int = 0, probes: int = DEFAULT_PROBES, max_doublings: int = MAX_DOUBLINGS,
            n_jobs: int = 1) -> RankCertificate:
    """Cross-check blow-up rank, rank-decreasing probe and shrunk-subspace search"""

    if P.N == 0:
        return RankCertificate(CertificateKind.FULL, 0, 0, Confidence("exact"))
    d = d or P.N
    for attempt in range(max_doublings + 1):
        certificate = _certify(P, d, trials, tol, seed + attempt, probes, n_jobs)
        if certificate is not None:
            logger.debug(f"Pencil of size {P.N}: {certificate.kind.value}, rho={certificate.value}")
            return certificate
        logger.warning(f"Fullness testers disagree at d={d}; retrying with d={2 * d}")
        d *= 2
    raise InconsistentRankError(f"Fullness testers still disagree at blow-up dimension {d // 2}")


# Hollow certificates

def hollow_certificate(P: LinearPencil, cert: RankCertificate) -> Tuple[np.ndarray, np.ndarray]:
    """Unitaries Pu, Qu making every Pu*A_i*Qu vanish on an (N - dim W) x dim V leading block"""

    if cert.kind != CertificateKind.SHRUNK or cert.V_basis is None or cert.W_basis is None:
        raise CertificateInvalidError("A hollow certificate needs a shrunk-subspace certificate")
    N = P.N
    if is_hollow(P) is not None:
        return np.eye(N, dtype=complex), np.eye(N, dtype=complex)

    V, W = cert.V_basis, cert.W_basis
    k, w = V.shape[1], W.shape[1]
    V_perp = null_space(V.conj().T) if k else np.eye(N, dtype=complex)
    W_perp = null_space(W.conj().T) if w else np.eye(N, dtype=complex)
    Qu = np.hstack([V, V_perp])
    Pu = np.vstack([W_perp.conj().T, W.conj().T])

    rotated = [Pu @ A @ Qu for A in P.coeffs]
    block = max(float(np.max(np.abs(R[:N - w, :k]))) if k and N - w else 0.0 for R in rotated)
    if block >= HOLLOW_TOL:
        raise CertificateInvalidError(f"Rotated zero block has entries up to {block:.2e}")
    if is_hollow(LinearPencil.from_arrays(rotated), tol=HOLLOW_TOL) is None:
        raise CertificateInvalidError("Rotated pencil is not hollow")
    return Pu, Qu


def hollow_rank_certificate(P: LinearPencil, cert: RankCertificate) -> RankCertificate:
    Pu, Qu = hollow_certificate(P, cert)
    rotated = LinearPencil.from_arrays([Pu @ A @ Qu for A in P.coeffs])
    witness = is_hollow(rotated, tol=HOLLOW_TOL)
    return RankCertificate(CertificateKind.HOLLOW, cert.value, cert.size, cert.confidence,
                           V_basis=cert.V_basis, W_basis=cert.W_basis, row_unitary=Pu, col_unitary=Qu,
                           hollow_rows=witness.rows, hollow_cols=witness.cols)


# Inner rank of polynomial matrices

def _poly_blowup_rank(P: PolyMatrix, d: int, trials: int, seed: int) -> int:
    best = 0
    for s in np.random.SeedSequence(seed).spawn(trials):
        rng = np.random.default_rng(s)
        X = MatrixTuple(tuple(_complex_gaussian(rng, d) for _ in range(P.nvars)), dim_hint=d)
        M = eval_poly_matrix(P, X)
        best = max(best, math.ceil(numeric_rank(M, max(M.shape) * TOL_FACTOR) / d))
    return best


def _certified_full(P: PolyMatrix, trials: int, seed: int) -> bool:
    if is_hollow(P) is not None:
        return False
    if P.degree <= 1:
        return is_full(pencil_from_poly_matrix(P), trials=trials, seed=seed).is_full
    return inner_rank_poly(P, 'blowup', trials=trials, seed=seed) == P.rows


def inner_rank_poly(P: PolyMatrix, method: str = 'blowup', d: Optional[int] = None,
                    trials: int = DEFAULT_TRIALS, seed: int = 0, max_doublings: int = MAX_DOUBLINGS) -> int:
    """Inner rank by stabilized blow-up or by the largest full square block"""

    if P.is_zero:
        return 0
    if method == 'blowup':
        d = d or (int(P.degree) + 1) * max(P.rows, P.cols)
        rho = _poly_blowup_rank(P, d, trials, seed)
        for _ in range(max_doublings):
            d *= 2
            rho_next = _poly_blowup_rank(P, d, trials, seed)
            if rho_next == rho:
                break
            rho = max(rho, rho_next)
        return rho
    if method == 'full_block':
        if max(P.rows, P.cols) > FULL_BLOCK_LIMIT:
            raise ValueError(f"full_block search is limited to {FULL_BLOCK_LIMIT}x{FULL_BLOCK_LIMIT} matrices")
        for k in range(min(P.rows, P.cols), 0, -1):
            for rows in itertools.combinations(range(P.rows), k):
                for cols in itertools.combinations(range(P.cols), k):
                    if _certified_full(P.submatrix(rows, cols), trials, seed):
                        return k
        return 0
    raise ValueError(f"Unknown inner rank method '{method}'")


# Bordered pencils

def _as_vector(values: Sequence, exact: bool) -> np.ndarray:
    if exact:
        return np.array([ExactScalar.of(x) for x in values], dtype=object)
    return np.asarray([complex(x) for x in values], dtype=complex)


def bordered_pencil(u: Sequence, A: LinearPencil, v: Sequence) -> LinearPencil:
    """[[0, u], [v, A]] as a (k+1) x (k+1) pencil"""

    k = A.N
    if len(u) != k or len(v) != k:
        raise ValueError(f"Border vectors must have length {k}")
    exact = A.is_exact and all(isinstance(x, (ExactScalar, int)) for x in list(u) + list(v))
    uu, vv = _as_vector(u, exact), _as_vector(v, exact)
    if exact:
        mats = []
        for idx, Ai in enumerate(A.exact):
            M = ExactLinalg.zeros(k + 1, k + 1)
            M[1:, 1:] = Ai
            if idx == 0:
                M[0, 1:] = uu
                M[1:, 0] = vv
            mats.append(M)
        return LinearPencil.from_exact(mats)
    mats = []
    for idx, Ai in enumerate(A.coeffs):
        M = np.zeros((k + 1, k + 1), dtype=complex)
        M[1:, 1:] = Ai
        if idx == 0:
            M[0, 1:] = uu
            M[1:, 0] = vv
        mats.append(M)
    return LinearPencil.from_arrays(mats)


def bordered_certificate(u: Sequence, A: LinearPencil, v: Sequence, **kwargs) -> RankCertificate:
    return is_full(bordered_pencil(u, A, v), **kwargs)


def bordered_is_zero(u: Sequence, A: LinearPencil, v: Sequence, method: str = 'rank', **kwargs) -> bool:
    """True iff the bordered pencil has inner rank k, i.e. u*A^{-1}*v vanishes in the free field"""

    bordered = bordered_pencil(u, A, v)
    if method == 'full_block' and bordered.N <= FULL_BLOCK_LIMIT:
        block_options = {key: value for key, value in kwargs.items() if key in BLOCK_SEARCH_OPTIONS}
        rho = inner_rank_poly(pencil_to_poly_matrix(bordered), 'full_block', **block_options)
        return rho <= A.N
    return not is_full(bordered, **kwargs).is_full

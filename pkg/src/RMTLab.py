"""
Random Matrix Lab
=================

Empirical checks of the algebraic spectral predictions on GUE tuples.

Features:
- GUE sampling normalized so that spectra approach the semicircle on [-2, 2]
- Eigenvalues of evaluated selfadjoint pencils, pooled into pandas frames for CSV export
- Empirical atom weights, largest eigenvalue clusters and CDF moduli of continuity
- Normalized ranks of evaluated polynomial matrices against their inner rank
- Residual norms of rational functions at random in-domain points
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from FreeField import RationalFunction, evaluate_rf
from LinearPencil import LinearPencil, NotSelfadjointError
from NCPoly import MatrixTuple, PolyMatrix, eval_poly_matrix
from NCRank import inner_rank_poly, numeric_rank
from RationalExpression import DomainError
from Spectra import AtomReport, HoelderConstant, NotSemiFlatError, cluster_eigenvalues, full_spectrum, \
    hoelder_constant, log_energy_bound

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = 0.02
DEFAULT_SHRINK = 20
DEFAULT_ANCHORS = 1000
DEFAULT_SAMPLES = 8
DEFAULT_DELTAS = (0.01, 0.05, 0.1, 0.5)
RANK_TOL = 1e-8
MAX_DOMAIN_ATTEMPTS = 20


@dataclass
class SpectralSample:
    """Sorted eigenvalues of one evaluated pencil"""
    dim: int
    label: str
    eigenvalues: np.ndarray = field(repr=False)
    seed: int = 0

    def __post_init__(self):
        self.eigenvalues = np.sort(np.asarray(self.eigenvalues, dtype=float))

    @property
    def size(self) -> int:
        return len(self.eigenvalues)


def _gue(rng: np.random.Generator, d: int) -> np.ndarray:
    G = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    return (G + G.conj().T) / np.sqrt(2 * d)


def sample_gue(d: int, seed=0) -> np.ndarray:
    """Hermitian d x d matrix, off-diagonal entries of variance 1/d"""

    if d < 1:
        raise ValueError(f"Dimension must be positive, got {d}")
    return _gue(np.random.default_rng(seed), d)


def sample_gue_tuple(n: int, d: int, seed=0) -> MatrixTuple:
    """n independent GUE matrices, one child seed each"""

    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seeds = root.spawn(n) if n else []
    return MatrixTuple(tuple(sample_gue(d, s) for s in seeds), selfadjoint=True, dim_hint=d)


def evaluate_pencil(P: LinearPencil, X: MatrixTuple) -> np.ndarray:
    M = P.evaluate(X)
    if P.selfadjoint:
        M = (M + M.conj().T) / 2
    return M


def pencil_spectrum(P: LinearPencil, d: int, seed=0, label: str = "pencil") -> SpectralSample:
    if not P.selfadjoint:
        raise NotSelfadjointError("Spectra are computed for selfadjoint pencils only")
    X = sample_gue_tuple(P.n, d, seed)
    values = np.linalg.eigvalsh(evaluate_pencil(P, X))
    return SpectralSample(d, label, values, seed if isinstance(seed, int) else 0)


def _sample_spectra(P: LinearPencil, d: int, samples: int, seed: int, n_jobs: int) -> List[SpectralSample]:
    seeds = np.random.SeedSequence(seed).spawn(samples)
    spectra = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(pencil_spectrum)(P, d, s) for s in seeds)
    for k, sample in enumerate(spectra):
        sample.seed = k
    return spectra


def window_weight(sample: SpectralSample, lam: float, window: float) -> float:
    """Fraction of eigenvalues in [lam - window, lam + window]"""
    values = sample.eigenvalues
    count = np.searchsorted(values, lam + window, 'right') - np.searchsorted(values, lam - window, 'left')
    return count / sample.size


def empirical_atoms(P: LinearPencil, d: int, samples: int = DEFAULT_SAMPLES, window: float = DEFAULT_WINDOW,
                    seed: int = 0, points: Optional[Sequence[float]] = None, n_jobs: int = 1) -> Dict[float, float]:
    """Mean eigenvalue fraction near each point; points default to the eigenvalues of b0"""

    if points is None:
        points = cluster_eigenvalues(np.linalg.eigvalsh(P.constant))
    spectra = _sample_spectra(P, d, samples, seed, n_jobs)
    return {float(lam): float(np.mean([window_weight(s, lam, window) for s in spectra])) for lam in points}


def _max_window_counts(values: np.ndarray, starts: np.ndarray, width: float) -> Tuple[int, int]:
    ends = np.searchsorted(values, starts + width, 'right')
    begins = np.searchsorted(values, starts, 'left')
    counts = ends - begins
    k = int(np.argmax(counts))
    return k, int(counts[k])


def max_cluster_weight(sample: SpectralSample, window: float = DEFAULT_WINDOW,
                       shrink: float = DEFAULT_SHRINK) -> Tuple[float, float]:
    """Location and eigenvalue fraction of the fullest window of half-width window / shrink

    A kernel keeps its whole weight when the window narrows; a bump of the continuous
    density loses weight in proportion to the width. shrink=1 gives the plain fullest window.
    """

    values = sample.eigenvalues
    half = window / shrink
    k, count = _max_window_counts(values, values, 2 * half)
    return float(values[k] + half), count / sample.size


def cdf_modulus(sample: SpectralSample, deltas: Sequence[float], anchors: int = DEFAULT_ANCHORS) -> List[float]:
    """sup over anchors t of F(t + delta) - F(t-), anchors spread over the empirical quantiles"""

    values = sample.eigenvalues
    idx = np.unique(np.linspace(0, sample.size - 1, min(anchors, sample.size)).astype(int))
    starts = values[idx]
    return [_max_window_counts(values, starts, float(delta))[1] / sample.size for delta in deltas]


def empirical_log_energy(sample: SpectralSample, max_points: int = 2000) -> float:
    """Mean of log|s - t| over distinct pairs of (a deterministic subsample of) the eigenvalues"""

    values = sample.eigenvalues
    if values.size > max_points:
        values = values[np.linspace(0, values.size - 1, max_points).astype(int)]
    i, j = np.triu_indices(values.size, k=1)
    gaps = np.abs(values[i] - values[j])
    if np.any(gaps == 0):
        return float('-inf')
    return float(np.mean(np.log(gaps)))


def atiyah_rank_check(P: PolyMatrix, d: int, seed: int = 0, tol: float = RANK_TOL) -> Tuple[float, int]:
    """rank(P(X))/d at a GUE tuple next to the inner rank of P"""

    X = sample_gue_tuple(P.nvars, d, seed)
    normalized = numeric_rank(eval_poly_matrix(P, X), tol) / d
    rho = inner_rank_poly(P, seed=seed)
    logger.debug(f"Normalized rank {normalized:.4f} at d={d}, inner rank {rho}")
    return normalized, rho


def zero_function_residuals(rf: RationalFunction, d: int, samples: int = DEFAULT_SAMPLES, seed: int = 0,
                            max_attempts: int = MAX_DOMAIN_ATTEMPTS) -> List[float]:
    """Norms of rf at GUE tuples inside its domain; out-of-domain draws are replaced"""

    residuals = []
    for child in np.random.SeedSequence(seed).spawn(samples):
        for attempt in child.spawn(max_attempts):
            try:
                residuals.append(float(np.linalg.norm(evaluate_rf(rf, sample_gue_tuple(rf.nvars, d, attempt)))))
                break
            except DomainError:
                continue
        else:
            logger.warning(f"No in-domain tuple found in {max_attempts} draws")
    return residuals


@dataclass
class AtomComparison:
    lam: float
    predicted: float
    empirical: float
    spread: float

    def to_json(self) -> Dict:
        return {"lambda": self.lam, "predicted": self.predicted, "empirical": self.empirical, "std": self.spread}


@dataclass
class SimulationSummary:
    report: AtomReport = field(repr=False)
    atoms: List[AtomComparison]
    max_cluster: Tuple[float, float]
    deltas: List[float]
    moduli: List[float]
    envelope: Optional[List[float]]
    hoelder: Optional[HoelderConstant]
    log_energy: float
    log_energy_bound: Optional[float]
    eigenvalues: pd.DataFrame = field(repr=False)
    dim: int = 0
    samples: int = 0
    seed: int = 0

    def to_json(self) -> Dict:
        return {
            "dim": self.dim,
            "samples": self.samples,
            "seed": self.seed,
            "delta_star": self.report.delta_star,
            "atoms": [atom.to_json() for atom in self.atoms],
            "max_cluster": {"lambda": self.max_cluster[0], "weight": self.max_cluster[1]},
            "cdf_modulus": [{"delta": delta, "modulus": modulus,
                             "envelope": None if self.envelope is None else self.envelope[k]}
                            for k, (delta, modulus) in enumerate(zip(self.deltas, self.moduli))],
            "hoelder": None if self.hoelder is None else self.hoelder.to_json(),
            "log_energy": self.log_energy,
            "log_energy_bound": self.log_energy_bound,
        }


def _eigenvalue_frame(spectra: List[SpectralSample]) -> pd.DataFrame:
    frames = [pd.DataFrame({"sample": s.seed, "index": np.arange(s.size), "eigenvalue": s.eigenvalues})
              for s in spectra]
    return pd.concat(frames, ignore_index=True)


def _hoelder(P: LinearPencil, fisher: Optional[float], seed: int, n_jobs: int) -> Optional[HoelderConstant]:
    if P.n == 0:
        return None
    try:
        return hoelder_constant(P, fisher if fisher is not None else float(P.n), seed=seed, n_jobs=n_jobs)
    except NotSemiFlatError as e:
        logger.info(f"No Hoelder envelope: {e}")
        return None


def simulate(P: LinearPencil, dim: int, samples: int = DEFAULT_SAMPLES, seed: int = 0,
             window: float = DEFAULT_WINDOW, shrink: float = DEFAULT_SHRINK,
             deltas: Sequence[float] = DEFAULT_DELTAS, fisher: Optional[float] = None,
             anchors: int = DEFAULT_ANCHORS, n_jobs: int = 1,
             report: Optional[AtomReport] = None) -> SimulationSummary:
    """Compare predicted atoms and the Hoelder envelope with GUE spectra of P"""

    report = report or full_spectrum(P, seed=seed, n_jobs=n_jobs)
    spectra = _sample_spectra(P, dim, samples, seed, n_jobs)
    logger.info(f"Sampled {samples} spectra of size {P.N * dim}")

    atoms = []
    for atom in report.atoms:
        weights = [window_weight(s, atom.lam, window) for s in spectra]
        atoms.append(AtomComparison(atom.lam, atom.weight, float(np.mean(weights)), float(np.std(weights))))
        if abs(atoms[-1].empirical - atom.weight) > 0.05:
            logger.warning(f"Empirical weight {atoms[-1].empirical:.3f} at {atom.lam:.6g} "
                           f"differs from predicted {atom.weight:.3f}")

    clusters = [max_cluster_weight(s, window, shrink) for s in spectra]
    location, weight = max(clusters, key=lambda c: c[1])
    moduli = np.max([cdf_modulus(s, deltas, anchors) for s in spectra], axis=0).tolist()

    hoelder = _hoelder(P, fisher, seed, n_jobs)
    envelope, bound = None, None
    if hoelder is not None:
        pad = 4.0 / np.sqrt(P.N * dim)
        envelope = [hoelder.C * delta ** hoelder.exponent + pad for delta in deltas]
        bound = log_energy_bound(P, hoelder.fisher, constant=hoelder)

    return SimulationSummary(report=report, atoms=atoms, max_cluster=(location, weight), deltas=list(deltas),
                             moduli=moduli, envelope=envelope, hoelder=hoelder,
                             log_energy=float(np.mean([empirical_log_energy(s) for s in spectra])),
                             log_energy_bound=bound, eigenvalues=_eigenvalue_frame(spectra),
                             dim=dim, samples=samples, seed=seed)

"""
Spectral Predictions
Atoms, entropy dimension and Hoelder constants of selfadjoint linear pencils, computed algebraically
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed
from sklearn.cluster import DBSCAN

from LinearPencil import FlatnessReport, LinearPencil, NotSelfadjointError, flatness_constants
from NCRank import DEFAULT_TRIALS, RankCertificate, is_full

logger = logging.getLogger(__name__)

CLUSTER_TOL = 1e-8
HOELDER_EXPONENT = 2.0 / 3.0
VALIDITY_NOTE = "valid under maximal free entropy dimension"


class NotSemiFlatError(ValueError):
    """The quantum operator of the pencil admits no positive lower flatness constant"""


@dataclass
class Atom:
    lam: float
    rho: int
    weight: float

    def to_json(self) -> Dict:
        return {"lambda": self.lam, "rho": self.rho, "weight": self.weight}


@dataclass
class AtomReport:
    """Predicted atoms of the distribution of a selfadjoint pencil"""
    pencil: LinearPencil = field(repr=False)
    atoms: List[Atom]
    candidates_checked: List[float]
    delta_star: float
    homogeneous_full: bool = False

    @property
    def total_weight(self) -> float:
        return sum(atom.weight for atom in self.atoms)

    def to_json(self) -> Dict:
        return {
            "N": self.pencil.N,
            "atoms": [atom.to_json() for atom in self.atoms],
            "candidates_checked": self.candidates_checked,
            "delta_star": self.delta_star,
            "homogeneous_full": self.homogeneous_full,
            "note": VALIDITY_NOTE,
        }


def cluster_eigenvalues(values: np.ndarray, tol: float = CLUSTER_TOL) -> List[float]:
    """Distinct eigenvalues up to tol, each reported as its cluster mean"""

    values = np.sort(np.asarray(values, dtype=float))
    if values.size == 0:
        return []
    labels = DBSCAN(eps=tol, min_samples=1).fit(values.reshape(-1, 1)).labels_
    centers = [float(values[labels == label].mean()) for label in np.unique(labels)]
    return sorted(centers)


def _delta_star(N: int, ranks: List[int]) -> float:
    if N == 0:
        return 1.0
    return float(1 - Fraction(sum((N - rho) ** 2 for rho in ranks), N * N))


def _shifted_certificate(P: LinearPencil, lam: float, trials: int, seed: int) -> RankCertificate:
    return is_full(P.shift(lam), trials=trials, seed=seed)


def full_spectrum(P: LinearPencil, trials: int = DEFAULT_TRIALS, seed: int = 0, n_jobs: int = 1,
                  cluster_tol: float = CLUSTER_TOL) -> AtomReport:
    """Atoms at eigenvalues lam of b0 where P - lam*1 is not full, weight (N - rho)/N"""

    if not P.selfadjoint:
        raise NotSelfadjointError("Atom prediction needs a pencil flagged selfadjoint")
    N = P.N
    candidates = cluster_eigenvalues(np.linalg.eigvalsh(P.constant), cluster_tol)

    homogeneous_full = P.n > 0 and is_full(P.homogeneous_part(), trials=trials, seed=seed).is_full
    if homogeneous_full:
        logger.info(f"Homogeneous part is full; no atoms among {len(candidates)} candidates")
        return AtomReport(P, [], candidates, 1.0, True)

    certificates = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_shifted_certificate)(P, lam, trials, seed) for lam in candidates)
    atoms = [Atom(lam, cert.value, (N - cert.value) / N)
             for lam, cert in zip(candidates, certificates) if cert.value < N]
    report = AtomReport(P, atoms, candidates, _delta_star(N, [atom.rho for atom in atoms]))
    logger.info(f"{len(atoms)} atom(s) among {len(candidates)} candidates, delta*={report.delta_star:.6g}")
    return report


def entropy_dimension(report: AtomReport) -> float:
    """1 - sum of squared atom weights"""
    return _delta_star(report.pencil.N, [atom.rho for atom in report.atoms])


@dataclass
class HoelderConstant:
    C: float
    c: float
    coefficient_norm_sq: float
    fisher: float
    exponent: float = HOELDER_EXPONENT

    def to_json(self) -> Dict:
        return {"C": self.C, "c": self.c, "exponent": self.exponent,
                "sum_norm_sq": self.coefficient_norm_sq, "fisher": self.fisher}


def hoelder_constant(P: LinearPencil, fisher: float, flatness: Optional[FlatnessReport] = None,
                     **flatness_options) -> HoelderConstant:
    """C = 4 c^{-2/3} (sum ||b_j||^2)^{1/3} Phi^{1/3} with c the lower flatness constant"""

    if fisher <= 0:
        raise ValueError(f"Fisher information must be positive, got {fisher}")
    flatness = flatness or flatness_constants(P, **flatness_options)
    if not flatness.semi_flat:
        raise NotSemiFlatError(f"Lower flatness constant {flatness.c_lower:.3g} is not positive")
    c = flatness.c_lower
    norm_sq = float(sum(np.linalg.norm(A, 2) ** 2 for A in P.homogeneous))
    C = 4.0 * c ** (-2.0 / 3.0) * norm_sq ** (1.0 / 3.0) * fisher ** (1.0 / 3.0)
    logger.debug(f"Hoelder constant C={C:.6g} from c={c:.6g}, sum ||b_j||^2={norm_sq:.6g}")
    return HoelderConstant(C, c, norm_sq, fisher)


def log_energy_bound(P: LinearPencil, fisher: float, constant: Optional[HoelderConstant] = None,
                     **flatness_options) -> float:
    """Lower bound -3C on the logarithmic energy of the distribution"""
    constant = constant or hoelder_constant(P, fisher, **flatness_options)
    return -3.0 * constant.C


def fisher_bounds(n: int, t: float, second_moment: float) -> Tuple[float, float]:
    """n^2 / (C^2 + n t) <= Phi* <= n / t after adding sqrt(t) times a free semicircular family"""

    if t <= 0:
        raise ValueError(f"Perturbation size must be positive, got {t}")
    return n * n / (second_moment + n * t), n / t

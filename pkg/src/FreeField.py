"""
Free Field
==========

Noncommutative rational functions as linear representations u*A^{-1}*v with A full.

Features:
- Construction from expressions or polynomials with a fullness certificate on A
- Sum, product, negation and inverse by block constructions, recertified after each step
- Zero and equality tests through the bordered pencil [[0, u], [v, A]]
- Evaluation on matrix tuples, cross-checked against the source expression
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from NCPoly import MatrixTuple, NCPoly
from NCRank import RankCertificate, bordered_certificate, bordered_is_zero, is_full
from RationalExpression import (DOMAIN_TOL, DomainError, FormalLinearRep, RatExpr, eval_dag, expr_from_poly,
                                linearize, rep_inverse, rep_product, rep_scale, rep_sum)

logger = logging.getLogger(__name__)

CROSS_CHECK_TOL = 1e-8


class NotRegularError(ValueError):
    """The expression defines no element of the free field (its linearization is not full)"""

    def __init__(self, message: str, certificate: Optional[RankCertificate] = None):
        super().__init__(message)
        self.certificate = certificate


class DivisionByZeroFunctionError(ZeroDivisionError):
    """Inverse of the zero rational function"""


@dataclass(frozen=True, eq=False)
class RationalFunction:
    rep: FormalLinearRep
    certificate: RankCertificate = field(repr=False)
    source: Optional[RatExpr] = None

    @property
    def dimension(self) -> int:
        return self.rep.dimension

    @property
    def nvars(self) -> int:
        return self.rep.A.n

    def __add__(self, other: "RationalFunction") -> "RationalFunction":
        return rf_arith(self, other, 'add')

    def __mul__(self, other: "RationalFunction") -> "RationalFunction":
        return rf_arith(self, other, 'mul')

    def __neg__(self) -> "RationalFunction":
        return rf_neg(self)

    def __sub__(self, other: "RationalFunction") -> "RationalFunction":
        return rf_sub(self, other)


def _certify(rep: FormalLinearRep, source: Optional[RatExpr], **rank_options) -> RationalFunction:
    certificate = is_full(rep.A, **rank_options)
    if not certificate.is_full:
        raise NotRegularError(f"Linear part of dimension {rep.dimension} has inner rank {certificate.value}",
                              certificate)
    return RationalFunction(rep, certificate, source)


def from_expr(r: RatExpr, **rank_options) -> RationalFunction:
    """Linearize an expression and certify that it is regular"""

    rep = linearize(r)
    rf = _certify(rep, r, **rank_options)
    logger.debug(f"Expression with {len(r.nodes)} nodes is regular, representation dimension {rep.dimension}")
    return rf


def from_poly(a: NCPoly, **rank_options) -> RationalFunction:
    return from_expr(expr_from_poly(a), **rank_options)


def rf_arith(r1: RationalFunction, r2: RationalFunction, op: str, **rank_options) -> RationalFunction:
    if op == 'add':
        rep = rep_sum(r1.rep, r2.rep)
    elif op == 'mul':
        rep = rep_product(r1.rep, r2.rep)
    else:
        raise ValueError(f"Unknown operation '{op}'")
    return _certify(rep, None, **rank_options)


def rf_neg(r: RationalFunction) -> RationalFunction:
    return RationalFunction(rep_scale(r.rep, -1), r.certificate, None)


def rf_sub(r1: RationalFunction, r2: RationalFunction, **rank_options) -> RationalFunction:
    return rf_arith(r1, rf_neg(r2), 'add', **rank_options)


def rf_inv(r: RationalFunction, **rank_options) -> RationalFunction:
    if is_zero(r, **rank_options):
        raise DivisionByZeroFunctionError("Cannot invert the zero rational function")
    return _certify(rep_inverse(r.rep), None, **rank_options)


def zero_certificate(r: RationalFunction, **rank_options) -> RankCertificate:
    """Certificate of the bordered pencil; non-full exactly when r is zero"""
    return bordered_certificate(r.rep.u, r.rep.A, r.rep.v, **rank_options)


def is_zero(r: RationalFunction, method: str = 'rank', **rank_options) -> bool:
    """method='full_block' searches full square blocks of small bordered pencils instead"""
    if method == 'rank':
        return not zero_certificate(r, **rank_options).is_full
    return bordered_is_zero(r.rep.u, r.rep.A, r.rep.v, method, **rank_options)


def equals(r1: RationalFunction, r2: RationalFunction, **rank_options) -> bool:
    if r1 is r2:
        return True
    # r1 - r2 only needs A1 + A2 to be full, which holds for certified summands
    difference = RationalFunction(rep_sum(r1.rep, rep_scale(r2.rep, -1)), r1.certificate)
    return is_zero(difference, **rank_options)


def is_zero_batch(functions: Sequence[RationalFunction], n_jobs: int = 1, **rank_options) -> List[bool]:
    return Parallel(n_jobs=n_jobs, prefer="threads")(delayed(is_zero)(r, **rank_options) for r in functions)


def evaluate_rf(r: RationalFunction, X: MatrixTuple, tol: float = DOMAIN_TOL) -> np.ndarray:
    """u (x) 1 * A(X)^{-1} * v (x) 1; DomainError outside the domain of this representation"""

    value = r.rep.evaluate(X, tol)
    if r.source is not None:
        try:
            expected = eval_dag(r.source, X, tol)
        except DomainError:
            logger.debug("Source expression undefined at this point; representation value kept")
        else:
            error = np.linalg.norm(value - expected)
            if error > CROSS_CHECK_TOL * (1 + np.linalg.norm(expected)):
                logger.warning(f"Representation and source expression differ by {error:.3e}")
    return value


def zero_test_report(r: RationalFunction, method: str = 'rank', **rank_options) -> Dict:
    if method != 'rank':
        return {"zero": is_zero(r, method, **rank_options), "dimension": r.dimension,
                "certificate": {"confidence": {"mode": method}}}
    certificate = zero_certificate(r, **rank_options)
    return {"zero": not certificate.is_full, "dimension": r.dimension,
            "certificate": certificate.to_json()}

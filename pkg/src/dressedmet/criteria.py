"""Algebraic reachability criteria for Heisenberg-limited sensing.

Each criterion asks whether the signal generator G escapes an operator span
built from the noise couplings; sensitivity beyond the standard quantum limit
survives the corresponding noise class exactly when it does.

* :func:`linear_span_condition` - real span of the identity and the Hermitian
  couplings.  Escaping it is what dephasing-plus-relaxation protection (with a
  noiseless ancilla available) requires.
* :func:`quadratic_span_condition` - complex span that additionally contains
  all pairwise coupling products.  Escaping it is required once every thermal
  transition channel is open, and is what full error-correctability demands.
* :func:`hnls_condition` - the Lindblad-operator version of the same test,
  spanning the identity, each jump operator, its adjoint, and all pairwise
  adjoint products.

Verdicts are residual-threshold decisions; residuals within a factor
``tol.marginal_factor`` of the threshold are flagged marginal so callers can
treat borderline instances with suspicion.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable

import numpy as np

from .errors import ValidationError
from .operators import (
    OperatorSpan,
    ScalarField,
    as_matrix,
    frobenius,
    orthonormal_span,
    project_decompose,
)
from .tolerances import TOL, Tolerances

__all__ = [
    "Criterion",
    "CriterionReport",
    "linear_span_condition",
    "quadratic_span_condition",
    "hnls_condition",
    "condition_by_name",
]


class Criterion(Enum):
    # the .value strings double as the CLI/JSON interface vocabulary
    LINEAR_REAL = "thm1"
    QUADRATIC_COMPLEX = "thm2"
    HNLS = "hnls"


@dataclass(frozen=True, eq=False)
class CriterionReport:
    criterion: Criterion
    verdict: bool
    residual_norm: float
    span_dim: int
    marginal: bool
    g_perp: np.ndarray
    tolerance: float

    def to_json_dict(self) -> dict:
        from .jsonio import operator_to_json

        return {
            "criterion": self.criterion.value,
            "verdict": self.verdict,
            "residual_norm": self.residual_norm,
            "span_dim": self.span_dim,
            "marginal": self.marginal,
            "tolerance": self.tolerance,
            "g_perp": operator_to_json(self.g_perp),
        }


def _report(g, span: OperatorSpan, criterion: Criterion, tol: Tolerances) -> CriterionReport:
    _, perp = project_decompose(g, span, tol=tol)
    residual = frobenius(perp.entries)
    verdict = residual > tol.membership
    lo = tol.membership / tol.marginal_factor
    hi = tol.membership * tol.marginal_factor
    marginal = lo <= residual <= hi
    return CriterionReport(
        criterion=criterion,
        verdict=verdict,
        residual_norm=residual,
        span_dim=span.size,
        marginal=marginal,
        g_perp=perp.entries,
        tolerance=tol.membership,
    )


def _check_dims(g, ops: Iterable) -> tuple[np.ndarray, list[np.ndarray]]:
    gm = as_matrix(g)
    mats = [as_matrix(a) for a in ops]
    for m in mats:
        if m.shape != gm.shape:
            raise ValidationError("generator and couplings must share one dimension")
    return gm, mats


def linear_span_condition(g, couplings, *, tol: Tolerances = TOL) -> CriterionReport:
    """Does G escape span_R{1, A_alpha}?

    True means a protected two-dimensional code with nonzero signal exists
    under dephasing and relaxation by the Hermitian couplings ``couplings``
    (allowing a noiseless ancilla); false means none exists.
    """
    gm, mats = _check_dims(g, couplings)
    dim = gm.shape[0]
    span = orthonormal_span(
        [np.eye(dim, dtype=complex)] + mats, ScalarField.REAL, tol=tol
    )
    return _report(gm, span, Criterion.LINEAR_REAL, tol)


def quadratic_generators(couplings, dim: int) -> list[np.ndarray]:
    """Identity, couplings, and all ordered pairwise products."""
    mats = [as_matrix(a) for a in couplings]
    gens = [np.eye(dim, dtype=complex)] + list(mats)
    gens += [a @ b for a in mats for b in mats]
    return gens


def quadratic_span_condition(g, couplings, *, tol: Tolerances = TOL) -> CriterionReport:
    """Does G escape span_C{1, A_alpha, A_alpha A_beta}?

    True means an error-corrected sensing code with nonzero signal survives
    arbitrary bath temperature (every transition channel open); false means
    the signal is unrecoverable in that regime.
    """
    gm, mats = _check_dims(g, couplings)
    span = orthonormal_span(
        quadratic_generators(mats, gm.shape[0]), ScalarField.COMPLEX, tol=tol
    )
    return _report(gm, span, Criterion.QUADRATIC_COMPLEX, tol)


def hnls_generators(lindblads, dim: int) -> list[np.ndarray]:
    mats = [as_matrix(l) for l in lindblads]
    gens = [np.eye(dim, dtype=complex)]
    gens += mats
    gens += [m.conj().T for m in mats]
    gens += [a.conj().T @ b for a in mats for b in mats]
    return gens


def hnls_condition(g, lindblads, *, tol: Tolerances = TOL) -> CriterionReport:
    """Hamiltonian-not-in-Lindblad-span test for an explicit jump-operator list.

    True iff G escapes span_C{1, L_i, L_i^dag, L_i^dag L_j}; this is the
    standard correctability criterion stated directly on a Lindblad set
    rather than on the physical couplings.
    """
    gm = as_matrix(g)
    mats = [as_matrix(l) for l in lindblads]
    for m in mats:
        if m.shape != gm.shape:
            raise ValidationError("generator and Lindblad operators must share one dimension")
    span = orthonormal_span(
        hnls_generators(mats, gm.shape[0]), ScalarField.COMPLEX, tol=tol
    )
    return _report(gm, span, Criterion.HNLS, tol)


def condition_by_name(name: str, g, ops, *, tol: Tolerances = TOL) -> CriterionReport:
    """Dispatch a criterion by its interface name ('thm1' | 'thm2' | 'hnls')."""
    table = {
        Criterion.LINEAR_REAL.value: linear_span_condition,
        Criterion.QUADRATIC_COMPLEX.value: quadratic_span_condition,
        Criterion.HNLS.value: hnls_condition,
    }
    if name not in table:
        raise ValidationError(f"unknown criterion {name!r}; expected one of {sorted(table)}")
    return table[name](g, ops, tol=tol)

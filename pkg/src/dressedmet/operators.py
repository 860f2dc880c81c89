"""Dense operator algebra on small Hilbert spaces.

Conventions used throughout the package:

* hbar = 1; energies are angular frequencies.
* Matrices are dense complex numpy arrays; the operator inner product is
  Hilbert-Schmidt, ``<A, B> = tr(A^dag B)``.
* Spin matrices follow the descending-m basis ordering ``(|s>, ..., |-s>)``,
  so for spin 1 the basis reads ``(|+1>, |0>, |-1>)`` and ``S_z`` is
  ``diag(1, 0, -1)``.

Eigendecompositions returned by :func:`eigh_fixed` are made deterministic
(phase fixed, degenerate columns ordered) so downstream golden tests are
stable run to run.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .tolerances import TOL, Tolerances

__all__ = [
    "HermitianOperator",
    "StateVector",
    "ScalarField",
    "OperatorSpan",
    "as_matrix",
    "dagger",
    "frobenius",
    "tensor",
    "lift",
    "hs_inner",
    "orthonormal_span",
    "project_decompose",
    "positive_negative_split",
    "spin_matrices",
    "eigh_fixed",
]


def dagger(m: np.ndarray) -> np.ndarray:
    return m.conj().T


def frobenius(m: np.ndarray) -> float:
    return float(np.linalg.norm(m))


def as_matrix(op) -> np.ndarray:
    """Coerce an operator-like object to a square complex ndarray."""
    if isinstance(op, HermitianOperator):
        return op.entries
    m = np.asarray(op, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {m.shape}")
    return m


def _hermiticity_error(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """A validated Hermitian matrix.

    Wrapping asserts Hermiticity entrywise; the stored array is read-only.
    Most functions accept plain ndarrays too and only return this type where
    Hermiticity is part of their contract.
    """

    entries: np.ndarray

    def __post_init__(self):
        m = np.array(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise ValidationError(f"operator must be a square matrix, got shape {m.shape}")
        err = _hermiticity_error(m)
        if err > TOL.hermiticity * max(1.0, float(np.max(np.abs(m)))):
            raise ValidationError(f"matrix is not Hermitian (deviation {err:.3e})")
        m = (m + m.conj().T) / 2.0
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "HermitianOperator":
        return cls(np.eye(dim, dtype=complex))

    def __array__(self, dtype=None, copy=None):
        arr = self.entries
        if dtype is not None:
            arr = arr.astype(dtype)
        return np.array(arr) if copy else arr


@dataclass(frozen=True, eq=False)
class StateVector:
    """A validated unit-norm pure state."""

    amplitudes: np.ndarray

    def __post_init__(self):
        v = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if v.size < 1:
            raise ValidationError("state vector must have dimension >= 1")
        nrm = float(np.linalg.norm(v))
        if abs(nrm - 1.0) > TOL.state_norm:
            raise ValidationError(f"state vector is not normalized (|norm-1| = {abs(nrm - 1.0):.3e})")
        v.setflags(write=False)
        object.__setattr__(self, "amplitudes", v)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    @classmethod
    def basis(cls, dim: int, index: int) -> "StateVector":
        v = np.zeros(dim, dtype=complex)
        v[index] = 1.0
        return cls(v)

    def projector(self) -> np.ndarray:
        v = self.amplitudes
        return np.outer(v, v.conj())

    def __array__(self, dtype=None, copy=None):
        arr = self.amplitudes
        if dtype is not None:
            arr = arr.astype(dtype)
        return np.array(arr) if copy else arr


def as_vector(state) -> np.ndarray:
    if isinstance(state, StateVector):
        return state.amplitudes
    v = np.asarray(state, dtype=complex).reshape(-1)
    return v


class ScalarField(Enum):
    REAL = "real"
    COMPLEX = "complex"


@dataclass(frozen=True, eq=False)
class OperatorSpan:
    """An orthonormal basis of an operator subspace.

    ``field`` records the scalars the span is closed under: REAL spans hold
    Hermitian elements with real coefficients, COMPLEX spans are ordinary
    subspaces of d x d complex matrices.
    """

    dim: int
    field: ScalarField
    basis: tuple

    def __post_init__(self):
        mats = tuple(np.asarray(b, dtype=complex) for b in self.basis)
        for b in mats:
            if b.shape != (self.dim, self.dim):
                raise ValidationError("span basis has inconsistent dimensions")
            if self.field is ScalarField.REAL and _hermiticity_error(b) > 1e-9:
                raise ValidationError("a real-field span requires Hermitian basis elements")
        for i, a in enumerate(mats):
            for b in mats[i:]:
                want = 1.0 if b is a else 0.0
                if abs(np.trace(dagger(a) @ b) - want) > TOL.orthonormality:
                    raise ValidationError("span basis is not orthonormal")
        object.__setattr__(self, "basis", mats)

    @property
    def size(self) -> int:
        return len(self.basis)

    def project(self, m) -> np.ndarray:
        """Orthogonal projection of ``m`` onto the span."""
        x = as_matrix(m)
        if x.shape != (self.dim, self.dim):
            raise ValidationError("dimension mismatch in span projection")
        out = np.zeros_like(x)
        for b in self.basis:
            c = np.trace(dagger(b) @ x)
            if self.field is ScalarField.REAL:
                c = c.real
            out = out + c * b
        return out


def tensor(a, b) -> np.ndarray:
    """Kronecker product of two operators."""
    return np.kron(as_matrix(a), as_matrix(b))


def lift(op, ancilla_dim: int) -> np.ndarray:
    """Extend a system operator to system (x) ancilla, acting trivially on the ancilla."""
    m = as_matrix(op)
    if ancilla_dim == 1:
        return m.copy()
    return np.kron(m, np.eye(ancilla_dim, dtype=complex))


def hs_inner(a, b, *, tol: Tolerances = TOL) -> float:
    """Hilbert-Schmidt pairing tr(a b) of two Hermitian operators.

    The trace is real for Hermitian inputs; the imaginary part is asserted
    below tolerance and dropped.
    """
    ma, mb = as_matrix(a), as_matrix(b)
    if ma.shape != mb.shape:
        raise ValidationError("hs_inner requires operators of equal dimension")
    scale = max(1.0, float(np.max(np.abs(ma))) * float(np.max(np.abs(mb))) * ma.shape[0])
    for m in (ma, mb):
        if _hermiticity_error(m) > TOL.hermiticity * max(1.0, float(np.max(np.abs(m)))):
            raise ValidationError("hs_inner expects Hermitian inputs")
    val = np.trace(ma @ mb)
    if abs(val.imag) > tol.hermiticity * scale:
        raise ValidationError(f"tr(ab) has a non-negligible imaginary part ({val.imag:.3e})")
    return float(val.real)


def orthonormal_span(
    generators: Iterable,
    field: ScalarField = ScalarField.COMPLEX,
    *,
    tol: Tolerances = TOL,
) -> OperatorSpan:
    """Orthonormalize a generator list into an :class:`OperatorSpan`.

    Modified Gram-Schmidt with one re-orthogonalization pass; generators whose
    residual after projection falls below ``tol.span_drop`` (relative to their
    own norm) are dropped as linearly dependent.
    """
    mats = [as_matrix(g) for g in generators]
    if not mats:
        raise ValidationError("orthonormal_span requires at least one generator")
    dim = mats[0].shape[0]
    basis: list[np.ndarray] = []
    for m in mats:
        if m.shape != (dim, dim):
            raise ValidationError("span generators have inconsistent dimensions")
        if field is ScalarField.REAL and _hermiticity_error(m) > 1e-9 * max(1.0, float(np.max(np.abs(m)))):
            raise ValidationError("field=REAL requires Hermitian generators")
        nrm = frobenius(m)
        if nrm < tol.span_drop:
            continue
        w = m / nrm
        for _ in range(2):
            for b in basis:
                c = np.trace(dagger(b) @ w)
                if field is ScalarField.REAL:
                    c = c.real
                w = w - c * b
        r = frobenius(w)
        if r < tol.span_drop:
            continue
        basis.append(w / r)
    return OperatorSpan(dim=dim, field=field, basis=tuple(basis))


def project_decompose(g, span: OperatorSpan, *, tol: Tolerances = TOL):
    """Split a Hermitian ``g`` into its span component and orthogonal remainder.

    Returns ``(g_par, g_perp)`` with ``g = g_par + g_perp`` exactly and
    ``g_perp`` orthogonal to every basis element.  Both parts are Hermitian;
    this requires the span to be closed under the adjoint (always true for the
    spans built by this package), which is verified numerically.
    """
    m = as_matrix(g)
    if _hermiticity_error(m) > TOL.hermiticity * max(1.0, float(np.max(np.abs(m)))):
        raise ValidationError("project_decompose expects a Hermitian operator")
    par = span.project(m)
    scale = max(1.0, frobenius(m))
    if _hermiticity_error(par) > tol.decomposition * scale:
        raise ValidationError(
            "projection is not Hermitian; the span is not closed under the adjoint"
        )
    par = (par + dagger(par)) / 2.0
    perp = m - par
    return HermitianOperator(par), HermitianOperator(perp)


def positive_negative_split(g_perp, *, tol: Tolerances = TOL):
    """Split a traceless Hermitian operator into normalized signed parts.

    Returns ``(rho1, rho0, weight)`` where ``rho1``/``rho0`` are the density
    matrices carried by the positive/negative eigenspaces and
    ``weight = tr|g|/2``, so ``g = weight * (rho1 - rho0)``.  Eigenvalues
    within ``tol.rank`` (relative) of zero join neither support.
    """
    m = as_matrix(g_perp)
    if _hermiticity_error(m) > TOL.hermiticity * max(1.0, float(np.max(np.abs(m)))):
        raise ValidationError("positive_negative_split expects a Hermitian operator")
    scale = frobenius(m)
    if scale < tol.span_drop:
        raise ValidationError("cannot split an operator that is numerically zero")
    if abs(np.trace(m).real) > tol.traceless * max(1.0, scale):
        raise ValidationError(f"operator must be traceless, got trace {np.trace(m).real:.3e}")
    vals, vecs = eigh_fixed(m)
    cut = tol.rank * float(np.max(np.abs(vals)))
    pos = vals > cut
    neg = vals < -cut
    if not pos.any() or not neg.any():
        raise ValidationError("traceless operator lacks a two-sided spectrum after rank cut")
    p_part = (vecs[:, pos] * vals[pos]) @ dagger(vecs[:, pos])
    n_part = (vecs[:, neg] * (-vals[neg])) @ dagger(vecs[:, neg])
    tr_p = float(np.trace(p_part).real)
    tr_n = float(np.trace(n_part).real)
    weight = 0.5 * (tr_p + tr_n)
    rho1 = (p_part + dagger(p_part)) / (2.0 * tr_p)
    rho0 = (n_part + dagger(n_part)) / (2.0 * tr_n)
    return rho1, rho0, weight


def spin_matrices(two_s: int):
    """Spin matrices ``(S_x, S_y, S_z)`` for spin ``s = two_s / 2``.

    Basis ordering is descending in m, so ``S_z = diag(s, s-1, ..., -s)``.
    ``spin_matrices(1)`` gives the Pauli matrices over 2 and
    ``spin_matrices(2)`` the standard spin-1 triple.
    """
    if not isinstance(two_s, (int, np.integer)) or two_s < 1:
        raise ValidationError("two_s must be a positive integer")
    s = two_s / 2.0
    dim = two_s + 1
    m = s - np.arange(dim)
    sz = np.diag(m).astype(complex)
    s_plus = np.zeros((dim, dim), dtype=complex)
    for k in range(1, dim):
        # raising S+|m> lands one basis index up (descending-m ordering)
        s_plus[k - 1, k] = np.sqrt(s * (s + 1) - m[k] * (m[k] + 1))
    s_minus = s_plus.conj().T
    sx = (s_plus + s_minus) / 2.0
    sy = (s_plus - s_minus) / 2.0j
    return sx, sy, sz


def eigh_fixed(m) -> tuple[np.ndarray, np.ndarray]:
    """Hermitian eigendecomposition with a deterministic output convention.

    Eigenvalues ascend; each eigenvector's first non-negligible component is
    made real positive, and exactly degenerate columns are ordered
    lexicographically by their (rounded) entries so repeated runs and
    equivalent inputs produce identical output.
    """
    a = as_matrix(m)
    vals, vecs = np.linalg.eigh(a)
    vecs = vecs.copy()
    scale = float(np.max(np.abs(vals))) if vals.size else 0.0
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        idx = np.flatnonzero(np.abs(col) > 1e-9)
        if idx.size == 0:
            continue
        ph = col[idx[0]]
        vecs[:, j] = col * (ph.conj() / abs(ph))
    # order exact ties deterministically
    tie_tol = max(1e-12, 1e-12 * scale)
    order = list(range(len(vals)))
    i = 0
    while i < len(vals):
        j = i
        while j + 1 < len(vals) and abs(vals[j + 1] - vals[i]) <= tie_tol:
            j += 1
        if j > i:
            def key(k):
                col = np.round(vecs[:, k], 10)
                return tuple(x for pair in zip(col.real, col.imag) for x in pair)

            order[i : j + 1] = sorted(order[i : j + 1], key=key)
        i = j + 1
    return vals[order].copy(), vecs[:, order]


def projector_onto(states: Sequence) -> np.ndarray:
    """Projector onto the span of the given (orthonormal) state vectors."""
    vs = [as_vector(s) for s in states]
    p = np.zeros((vs[0].shape[0], vs[0].shape[0]), dtype=complex)
    for v in vs:
        p += np.outer(v, v.conj())
    return p

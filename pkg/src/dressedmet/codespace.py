"""Code spaces: purification, condition checks, control fields, and searches.

A code space is an orthonormal pair spanning a two-dimensional sensing
subspace, possibly on system x ancilla.  This module turns optimizer output
into explicit code states, builds control Hamiltonians that isolate them
spectrally, verifies protection conditions (including Knill-Laflamme blocks),
and runs the no-protected-pair feasibility search on bare system spaces.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .criteria import quadratic_generators
from .errors import NumericalError, ValidationError
from .lindblad import LindbladSet, jump_operators
from .operators import (
    HermitianOperator,
    ScalarField,
    StateVector,
    as_matrix,
    as_vector,
    eigh_fixed,
    frobenius,
    lift,
    orthonormal_span,
    positive_negative_split,
    project_decompose,
)
from .rand import stream
from .tolerances import TOL, Tolerances


@dataclass(frozen=True)
class CodeSpace:
    """Orthonormal pair (psi0, psi1) on a system x ancilla product space."""

    psi0: StateVector
    psi1: StateVector
    sys_dim: int
    anc_dim: int

    def __post_init__(self) -> None:
        total = self.sys_dim * self.anc_dim
        if self.psi0.dim != total or self.psi1.dim != total:
            raise ValidationError(
                f"code states have dim {self.psi0.dim}, expected "
                f"{self.sys_dim}x{self.anc_dim}={total}"
            )
        overlap = abs(np.vdot(self.psi0.amplitudes, self.psi1.amplitudes))
        if overlap > 1e-12:
            raise ValidationError(f"code states not orthogonal: overlap {overlap:.2e}")

    @property
    def total_dim(self) -> int:
        return self.sys_dim * self.anc_dim

    @property
    def frame(self) -> np.ndarray:
        """d x 2 matrix with the code states as columns."""
        return np.stack([self.psi0.amplitudes, self.psi1.amplitudes], axis=1)

    @property
    def projector(self) -> np.ndarray:
        v = self.frame
        return v @ v.conj().T

    def to_json_dict(self) -> dict:
        from .jsonio import state_to_json

        return {
            "psi0": state_to_json(self.psi0),
            "psi1": state_to_json(self.psi1),
            "sys_dim": self.sys_dim,
            "anc_dim": self.anc_dim,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "CodeSpace":
        from .jsonio import state_from_json

        return cls(
            state_from_json(obj["psi0"]),
            state_from_json(obj["psi1"]),
            int(obj["sys_dim"]),
            int(obj["anc_dim"]),
        )


@dataclass(frozen=True)
class ConditionReport:
    """Violation magnitudes of the protection conditions plus the signal.

    ``excitation_violation`` needs the surrounding eigenstates and is None
    when no eigenbasis context was supplied, to keep an unchecked condition
    from reading as a passed one.
    """

    dephasing_violation: float
    relaxation_violation: float
    excitation_violation: Optional[float]
    kl_violation: float
    signal: float

    def to_json_dict(self) -> dict:
        return {
            "dephasing_violation": self.dephasing_violation,
            "relaxation_violation": self.relaxation_violation,
            "excitation_violation": self.excitation_violation,
            "kl_violation": self.kl_violation,
            "signal": self.signal,
        }


class EffectiveGenerator(NamedTuple):
    g00: float
    g11: float
    delta: float
    var: float


def partial_trace(rho: np.ndarray, sys_dim: int, anc_dim: int) -> np.ndarray:
    """Trace out the ancilla factor of a density matrix on sys x anc."""
    rho = as_matrix(rho)
    if rho.shape != (sys_dim * anc_dim, sys_dim * anc_dim):
        raise ValidationError("density matrix does not match sys x anc dims")
    r = rho.reshape(sys_dim, anc_dim, sys_dim, anc_dim)
    return np.einsum("iaja->ij", r)


def purify_pair(
    rho0: np.ndarray, rho1: np.ndarray, tol: Tolerances = TOL
) -> CodeSpace:
    """Purify two system states on a shared ancilla with disjoint supports.

    The ancilla has dimension twice the larger rank; psi0 occupies the first
    half of the ancilla basis and psi1 the second, which makes every
    cross-matrix element of a lifted system operator vanish identically.
    """
    mats = [as_matrix(rho0), as_matrix(rho1)]
    spectra = []
    for m in mats:
        if frobenius(m - m.conj().T) > tol.hermiticity * max(1.0, frobenius(m)):
            raise ValidationError("density matrix input is not Hermitian")
        if abs(np.trace(m).real - 1.0) > 1e-8:
            raise ValidationError("density matrix input is not unit trace")
        vals, vecs = eigh_fixed(0.5 * (m + m.conj().T))
        if vals.min() < -tol.psd * max(1.0, float(vals.max())):
            raise ValidationError("density matrix input is not PSD")
        keep = vals > tol.rank * max(vals.max(), 1e-300)
        spectra.append((vals[keep], vecs[:, keep]))
    sys_dim = mats[0].shape[0]
    rank = max(len(spectra[0][0]), len(spectra[1][0]))
    anc_dim = 2 * rank

    states = []
    for side, (vals, vecs) in enumerate(spectra):
        psi = np.zeros(sys_dim * anc_dim, dtype=complex)
        order = np.argsort(vals)[::-1]
        for slot, k in enumerate(order):
            anc_index = side * rank + slot
            psi += np.sqrt(vals[k]) * np.kron(vecs[:, k], _basis(anc_dim, anc_index))
        states.append(StateVector(psi / np.linalg.norm(psi)))

    code = CodeSpace(states[0], states[1], sys_dim, anc_dim)
    for m, psi in zip(mats, states):
        reduced = partial_trace(np.outer(psi.amplitudes, psi.amplitudes.conj()),
                                sys_dim, anc_dim)
        if frobenius(reduced - m) > tol.decomposition * max(1.0, frobenius(m)):
            raise NumericalError("purification does not reproduce its marginal")
    return code


def _basis(dim: int, index: int) -> np.ndarray:
    e = np.zeros(dim, dtype=complex)
    e[index] = 1.0
    return e


def _lift_to_code(op, code: CodeSpace) -> np.ndarray:
    """Coerce an operator to the code's total space, lifting system ones."""
    m = as_matrix(op)
    if m.shape[0] == code.total_dim:
        return m
    if m.shape[0] == code.sys_dim and code.anc_dim > 1:
        return lift(m, code.anc_dim)
    raise ValidationError(
        f"operator dim {m.shape[0]} fits neither system ({code.sys_dim}) "
        f"nor total ({code.total_dim}) space"
    )


def _code_block(m: np.ndarray, frame: np.ndarray) -> np.ndarray:
    return frame.conj().T @ m @ frame


def _kl_deviation(block: np.ndarray) -> float:
    """Frobenius distance of a 2x2 block from the nearest multiple of I."""
    c = 0.5 * np.trace(block)
    return float(np.linalg.norm(block - c * np.eye(2)))


def verify_knill_laflamme(
    code: CodeSpace,
    lindblads: Sequence[np.ndarray],
    tol: Tolerances = TOL,
) -> Tuple[bool, float]:
    """Check code-block proportionality for each operator and each pair product.

    Returns the worst Frobenius deviation from the best proportionality
    constant; the code is correctable for the given error set when that
    deviation is negligible.
    """
    frame = code.frame
    mats = [_lift_to_code(l, code) for l in lindblads]
    worst = 0.0
    for m in mats:
        worst = max(worst, _kl_deviation(_code_block(m, frame)))
    for a in mats:
        for b in mats:
            worst = max(worst, _kl_deviation(_code_block(a.conj().T @ b, frame)))
    return worst <= tol.kl, worst


def check_conditions(
    code: CodeSpace,
    g,
    couplings: Sequence,
    eigencontext: Optional[Sequence[StateVector]] = None,
    tol: Tolerances = TOL,
) -> ConditionReport:
    """Evaluate all protection conditions of a code against the couplings.

    Dephasing compares diagonal coupling elements, relaxation the cross
    element, excitation the elements to states outside the code (only when
    the surrounding eigenstates are supplied).  ``kl_violation`` covers the
    couplings and their pairwise products, i.e. correctability against the
    full quadratic error set.
    """
    frame = code.frame
    gm = _lift_to_code(g, code)
    mats = [_lift_to_code(a, code) for a in couplings]

    dephasing = 0.0
    relaxation = 0.0
    for a in mats:
        block = _code_block(a, frame)
        dephasing = max(dephasing, abs(block[0, 0] - block[1, 1]))
        relaxation = max(relaxation, abs(block[0, 1]))

    excitation: Optional[float] = None
    if eigencontext is not None:
        excitation = 0.0
        for state in eigencontext:
            v = as_vector(state)
            if v.shape[0] != code.total_dim:
                raise ValidationError("eigencontext state dimension mismatch")
            for a in mats:
                row = v.conj() @ a @ frame
                excitation = max(excitation, float(np.abs(row).max()))

    _, kl_violation = verify_knill_laflamme(code, mats, tol=tol)
    gblock = _code_block(gm, frame)
    signal = float((gblock[1, 1] - gblock[0, 0]).real)
    return ConditionReport(
        float(dephasing), float(relaxation), excitation, kl_violation, signal
    )


def effective_generator(code: CodeSpace, g) -> EffectiveGenerator:
    """Diagonal generator data on the code: gap and superposition variance."""
    gm = _lift_to_code(g, code)
    block = _code_block(gm, code.frame)
    g00 = float(block[0, 0].real)
    g11 = float(block[1, 1].real)
    delta = g11 - g00
    return EffectiveGenerator(g00, g11, delta, 0.25 * delta * delta)


def control_hamiltonian(
    code: CodeSpace,
    h_free: HermitianOperator,
    lambda0: float = 0.0,
    lambda1: float = 1.0,
    complement: float = 10.0,
    tol: Tolerances = TOL,
) -> HermitianOperator:
    """Static control making the code states exact, separated eigenstates.

    Cancels the free Hamiltonian and re-pins the spectrum: psi0 at lambda0,
    psi1 at lambda1, everything orthogonal at ``complement``.  The three
    energies must be pairwise distinct or eigenspaces would merge.
    """
    levels = (lambda0, lambda1, complement)
    if len(set(levels)) != 3:
        raise ValidationError(f"energy levels must be pairwise distinct: {levels}")
    hf = _lift_to_code(h_free, code)
    p0 = np.outer(code.psi0.amplitudes, code.psi0.amplitudes.conj())
    p1 = np.outer(code.psi1.amplitudes, code.psi1.amplitudes.conj())
    rest = np.eye(code.total_dim) - p0 - p1
    hc = -hf + lambda0 * p0 + lambda1 * p1 + complement * rest
    total = hf + hc
    for lam, psi in ((lambda0, code.psi0), (lambda1, code.psi1)):
        resid = np.linalg.norm(total @ psi.amplitudes - lam * psi.amplitudes)
        if resid > 1e-10 * max(1.0, abs(lam), abs(complement)):
            raise NumericalError(f"control residual {resid:.2e} too large")
    return HermitianOperator(hc)


def two_level_dressing(
    code: CodeSpace,
    couplings: Sequence,
    nu0: float,
    tol: Tolerances = TOL,
) -> Tuple[HermitianOperator, LindbladSet]:
    """Two-eigenspace control: code at energy 0, complement lifted by nu0.

    Returns the control operator and the induced jump set, which has exactly
    the three-frequency block structure L(0), L(+-nu0) per coupling.
    """
    if nu0 <= 0:
        raise ValidationError("nu0 must be positive")
    rest = np.eye(code.total_dim) - code.projector
    h_c = HermitianOperator(nu0 * rest)
    mats = [HermitianOperator(_lift_to_code(a, code)) for a in couplings]
    lset = jump_operators(h_c, mats, gap_tol=1e-9 * nu0, tol=tol)
    return h_c, lset


# ---------------------------------------------------------------------------
# searches over orthonormal pairs (Stiefel frames)
# ---------------------------------------------------------------------------


def _retract(v: np.ndarray) -> np.ndarray:
    """Nearest orthonormal frame via QR, with a sign-fixed diagonal."""
    q, r = np.linalg.qr(v)
    signs = np.sign(np.diag(r).real)
    signs[signs == 0] = 1.0
    return q * signs


def _tangent(v: np.ndarray, grad: np.ndarray) -> np.ndarray:
    a = v.conj().T @ grad
    return grad - v @ (0.5 * (a + a.conj().T))


def stiefel_minimize(
    fn: Callable[[np.ndarray], Tuple[float, np.ndarray]],
    v0: np.ndarray,
    max_iter: int = 400,
    gtol: float = 1e-13,
) -> Tuple[float, np.ndarray]:
    """Projected gradient descent with QR retraction and Armijo backtracking.

    ``fn`` returns the objective and its conjugate-coordinate gradient; the
    descent direction is the gradient projected onto the tangent space of the
    orthonormal-frame constraint.
    """
    v = _retract(np.asarray(v0, dtype=complex))
    f, grad = fn(v)
    step = 0.5
    for _ in range(max_iter):
        gt = _tangent(v, grad)
        gn2 = float(np.real(np.sum(gt.conj() * gt)))
        if gn2 < gtol * gtol:
            break
        moved = False
        for _ in range(50):
            cand = _retract(v - step * gt)
            f_new, grad_new = fn(cand)
            if f_new <= f - 0.25 * step * 2.0 * gn2:
                v, f, grad = cand, f_new, grad_new
                step = min(step * 1.3, 8.0)
                moved = True
                break
            step *= 0.5
        if not moved:
            break
    return f, v


def _pair_penalty_terms(mats: Sequence[np.ndarray]):
    """Objective and gradient of the protected-pair penalty for Hermitian mats.

    penalty = sum over couplings of (diagonal mismatch)^2 + 2 |cross element|^2;
    zero exactly when every coupling acts as a multiple of identity plus a
    detuning-free block on the pair.
    """

    def fn(v: np.ndarray) -> Tuple[float, np.ndarray]:
        f = 0.0
        grad = np.zeros_like(v)
        for a in mats:
            av = a @ v
            block = v.conj().T @ av
            z = (block[0, 0] - block[1, 1]).real
            g01 = block[0, 1]
            f += z * z + 2.0 * abs(g01) ** 2
            k = np.array([[z, g01], [np.conj(g01), -z]], dtype=complex)
            grad += 2.0 * (av @ k)
        return f, grad

    return fn


def no_go_search(
    couplings: Sequence,
    sys_dim: int,
    restarts: int,
    seed: int = 0,
) -> float:
    """Smallest protected-pair penalty over random-restart frame descent.

    A floor bounded away from zero certifies that no orthonormal pair in the
    bare system space satisfies the dephasing and relaxation conditions for
    the given couplings.
    """
    if restarts < 1:
        raise ValidationError("restarts must be >= 1")
    mats = [as_matrix(a) for a in couplings]
    for m in mats:
        if m.shape != (sys_dim, sys_dim):
            raise ValidationError("coupling dimension mismatch with sys_dim")
    fn = _pair_penalty_terms(mats)
    best = np.inf
    for r in range(restarts):
        rng = stream(seed, r)
        v0 = rng.standard_normal((sys_dim, 2)) + 1j * rng.standard_normal(
            (sys_dim, 2)
        )
        f, _ = stiefel_minimize(fn, v0)
        best = min(best, f)
    return float(best)


def _quadratic_search_terms(
    gmat: np.ndarray, mats: Sequence[np.ndarray], weight: float
):
    """Objective for the correctable-code refinement search.

    Minimizes the Knill-Laflamme block deviation of the couplings and all
    pair products, minus ``weight`` times the signal, so the search is pulled
    toward correctable pairs that still see the generator.
    """
    error_set = list(mats) + [a.conj().T @ b for a in mats for b in mats]

    def fn(v: np.ndarray) -> Tuple[float, np.ndarray]:
        f = 0.0
        grad = np.zeros_like(v)
        for m in error_set:
            mv = m @ v
            mhv = m.conj().T @ v
            block = v.conj().T @ mv
            z = block[0, 0] - block[1, 1]
            b01, b10 = block[0, 1], block[1, 0]
            f += 0.5 * abs(z) ** 2 + abs(b01) ** 2 + abs(b10) ** 2
            p = np.array(
                [[0.5 * np.conj(z), np.conj(b10)], [np.conj(b01), -0.5 * np.conj(z)]],
                dtype=complex,
            )
            grad += mv @ p + mhv @ p.conj().T
        gv = gmat @ v
        gblock = v.conj().T @ gv
        signal = (gblock[1, 1] - gblock[0, 0]).real
        f -= weight * signal
        grad -= weight * (gv @ np.diag([-1.0, 1.0]))
        return f, grad

    return fn


class CodeSearchResult(NamedTuple):
    code: CodeSpace
    kl_penalty: float
    signal: float


def code_search(
    g,
    couplings: Sequence,
    dim: int,
    restarts: int,
    seed: int = 0,
    signal_weight: float = 0.1,
) -> CodeSearchResult:
    """Search for a correctable pair with maximal signal on a given space.

    Operators must already live on the search space (lift beforehand for an
    ancilla-assisted search).  Returns the restart whose final iterate has
    the largest signal among those with the smallest penalty scale.
    """
    gmat = as_matrix(g)
    mats = [as_matrix(a) for a in couplings]
    fn = _quadratic_search_terms(gmat, mats, signal_weight)
    penalty_fn = _quadratic_search_terms(gmat, mats, 0.0)
    best: Optional[Tuple[float, float, np.ndarray]] = None
    for r in range(restarts):
        rng = stream(seed, r)
        v0 = rng.standard_normal((dim, 2)) + 1j * rng.standard_normal((dim, 2))
        _, v = stiefel_minimize(fn, v0)
        pen = penalty_fn(v)[0]
        gblock = v.conj().T @ gmat @ v
        signal = float((gblock[1, 1] - gblock[0, 0]).real)
        key = (pen > 1e-9, -abs(signal))
        if best is None or key < best[0]:
            best = (key, pen, v)
    _, pen, v = best
    gblock = v.conj().T @ gmat @ v
    signal = float((gblock[1, 1] - gblock[0, 0]).real)
    code = CodeSpace(StateVector(v[:, 0]), StateVector(v[:, 1]), dim, 1)
    return CodeSearchResult(code, float(pen), signal)


def correctable_code(
    g,
    couplings: Sequence,
    tol: Tolerances = TOL,
) -> Optional[CodeSpace]:
    """Construct a correctable, signal-carrying code when one must exist.

    Projects the generator off the quadratic coupling span; a nonzero
    remainder splits into a pair of system states whose purification with
    disjoint ancilla supports passes every Knill-Laflamme block check by
    construction.  Returns None when the generator lies in the span.
    """
    gm = as_matrix(g)
    dim = gm.shape[0]
    span = orthonormal_span(
        quadratic_generators([as_matrix(a) for a in couplings], dim),
        ScalarField.COMPLEX,
        tol=tol,
    )
    _, perp = project_decompose(gm, span, tol=tol)
    if frobenius(perp.entries) <= tol.membership:
        return None
    rho1, rho0, _ = positive_negative_split(perp.entries, tol=tol)
    return purify_pair(rho0, rho1, tol=tol)


def code_from_optimizer(g_tilde: np.ndarray, tol: Tolerances = TOL) -> CodeSpace:
    """Turn a traceless optimizer matrix into a purified code space."""
    rho1, rho0, _ = positive_negative_split(as_matrix(g_tilde), tol=tol)
    return purify_pair(rho0, rho1, tol=tol)

"""Signal optimization: constructive bound, primal interior point, dual descent.

Frozen oracle values (direct arithmetic on eigenvalues):
- Spin-1 instance G = S_z^2, couplings {S_x, S_y, S_z}: orthogonal part has
  eigenvalues (1/3, 1/3, -2/3), so constructive = 2*(2/3)/(4/3) = 1, and the
  shift c_I = 1/2 gives || S_z^2 - I/2 ||_op = 1/2, so dual = 1.  The three
  values coincide: the sandwich is tight at exactly 1.
- Lone qubit G = sigma_z, no couplings: all three values are 2.
- Collective two-qubit G = diag(3,1,-1,-3), couplings {}: constructive
  = 2*20/8 = 5 but the optimum is 2*||G||_op = 6 (top/bottom eigenstate pair
  beats the constructive split, which spreads weight over all four levels).
"""

import time

import numpy as np
import pytest

from dressedmet.errors import ValidationError
from dressedmet.operators import spin_matrices
from dressedmet.rand import stream
from dressedmet.sdp import (
    SdpProblem,
    constructive_bound,
    solve_dual,
    solve_primal,
)

from conftest import random_hermitian

SX, SY, SZ = spin_matrices(2)
SZSQ = SZ @ SZ
PAULI_Z = np.diag([1.0, -1.0]).astype(complex)
COLLECTIVE = np.diag([3.0, 1.0, -1.0, -3.0]).astype(complex)


def random_instance(seed):
    rng = stream(seed)
    dim = int(rng.integers(2, 7))
    n_c = int(rng.integers(0, 5))
    g = random_hermitian(rng, dim)
    couplings = [random_hermitian(rng, dim) for _ in range(n_c)]
    return g, couplings


class TestConstructiveBound:
    def test_spin1_instance(self):
        cb = constructive_bound(SZSQ, [SX, SY, SZ])
        assert cb.value == pytest.approx(1.0, abs=1e-12)
        assert cb.weight == pytest.approx(2 / 3)
        # feasibility of the constructed pair: a valid optimizer candidate
        g_tilde = cb.rho1 - cb.rho0
        assert abs(np.trace(g_tilde)) < 1e-12
        for a in (SX, SY, SZ):
            assert abs(np.trace(a @ g_tilde)) < 1e-12

    def test_noiseless_qubit(self):
        cb = constructive_bound(PAULI_Z, [])
        assert cb.value == pytest.approx(2.0, abs=1e-12)

    def test_collective_diagonal(self):
        cb = constructive_bound(COLLECTIVE, [np.eye(4)])
        assert cb.value == pytest.approx(5.0, abs=1e-12)

    def test_in_span_returns_zero(self):
        cb = constructive_bound(SZ, [SX, SY, SZ])
        assert cb.value == 0.0
        assert cb.rho0 is None and cb.rho1 is None

    def test_value_is_feasible_signal(self, rng):
        g = random_hermitian(rng, 4)
        couplings = [random_hermitian(rng, 4) for _ in range(2)]
        cb = constructive_bound(g, couplings)
        if cb.value > 0:
            signal = np.trace(g @ (cb.rho1 - cb.rho0)).real
            assert signal == pytest.approx(cb.value, rel=1e-10)


class TestSolveDual:
    def test_spin1_witness(self):
        problem = SdpProblem.from_couplings(SZSQ, [SX, SY, SZ])
        dual = solve_dual(problem)
        assert dual.value == pytest.approx(1.0, abs=1e-7)
        assert dual.certified
        assert dual.coeffs[0] == pytest.approx(0.5, abs=1e-6)
        assert np.max(np.abs(dual.coeffs[1:])) < 1e-6

    def test_traceless_identity_only(self):
        problem = SdpProblem.from_couplings(PAULI_Z, [])
        dual = solve_dual(problem)
        assert dual.value == pytest.approx(2.0, abs=1e-8)
        assert abs(dual.coeffs[0]) < 1e-8

    def test_generator_in_span(self):
        problem = SdpProblem.from_couplings(PAULI_Z, [PAULI_Z])
        dual = solve_dual(problem)
        assert dual.value == pytest.approx(0.0, abs=1e-8)

    def test_collective_optimum_beats_constructive(self):
        problem = SdpProblem.from_couplings(COLLECTIVE, [])
        dual = solve_dual(problem)
        assert dual.value == pytest.approx(6.0, abs=1e-7)

    def test_upper_bounds_every_shift(self, rng):
        g = random_hermitian(rng, 4)
        cons = [random_hermitian(rng, 4) for _ in range(2)]
        problem = SdpProblem.from_couplings(g, cons)
        dual = solve_dual(problem)
        for _ in range(10):
            c = rng.standard_normal(3)
            shifted = problem.g - sum(
                ck * mk for ck, mk in zip(c, problem.constraints)
            )
            assert dual.value <= 2 * np.abs(np.linalg.eigvalsh(shifted)).max() + 1e-7


class TestSolvePrimal:
    def test_spin1_instance(self):
        start = time.monotonic()
        problem = SdpProblem.from_couplings(SZSQ, [SX, SY, SZ])
        sol = solve_primal(problem)
        elapsed = time.monotonic() - start
        assert sol.primal_value == pytest.approx(1.0, abs=1e-6)
        assert sol.gap < 1e-6
        assert sol.certified
        assert elapsed < 1.0

    def test_optimizer_feasibility(self):
        problem = SdpProblem.from_couplings(SZSQ, [SX, SY, SZ])
        sol = solve_primal(problem)
        gt = sol.g_tilde.entries
        x = sol.x_certificate.entries
        assert abs(np.trace(gt)) < 1e-8
        for a in (SX, SY, SZ):
            assert abs(np.trace(a @ gt)) < 1e-8
        assert np.linalg.eigvalsh(x - gt).min() > -1e-8
        assert np.linalg.eigvalsh(x + gt).min() > -1e-8
        assert np.trace(x).real < 2 + 1e-8

    def test_in_span_gives_zero(self):
        problem = SdpProblem.from_couplings(SZ, [SX, SY, SZ])
        sol = solve_primal(problem)
        assert sol.primal_value < 1e-7

    def test_degenerate_single_coupling_instance(self):
        # optimum exactly at the constructive bound with a rank-deficient
        # optimizer; the barrier Hessian is numerically singular at the
        # final centering round and the solver must still certify
        problem = SdpProblem.from_couplings(SZSQ, [SZ])
        sol = solve_primal(problem)
        assert sol.primal_value == pytest.approx(1.0, abs=1e-6)
        assert sol.gap < 1e-6
        assert sol.certified
        assert np.allclose(np.diag(sol.x_certificate.entries).real,
                           [0.5, 1.0, 0.5], atol=1e-5)

    def test_collective_diagonal_value(self):
        problem = SdpProblem.from_couplings(COLLECTIVE, [])
        sol = solve_primal(problem)
        assert sol.primal_value == pytest.approx(6.0, abs=1e-6)

    def test_scale_equivariance(self):
        problem = SdpProblem.from_couplings(SZSQ, [SX, SY, SZ])
        base = solve_primal(problem)
        scaled = solve_primal(SdpProblem.from_couplings(7.5 * SZSQ, [SX, SY, SZ]))
        assert scaled.primal_value == pytest.approx(7.5 * base.primal_value, rel=1e-6)
        assert scaled.dual_value == pytest.approx(7.5 * base.dual_value, rel=1e-6)
        # the optimizer itself is scale-free
        assert np.linalg.norm(scaled.g_tilde.entries - base.g_tilde.entries) < 1e-4

    def test_extra_constraint_never_helps(self, rng):
        g = random_hermitian(rng, 4)
        cons = [random_hermitian(rng, 4)]
        extra = random_hermitian(rng, 4)
        small = solve_primal(SdpProblem.from_couplings(g, cons))
        big = solve_primal(SdpProblem.from_couplings(g, cons + [extra]))
        assert big.primal_value <= small.primal_value + 1e-7

    def test_thirty_instance_sandwich(self):
        start = time.monotonic()
        worst_gap = 0.0
        for seed in range(30):
            g, couplings = random_instance(1000 + seed)
            cb = constructive_bound(g, couplings)
            sol = solve_primal(SdpProblem.from_couplings(g, couplings))
            assert cb.value <= sol.primal_value + 1e-8
            assert sol.primal_value <= sol.dual_value + 1e-8
            assert sol.gap < 1e-6
            assert sol.certified
            worst_gap = max(worst_gap, sol.gap)
        elapsed = time.monotonic() - start
        assert elapsed < 30.0

    def test_requires_identity_first(self):
        with pytest.raises(ValidationError):
            SdpProblem(SZ, (SX,))

    def test_rejects_dimension_mismatch(self):
        with pytest.raises(ValidationError):
            SdpProblem.from_couplings(PAULI_Z, [SX])

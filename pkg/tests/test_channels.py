"""Noise channels: Kraus maps, Lindblad integration, trajectories."""

import numpy as np
import pytest
from scipy.linalg import expm
from scipy.special import comb

from elqsim.channels import (
    KrausChannel,
    LindbladSpec,
    amplitude_damping_kraus,
    depolarize,
    evolution_superoperator,
    kappa_t_to_gamma,
    kerr_unitary,
    lindblad_evolve,
    liouvillian,
    qubit_decoherence_channel,
    superoperator_to_kraus,
    trajectory_evolve,
)
from elqsim.hilbert import (
    Ket,
    LinearOp,
    SpaceSpec,
    basis_ket,
    ladder_ops,
    number_op,
    parity_op,
)

DIM = 10

PAULIS = [np.eye(2),
          np.array([[0, 1], [1, 0]], dtype=complex),
          np.array([[0, -1j], [1j, 0]]),
          np.array([[1, 0], [0, -1]], dtype=complex)]


def zero_l_ket(dim=DIM) -> np.ndarray:
    return (basis_ket(dim, 0).amplitudes + basis_ket(dim, 4).amplitudes) / np.sqrt(2)


def trace_distance(a, b):
    return 0.5 * np.sum(np.abs(np.linalg.eigvalsh(a - b)))


class TestAmplitudeDamping:
    def test_gamma_zero_identity(self):
        ch = amplitude_damping_kraus(DIM, 0.0)
        assert len(ch.kraus_ops) == 1
        assert np.allclose(ch.kraus_ops[0], np.eye(DIM))

    def test_completeness(self):
        ch = amplitude_damping_kraus(DIM, 0.3)
        s = sum(k.conj().T @ k for k in ch.kraus_ops)
        assert np.allclose(s, np.eye(DIM), atol=1e-12)

    def test_single_loss_maps_code_to_error_word(self):
        ch = amplitude_damping_kraus(DIM, 0.2)
        out = ch.kraus_ops[1] @ zero_l_ket()
        out /= np.linalg.norm(out)
        assert abs(out[3]) == pytest.approx(1.0, abs=1e-12)

    def test_binomial_photon_distribution(self):
        gamma = 0.35
        ch = amplitude_damping_kraus(DIM, gamma)
        rho = basis_ket(DIM, 4).to_density_matrix()
        pops = np.real(np.diag(ch.apply_matrix(rho.matrix)))[:5]
        expected = [comb(4, 4 - n) * (1 - gamma) ** n * gamma ** (4 - n) for n in range(5)]
        assert np.allclose(pops, expected, atol=1e-12)


class TestQubitDecoherence:
    def test_t_zero_identity(self):
        ch = qubit_decoherence_channel(50.0, 40.0, 0.0, 0.0)
        rho = np.array([[0.3, 0.2], [0.2, 0.7]], dtype=complex)
        assert np.allclose(ch.apply_matrix(rho), rho, atol=1e-12)

    def test_pure_t1_decay(self):
        T1, t = 30.0, 12.0
        ch = qubit_decoherence_channel(T1, np.inf, 0.0, t)
        rho = np.array([[0.2, 0.0], [0.0, 0.8]], dtype=complex)
        out = ch.apply_matrix(rho)
        assert out[1, 1].real == pytest.approx(0.8 * np.exp(-t / T1), abs=1e-10)

    def test_coherence_decay_rate(self):
        # off-diagonal decays at 1/T2 = 1/(2 T1) + 1/Tphi
        T1, Tphi, t = 30.0, 45.0, 7.0
        ch = qubit_decoherence_channel(T1, Tphi, 0.0, t)
        rho = np.array([[0.5, 0.5], [0.5, 0.5]], dtype=complex)
        out = ch.apply_matrix(rho)
        rate = 0.5 / T1 + 1.0 / Tphi
        assert abs(out[0, 1]) == pytest.approx(0.5 * np.exp(-rate * t), rel=1e-8)

    def test_thermal_steady_state(self):
        n_th = 0.04
        ch = qubit_decoherence_channel(20.0, np.inf, n_th, 5000.0)
        out = ch.apply_matrix(np.diag([1.0, 0.0]).astype(complex))
        assert out[1, 1].real == pytest.approx(n_th, abs=1e-6)


class TestKerr:
    def test_t_zero_identity(self):
        assert np.allclose(kerr_unitary(DIM, 0.5, 0.0).matrix, np.eye(DIM))

    def test_low_fock_phase_free(self):
        u = kerr_unitary(DIM, 0.7, 3.0).matrix
        assert u[0, 0] == pytest.approx(1.0)
        assert u[1, 1] == pytest.approx(1.0)

    def test_fock4_fock2_phase_difference(self):
        K, t = 0.013, 8.0
        u = kerr_unitary(DIM, K, t).matrix
        dphi = np.angle(u[4, 4]) - np.angle(u[2, 2])
        assert dphi == pytest.approx(5 * K * t, abs=1e-12)


def one_sided_depolarize(rho4, p):
    out = (1 - p) * rho4.astype(complex)
    for s in PAULIS:
        op = np.kron(s, np.eye(2))
        out += (p / 4) * op @ rho4 @ op.conj().T
    return out


class TestDepolarize:
    def test_p_zero(self):
        rho = np.array([[0.6, 0.1j], [-0.1j, 0.4]])
        assert np.allclose(depolarize(rho, 0.0), rho)

    def test_p_one(self):
        rho = np.array([[1.0, 0.0], [0.0, 0.0]])
        assert np.allclose(depolarize(rho, 1.0), np.eye(2) / 2)

    def test_equals_pauli_twirl(self):
        rng = np.random.default_rng(2)
        m = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        rho = m @ m.conj().T
        rho /= np.trace(rho)
        p = 0.37
        twirl = (1 - p) * rho + (p / 4) * sum(s @ rho @ s.conj().T for s in PAULIS)
        assert np.allclose(depolarize(rho, p), twirl, atol=1e-12)

    def test_one_sided_bell_fidelity(self):
        bell = np.zeros((4, 4))
        bell[0, 0] = bell[0, 3] = bell[3, 0] = bell[3, 3] = 0.5
        p = 0.3
        rho = one_sided_depolarize(bell, p)
        fid = np.real(np.trace(bell @ rho))
        # the three non-identity Paulis move a Bell state to orthogonal ones
        assert fid == pytest.approx(1 - 3 * p / 4, abs=1e-12)


class TestLindblad:
    def test_free_evolution(self):
        spec = LindbladSpec(LinearOp(np.zeros((3, 3))), ())
        rho0 = basis_ket(3, 1).to_density_matrix()
        out = lindblad_evolve(spec, rho0, 5.0)
        assert np.allclose(out.matrix, rho0.matrix, atol=1e-10)

    def test_single_photon_decay(self):
        kappa = 1 / 50.0
        a, _ = ladder_ops(3)
        spec = LindbladSpec(LinearOp(np.zeros((3, 3))), ((a, kappa),))
        rho0 = basis_ket(3, 1).to_density_matrix()
        t = 30.0
        out = lindblad_evolve(spec, rho0, t)
        nbar = np.real(np.trace(number_op(3).matrix @ out.matrix))
        assert nbar == pytest.approx(np.exp(-kappa * t), abs=1e-8)

    def test_kraus_vs_lindblad_on_code_word(self):
        # cavity loss for 50 us at T1 = 265 us: the integrated master equation
        # must agree with the amplitude-damping channel at gamma = 1 - e^{-kt}
        kappa = 1.0 / 265.0
        t = 50.0
        a, _ = ladder_ops(DIM)
        spec = LindbladSpec(LinearOp(np.zeros((DIM, DIM))), ((a, kappa),))
        rho0 = Ket(zero_l_ket()).to_density_matrix()
        out_l = lindblad_evolve(spec, rho0, t).matrix
        gamma = kappa_t_to_gamma(kappa, t)
        out_k = amplitude_damping_kraus(DIM, gamma).apply_matrix(rho0.matrix)
        assert trace_distance(out_l, out_k) < 1e-5
        # odd-parity weight: only the |4> component of |0_L> feeds odd Fock states
        p_odd = np.real(np.trace(0.5 * (np.eye(DIM) - parity_op(DIM).matrix) @ out_l))
        pops4 = [comb(4, 4 - n) * (1 - gamma) ** n * gamma ** (4 - n) for n in range(5)]
        assert p_odd == pytest.approx(0.5 * (pops4[1] + pops4[3]), abs=1e-6)

    def test_superoperator_matches_expm(self):
        rng = np.random.default_rng(3)
        h = rng.normal(size=(3, 3))
        h = h + h.T
        c = rng.normal(size=(3, 3)) * 0.2
        spec = LindbladSpec(LinearOp(h), ((c, 1.0),))
        t = 1.7
        assert np.allclose(evolution_superoperator(spec, t),
                           expm(liouvillian(spec) * t), atol=1e-10)


class TestVecConvention:
    def test_row_major_vec(self):
        # vec(A rho B) = kron(A, B.T) vec(rho) with row-major (C-order) vec
        rng = np.random.default_rng(7)
        A, B, rho = (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
                     for _ in range(3))
        lhs = (A @ rho @ B).reshape(-1)
        rhs = np.kron(A, B.T) @ rho.reshape(-1)
        assert np.allclose(lhs, rhs)


class TestSuperoperatorToKraus:
    def test_round_trip(self):
        ch = amplitude_damping_kraus(4, 0.25)
        back = superoperator_to_kraus(ch.superoperator())
        rng = np.random.default_rng(11)
        m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        rho = m @ m.conj().T
        rho /= np.trace(rho)
        assert np.allclose(ch.apply_matrix(rho), back.apply_matrix(rho), atol=1e-10)

    def test_completeness_of_extracted_kraus(self):
        ch = qubit_decoherence_channel(30.0, 20.0, 0.02, 5.0)
        back = superoperator_to_kraus(ch.superoperator())
        s = sum(k.conj().T @ k for k in back.kraus_ops)
        assert np.allclose(s, np.eye(2), atol=1e-10)


class TestTrajectories:
    def test_no_collapse_matches_unitary(self):
        h = np.diag([0.0, 1.0, 2.0])
        spec = LindbladSpec(LinearOp(h), ())
        v = np.array([1.0, 1.0, 0.0]) / np.sqrt(2)
        rho0 = Ket(v).to_density_matrix()
        t = 2.0
        out = trajectory_evolve(spec, rho0, t, n_traj=1, seed=0)
        u = expm(-1j * h * t)
        expected = u @ rho0.matrix @ u.conj().T
        assert np.allclose(out.matrix, expected, atol=1e-6)

    def test_seed_determinism(self):
        a, _ = ladder_ops(3)
        spec = LindbladSpec(LinearOp(np.zeros((3, 3))), ((a, 0.05),))
        rho0 = basis_ket(3, 1).to_density_matrix()
        o1 = trajectory_evolve(spec, rho0, 10.0, n_traj=50, seed=42)
        o2 = trajectory_evolve(spec, rho0, 10.0, n_traj=50, seed=42)
        assert np.array_equal(o1.matrix, o2.matrix)

    def test_statistical_convergence(self):
        kappa = 1 / 50.0
        a, _ = ladder_ops(3)
        spec = LindbladSpec(LinearOp(np.zeros((3, 3))), ((a, kappa),))
        rho0 = basis_ket(3, 1).to_density_matrix()
        t = 25.0
        avg = trajectory_evolve(spec, rho0, t, n_traj=10_000, seed=1)
        exact = lindblad_evolve(spec, rho0, t)
        assert trace_distance(avg.matrix, exact.matrix) < 0.02


class TestKrausChannelClass:
    def test_compose(self):
        c1 = amplitude_damping_kraus(4, 0.2)
        c2 = amplitude_damping_kraus(4, 0.3)
        rho = basis_ket(4, 3).to_density_matrix().matrix
        lhs = c2.apply_matrix(c1.apply_matrix(rho))
        rhs = c2.compose(c1).apply_matrix(rho)
        assert np.allclose(lhs, rhs, atol=1e-12)

    def test_rejects_incomplete_kraus(self):
        with pytest.raises(ValueError):
            KrausChannel((np.eye(2) * 0.5,))

"""QEC cycle engine: recovery unitary, syndrome, cycle runs, purification."""

import numpy as np
import pytest

from elqsim.aqec import (
    CycleConfig,
    ancilla_reset,
    aqec_map,
    build_aqec_unitary,
    compile_cycle,
    decode_logical,
    depolarizing_decay_time,
    error_budget_compose,
    export_cycle_csv,
    logical_ptm_series,
    parity_syndrome,
    postselect_purify,
    process_fidelity_series,
    run_cycles,
)
from elqsim.code import binomial_code, error_state, logical_state
from elqsim.device import load_device_params
from elqsim.errors import PreconditionError
from elqsim.hilbert import Ket, SpaceSpec

CODE = binomial_code(10)
PARAMS = load_device_params()
KAPPA = 1.0 / PARAMS.modes["S1"].T1


def cavity_ancilla(ket_cavity, ancilla="g"):
    anc = np.array([1.0, 0.0]) if ancilla == "g" else np.array([0.0, 1.0])
    v = np.kron(ket_cavity.amplitudes, anc)
    return Ket(v, SpaceSpec((CODE.cutoff, 2))).to_density_matrix()


class TestAqecUnitary:
    def test_unitarity(self):
        u = build_aqec_unitary(CODE, KAPPA, 50.0).matrix
        assert np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=1e-10)

    def test_error_state_recovered_with_ancilla_flag(self):
        u = build_aqec_unitary(CODE, KAPPA, 0.0).matrix
        alpha, beta = 0.6, -0.8j
        v_in = np.kron(error_state(CODE, alpha, beta).amplitudes, [1.0, 0.0])
        v_out = u @ v_in
        target = np.kron(logical_state(CODE, alpha, beta).amplitudes, [0.0, 1.0])
        assert abs(np.vdot(target, v_out)) == pytest.approx(1.0, abs=1e-10)

    def test_code_space_fixed_at_kt_zero(self):
        u = build_aqec_unitary(CODE, KAPPA, 0.0).matrix
        v_in = np.kron(logical_state(CODE, 1 / np.sqrt(2), 1j / np.sqrt(2)).amplitudes,
                       [1.0, 0.0])
        assert abs(np.vdot(v_in, u @ v_in)) == pytest.approx(1.0, abs=1e-10)

    def test_no_jump_deformation_undone(self):
        tau = 50.0
        u = build_aqec_unitary(CODE, KAPPA, tau).matrix
        kt = KAPPA * tau
        deformed = np.zeros(CODE.cutoff, dtype=complex)
        deformed[0] = 1.0
        deformed[4] = np.exp(-2 * kt)
        deformed /= np.linalg.norm(deformed)
        v_in = np.kron(deformed, [1.0, 0.0])
        target = np.kron(CODE.logical0.amplitudes, [1.0, 0.0])
        assert abs(np.vdot(target, u @ v_in)) == pytest.approx(1.0, abs=1e-10)


class TestAqecMap:
    def test_error_input_recovered(self):
        rho = cavity_ancilla(error_state(CODE, 1.0, 0.0))
        out = aqec_map(rho, CODE, PARAMS, gate_fidelity=1.0)
        target = np.kron(logical_state(CODE, 1.0, 0.0).amplitudes, [0.0, 1.0])
        assert np.vdot(target, out.matrix @ target).real == pytest.approx(1.0, abs=1e-9)

    def test_code_input_unchanged(self):
        rho = cavity_ancilla(logical_state(CODE, 0.0, 1.0))
        out = aqec_map(rho, CODE, PARAMS, gate_fidelity=1.0)
        assert np.allclose(out.matrix, rho.matrix, atol=1e-9)

    def test_gate_error_depolarizes(self):
        f = 0.959
        rho = cavity_ancilla(logical_state(CODE, 1.0, 0.0))
        out = aqec_map(rho, CODE, PARAMS, gate_fidelity=f)
        block = decode_logical(out, CODE)
        # per-cycle logical depolarization at p = 1 - F: fidelity 1 - p/2
        assert block[0, 0].real == pytest.approx(1 - (1 - f) / 2, abs=1e-9)


class TestParitySyndrome:
    def test_code_space_even(self):
        rho = cavity_ancilla(logical_state(CODE, 0.8, 0.6))
        branches = parity_syndrome(rho)
        assert branches["even"][0] == pytest.approx(1.0, abs=1e-10)
        assert branches["odd"][0] == pytest.approx(0.0, abs=1e-10)

    def test_error_state_odd(self):
        rho = cavity_ancilla(error_state(CODE, 1.0, 0.0))
        branches = parity_syndrome(rho)
        assert branches["odd"][0] == pytest.approx(1.0, abs=1e-10)

    def test_finite_fidelity_mixing(self):
        rho = cavity_ancilla(logical_state(CODE, 1.0, 0.0))
        branches = parity_syndrome(rho, fidelity=0.9629)
        assert branches["even"][0] == pytest.approx(0.9629, abs=1e-10)

    def test_requires_ground_ancilla(self):
        rho = cavity_ancilla(logical_state(CODE, 1.0, 0.0), ancilla="e")
        with pytest.raises(PreconditionError):
            parity_syndrome(rho)


class TestAncillaReset:
    def test_perfect_reset(self):
        rho = cavity_ancilla(logical_state(CODE, 1.0, 0.0), ancilla="e")
        out = ancilla_reset(rho, 1.0, 1.0, 1.0)
        pop_g = np.real(np.trace(out.matrix.reshape(10, 2, 10, 2)[:, 0, :, 0]))
        assert pop_g == pytest.approx(1.0, abs=1e-12)

    def test_ground_flip_probability(self):
        f_g = 0.9918
        rho = cavity_ancilla(logical_state(CODE, 1.0, 0.0), ancilla="g")
        out = ancilla_reset(rho, f_g, 0.9896, 1.0)
        pop_e = np.real(np.trace(out.matrix.reshape(10, 2, 10, 2)[:, 1, :, 1]))
        assert pop_e == pytest.approx(1 - f_g, abs=1e-12)

    def test_reset_fidelity(self):
        fr = 0.9844
        rho = cavity_ancilla(logical_state(CODE, 1.0, 0.0), ancilla="e")
        out = ancilla_reset(rho, 1.0, 1.0, fr)
        pop_g = np.real(np.trace(out.matrix.reshape(10, 2, 10, 2)[:, 0, :, 0]))
        assert pop_g == pytest.approx(fr, abs=1e-12)


def noiseless_config(**kw):
    base = dict(cavity_loss=False, cavity_thermal=False, ancilla_decoherence=False,
                readout_error=False, reset_error=False, gate_fidelity=1.0)
    base.update(kw)
    return CycleConfig(**base)


def logical_fidelity(record, target_block):
    block = decode_logical(record.state, CODE)
    return float(np.real(np.trace(target_block @ block)))


class TestRunCycles:
    def test_noiseless_uncorrected_identity(self):
        cfg = noiseless_config(mode="uncorrected", n_cycles=3)
        rho0 = cavity_ancilla(logical_state(CODE, 0.6, 0.8))
        records = run_cycles(rho0, cfg, CODE, PARAMS)
        assert len(records) == 3
        for r in records:
            assert np.allclose(r.state.matrix, rho0.matrix, atol=1e-9)

    def test_noiseless_corrected_identity(self):
        cfg = noiseless_config(mode="corrected", n_cycles=3)
        rho0 = cavity_ancilla(logical_state(CODE, 1 / np.sqrt(2), -1j / np.sqrt(2)))
        records = run_cycles(rho0, cfg, CODE, PARAMS)
        target = np.array([[0.5, 0.5j], [-0.5j, 0.5]])
        for r in records:
            assert logical_fidelity(r, target) == pytest.approx(1.0, abs=1e-8)

    def test_corrected_beats_uncorrected(self):
        rho0 = cavity_ancilla(logical_state(CODE, 1 / np.sqrt(2), 1 / np.sqrt(2)))
        target = np.full((2, 2), 0.5)
        fid = {}
        for mode in ("uncorrected", "corrected"):
            records = run_cycles(rho0, CycleConfig(mode=mode, n_cycles=4), CODE, PARAMS)
            fid[mode] = [logical_fidelity(r, target) for r in records]
        assert all(c > u for c, u in zip(fid["corrected"][1:], fid["uncorrected"][1:]))

    def test_detect_only_acceptance_decreases(self):
        rho0 = cavity_ancilla(logical_state(CODE, 1.0, 0.0))
        records = run_cycles(rho0, CycleConfig(mode="detect-only", n_cycles=4),
                             CODE, PARAMS)
        acc = [r.accepted_fraction for r in records]
        assert all(a2 < a1 for a1, a2 in zip(acc, acc[1:]))
        assert acc[-1] > 0.3

    def test_single_interval_acceptance_is_no_jump_probability(self):
        # pure loss, perfect everything else: the even-syndrome weight after
        # one interval equals the even-parity survival of the code state
        cfg = noiseless_config(mode="detect-only", n_cycles=1, cavity_loss=True)
        rho0 = cavity_ancilla(logical_state(CODE, 1.0, 0.0))
        records = run_cycles(rho0, cfg, CODE, PARAMS)
        gamma = 1 - np.exp(-KAPPA * cfg.tau)
        # |0> half survives even with certainty; the |4> half stays even
        # when it loses an even number of photons
        even4 = (1 - gamma) ** 4 + 6 * (1 - gamma) ** 2 * gamma ** 2 + gamma ** 4
        p0 = 0.5 + 0.5 * even4
        assert records[0].accepted_fraction == pytest.approx(p0, abs=1e-6)


class TestPurification:
    def test_noiseless_acceptance_one(self):
        cfg = noiseless_config(mode="detect-only", n_cycles=3)
        rho0 = cavity_ancilla(logical_state(CODE, 0.6, 0.8))
        records = run_cycles(rho0, cfg, CODE, PARAMS)
        rhos, acc = postselect_purify(records)
        assert np.allclose(acc, 1.0, atol=1e-9)

    def test_purified_dominates_corrected(self):
        # paired runs, identical noise model: the accepted branch beats the
        # corrected channel in process fidelity at every sampled time
        _, corrected = process_fidelity_series(
            CycleConfig(mode="corrected", n_cycles=6), CODE, PARAMS)
        _, purified = process_fidelity_series(
            CycleConfig(mode="detect-only", n_cycles=6), CODE, PARAMS)
        assert all(p >= c for p, c in zip(purified, corrected))
        _, uncorrected = process_fidelity_series(
            CycleConfig(mode="uncorrected", n_cycles=6), CODE, PARAMS)
        assert all(c > u for c, u in zip(corrected, uncorrected))


class TestLogicalPtm:
    def test_noiseless_identity(self):
        cfg = noiseless_config(mode="corrected", n_cycles=2)
        times, ptms, acc = logical_ptm_series(cfg, CODE, PARAMS)
        for T in ptms[1:]:
            assert np.allclose(T, np.eye(4), atol=1e-7)

    def test_depolarizing_structure(self):
        # a noisy corrected cycle acts on the logical qubit as a channel close
        # to depolarizing: PTM nearly diagonal with T[0,0] = 1
        cfg = CycleConfig(mode="corrected", n_cycles=2)
        times, ptms, acc = logical_ptm_series(cfg, CODE, PARAMS)
        T = ptms[1]
        assert T[0, 0] == pytest.approx(1.0, abs=5e-3)
        off = T - np.diag(np.diag(T))
        assert np.max(np.abs(off)) < 0.1

    def test_process_fidelity_series_matches_ptm_trace(self):
        cfg = CycleConfig(mode="corrected", n_cycles=3)
        times, ptms, _ = logical_ptm_series(cfg, CODE, PARAMS)
        t2, fids = process_fidelity_series(cfg, CODE, PARAMS)
        assert np.allclose(t2, times)
        assert np.allclose(fids, [np.trace(T).real / 4 for T in ptms], atol=1e-10)


class TestBudgetHelpers:
    def test_decay_time_identity_point(self):
        assert depolarizing_decay_time(1 - np.exp(-1), 100.0) == pytest.approx(100.0)

    def test_s1_table(self):
        assert depolarizing_decay_time(0.158, 50.0) == pytest.approx(290.7, abs=0.05)

    def test_s3_table(self):
        assert depolarizing_decay_time(0.148, 50.0) == pytest.approx(312.2, abs=0.05)

    def test_compose_single_factor(self):
        assert error_budget_compose([0.93]) == pytest.approx(0.93)

    def test_compose_s1(self):
        total = error_budget_compose([0.959, 0.888, 0.99])
        assert total == pytest.approx(0.843, abs=5e-4)


class TestCsvExport:
    def test_round_trip(self, tmp_path):
        cfg = CycleConfig(mode="detect-only", n_cycles=3)
        rho0 = cavity_ancilla(logical_state(CODE, 1.0, 0.0))
        records = run_cycles(rho0, cfg, CODE, PARAMS)
        path = tmp_path / "cycles.csv"
        export_cycle_csv(path, records)
        rows = path.read_text().strip().splitlines()
        header = rows[0].split(",")
        assert "cycle" in header and "time_us" in header
        assert len(rows) == 1 + len(records)


class TestTwoSided:
    def test_product_state_stays_unentangled(self):
        from elqsim.tomo import negativity
        cfg = CycleConfig(mode="corrected", n_cycles=2, cavity=("S1", "S3"))
        side_cfgs = cfg.side_configs()
        assert len(side_cfgs) == 2
        assert side_cfgs[0].cavity == "S1" and side_cfgs[1].cavity == "S3"
        # PTM factorization: product input Pauli vector stays a product
        t1, ptms1, _ = logical_ptm_series(side_cfgs[0], CODE, PARAMS)
        t2, ptms2, _ = logical_ptm_series(side_cfgs[1], CODE, PARAMS)
        r1 = np.array([1.0, 1.0, 0.0, 0.0])  # |+>
        r2 = np.array([1.0, 0.0, 0.0, 1.0])  # |0>
        R = np.outer(ptms1[-1] @ r1, ptms2[-1] @ r2)
        paulis = [np.eye(2, dtype=complex),
                  np.array([[0, 1], [1, 0]], dtype=complex),
                  np.array([[0, -1j], [1j, 0]]),
                  np.array([[1, 0], [0, -1]], dtype=complex)]
        rho = sum(R[i, j] * np.kron(paulis[i], paulis[j])
                  for i in range(4) for j in range(4)) / 4
        rho = rho / np.trace(rho).real
        assert negativity(rho) == pytest.approx(0.0, abs=1e-9)

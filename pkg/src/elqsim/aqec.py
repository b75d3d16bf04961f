"""Repetitive QEC cycle engine on cavity x ancilla pairs.

One cycle is: free evolution under the configured noise for a waiting time
tau, then (mode dependent) either the autonomous recovery unitary followed
by ancilla readout + reset, or a parity syndrome measurement for
purification by post-selection, or nothing (uncorrected storage).

The per-cycle maps are compiled once into superoperators on the
2*cutoff-dimensional cavity x ancilla space, so multi-cycle sweeps and
process tomography cost a handful of matrix-vector products per cycle.
Entangled two-sided inputs are handled by applying each side's cycle map
locally; the storage cavities never interact in this model.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from math import exp, log

import numpy as np
import scipy.linalg

from . import device as dev
from .channels import LindbladSpec, evolution_superoperator
from .code import BinomialCode, no_jump_corrected_targets
from .device import DeviceParams, gate_fidelity_model  # noqa: F401  (re-exported)
from .errors import ConfigError, DegeneratePostselection, PreconditionError
from .hilbert import (
    DensityMatrix,
    LinearOp,
    SpaceSpec,
    basis_ket,
    ladder_ops,
    number_op,
    parity_op,
    partial_trace_matrix,
)

MODES = ("uncorrected", "corrected", "detect-only")


@dataclass(frozen=True)
class CycleConfig:
    """Everything that defines one repetitive-QEC run.

    Times are in microseconds. `cavity` picks which storage mode's
    calibration numbers to use ("S1" or "S3"); for two-sided runs pass a
    pair. `gate_fidelity=None` pulls the AQEC-gate budget entry from the
    device parameters.
    """

    tau: float = 50.0
    n_cycles: int = 6
    mode: str = "corrected"
    cavity: str | tuple[str, str] = "S1"
    cutoff: int = 10
    cavity_loss: bool = True
    cavity_thermal: bool = True
    ancilla_decoherence: bool = True
    readout_error: bool = True
    reset_error: bool = True
    kerr: bool = False
    measurement_phase: bool = False
    gate_fidelity: float | None = None

    def __post_init__(self):
        if self.tau <= 0:
            raise ConfigError(f"waiting time must be positive, got {self.tau}")
        if self.n_cycles < 0:
            raise ConfigError(f"n_cycles must be >= 0, got {self.n_cycles}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}, expected one of {MODES}")
        cavities = self.cavity if isinstance(self.cavity, tuple) else (self.cavity,)
        for c in cavities:
            if c not in ("S1", "S3"):
                raise ConfigError(f"unknown cavity label {c!r}")
        if self.cutoff < 5:
            raise ConfigError("cutoff must be at least 5 for the binomial code")

    def side_configs(self) -> tuple["CycleConfig", ...]:
        if isinstance(self.cavity, tuple):
            return tuple(replace(self, cavity=c) for c in self.cavity)
        return (self,)


@dataclass
class CycleRecord:
    """State of the run after one cycle."""

    cycle: int
    time: float
    syndrome_probs: dict[str, float]
    state: DensityMatrix
    accepted_fraction: float = 1.0


def _pair_space(cutoff: int) -> SpaceSpec:
    return SpaceSpec((cutoff, 2))


def _embed_cavity(op: np.ndarray) -> np.ndarray:
    return np.kron(op, np.eye(2))


def _embed_ancilla(op: np.ndarray, cutoff: int) -> np.ndarray:
    return np.kron(np.eye(cutoff), op)


def _unitary_superop(U: np.ndarray) -> np.ndarray:
    # row-major vectorization: vec(U rho U^dag) = kron(U, conj(U)) vec(rho)
    return np.kron(U, U.conj())


def _kraus_superop(ops) -> np.ndarray:
    return sum(np.kron(E, E.conj()) for E in ops)


# ---------------------------------------------------------------------------
# AQEC unitary


def build_aqec_unitary(code: BinomialCode, kappa: float, tau: float,
                       phi2: float = 0.0, phi4: float = 0.0) -> LinearOp:
    """The ideal autonomous-correction unitary on cavity x ancilla.

    Determined on the span of the condition inputs (error words with
    ancilla |g> mapped to code words with ancilla |e>, and no-jump-deformed
    code words restored with ancilla left in |g>), and completed to a full
    unitary on the orthogonal complement.
    """
    pairs = no_jump_corrected_targets(code, kappa, tau, phi2, phi4)
    space = pairs[0][0].space
    dim = space.dim
    A = np.column_stack([p.amplitudes for p, _ in pairs])
    B = np.column_stack([t.amplitudes for _, t in pairs])

    # The map is fixed on span(A); it must act isometrically there for a
    # unitary extension to exist.
    qa = scipy.linalg.orth(A)
    qb_on_qa = B @ np.linalg.pinv(A) @ qa  # image of each input basis vector
    gram = qb_on_qa.conj().T @ qb_on_qa
    if not np.allclose(gram, np.eye(qa.shape[1]), atol=1e-8):
        raise ConfigError("AQEC conditions are not isometric; no unitary exists")

    # Complete with an arbitrary orthonormal pairing of the complements.
    na = scipy.linalg.null_space(qa.conj().T)
    nb = scipy.linalg.null_space(qb_on_qa.conj().T)
    U = qb_on_qa @ qa.conj().T + nb @ na.conj().T
    if not np.allclose(U.conj().T @ U, np.eye(dim), atol=1e-8):
        raise ConfigError("AQEC unitary completion failed")
    return LinearOp(U, space)


def _no_jump_correction(code: BinomialCode, kappa: float, tau: float) -> np.ndarray:
    """Cavity unitary restoring the no-jump-deformed code words after tau."""
    dim = code.cutoff
    if kappa * tau == 0.0:
        return np.eye(dim)
    w = exp(-2 * kappa * tau)
    d0 = np.zeros(dim, dtype=complex)
    d0[0], d0[4] = 1.0, w
    d0 /= np.linalg.norm(d0)
    A = np.column_stack([d0, code.logical1.amplitudes])
    B = np.column_stack([code.logical0.amplitudes, code.logical1.amplitudes])
    qa = scipy.linalg.orth(A)
    qb = B @ np.linalg.pinv(A) @ qa
    na = scipy.linalg.null_space(qa.conj().T)
    nb = scipy.linalg.null_space(qb.conj().T)
    return qb @ qa.conj().T + nb @ na.conj().T


def _logical_pauli_embeds(code: BinomialCode) -> list[np.ndarray]:
    """I,X,Y,Z acting on the code space, identity on its complement."""
    v0 = code.logical0.amplitudes
    v1 = code.logical1.amplitudes
    dim = code.cutoff
    proj = np.outer(v0, v0.conj()) + np.outer(v1, v1.conj())
    rest = np.eye(dim) - proj
    x = np.outer(v0, v1.conj()) + np.outer(v1, v0.conj())
    y = -1j * np.outer(v0, v1.conj()) + 1j * np.outer(v1, v0.conj())
    z = np.outer(v0, v0.conj()) - np.outer(v1, v1.conj())
    return [proj + rest, x + rest, y + rest, z + rest]


def _gate_error_superop(code: BinomialCode, p: float) -> np.ndarray:
    """Depolarize the logical qubit with probability p, full identity else."""
    dim = 2 * code.cutoff
    if p == 0.0:
        return np.eye(dim * dim)
    paulis = [_embed_cavity(u) for u in _logical_pauli_embeds(code)]
    mix = sum(_unitary_superop(u) for u in paulis) / 4.0
    return (1.0 - p) * np.eye(dim * dim) + p * mix


def aqec_map(rho: DensityMatrix, code: BinomialCode, params: DeviceParams,
             gate_fidelity: float = 1.0, kappa: float = 0.0, tau: float = 0.0,
             phi2: float = 0.0, phi4: float = 0.0) -> DensityMatrix:
    """One autonomous-correction pulse: ideal unitary + depolarizing gate error."""
    U = build_aqec_unitary(code, kappa, tau, phi2, phi4)
    S = _gate_error_superop(code, 1.0 - gate_fidelity) @ _unitary_superop(U.matrix)
    dim = rho.space.dim
    out = (S @ rho.matrix.reshape(-1)).reshape(dim, dim)
    return DensityMatrix(out, rho.space)


# ---------------------------------------------------------------------------
# Syndrome measurement and reset


def parity_syndrome(rho: DensityMatrix, fidelity: float = 1.0):
    """Measure cavity photon parity through the ancilla.

    Returns {"even": (prob, state), "odd": (prob, state)}; the classical
    outcome is flipped with probability 1-fidelity, so each post-state is
    the corresponding mixture of the true-parity branches. A branch with
    vanishing probability carries state None.
    """
    cutoff = rho.space.dims[0]
    anc = partial_trace_matrix(rho.matrix, rho.space.dims, keep=(1,))
    if anc[1, 1].real > 1e-6:
        raise PreconditionError(
            f"ancilla must start in |g>, found excited population {anc[1, 1].real:.3g}")
    par = parity_op(cutoff).matrix
    p_even = _embed_cavity((np.eye(cutoff) + par) / 2)
    p_odd = _embed_cavity((np.eye(cutoff) - par) / 2)
    branch_e = p_even @ rho.matrix @ p_even
    branch_o = p_odd @ rho.matrix @ p_odd
    f = fidelity
    out = {}
    for name, mat in (("even", f * branch_e + (1 - f) * branch_o),
                      ("odd", f * branch_o + (1 - f) * branch_e)):
        prob = float(np.trace(mat).real)
        state = DensityMatrix(mat / prob, rho.space) if prob > 1e-12 else None
        out[name] = (prob, state)
    return out


def _reset_kraus(f_g: float, f_e: float, reset_fidelity: float) -> list[np.ndarray]:
    """Ancilla measurement with confusion (f_g, f_e) followed by a
    conditional flip pulse of the given fidelity, as a 2x2 channel."""
    g, e = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    fr = reset_fidelity
    # true |g>: misread as e with prob 1-f_g, then flipped with prob fr
    # true |e>: read correctly with prob f_e, then flipped with prob fr
    branches = [
        (1 - (1 - f_g) * fr, np.outer(g, g)),   # g kept
        ((1 - f_g) * fr, np.outer(e, g)),       # g wrongly flipped up
        (f_e * fr, np.outer(g, e)),             # e successfully reset
        (1 - f_e * fr, np.outer(e, e)),         # e left excited
    ]
    return [np.sqrt(p) * K for p, K in branches if p > 0]


def ancilla_reset(rho: DensityMatrix, f_g: float, f_e: float,
                  reset_fidelity: float) -> DensityMatrix:
    """Read out the ancilla and apply a flip pulse on the |e> outcome."""
    cutoff = rho.space.dims[0]
    ops = [_embed_ancilla(K, cutoff) for K in _reset_kraus(f_g, f_e, reset_fidelity)]
    out = sum(K @ rho.matrix @ K.conj().T for K in ops)
    return DensityMatrix(out, rho.space)


# ---------------------------------------------------------------------------
# Cycle compilation


@dataclass
class CompiledCycle:
    """Superoperator form of one cycle on a single cavity x ancilla pair."""

    space: SpaceSpec
    free: np.ndarray                 # trace-preserving free evolution
    correct: np.ndarray | None       # AQEC + reset, None unless mode=corrected
    syndrome: dict[str, np.ndarray] | None  # CP branch maps, detect-only
    code: BinomialCode

    def step(self, vec: np.ndarray) -> np.ndarray:
        """One cycle on a vectorized state; the detect-only branch keeps
        the unnormalized accepted (even-syndrome) component."""
        out = self.free @ vec
        if self.correct is not None:
            out = self.correct @ out
        elif self.syndrome is not None:
            out = self.syndrome["even"] @ out
        return out


def _free_liouvillian(config: CycleConfig, params: DeviceParams,
                      code: BinomialCode) -> LindbladSpec:
    cutoff = config.cutoff
    space = _pair_space(cutoff)
    cav = config.cavity if isinstance(config.cavity, str) else config.cavity[0]
    anc = params.control_qubit(cav)
    cav_p = params.modes[cav]
    anc_p = params.modes[anc]
    a, adag = ladder_ops(cutoff)
    n = number_op(cutoff).matrix
    sm = np.array([[0.0, 1.0], [0.0, 0.0]])
    sz = np.diag([1.0, -1.0])

    chi = 2 * np.pi * params.chi(cav, anc)  # MHz -> rad/us
    h = -chi * np.kron(n, np.diag([0.0, 1.0]))
    if config.kerr:
        kk = 2 * np.pi * params.modes[cav].self_kerr
        h -= (kk / 2) * np.kron(n @ (n - np.eye(cutoff)), np.eye(2))

    collapse = []
    kappa = 1.0 / cav_p.T1
    if config.cavity_loss:
        n_c = cav_p.n_th if config.cavity_thermal else 0.0
        collapse.append((LinearOp(_embed_cavity(a.matrix), space), kappa * (1 + n_c)))
        if n_c > 0:
            collapse.append((LinearOp(_embed_cavity(adag.matrix), space), kappa * n_c))
    if config.ancilla_decoherence:
        g_down = (1 - anc_p.n_th) / anc_p.T1
        g_up = anc_p.n_th / anc_p.T1
        g_phi = 1.0 / (2 * anc_p.Tphi)
        collapse.append((LinearOp(_embed_ancilla(sm, cutoff), space), g_down))
        if g_up > 0:
            collapse.append((LinearOp(_embed_ancilla(sm.T, cutoff), space), g_up))
        collapse.append((LinearOp(_embed_ancilla(sz, cutoff), space), g_phi))
    return LindbladSpec(LinearOp(h, space), tuple(collapse))


def compile_cycle(config: CycleConfig, code: BinomialCode,
                  params: DeviceParams,
                  recovery_unitary: np.ndarray | None = None) -> CompiledCycle:
    """Build the per-cycle superoperator(s) for a single side.

    `recovery_unitary` substitutes an external (e.g. pulse-compiled)
    unitary for the analytically completed one in corrected mode.
    """
    if isinstance(config.cavity, tuple):
        raise ConfigError("compile_cycle expects a single-side config")
    cutoff = config.cutoff
    if code.cutoff != cutoff:
        raise ConfigError(f"code cutoff {code.cutoff} != config cutoff {cutoff}")
    space = _pair_space(cutoff)
    cav = config.cavity
    anc = params.control_qubit(cav)

    spec = _free_liouvillian(config, params, code)
    free = evolution_superoperator(spec, config.tau)

    correct = None
    syndrome = None
    if config.mode == "corrected":
        kappa = 1.0 / params.modes[cav].T1 if config.cavity_loss else 0.0
        if config.measurement_phase:
            phi2_m, phi4_m = params.measurement_phase[(cav, "g")]
            U_phase = dev.measurement_phase_unitary(params, cav, "g", cutoff)
            phase_sup = _unitary_superop(_embed_cavity(U_phase.matrix))
            U = build_aqec_unitary(code, kappa, config.tau, -phi2_m, -phi4_m)
        else:
            phase_sup = None
            U = build_aqec_unitary(code, kappa, config.tau)
        U_mat = U.matrix if recovery_unitary is None else recovery_unitary
        if config.kerr:
            # undo the deterministic self-Kerr phase picked up over tau
            from .channels import kerr_unitary
            u_k = kerr_unitary(cutoff, 2 * np.pi * params.modes[cav].self_kerr,
                               config.tau)
            U_mat = U_mat @ _embed_cavity(u_k.matrix.conj().T)
        gate_fid = config.gate_fidelity
        if gate_fid is None:
            gate_fid = params.error_budget[cav]["gate"]
        step = _gate_error_superop(code, 1.0 - gate_fid) @ _unitary_superop(U_mat)
        if phase_sup is not None:
            step = phase_sup @ step
        f_g, f_e = params.readout[anc]
        if not config.readout_error:
            f_g = f_e = 1.0
        f_reset = params.reset_fidelity[anc] if config.reset_error else 1.0
        reset = _kraus_superop(
            _embed_ancilla(K, cutoff) for K in _reset_kraus(f_g, f_e, f_reset))
        correct = reset @ step
    elif config.mode == "detect-only":
        fid = params.parity_fidelity[cav][2] if config.readout_error else 1.0
        par = parity_op(cutoff).matrix
        p_even = _unitary_superop(_embed_cavity((np.eye(cutoff) + par) / 2))
        p_odd = _unitary_superop(_embed_cavity((np.eye(cutoff) - par) / 2))
        # The deterministic no-jump deformation is undone at decode time in
        # the lab; folding the one-interval correction into the accepted
        # branch keeps the purified state in the code space cycle to cycle.
        kappa = 1.0 / params.modes[cav].T1 if config.cavity_loss else 0.0
        nj = _unitary_superop(_embed_cavity(
            _no_jump_correction(code, kappa, config.tau)))
        syndrome = {"even": nj @ (fid * p_even + (1 - fid) * p_odd),
                    "odd": fid * p_odd + (1 - fid) * p_even}
    return CompiledCycle(space, free, correct, syndrome, code)


# ---------------------------------------------------------------------------
# Running cycles


def _apply_side(rho: np.ndarray, S: np.ndarray, dims: tuple[int, ...],
                side: int) -> np.ndarray:
    """Apply a superoperator locally to one (cavity, ancilla) pair of a
    possibly two-sided density matrix given as a plain array."""
    d_side = dims[2 * side] * dims[2 * side + 1]
    total = int(np.prod(dims))
    d_other = total // d_side
    r = rho.reshape(total, total)
    if len(dims) == 2:
        return (S @ r.reshape(-1)).reshape(total, total)
    # group (side, other) indices; bring the acted-on pair to the front
    if side == 0:
        r4 = r.reshape(d_side, d_other, d_side, d_other)
        r4 = np.einsum("abcd->acbd", r4).reshape(d_side * d_side, d_other * d_other)
        r4 = (S @ r4).reshape(d_side, d_side, d_other, d_other)
        return np.einsum("acbd->abcd", r4).reshape(total, total)
    r4 = r.reshape(d_other, d_side, d_other, d_side)
    r4 = np.einsum("abcd->bdac", r4).reshape(d_side * d_side, d_other * d_other)
    r4 = (S @ r4).reshape(d_side, d_side, d_other, d_other)
    return np.einsum("bdac->abcd", r4).reshape(total, total)


def run_cycles(rho0: DensityMatrix, config: CycleConfig, code: BinomialCode,
               params: DeviceParams) -> list[CycleRecord]:
    """Run the configured number of QEC cycles on a one- or two-sided input.

    In detect-only mode the records carry the even-conditioned
    (unnormalized trace tracked as accepted fraction) purified state.
    """
    sides = config.side_configs()
    dims = rho0.space.dims
    if len(dims) != 2 * len(sides):
        raise ConfigError(
            f"input has {len(dims)} subsystems but config names {len(sides)} side(s)")
    compiled = [compile_cycle(c, code, params) for c in sides]

    records = []
    rho = rho0.matrix.astype(complex)
    accepted = 1.0
    for k in range(1, config.n_cycles + 1):
        probs = {}
        for i, comp in enumerate(compiled):
            rho = _apply_side(rho, comp.free, dims, i)
            if comp.correct is not None:
                rho = _apply_side(rho, comp.correct, dims, i)
            elif comp.syndrome is not None:
                even = _apply_side(rho, comp.syndrome["even"], dims, i)
                odd = _apply_side(rho, comp.syndrome["odd"], dims, i)
                tr_e = float(np.trace(even).real)
                tr_o = float(np.trace(odd).real)
                label = "even" if len(sides) == 1 else f"even_{i}"
                probs[label] = tr_e / (tr_e + tr_o)
                probs[label.replace("even", "odd")] = tr_o / (tr_e + tr_o)
                accepted *= tr_e / (tr_e + tr_o)
                rho = even / tr_e if tr_e > 1e-300 else even
        if not probs:
            probs = {"even": 1.0, "odd": 0.0}
        tr = np.trace(rho).real
        state = DensityMatrix(rho / tr, rho0.space)
        records.append(CycleRecord(k, k * config.tau, probs, state, accepted))
    return records


def postselect_purify(records: list[CycleRecord]):
    """All-even-conditioned states and the running acceptance fraction."""
    if not records:
        return [], []
    if records[-1].accepted_fraction <= 0.0:
        raise DegeneratePostselection("post-selection accepted zero weight")
    states = [r.state for r in records]
    acceptance = [r.accepted_fraction for r in records]
    return states, acceptance


# ---------------------------------------------------------------------------
# Logical-level analytics


def decode_logical(rho: DensityMatrix, code: BinomialCode) -> np.ndarray:
    """Project a single cavity x ancilla state to the 2x2 logical block,
    sending all leaked weight to the maximally mixed qubit."""
    cav = partial_trace_matrix(rho.matrix, rho.space.dims, keep=(0,))
    v0 = code.logical0.amplitudes
    v1 = code.logical1.amplitudes
    basis = np.column_stack([v0, v1])
    block = basis.conj().T @ cav @ basis
    leak = float(np.trace(cav).real - np.trace(block).real)
    return block + max(leak, 0.0) * np.eye(2) / 2


def _decode_op(code: BinomialCode, cutoff: int) -> np.ndarray:
    """Matrix form of decode_logical on vectorized cavity x ancilla states."""
    dim = 2 * cutoff
    D = np.zeros((4, dim * dim), dtype=complex)
    # built through the adjoint: decoded_{ab} = Tr[M_ab rho]
    v = [code.logical0.amplitudes, code.logical1.amplitudes]
    proj = sum(np.outer(w, w.conj()) for w in v)
    ops = []
    for a in range(2):
        for b in range(2):
            m = np.outer(v[b], v[a].conj())  # Tr[m rho_cav] = <a|block|b>... careful
            if a == b:
                m = m + (np.eye(cutoff) - proj) / 2
            ops.append(_embed_cavity(m))
    for idx, m in enumerate(ops):
        # Tr[M rho] with row-major vec: vec(M^T) . vec(rho)
        D[idx] = m.T.reshape(-1)
    return D  # rows ordered (00, 01, 10, 11) of the decoded 2x2


def logical_ptm(compiled: CompiledCycle, params: DeviceParams,
                n_cycles: int = 1) -> np.ndarray:
    """Pauli transfer matrix of n cycles at the logical-qubit level."""
    cutoff = compiled.code.cutoff
    code = compiled.code
    paulis = [np.eye(2), np.array([[0, 1], [1, 0]]),
              np.array([[0, -1j], [1j, 0]]), np.diag([1.0, -1.0])]
    v = [code.logical0.amplitudes, code.logical1.amplitudes]
    basis = np.column_stack(v)
    dec = _decode_op(code, cutoff)
    T = np.zeros((4, 4))
    g = np.array([1.0, 0.0])
    for j, pj in enumerate(paulis):
        enc = basis @ pj @ basis.conj().T
        full = np.kron(enc, np.outer(g, g))
        vec = full.reshape(-1)
        for _ in range(n_cycles):
            vec = compiled.step(vec)
        flat = dec @ vec
        out = np.array([[flat[0], flat[1]], [flat[2], flat[3]]])
        for i, pi in enumerate(paulis):
            T[i, j] = 0.5 * np.trace(pi @ out).real
    return T


def logical_ptm_series(config: CycleConfig, code: BinomialCode,
                       params: DeviceParams,
                       recovery_unitary: np.ndarray | None = None,
                       ) -> tuple[np.ndarray, list[np.ndarray], np.ndarray]:
    """(times, logical PTMs after k cycles, acceptance fractions).

    The PTM after each cycle count is extracted by propagating encoded
    Pauli inputs through the compiled cycle map and decoding; in
    detect-only mode each PTM is renormalized to the accepted branch and
    the acceptance fraction reported alongside (1.0 otherwise).
    """
    cfg = config.side_configs()[0]
    compiled = compile_cycle(cfg, code, params, recovery_unitary)
    cutoff = cfg.cutoff
    paulis = [np.eye(2), np.array([[0, 1], [1, 0]]),
              np.array([[0, -1j], [1j, 0]]), np.diag([1.0, -1.0])]
    basis = np.column_stack([code.logical0.amplitudes, code.logical1.amplitudes])
    dec = _decode_op(code, cutoff)
    g = np.array([1.0, 0.0])
    vecs = [np.kron(basis @ p @ basis.conj().T, np.outer(g, g)).reshape(-1)
            for p in paulis]
    times = np.arange(1, cfg.n_cycles + 1) * cfg.tau
    ptms, acceptance = [], np.empty(cfg.n_cycles)
    for k in range(cfg.n_cycles):
        T = np.zeros((4, 4))
        for j in range(4):
            vecs[j] = compiled.step(vecs[j])
            flat = dec @ vecs[j]
            out = np.array([[flat[0], flat[1]], [flat[2], flat[3]]])
            for i, pi in enumerate(paulis):
                T[i, j] = 0.5 * np.trace(pi @ out).real
        acceptance[k] = T[0, 0]
        if cfg.mode == "detect-only":
            T = T / T[0, 0]
        ptms.append(T)
    return times, ptms, acceptance


def process_fidelity_series(config: CycleConfig, code: BinomialCode,
                            params: DeviceParams,
                            recovery_unitary: np.ndarray | None = None,
                            ) -> tuple[np.ndarray, np.ndarray]:
    """(times, average process fidelity to identity) over the cycle run."""
    times, ptms, _ = logical_ptm_series(config, code, params, recovery_unitary)
    return times, np.array([np.trace(T) / 4.0 for T in ptms])


def depolarizing_decay_time(p: float, tau: float) -> float:
    """T such that n cycles of depolarization strength p decay like e^{-t/T}."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"depolarization probability must be in (0,1), got {p}")
    if tau <= 0:
        raise ValueError(f"cycle time must be positive, got {tau}")
    return -tau / log(1.0 - p)


def error_budget_compose(factors) -> float:
    """Survival probability of independent error sources: product of (1-p_i)."""
    total = 1.0
    for f in factors:
        if not 0.0 < f <= 1.0:
            raise ValueError(f"budget factor must be in (0,1], got {f}")
        total *= f
    return total


def export_cycle_csv(path, records: list[CycleRecord],
                     fidelities: list[float] | None = None) -> None:
    """Write one row per cycle: index, time, syndrome probs, fidelity, acceptance."""
    keys = sorted({k for r in records for k in r.syndrome_probs})
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cycle", "time_us", *keys, "fidelity", "accepted_fraction"])
        for i, r in enumerate(records):
            fid = fidelities[i] if fidelities is not None else ""
            w.writerow([r.cycle, r.time,
                        *[f"{r.syndrome_probs.get(k, 0.0):.8f}" for k in keys],
                        fid, f"{r.accepted_fraction:.8f}"])

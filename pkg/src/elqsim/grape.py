"""Piecewise-constant optimal control for the dispersive cavity-qubit system.

The cost functional is a phase-coherent state-transfer fidelity over a
weighted set of (input, target) pairs,

    F = |sum_j w_j <target_j| U |input_j>|^2 / (sum_j w_j)^2,

so the optimizer is forced to realize consistent relative phases across
the whole condition set, which the autonomous-correction conditions
require. Gradients are exact: each step propagator is diagonalized and
its derivative taken with the standard divided-difference formula, then
contracted against forward/backward-propagated states.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .device import DeviceParams, mhz_to_angular
from .code import BinomialCode, no_jump_corrected_targets
from .errors import ConfigError
from .hilbert import Ket, LinearOp, SpaceSpec, ladder_ops, number_op

DEFAULT_LABELS = ("qubit_I", "qubit_Q", "cavity_I", "cavity_Q")
DEFAULT_AMP_CAP = 20.0  # MHz (2*pi*20 rad/us angular)


@dataclass(frozen=True)
class ControlPulse:
    """Real control amplitudes in MHz, one row per channel, 1 step per column."""

    amplitudes: np.ndarray
    dt: float = 1e-3  # us, i.e. 1 ns steps
    labels: tuple[str, ...] = DEFAULT_LABELS

    def __post_init__(self):
        amps = np.atleast_2d(np.asarray(self.amplitudes, dtype=float))
        object.__setattr__(self, "amplitudes", amps)
        if amps.shape[0] != len(self.labels):
            raise ConfigError(
                f"{amps.shape[0]} channels but {len(self.labels)} labels")
        if self.dt <= 0:
            raise ConfigError("dt must be positive")

    @property
    def n_steps(self) -> int:
        return self.amplitudes.shape[1]

    @property
    def duration(self) -> float:
        return self.n_steps * self.dt

    def clipped(self, cap: float) -> "ControlPulse":
        return ControlPulse(np.clip(self.amplitudes, -cap, cap), self.dt, self.labels)


@dataclass(frozen=True)
class GrapeProblem:
    """Drift + control Hamiltonians (rad/us per MHz of drive) and the
    weighted transfer pairs defining the cost."""

    drift: LinearOp
    controls: tuple[LinearOp, ...]
    pairs: tuple[tuple[Ket, Ket], ...]
    weights: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.pairs:
            raise ConfigError("at least one transfer pair is required")
        dim = self.drift.matrix.shape[0]
        for h in self.controls:
            if h.matrix.shape[0] != dim:
                raise ConfigError("control Hamiltonian dimension mismatch")
        for inp, tgt in self.pairs:
            if inp.amplitudes.size != dim or tgt.amplitudes.size != dim:
                raise ConfigError("transfer pair dimension mismatch")
        if not self.weights:
            object.__setattr__(self, "weights", (1.0,) * len(self.pairs))
        elif len(self.weights) != len(self.pairs):
            raise ConfigError("one weight per transfer pair required")

    @property
    def dim(self) -> int:
        return self.drift.matrix.shape[0]


def _step_unitaries(problem: GrapeProblem, pulse: ControlPulse,
                    with_eig: bool = False):
    """Propagators for each step; optionally keep eigendecompositions."""
    h0 = problem.drift.matrix
    hks = [h.matrix for h in problem.controls]
    us, eigs = [], []
    for s in range(pulse.n_steps):
        h = h0 + sum(mhz_to_angular(pulse.amplitudes[k, s]) * hks[k]
                     for k in range(len(hks)))
        w, v = np.linalg.eigh(h)
        phase = np.exp(-1j * w * pulse.dt)
        us.append((v * phase) @ v.conj().T)
        if with_eig:
            eigs.append((w, v))
    return (us, eigs) if with_eig else us


def propagate(problem: GrapeProblem, pulse: ControlPulse, state: Ket) -> Ket:
    """Apply the pulse's step propagators in order."""
    psi = state.amplitudes.copy()
    for u in _step_unitaries(problem, pulse):
        psi = u @ psi
    return Ket(psi, state.space)


def total_unitary(problem: GrapeProblem, pulse: ControlPulse) -> np.ndarray:
    u = np.eye(problem.dim, dtype=complex)
    for step in _step_unitaries(problem, pulse):
        u = step @ u
    return u


def _overlap_sum(problem: GrapeProblem, us: list[np.ndarray]) -> complex:
    c = 0.0 + 0.0j
    for (inp, tgt), w in zip(problem.pairs, problem.weights):
        psi = inp.amplitudes
        for u in us:
            psi = u @ psi
        c += w * np.vdot(tgt.amplitudes, psi)
    return c


def transfer_fidelity(problem: GrapeProblem, pulse: ControlPulse) -> float:
    """Phase-coherent transfer fidelity in [0, 1]."""
    c = _overlap_sum(problem, _step_unitaries(problem, pulse))
    return float(abs(c) ** 2) / sum(problem.weights) ** 2


def fidelity_and_gradient(problem: GrapeProblem, pulse: ControlPulse):
    """(F, dF/du) with dF/du shaped like pulse.amplitudes. Exact gradient."""
    us, eigs = _step_unitaries(problem, pulse, with_eig=True)
    n_steps = pulse.n_steps
    n_ctrl = len(problem.controls)
    dim = problem.dim
    w_total = sum(problem.weights)

    # forward states (before step s) and backward costates (after step s)
    fwd = np.column_stack([inp.amplitudes for inp, _ in problem.pairs])
    fwds = [fwd]
    for u in us:
        fwd = u @ fwd
        fwds.append(fwd)
    bwd = np.column_stack([tgt.amplitudes for _, tgt in problem.pairs])
    bwds = [None] * (n_steps + 1)
    bwds[n_steps] = bwd
    for s in range(n_steps - 1, -1, -1):
        bwd = us[s].conj().T @ bwd
        bwds[s] = bwd

    wvec = np.array(problem.weights)
    c = complex(np.sum(wvec * np.einsum("ij,ij->j", bwds[-1].conj(), fwds[-1])))

    hks = [mhz_to_angular(1.0) * h.matrix for h in problem.controls]
    grad = np.empty((n_ctrl, n_steps))
    for s in range(n_steps):
        w, v = eigs[s]
        phase = np.exp(-1j * w * pulse.dt)
        # divided differences of z -> exp(-i z dt) on the spectrum
        dl = w[:, None] - w[None, :]
        dp = phase[:, None] - phase[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            D = np.where(np.abs(dl) > 1e-12, dp / np.where(dl == 0, 1, dl),
                         -1j * pulse.dt * phase[:, None])
        # M = sum_j w_j |psi_j^(s)><lambda_j^(s+1)| contracted in eigenbasis
        M = (fwds[s] * wvec) @ bwds[s + 1].conj().T
        Mv = v.conj().T @ M @ v
        for k in range(n_ctrl):
            hk_eig = v.conj().T @ hks[k] @ v
            dc = np.sum((hk_eig * D) * Mv.T)
            grad[k, s] = 2.0 * np.real(np.conj(c) * dc) / w_total ** 2
    return float(abs(c) ** 2) / w_total ** 2, grad


def gradient(problem: GrapeProblem, pulse: ControlPulse) -> np.ndarray:
    return fidelity_and_gradient(problem, pulse)[1]


@dataclass
class OptimizeResult:
    pulse: ControlPulse
    fidelity: float
    converged: bool
    n_iterations: int
    history: list = field(default_factory=list)


def random_pulse(n_steps: int, n_channels: int = 4, dt: float = 1e-3,
                 amplitude: float = 1.0, seed: int = 0,
                 labels: tuple[str, ...] = DEFAULT_LABELS) -> ControlPulse:
    rng = np.random.default_rng(seed)
    return ControlPulse(rng.uniform(-amplitude, amplitude, (n_channels, n_steps)),
                        dt, labels)


def optimize(problem: GrapeProblem, init: ControlPulse,
             amplitude_cap: float = DEFAULT_AMP_CAP, max_iterations: int = 500,
             tol: float = 1e-9, target_fidelity: float | None = None,
             ) -> OptimizeResult:
    """Maximize transfer fidelity with L-BFGS-B; deterministic for a fixed init."""
    shape = init.amplitudes.shape
    history = []

    def cost(x):
        pulse = ControlPulse(x.reshape(shape), init.dt, init.labels)
        f, g = fidelity_and_gradient(problem, pulse)
        return 1.0 - f, -g.reshape(-1)

    best = {"f": -1.0, "x": init.amplitudes.reshape(-1).copy()}

    def track(x):
        pulse = ControlPulse(x.reshape(shape), init.dt, init.labels)
        f = transfer_fidelity(problem, pulse)
        history.append(f)
        if f > best["f"]:
            best["f"], best["x"] = f, x.copy()
        if target_fidelity is not None and f >= target_fidelity:
            raise StopIteration

    x0 = np.clip(init.amplitudes.reshape(-1), -amplitude_cap, amplitude_cap)
    bounds = [(-amplitude_cap, amplitude_cap)] * x0.size
    try:
        res = scipy.optimize.minimize(
            cost, x0, jac=True, method="L-BFGS-B", bounds=bounds,
            tol=tol, options={"maxiter": max_iterations}, callback=track)
        success = bool(res.success)
        n_it = int(res.nit)
        if 1.0 - res.fun > best["f"]:
            best["f"], best["x"] = 1.0 - res.fun, res.x
    except StopIteration:
        success = True
        n_it = len(history)
    pulse = ControlPulse(best["x"].reshape(shape), init.dt, init.labels)
    fid = best["f"] if best["f"] >= 0 else transfer_fidelity(problem, pulse)
    if target_fidelity is not None:
        success = fid >= target_fidelity
    return OptimizeResult(pulse, fid, success, n_it, history)


# ---------------------------------------------------------------------------
# Problem builders


def dispersive_controls(cutoff: int) -> tuple[LinearOp, ...]:
    """Qubit I/Q and cavity I/Q drive operators on cavity x ancilla,
    normalized so 1 MHz of amplitude means 2*pi rad/us of Rabi rate."""
    a, adag = ladder_ops(cutoff)
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]])
    eye_c = np.eye(cutoff)
    space = SpaceSpec((cutoff, 2))
    ops = [np.kron(eye_c, sx / 2), np.kron(eye_c, sy / 2),
           np.kron((a.matrix + adag.matrix) / 2, np.eye(2)),
           np.kron(1j * (adag.matrix - a.matrix) / 2, np.eye(2))]
    return tuple(LinearOp(m, space) for m in ops)


def aqec_problem(code: BinomialCode, params: DeviceParams, cavity: str = "S1",
                 tau: float = 50.0, phi2: float = 0.0, phi4: float = 0.0,
                 ) -> GrapeProblem:
    """The autonomous-correction synthesis problem for one storage cavity."""
    cutoff = code.cutoff
    anc = params.control_qubit(cavity)
    chi = mhz_to_angular(params.chi(cavity, anc))
    n = number_op(cutoff).matrix
    drift = LinearOp(-chi * np.kron(n, np.diag([0.0, 1.0])), SpaceSpec((cutoff, 2)))
    kappa = 1.0 / params.modes[cavity].T1
    pairs = tuple(no_jump_corrected_targets(code, kappa, tau, phi2, phi4))
    return GrapeProblem(drift, dispersive_controls(cutoff), pairs)


def pi_flip_problem() -> GrapeProblem:
    """Two-level g->e transfer used as a self-check."""
    space = SpaceSpec((2,))
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]])
    drift = LinearOp(np.zeros((2, 2), dtype=complex), space)
    controls = (LinearOp(sx / 2, space), LinearOp(sy / 2, space))
    g = Ket(np.array([1.0, 0.0]), space)
    e = Ket(np.array([0.0, 1.0]), space)
    return GrapeProblem(drift, controls, ((g, e),))


# ---------------------------------------------------------------------------
# Persistence


def save_pulse(pulse: ControlPulse, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dt", repr(float(pulse.dt))])
        w.writerow(["step", *pulse.labels])
        for s in range(pulse.n_steps):
            w.writerow([s, *(repr(float(x)) for x in pulse.amplitudes[:, s])])


def load_pulse(path) -> ControlPulse:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2 or rows[0][0] != "dt":
        raise ConfigError(f"{path} is not a pulse file")
    dt = float(rows[0][1])
    labels = tuple(rows[1][1:])
    amps = np.array([[float(x) for x in row[1:]] for row in rows[2:]]).T
    return ControlPulse(amps, dt, labels)

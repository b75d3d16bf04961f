"""State characterization and entanglement metrics.

Wigner and joint-Wigner functions (displaced-parity expectation values),
maximum-likelihood state reconstruction, Uhlmann fidelity, single-qubit
process tomography in the Pauli basis, exponential fidelity-decay fits,
and the two-qubit entanglement monotones (concurrence, negativity, CHSH).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import pi, sqrt

import numpy as np
from scipy.optimize import curve_fit

from .errors import FitError
from .hilbert import (
    DensityMatrix,
    LinearOp,
    SpaceSpec,
    displacement,
    hermitian_expm,
    parity_op,
    partial_transpose_matrix,
)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (np.eye(2, dtype=complex), SIGMA_X, SIGMA_Y, SIGMA_Z)


# ---------------------------------------------------------------------------
# Wigner functions

@dataclass(frozen=True)
class WignerGrid:
    """Single-mode Wigner samples W(beta) on a rectangular grid.

    Values carry the 2/pi scaling, so |W| <= 2/pi everywhere.
    """

    re_axis: np.ndarray
    im_axis: np.ndarray
    values: np.ndarray  # shape (len(im_axis), len(re_axis))


def _displaced_parity(dim: int, beta: complex) -> np.ndarray:
    D = displacement(dim, beta).matrix
    P = parity_op(dim).matrix
    return D @ P @ D.conj().T


def wigner(rho: DensityMatrix, re_axis, im_axis) -> WignerGrid:
    """W(beta) = (2/pi) Tr[rho D_beta P D_beta^dag] over the grid."""
    re_axis = np.asarray(re_axis, dtype=float)
    im_axis = np.asarray(im_axis, dtype=float)
    d = rho.dim
    vals = np.empty((im_axis.size, re_axis.size))
    for i, y in enumerate(im_axis):
        for j, x in enumerate(re_axis):
            op = _displaced_parity(d, x + 1j * y)
            vals[i, j] = (2.0 / pi) * float(np.real(np.trace(rho.matrix @ op)))
    return WignerGrid(re_axis, im_axis, vals)


def joint_wigner(rho: DensityMatrix, beta1: complex, beta2: complex) -> float:
    """Two-mode joint Wigner value (4/pi^2) <D1 D2 P_J D2^dag D1^dag>."""
    d1, d2 = rho.space.dims
    op = np.kron(_displaced_parity(d1, beta1), _displaced_parity(d2, beta2))
    return (4.0 / pi**2) * float(np.real(np.trace(rho.matrix @ op)))


def joint_wigner_cut(rho: DensityMatrix, axis1, axis2, plane: str = "real") -> np.ndarray:
    """2D planar cut through the 4D joint phase space.

    plane='real' samples (Re b1, Re b2) with Im = 0; plane='antidiagonal'
    samples beta2 = -conj(beta1) along the real axis of beta1.
    """
    axis1 = np.asarray(axis1, dtype=float)
    axis2 = np.asarray(axis2, dtype=float)
    out = np.empty((axis2.size, axis1.size))
    for i, b2 in enumerate(axis2):
        for j, b1 in enumerate(axis1):
            if plane == "real":
                out[i, j] = joint_wigner(rho, b1, b2)
            elif plane == "antidiagonal":
                out[i, j] = joint_wigner(rho, b1 + 1j * b2, -(b1 - 1j * b2))
            else:
                raise ValueError(f"unknown cut plane '{plane}'")
    return out


# ---------------------------------------------------------------------------
# Reconstruction and fidelity

@dataclass(frozen=True)
class MleResult:
    rho: DensityMatrix
    log_likelihood: float
    n_iter: int
    converged: bool


def mle_reconstruct(measurements, space: SpaceSpec, max_iter: int = 5000,
                    tol: float = 1e-10) -> MleResult:
    """Iterative R-rho-R maximum-likelihood reconstruction.

    `measurements` is a list of (observable, expectation, shots) with each
    observable Hermitian with spectrum in [-1, 1]; each is treated as the
    two-outcome POVM (I +/- O)/2 with observed frequencies (1 +/- v)/2.
    """
    d = space.dim
    povm = []
    freqs = []
    for op, value, shots in measurements:
        O = op.matrix if isinstance(op, LinearOp) else np.asarray(op, dtype=complex)
        v = float(np.clip(value, -1.0, 1.0))
        w = float(shots)
        povm.append(((np.eye(d) + O) / 2.0, (np.eye(d) - O) / 2.0))
        freqs.append((w * (1.0 + v) / 2.0, w * (1.0 - v) / 2.0))

    span = np.array([e.ravel() for pair in povm for e in pair])
    if np.linalg.matrix_rank(span, tol=1e-9) < d * d:
        import warnings

        warnings.warn("measurement set not informationally complete; "
                      "reconstruction is rank-deficient", RuntimeWarning, stacklevel=2)

    # stack all POVM elements so each iteration is a few BLAS calls
    E = np.array([e for pair in povm for e in pair])  # (2M, d, d)
    f = np.array([x for pair in freqs for x in pair])  # (2M,)
    E_flat = E.reshape(len(f), d * d)
    Et_flat = E.transpose(0, 2, 1).reshape(len(f), d * d)

    rho = np.eye(d, dtype=complex) / d
    loglik_prev = -np.inf
    converged = False
    n = 0
    for n in range(1, max_iter + 1):
        probs = np.maximum(np.real(Et_flat @ rho.reshape(-1)), 1e-12)
        R = ((f / probs) @ E_flat).reshape(d, d)
        loglik = float(f @ np.log(probs))
        new = R @ rho @ R
        new = 0.5 * (new + new.conj().T)
        new /= np.trace(new).real
        rho = new
        if abs(loglik - loglik_prev) < tol * max(1.0, abs(loglik)):
            converged = True
            break
        loglik_prev = loglik

    evals, vecs = np.linalg.eigh(rho)
    evals = np.clip(evals, 0.0, None)
    rho = (vecs * evals) @ vecs.conj().T
    rho /= np.trace(rho).real
    return MleResult(DensityMatrix(rho, space), float(loglik_prev), n, converged)


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    evals, vecs = np.linalg.eigh(mat)
    return (vecs * np.sqrt(np.clip(evals, 0.0, None))) @ vecs.conj().T


def state_fidelity(rho, sigma) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    r = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    s = sigma.matrix if isinstance(sigma, DensityMatrix) else np.asarray(sigma)
    sr = _psd_sqrt(r)
    inner = _psd_sqrt(sr @ s @ sr)
    return float(np.clip(np.real(np.trace(inner)) ** 2, 0.0, 1.0))


# ---------------------------------------------------------------------------
# Process tomography

@dataclass(frozen=True)
class ProcessMatrix:
    """4x4 chi matrix in the Pauli basis {I, X, Y, Z}; trace 1 when TP."""

    chi: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.chi, dtype=complex)
        if m.shape != (4, 4):
            raise ValueError("chi must be 4x4")
        object.__setattr__(self, "chi", m)

    def process_fidelity(self, other: "ProcessMatrix" = None) -> float:
        """Tr[chi_other chi]; defaults to fidelity with the identity process."""
        ref = other.chi if other is not None else _CHI_IDENTITY
        return float(np.real(np.trace(ref @ self.chi)))


_CHI_IDENTITY = np.zeros((4, 4), dtype=complex)
_CHI_IDENTITY[0, 0] = 1.0

CARDINAL_STATES = tuple(
    np.outer(v, v.conj())
    for v in (
        np.array([1, 0], dtype=complex),
        np.array([0, 1], dtype=complex),
        np.array([1, 1], dtype=complex) / sqrt(2),
        np.array([1, -1], dtype=complex) / sqrt(2),
        np.array([1, 1j], dtype=complex) / sqrt(2),
        np.array([1, -1j], dtype=complex) / sqrt(2),
    )
)


def process_tomography(channel, n_inputs: int = 6):
    """Reconstruct the chi matrix of a black-box qubit channel.

    Runs the six cardinal input states through `channel` (a callable on 2x2
    density matrices), rebuilds the Choi matrix by linearity, converts to the
    Pauli basis, and projects onto the PSD cone when sampling or model noise
    pushed it outside. Returns (ProcessMatrix, projected_flag).
    """
    if n_inputs != 6:
        raise ValueError("only the 6-cardinal-state scheme is implemented")
    outs = [np.asarray(channel(rho), dtype=complex) for rho in CARDINAL_STATES]
    e00, e11, ep, em, ei, emi = outs
    e01 = (ep - em) / 2.0 + 1j * (ei - emi) / 2.0
    e10 = e01.conj().T
    choi = np.zeros((4, 4), dtype=complex)
    blocks = {(0, 0): e00, (0, 1): e01, (1, 0): e10, (1, 1): e11}
    for (i, j), blk in blocks.items():
        choi[2 * i : 2 * i + 2, 2 * j : 2 * j + 2] = blk
    # chi_mn = <v_m| Choi |v_n> / 4 with |v_m> = sum_i |i> (x) P_m |i>
    vs = [sum(np.kron(np.eye(2)[:, i], P @ np.eye(2)[:, i]) for i in range(2)) for P in PAULIS]
    chi = np.array([[v1.conj() @ choi @ v2 for v2 in vs] for v1 in vs]) / 4.0
    chi = 0.5 * (chi + chi.conj().T)
    evals, vecs = np.linalg.eigh(chi)
    projected = bool(evals.min() < -1e-9)
    if projected:
        evals = np.clip(evals, 0.0, None)
        chi = (vecs * evals) @ vecs.conj().T
        chi /= np.trace(chi).real
    return ProcessMatrix(chi), projected


def pauli_transfer_matrix(channel) -> np.ndarray:
    """4x4 real PTM of a qubit channel: T[i, j] = Tr[P_i E(P_j)] / 2."""
    T = np.zeros((4, 4))
    for j, Pj in enumerate(PAULIS):
        out = np.asarray(channel(Pj), dtype=complex)
        for i, Pi in enumerate(PAULIS):
            T[i, j] = 0.5 * float(np.real(np.trace(Pi @ out)))
    return T


def ptm_process_fidelity(T: np.ndarray) -> float:
    """Process fidelity with the identity from a PTM: Tr[T] / 4."""
    return float(np.trace(T)) / 4.0


# ---------------------------------------------------------------------------
# Decay fits

@dataclass(frozen=True)
class ExponentialFit:
    A: float
    T: float
    stderr_A: float
    stderr_T: float
    floor: float
    unbounded: bool = False


def fit_exponential_fidelity(t, F, floor: float = 0.25) -> ExponentialFit:
    """Fit F(t) = floor + A exp(-t/T); returns amplitude, decay time, stderrs.

    A constant series (or one that never decays) yields an unbounded-T flag
    instead of a spurious time constant.
    """
    t = np.asarray(t, dtype=float)
    F = np.asarray(F, dtype=float)
    if t.size < 4:
        raise FitError(f"need at least 4 points, got {t.size}")
    y = F - floor
    if np.ptp(y) < 1e-12 * max(1.0, np.max(np.abs(y))):
        return ExponentialFit(float(y.mean()), np.inf, 0.0, np.inf, floor, unbounded=True)

    # log-linear seed on the positive part
    mask = y > 1e-12
    if mask.sum() >= 2:
        slope, intercept = np.polyfit(t[mask], np.log(y[mask]), 1)
        T0 = -1.0 / slope if slope < 0 else (t[-1] - t[0]) * 10.0
        A0 = float(np.exp(intercept))
    else:
        T0, A0 = (t[-1] - t[0]), float(y[0])

    def model(tt, A, T):
        return floor + A * np.exp(-tt / T)

    try:
        popt, pcov = curve_fit(model, t, F, p0=[A0, max(T0, 1e-6)], maxfev=20000)
    except RuntimeError as exc:
        raise FitError("exponential fit failed to converge") from exc
    perr = np.sqrt(np.abs(np.diag(pcov)))
    return ExponentialFit(float(popt[0]), float(popt[1]), float(perr[0]), float(perr[1]), floor)


# ---------------------------------------------------------------------------
# Entanglement metrics

def concurrence(rho) -> float:
    """Two-qubit concurrence from the spin-flipped-state eigenvalues."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    if m.shape != (4, 4):
        raise ValueError("concurrence is defined for 4x4 density matrices")
    yy = np.kron(SIGMA_Y, SIGMA_Y)
    rho_tilde = yy @ m.conj() @ yy
    sr = _psd_sqrt(m)
    R = _psd_sqrt(sr @ rho_tilde @ sr)
    lams = np.sort(np.real(np.linalg.eigvalsh(R)))[::-1]
    return float(max(0.0, lams[0] - lams[1] - lams[2] - lams[3]))


def negativity(rho, dims=(2, 2), subsystem: int = 0) -> float:
    """Sum of the magnitudes of negative partial-transpose eigenvalues."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    pt = partial_transpose_matrix(m, dims, subsystem)
    evals = np.linalg.eigvalsh(0.5 * (pt + pt.conj().T))
    return float(-evals[evals < 0].sum())


def chsh_settings():
    """(Q, R, S, T) observables: Q=-Y, R=X; S=(Y-X)/sqrt2, T=(-Y-X)/sqrt2."""
    Q = -SIGMA_Y
    R = SIGMA_X
    S = (SIGMA_Y - SIGMA_X) / sqrt(2)
    T = (-SIGMA_Y - SIGMA_X) / sqrt(2)
    return Q, R, S, T


def bell_operator() -> np.ndarray:
    Q, R, S, T = chsh_settings()
    return np.kron(Q, S) + np.kron(R, S) + np.kron(R, T) - np.kron(Q, T)


def chsh_bell(rho, theta: float = 0.0) -> float:
    """<B> after a phase rotation diag(1, e^{i theta}) on the first qubit."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    if m.shape != (4, 4):
        raise ValueError("chsh_bell is defined for two-qubit density matrices")
    U = np.kron(np.diag([1.0, np.exp(1j * theta)]), np.eye(2))
    rotated = U @ m @ U.conj().T
    return float(np.real(np.trace(bell_operator() @ rotated)))


def logical_qubit_density(rho: DensityMatrix, code) -> tuple[np.ndarray, float]:
    """Project a cavity state onto the code words.

    Returns the (unnormalized) 2x2 logical block and the leaked weight
    outside the code space.
    """
    basis = (code.logical0.amplitudes, code.logical1.amplitudes)
    out = np.empty((2, 2), dtype=complex)
    for i in range(2):
        for j in range(2):
            out[i, j] = basis[i].conj() @ rho.matrix @ basis[j]
    leak = float(np.real(np.trace(rho.matrix)) - np.real(np.trace(out)))
    return out, max(leak, 0.0)

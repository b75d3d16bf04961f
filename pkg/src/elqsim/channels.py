"""Noise channels and open-system time evolution.

Kraus maps for photon loss and qubit decoherence, a dense Lindblad
integrator (fixed-step RK4 plus an exact exponential-of-Liouvillian path),
Monte-Carlo wavefunction trajectories, and the per-cycle depolarizing
abstraction used by the error-budget analytics.

Convention: gamma <-> kappa*t conversion is gamma = 1 - exp(-kappa*t);
rates are 1/us, times us, Hamiltonians rad/us.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, exp, sqrt

import numpy as np

from .errors import IntegrationError
from .hilbert import (
    DensityMatrix,
    LinearOp,
    SpaceSpec,
    expm_generic,
    hermitian_expm,
)

COMPLETENESS_TOL = 1e-8


@dataclass(frozen=True)
class KrausChannel:
    """Trace-preserving map given by Kraus operators (dense matrices)."""

    kraus_ops: tuple
    space: SpaceSpec = None

    def __post_init__(self):
        ops = tuple(np.asarray(k.matrix if isinstance(k, LinearOp) else k, dtype=complex)
                    for k in self.kraus_ops)
        if not ops:
            raise ValueError("a Kraus channel needs at least one operator")
        d = ops[0].shape[0]
        acc = sum(k.conj().T @ k for k in ops)
        if np.max(np.abs(acc - np.eye(d))) > COMPLETENESS_TOL:
            raise ValueError("Kraus operators violate completeness beyond 1e-8")
        object.__setattr__(self, "kraus_ops", ops)
        object.__setattr__(self, "space", self.space or SpaceSpec((d,)))

    @property
    def dim(self) -> int:
        return self.kraus_ops[0].shape[0]

    def apply_matrix(self, rho: np.ndarray) -> np.ndarray:
        return sum(k @ rho @ k.conj().T for k in self.kraus_ops)

    def apply(self, rho: DensityMatrix) -> DensityMatrix:
        return DensityMatrix(self.apply_matrix(rho.matrix), rho.space)

    def compose(self, other: "KrausChannel") -> "KrausChannel":
        """self after other (self o other)."""
        ops = tuple(a @ b for a in self.kraus_ops for b in other.kraus_ops)
        return KrausChannel(ops, self.space)

    def superoperator(self) -> np.ndarray:
        """Row-major-vec superoperator: vec(E(rho)) = S @ vec(rho)."""
        return sum(np.kron(k, k.conj()) for k in self.kraus_ops)


@dataclass(frozen=True)
class LindbladSpec:
    """Hamiltonian (rad/us) plus collapse operators with rates (1/us)."""

    hamiltonian: LinearOp
    collapse_ops: tuple = ()

    def __post_init__(self):
        if not self.hamiltonian.is_hermitian(1e-9):
            raise ValueError("Lindblad Hamiltonian must be Hermitian")
        cops = []
        for op, rate in self.collapse_ops:
            if rate < 0:
                raise ValueError(f"collapse rate must be >= 0, got {rate}")
            m = op.matrix if isinstance(op, LinearOp) else np.asarray(op, dtype=complex)
            cops.append((m, float(rate)))
        object.__setattr__(self, "collapse_ops", tuple(cops))

    @property
    def dim(self) -> int:
        return self.hamiltonian.dim


@dataclass(frozen=True)
class DepolarizingModel:
    """Per-cycle depolarizing probability p over a cycle of length tau (us)."""

    p: float
    tau: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must be in [0, 1], got {self.p}")
        if self.tau <= 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")


def amplitude_damping_kraus(dim: int, gamma: float) -> KrausChannel:
    """Photon-loss channel: jump branches E_k remove k photons.

    E_k|n> = sqrt(C(n,k) (1-gamma)^(n-k) gamma^k) |n-k>. E_0 is the no-jump
    deformation exp(-(kappa/2) n t) when gamma = 1 - exp(-kappa t).
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must be in [0, 1], got {gamma}")
    ops = []
    for k in range(dim):
        E = np.zeros((dim, dim), dtype=complex)
        for n in range(k, dim):
            E[n - k, n] = sqrt(comb(n, k) * (1.0 - gamma) ** (n - k) * gamma**k)
        if np.any(E):
            ops.append(E)
    return KrausChannel(tuple(ops))


def qubit_decoherence_channel(T1: float, Tphi: float, n_th: float, t: float) -> KrausChannel:
    """Generalized amplitude damping plus pure dephasing over duration t.

    Built exactly from the corresponding two-level Lindblad generator
    (rates: down (1-n_th)/T1, up n_th/T1, dephasing 2/Tphi on sz/2),
    converted to Kraus form through the Choi matrix.
    """
    if T1 <= 0 or Tphi <= 0 or t < 0 or not 0.0 <= n_th < 0.5:
        raise ValueError("require T1>0, Tphi>0, t>=0, 0<=n_th<0.5")
    sm = np.array([[0, 1], [0, 0]], dtype=complex)  # |g><e|
    sp = sm.conj().T
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    spec = LindbladSpec(
        LinearOp(np.zeros((2, 2), dtype=complex)),
        (
            (LinearOp(sm), (1.0 - n_th) / T1),
            (LinearOp(sp), n_th / T1),
            (LinearOp(sz), 1.0 / (2.0 * Tphi)),
        ),
    )
    S = evolution_superoperator(spec, t)
    return superoperator_to_kraus(S)


def kerr_unitary(dim: int, K: float, t: float) -> LinearOp:
    """Self-Kerr evolution exp(-i H t) with H = -(K/2) adag^2 a^2 (rad/us).

    Fock state |n> acquires phase +(K/2) n (n-1) t.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    n = np.arange(dim)
    return LinearOp(np.diag(np.exp(1j * 0.5 * K * n * (n - 1) * t)))


def depolarize(rho, p: float):
    """Two-dimensional depolarizing channel (1-p) rho + p I/2."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    mat = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    if mat.shape != (2, 2):
        raise ValueError("depolarize acts on a single logical qubit (2x2)")
    out = (1.0 - p) * mat + p * np.eye(2) / 2.0
    if isinstance(rho, DensityMatrix):
        return DensityMatrix(out, rho.space)
    return out


def liouvillian(spec: LindbladSpec) -> np.ndarray:
    """Row-major-vec Liouvillian: d vec(rho)/dt = L @ vec(rho)."""
    d = spec.dim
    I = np.eye(d)
    H = spec.hamiltonian.matrix
    L = -1j * (np.kron(H, I) - np.kron(I, H.T))
    for c, rate in spec.collapse_ops:
        cdc = c.conj().T @ c
        L += rate * (np.kron(c, c.conj()) - 0.5 * np.kron(cdc, I) - 0.5 * np.kron(I, cdc.T))
    return L


def evolution_superoperator(spec: LindbladSpec, t: float) -> np.ndarray:
    """Exact channel superoperator exp(L t)."""
    if t == 0:
        return np.eye(spec.dim**2, dtype=complex)
    return expm_generic(liouvillian(spec) * t)


def superoperator_to_kraus(S: np.ndarray, tol: float = 1e-12) -> KrausChannel:
    """Extract Kraus operators from a row-major-vec superoperator via Choi."""
    d = int(round(sqrt(S.shape[0])))
    # Choi (unnormalized): C[(i,k),(j,l)] = S[(i,j),(k,l)]
    C = S.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)
    C = 0.5 * (C + C.conj().T)
    evals, vecs = np.linalg.eigh(C)
    ops = []
    for lam, v in zip(evals, vecs.T):
        if lam > tol:
            ops.append(sqrt(lam) * v.reshape(d, d))
    return KrausChannel(tuple(ops))


def _fastest_timescale(spec: LindbladSpec) -> float:
    scales = []
    H = spec.hamiltonian.matrix
    if np.any(H):
        w = np.linalg.eigvalsh(H)
        spread = float(w.max() - w.min())
        if spread > 0:
            scales.append(2.0 * np.pi / spread)
    for c, rate in spec.collapse_ops:
        if rate > 0:
            nrm = np.linalg.norm(c, 2)
            if nrm > 0:
                scales.append(1.0 / (rate * nrm**2))
    return min(scales) if scales else np.inf


def lindblad_evolve(
    spec: LindbladSpec, rho0: DensityMatrix, t: float, dt_max: float = 1.0
) -> DensityMatrix:
    """Fixed-step RK4 integration of the master equation.

    Step size is min(dt_max, T_min/100) with T_min the fastest system
    timescale, keeping runs deterministic and reproducible.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if dt_max <= 0:
        raise ValueError("dt_max must be > 0")
    if t == 0:
        return rho0
    d = spec.dim
    H = spec.hamiltonian.matrix
    cops = [(c, r, c.conj().T @ c) for c, r in spec.collapse_ops]

    def rhs(rho):
        drho = -1j * (H @ rho - rho @ H)
        for c, r, cdc in cops:
            drho += r * (c @ rho @ c.conj().T - 0.5 * (cdc @ rho + rho @ cdc))
        return drho

    dt = min(dt_max, _fastest_timescale(spec) / 100.0)
    n_steps = max(1, int(np.ceil(t / dt)))
    dt = t / n_steps
    rho = rho0.matrix.copy()
    for _ in range(n_steps):
        k1 = rhs(rho)
        k2 = rhs(rho + 0.5 * dt * k1)
        k3 = rhs(rho + 0.5 * dt * k2)
        k4 = rhs(rho + dt * k3)
        rho = rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > 1e-7:
        raise IntegrationError(
            f"trace drifted to {tr} after {n_steps} steps of dt={dt}; reduce dt_max"
        )
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    return DensityMatrix(rho, rho0.space)


def trajectory_evolve(
    spec: LindbladSpec,
    rho0: DensityMatrix,
    t: float,
    n_traj: int,
    seed: int,
    dt: float = 0.05,
) -> DensityMatrix:
    """Monte-Carlo wavefunction average over n_traj trajectories.

    Jump decision uses the norm-threshold method with uniform draws; each
    trajectory derives its own generator from (seed, index) so the result
    is independent of execution order. Deterministic for a fixed seed.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    d = spec.dim
    H = spec.hamiltonian.matrix
    cops = [(np.sqrt(r) * c) for c, r in spec.collapse_ops if r > 0]
    Heff = H.copy().astype(complex)
    for L in cops:
        Heff += -0.5j * (L.conj().T @ L)
    n_steps = max(1, int(np.ceil(t / dt)))
    step = t / n_steps if t > 0 else 0.0
    U = expm_generic(-1j * Heff * step) if t > 0 else np.eye(d)

    # decompose rho0 into pure-state branches to sample initial conditions
    evals, vecs = np.linalg.eigh(rho0.matrix)
    weights = np.clip(evals, 0, None)
    weights /= weights.sum()

    acc = np.zeros((d, d), dtype=complex)
    for idx in range(n_traj):
        rng = np.random.default_rng([seed, idx])
        psi = vecs[:, rng.choice(len(weights), p=weights)].astype(complex)
        r_threshold = rng.uniform()
        for _ in range(n_steps):
            psi = U @ psi
            norm2 = float(np.real(psi.conj() @ psi))
            if norm2 < r_threshold and cops:
                jumps = [L @ psi for L in cops]
                wts = np.array([float(np.real(p.conj() @ p)) for p in jumps])
                if wts.sum() > 0:
                    k = rng.choice(len(cops), p=wts / wts.sum())
                    psi = jumps[k] / np.linalg.norm(jumps[k])
                else:
                    psi = psi / np.linalg.norm(psi)
                r_threshold = rng.uniform()
        psi = psi / np.linalg.norm(psi)
        acc += np.outer(psi, psi.conj())
    acc /= n_traj
    acc = 0.5 * (acc + acc.conj().T)
    acc /= np.trace(acc).real
    return DensityMatrix(acc, rho0.space)


def kappa_t_to_gamma(kappa: float, t: float) -> float:
    return 1.0 - exp(-kappa * t)

"""Truncated Fock-space linear algebra for small composite systems.

Everything is dense. The largest composite in scope is
cavity(10) x qubit(2) x cavity(10) x qubit(2) = 400 dimensions, which is
trivial for dense numpy. Subsystem order is fixed at construction time and
carried by :class:`SpaceSpec`; the two-module convention used throughout the
package is (cavity S1, qubit I1, cavity S3, qubit I2).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import reduce
from math import sqrt

import numpy as np
from scipy.linalg import expm as _expm

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-9
EIG_TOL = 1e-9
NORM_TOL = 1e-10


@dataclass(frozen=True)
class SpaceSpec:
    """Ordered list of subsystem dimensions of a truncated Hilbert space."""

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 1 for d in dims):
            raise ValueError(f"every dim must be >= 1, got {self.dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        total = 1
        for d in self.dims:
            total *= d
        return total

    @property
    def n_subsystems(self) -> int:
        return len(self.dims)


def _as_space(space, dim: int) -> SpaceSpec:
    if space is None:
        return SpaceSpec((dim,))
    if space.dim != dim:
        raise ValueError(f"space dim {space.dim} does not match array dim {dim}")
    return space


@dataclass(frozen=True)
class LinearOp:
    """Dense square operator on a :class:`SpaceSpec`.

    Matrices are dimensionless unless stated otherwise by the producer;
    Hamiltonians in this package are in angular frequency units (rad/us).
    """

    matrix: np.ndarray
    space: SpaceSpec = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator matrix must be square, got {m.shape}")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "space", _as_space(self.space, m.shape[0]))
        self.matrix.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dag(self) -> "LinearOp":
        return LinearOp(self.matrix.conj().T, self.space)

    def __matmul__(self, other):
        if isinstance(other, LinearOp):
            return LinearOp(self.matrix @ other.matrix, self.space)
        if isinstance(other, Ket):
            return self.matrix @ other.amplitudes
        return self.matrix @ other

    def __add__(self, other):
        o = other.matrix if isinstance(other, LinearOp) else other
        return LinearOp(self.matrix + o, self.space)

    def __sub__(self, other):
        o = other.matrix if isinstance(other, LinearOp) else other
        return LinearOp(self.matrix - o, self.space)

    def __mul__(self, scalar):
        return LinearOp(self.matrix * scalar, self.space)

    __rmul__ = __mul__

    def is_hermitian(self, tol: float = HERMITICITY_TOL) -> bool:
        return np.max(np.abs(self.matrix - self.matrix.conj().T)) < tol


@dataclass(frozen=True)
class Ket:
    """Normalized state vector."""

    amplitudes: np.ndarray
    space: SpaceSpec = None

    def __post_init__(self):
        v = np.asarray(self.amplitudes, dtype=complex).ravel()
        n = np.linalg.norm(v)
        if abs(n - 1.0) > NORM_TOL:
            raise ValueError(f"ket norm {n} deviates from 1 beyond {NORM_TOL}")
        object.__setattr__(self, "amplitudes", v)
        object.__setattr__(self, "space", _as_space(self.space, v.size))
        self.amplitudes.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def to_density_matrix(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()), self.space)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite matrix on a SpaceSpec."""

    matrix: np.ndarray
    space: SpaceSpec = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"density matrix must be square, got {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > HERMITICITY_TOL:
            raise ValueError("density matrix not Hermitian within 1e-10")
        tr = np.trace(m).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"trace {tr} deviates from 1 beyond {TRACE_TOL}")
        evals = np.linalg.eigvalsh(m)
        if evals.min() < -EIG_TOL:
            raise ValueError(f"negative eigenvalue {evals.min()} below -{EIG_TOL}")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "space", _as_space(self.space, m.shape[0]))
        self.matrix.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def basis_ket(dim: int, n: int, space: SpaceSpec = None) -> Ket:
    """Fock/computational basis vector |n> in a dim-dimensional space."""
    if not 0 <= n < dim:
        raise ValueError(f"basis index {n} out of range for dim {dim}")
    v = np.zeros(dim, dtype=complex)
    v[n] = 1.0
    return Ket(v, space)


def ladder_ops(dim: int) -> tuple[LinearOp, LinearOp]:
    """Annihilation and creation operators with a|n> = sqrt(n)|n-1>."""
    if dim < 2:
        raise ValueError(f"ladder operators need dim >= 2, got {dim}")
    a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)
    return LinearOp(a), LinearOp(a.conj().T)


def number_op(dim: int) -> LinearOp:
    return LinearOp(np.diag(np.arange(dim, dtype=float)).astype(complex))


def parity_op(dim: int) -> LinearOp:
    """Photon-number parity, diagonal with entries (-1)^n."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    return LinearOp(np.diag((-1.0) ** np.arange(dim)).astype(complex))


def hermitian_expm(generator: np.ndarray, scale: complex = 1.0) -> np.ndarray:
    """exp(scale * G) for Hermitian G via eigendecomposition."""
    evals, vecs = np.linalg.eigh(generator)
    return (vecs * np.exp(scale * evals)) @ vecs.conj().T


def displacement(dim: int, beta: complex) -> LinearOp:
    """Displacement operator exp(beta a^dag - beta* a) on a truncated space.

    Unitary only within truncation; a warning is emitted when |beta|^2
    exceeds dim/4 and truncation error becomes non-negligible.
    """
    if abs(beta) ** 2 > dim / 4:
        warnings.warn(
            f"displacement |beta|^2={abs(beta)**2:.2f} risks truncation error at dim={dim}",
            RuntimeWarning,
            stacklevel=2,
        )
    a, adag = ladder_ops(dim) if dim >= 2 else (None, None)
    if a is None:
        return LinearOp(np.eye(1, dtype=complex))
    gen = beta * adag.matrix - np.conj(beta) * a.matrix
    # gen is anti-Hermitian: exp via eigh of -i*gen
    h = -1j * gen
    return LinearOp(hermitian_expm(h, 1j))


def tensor(parts):
    """Kronecker composition of LinearOps or Kets in declared order."""
    parts = list(parts)
    if not parts:
        raise ValueError("tensor of an empty list is undefined")
    if all(isinstance(p, LinearOp) for p in parts):
        mat = reduce(np.kron, [p.matrix for p in parts])
        dims = sum((p.space.dims for p in parts), ())
        return LinearOp(mat, SpaceSpec(dims))
    if all(isinstance(p, Ket) for p in parts):
        vec = reduce(np.kron, [p.amplitudes for p in parts])
        dims = sum((p.space.dims for p in parts), ())
        return Ket(vec, SpaceSpec(dims))
    if all(isinstance(p, DensityMatrix) for p in parts):
        mat = reduce(np.kron, [p.matrix for p in parts])
        dims = sum((p.space.dims for p in parts), ())
        return DensityMatrix(mat, SpaceSpec(dims))
    raise ValueError("tensor parts must be all LinearOp, all Ket, or all DensityMatrix")


def _check_subsystems(space: SpaceSpec, indices):
    for i in indices:
        if not 0 <= i < space.n_subsystems:
            raise ValueError(f"subsystem index {i} out of range for {space.dims}")


def partial_trace_matrix(mat: np.ndarray, dims, keep) -> np.ndarray:
    """Partial trace on a raw matrix; `keep` lists subsystem indices to retain."""
    dims = tuple(dims)
    keep = sorted(keep)
    n = len(dims)
    t = mat.reshape(dims + dims)
    # trace out complement indices from highest to lowest so axes stay valid
    for i in sorted(set(range(n)) - set(keep), reverse=True):
        t = np.trace(t, axis1=i, axis2=i + t.ndim // 2)
    d_keep = int(np.prod([dims[i] for i in keep])) if keep else 1
    return t.reshape(d_keep, d_keep)


def partial_trace(rho: DensityMatrix, keep) -> DensityMatrix:
    """Trace out every subsystem not listed in `keep`."""
    keep = sorted(set(keep))
    _check_subsystems(rho.space, keep)
    out = partial_trace_matrix(rho.matrix, rho.space.dims, keep)
    return DensityMatrix(out, SpaceSpec(tuple(rho.space.dims[i] for i in keep)))


def partial_transpose_matrix(mat: np.ndarray, dims, subsystem: int) -> np.ndarray:
    dims = tuple(dims)
    n = len(dims)
    t = mat.reshape(dims + dims)
    t = np.swapaxes(t, subsystem, subsystem + n)
    return t.reshape(mat.shape)


def partial_transpose(rho: DensityMatrix, subsystem: int) -> LinearOp:
    """Transpose on one tensor factor; Hermiticity is preserved, positivity not."""
    _check_subsystems(rho.space, [subsystem])
    return LinearOp(partial_transpose_matrix(rho.matrix, rho.space.dims, subsystem), rho.space)


def coherent_ket(dim: int, beta: complex) -> Ket:
    """Truncated coherent state, renormalized after truncation."""
    n = np.arange(dim)
    from scipy.special import gammaln

    amps = np.exp(-abs(beta) ** 2 / 2 + n * np.log(beta if beta != 0 else 1) - gammaln(n + 1) / 2)
    if beta == 0:
        amps = np.zeros(dim, dtype=complex)
        amps[0] = 1.0
    amps = np.asarray(amps, dtype=complex)
    amps /= np.linalg.norm(amps)
    return Ket(amps)


def expm_generic(mat: np.ndarray) -> np.ndarray:
    """Matrix exponential for non-Hermitian generators (Pade scaling-squaring)."""
    return _expm(mat)

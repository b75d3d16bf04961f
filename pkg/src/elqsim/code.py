"""The lowest binomial code.

Code words |0L> = (|0> + |4>)/sqrt(2), |1L> = |2> (even parity, mean photon
number 2); after one photon loss the state lands in the error subspace
spanned by |0E> = |3> and |1E> = |1> (odd parity). Includes the ideal
recovery channel and the construction of the no-jump-corrected target
states that define the autonomous-QEC unitary.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import exp, sqrt

import numpy as np

from .channels import KrausChannel
from .hilbert import Ket, SpaceSpec, basis_ket

# Unnormalized (alpha, beta) rows used to pin the recovery map over an
# overcomplete set of logical states, removing any state bias.
COEFFICIENT_ROWS = (
    (1, 0),
    (1, 1),
    (1, -1),
    (1, -1j),
    (1, 1j),
    (0, 1),
)


@dataclass(frozen=True)
class BinomialCode:
    cutoff: int
    logical0: Ket
    logical1: Ket
    error0: Ket
    error1: Ket

    @property
    def space(self) -> SpaceSpec:
        return self.logical0.space

    def code_projector(self) -> np.ndarray:
        l0, l1 = self.logical0.amplitudes, self.logical1.amplitudes
        return np.outer(l0, l0.conj()) + np.outer(l1, l1.conj())

    def error_projector(self) -> np.ndarray:
        e0, e1 = self.error0.amplitudes, self.error1.amplitudes
        return np.outer(e0, e0.conj()) + np.outer(e1, e1.conj())


def binomial_code(cutoff: int = 10) -> BinomialCode:
    """Lowest binomial code on a cavity truncated at `cutoff` Fock levels.

    cutoff >= 5 is required to hold |4>; 10 is the default since photon loss
    never raises the photon number.
    """
    if cutoff < 5:
        raise ValueError(f"binomial code needs cutoff >= 5, got {cutoff}")
    zero = np.zeros(cutoff, dtype=complex)
    l0 = zero.copy()
    l0[0] = l0[4] = 1 / sqrt(2)
    return BinomialCode(
        cutoff=cutoff,
        logical0=Ket(l0),
        logical1=basis_ket(cutoff, 2),
        error0=basis_ket(cutoff, 3),
        error1=basis_ket(cutoff, 1),
    )


def _check_normalized(alpha: complex, beta: complex):
    if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1.0) > 1e-9:
        raise ValueError("require |alpha|^2 + |beta|^2 = 1")


def logical_state(code: BinomialCode, alpha: complex, beta: complex) -> Ket:
    """alpha |0L> + beta |1L>."""
    _check_normalized(alpha, beta)
    return Ket(alpha * code.logical0.amplitudes + beta * code.logical1.amplitudes)


def error_state(code: BinomialCode, alpha: complex, beta: complex) -> Ket:
    """alpha |0E> + beta |1E> (the single-loss image of logical_state)."""
    _check_normalized(alpha, beta)
    return Ket(alpha * code.error0.amplitudes + beta * code.error1.amplitudes)


def ideal_recovery(code: BinomialCode) -> KrausChannel:
    """Parity-selective recovery: identity on even parity, error -> code.

    Two Kraus branches mirror the syndrome structure: the even branch acts
    as the identity (on the code space, on the orthogonal even state
    (|0>-|4>)/sqrt(2), and on all Fock states outside 0..4 of even parity);
    the odd branch is the partial isometry |0L><0E| + |1L><1E| extended by
    the identity on the remaining odd Fock states. Identity completion
    outside the five-level window is a modeling choice: those states are
    unreachable from the code space under photon loss.
    """
    d = code.cutoff
    parity = (-1.0) ** np.arange(d)
    P_even = np.diag((parity > 0).astype(complex))
    P_odd = np.diag((parity < 0).astype(complex))
    iso = np.outer(code.logical0.amplitudes, code.error0.amplitudes.conj()) + np.outer(
        code.logical1.amplitudes, code.error1.amplitudes.conj()
    )
    err_proj = code.error_projector()
    K_odd = iso + P_odd @ (np.eye(d) - err_proj)
    return KrausChannel((P_even, K_odd), code.space)


def no_jump_corrected_targets(
    code: BinomialCode,
    kappa: float,
    t: float,
    phi2: float = 0.0,
    phi4: float = 0.0,
):
    """(input, target) ket pairs on cavity x ancilla defining U_AQEC.

    Two condition families, instantiated over COEFFICIENT_ROWS:
    error-space inputs (ancilla |g>) map to phase-corrected code words with
    the ancilla flipped to |e>; no-jump-deformed code inputs (|4> amplitude
    suppressed by exp(-2 kappa t)) map to phase-corrected code words with
    the ancilla left in |g>. phi2/phi4 are the calibrated measurement-induced
    phases applied to |2> and |4> in the targets.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    d = code.cutoff
    f = lambda n: basis_ket(d, n).amplitudes
    g = np.array([1.0, 0.0], dtype=complex)
    e = np.array([0.0, 1.0], dtype=complex)
    space = SpaceSpec((d, 2))

    kt = kappa * t
    deformed0 = (f(0) + exp(-2.0 * kt) * f(4)) / sqrt(1.0 + exp(-4.0 * kt))
    corrected0 = (f(0) + np.exp(1j * phi4) * f(4)) / sqrt(2.0)
    corrected1 = np.exp(1j * phi2) * f(2)

    pairs = []
    for alpha, beta in COEFFICIENT_ROWS:
        norm = sqrt(abs(alpha) ** 2 + abs(beta) ** 2)
        a, b = alpha / norm, beta / norm
        # single-loss/error family: recover and flag the ancilla
        err_in = np.kron(a * f(3) + b * f(1), g)
        err_out = np.kron(a * corrected0 + b * corrected1, e)
        pairs.append((Ket(err_in, space), Ket(err_out, space)))
        # no-jump family: undo the deterministic deformation
        nj_in = np.kron(a * deformed0 + b * f(2), g)
        nj_out = np.kron(a * corrected0 + b * corrected1, g)
        pairs.append((Ket(nj_in, space), Ket(nj_out, space)))
    return pairs


def mean_photon_number(ket: Ket) -> float:
    n = np.arange(ket.dim)
    return float(np.real(np.sum(n * np.abs(ket.amplitudes) ** 2)))

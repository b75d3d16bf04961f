"""Device parameter model and calibration math.

Loads the measured parameter tables (TOML), builds the rotating-frame
dispersive Hamiltonian, and implements the calibration formulas: Bayes
readout correction, photon-number-resolved ac-Stark shifts with the
error-transparency condition, measurement-induced phase compensation, and
damped-sinusoid fitting.

Unit policy: tables carry MHz and us; conversion to angular frequency
(rad/us) happens in exactly one place, :func:`mhz_to_angular`.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from importlib import resources
from math import pi, sqrt

import numpy as np
from scipy.optimize import curve_fit

from .errors import ConfigError, FitError, SingularityError, NoSolutionError
from .hilbert import LinearOp, SpaceSpec

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

CAVITY_MODES = ("S1", "S2", "S3")
QUBIT_MODES = ("I1", "Y1", "Y2", "I2")
REQUIRED_MODES = ("S1", "S3", "I1", "I2")


def mhz_to_angular(f_mhz: float) -> float:
    """MHz -> rad/us. The single unit-conversion point of the package."""
    return 2.0 * pi * f_mhz


@dataclass(frozen=True)
class ModeParams:
    frequency: float  # GHz
    T1: float  # us
    T2s: float | None = None  # us, Ramsey
    n_th: float = 0.0
    self_kerr: float = 0.0  # MHz

    @property
    def Tphi(self) -> float:
        """Pure dephasing time from T1 and Ramsey T2*."""
        if self.T2s is None:
            return float("inf")
        rate = 1.0 / self.T2s - 1.0 / (2.0 * self.T1)
        return float("inf") if rate <= 0 else 1.0 / rate


@dataclass(frozen=True)
class PassDrive:
    """Detuned drive engineering per-Fock frequency shifts.

    delta_d is in units of chi; omega and chi are MHz. Validity requires
    omega << |delta_d - n| * chi for all in-scope n (factor-10 margin).
    """

    omega: float
    delta_d: float
    chi: float

    def check_validity(self, n_max: int = 8):
        for n in range(n_max + 1):
            gap = abs(self.delta_d - n) * self.chi
            if gap > 0 and self.omega * 10.0 > gap:
                raise ValueError(
                    f"drive amplitude {self.omega} MHz too strong for gap "
                    f"{gap:.4f} MHz at n={n} (need factor-10 margin)"
                )


@dataclass(frozen=True)
class DeviceParams:
    modes: dict
    couplings: dict  # frozenset({a, b}) -> chi MHz
    readout: dict  # qubit -> (F_g, F_e)
    parity_fidelity: dict  # cavity -> tuple over nbar = 0..3
    measurement_phase: dict  # (cavity, 'g'|'e') -> (phi2, phi4) rad
    reset_fidelity: dict  # qubit -> fidelity
    gate_fidelity_coeffs: dict  # cavity -> (F0, c_T1, c_Tphi, c_Tc)
    stark_drive: dict  # cavity -> {delta_d, omega}
    error_budget: dict  # cavity -> {gate, uncorrectable, measurement}

    def chi(self, a: str, b: str) -> float:
        return self.couplings.get(frozenset((a, b)), 0.0)

    def control_qubit(self, cavity: str) -> str:
        return {"S1": "I1", "S3": "I2"}[cavity]


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = v
    return out


def load_device_params(path=None) -> DeviceParams:
    """Load the default tables, optionally overridden by a user TOML file."""
    with resources.files("elqsim.data").joinpath("device_default.toml").open("rb") as f:
        raw = tomllib.load(f)
    if path is not None:
        with open(path, "rb") as f:
            raw = _deep_merge(raw, tomllib.load(f))

    try:
        modes = {}
        for name, m in raw["modes"].items():
            modes[name] = ModeParams(
                frequency=float(m["frequency"]),
                T1=float(m["T1"]),
                T2s=float(m["T2s"]) if "T2s" in m else None,
                n_th=float(m.get("n_th", 0.0)),
                self_kerr=float(m.get("self_kerr", 0.0)),
            )
        couplings = {
            frozenset(key.split("_")): float(v) for key, v in raw["couplings"].items()
        }
        readout = {q: (float(v["F_g"]), float(v["F_e"])) for q, v in raw["readout"].items()}
        parity = {c: tuple(map(float, v)) for c, v in raw["parity_fidelity"].items()}
        phases = {}
        for cav, branches in raw["measurement_phase"].items():
            for qs, v in branches.items():
                phases[(cav, qs)] = (float(v["phi2"]), float(v["phi4"]))
        reset = {q: float(v) for q, v in raw["reset_fidelity"].items()}
        gate = {
            c: (float(v["F0"]), float(v["c_T1"]), float(v["c_Tphi"]), float(v["c_Tc"]))
            for c, v in raw["gate_fidelity"].items()
        }
        stark = {c: dict(v) for c, v in raw["stark_drive"].items()}
        budget = {c: dict(v) for c, v in raw["error_budget"].items()}
    except KeyError as exc:
        raise ConfigError(f"parameter file missing field {exc}") from exc

    for mode in REQUIRED_MODES:
        if mode not in modes:
            raise ConfigError(f"parameter file missing mode section '{mode}'")
    for t in (modes[m].T1 for m in modes):
        if t <= 0:
            raise ConfigError("all coherence times must be > 0")
    for q, (fg, fe) in readout.items():
        if not (0 <= fg <= 1 and 0 <= fe <= 1):
            raise ConfigError(f"readout fidelities for {q} must lie in [0, 1]")

    return DeviceParams(
        modes=modes,
        couplings=couplings,
        readout=readout,
        parity_fidelity=parity,
        measurement_phase=phases,
        reset_fidelity=reset,
        gate_fidelity_coeffs=gate,
        stark_drive=stark,
        error_budget=budget,
    )


def _mode_dim(name: str, cutoff: int) -> int:
    return 2 if name in QUBIT_MODES else cutoff


def dispersive_hamiltonian(params: DeviceParams, subsystems, cutoff: int = 10) -> LinearOp:
    """Rotating-frame Hamiltonian (rad/us) on the listed modes, in order.

    Bare mode frequencies are dropped (every protocol is phase-referenced to
    its drive); the operator keeps dispersive shifts -chi |e><e| n, cavity
    self-Kerr -(K/2) n(n-1), and qubit-qubit / cavity-cavity cross terms
    where both parties are present.
    """
    subsystems = tuple(subsystems)
    for s in subsystems:
        if s not in params.modes:
            raise ConfigError(f"unknown mode '{s}' (missing [modes.{s}] section)")
    dims = tuple(_mode_dim(s, cutoff) for s in subsystems)
    space = SpaceSpec(dims)
    D = space.dim
    H = np.zeros((D, D), dtype=complex)

    def embed(local_ops: dict) -> np.ndarray:
        """Kron product with identity on modes absent from local_ops."""
        out = np.eye(1, dtype=complex)
        for s, d in zip(subsystems, dims):
            out = np.kron(out, local_ops.get(s, np.eye(d, dtype=complex)))
        return out

    excited = np.diag([0.0, 1.0]).astype(complex)
    for i, a in enumerate(subsystems):
        if a in CAVITY_MODES:
            n = np.diag(np.arange(dims[i], dtype=float)).astype(complex)
            K = mhz_to_angular(params.modes[a].self_kerr)
            H += -0.5 * K * embed({a: n @ (n - np.eye(dims[i]))})
        for b in subsystems[i + 1 :]:
            chi = mhz_to_angular(params.chi(a, b))
            if chi == 0.0:
                continue
            if a in CAVITY_MODES and b in QUBIT_MODES:
                n = np.diag(np.arange(dims[i], dtype=float)).astype(complex)
                H += -chi * embed({a: n, b: excited})
            elif a in QUBIT_MODES and b in CAVITY_MODES:
                j = subsystems.index(b)
                n = np.diag(np.arange(dims[j], dtype=float)).astype(complex)
                H += -chi * embed({a: excited, b: n})
            elif a in QUBIT_MODES and b in QUBIT_MODES:
                H += -chi * embed({a: excited, b: excited})
            else:  # cavity-cavity cross-Kerr
                j = subsystems.index(b)
                na = np.diag(np.arange(dims[i], dtype=float)).astype(complex)
                nb = np.diag(np.arange(dims[j], dtype=float)).astype(complex)
                H += -chi * embed({a: na, b: nb})
    return LinearOp(H, space)


def pass_shift(drive: PassDrive, n: int) -> float:
    """Fock-state frequency shift -Omega^2 / (Delta_d - n chi), in MHz."""
    denom = (drive.delta_d - n) * drive.chi
    if denom == 0.0:
        raise SingularityError(f"drive resonant with Fock state n={n}")
    return -(drive.omega**2) / denom


def fock_frequency(drive: PassDrive, K: float, n: int) -> float:
    """f_n = -n(n-1) K/2 + Stark shift, MHz (relative to the harmonic ladder)."""
    return -n * (n - 1) * K / 2.0 + pass_shift(drive, n)


def solve_error_transparent_amplitude(
    K: float, chi: float, delta_d: float = 3.5, convention_factor: float = 1.0
) -> float:
    """Drive amplitude Omega (MHz) satisfying f4 - f2 = f3 - f1.

    The condition is linear in Omega^2, so the smallest positive root is
    closed-form. `convention_factor` scales the returned amplitude to absorb
    Rabi-rate convention differences between calibrations; the formula
    itself is implemented as stated.
    """
    if K < 0 or chi <= 0:
        raise ValueError("require K >= 0 and chi > 0")
    if K == 0.0:
        return 0.0
    s_even = 1.0 / (delta_d - 4.0) - 1.0 / (delta_d - 2.0)
    s_odd = 1.0 / (delta_d - 3.0) - 1.0 / (delta_d - 1.0)
    denom = s_odd - s_even
    omega_sq = 2.0 * K * chi / denom if denom != 0 else -1.0
    if omega_sq <= 0:
        raise NoSolutionError(
            f"no positive drive amplitude satisfies the condition at delta_d={delta_d}"
        )
    return sqrt(omega_sq) * convention_factor


def bayes_correct(p_measured, F_g: float, F_e: float):
    """Invert the readout confusion matrix [[F_g, 1-F_e], [1-F_g, F_e]].

    Returns (corrected probabilities, clipped) where `clipped` flags whether
    the inversion left the simplex and the result had to be clipped and
    renormalized.
    """
    if F_g + F_e <= 1.0:
        raise ValueError("confusion matrix singular: need F_g + F_e > 1")
    p = np.asarray(p_measured, dtype=float)
    M = np.array([[F_g, 1.0 - F_e], [1.0 - F_g, F_e]])
    corrected = np.linalg.solve(M, p)
    clipped = bool(np.any(corrected < 0.0) or np.any(corrected > 1.0))
    corrected = np.clip(corrected, 0.0, 1.0)
    s = corrected.sum()
    if s > 0:
        corrected = corrected / s
    return corrected, clipped


def readout_confusion(F_g: float, F_e: float) -> np.ndarray:
    """Forward confusion matrix mapping true (P_g, P_e) to measured."""
    return np.array([[F_g, 1.0 - F_e], [1.0 - F_g, F_e]])


def measurement_phase_unitary(
    params: DeviceParams, cavity: str, qubit_state: str, cutoff: int = 10
) -> LinearOp:
    """Diagonal unitary applying the calibrated phases to |2> and |4>."""
    key = (cavity, qubit_state)
    if key not in params.measurement_phase:
        raise ConfigError(f"no measurement_phase entry for {cavity} with qubit '{qubit_state}'")
    phi2, phi4 = params.measurement_phase[key]
    diag = np.ones(cutoff, dtype=complex)
    diag[2] = np.exp(1j * phi2)
    if cutoff > 4:
        diag[4] = np.exp(1j * phi4)
    return LinearOp(np.diag(diag))


def gate_fidelity_model(T1: float, Tphi: float, Tc: float, coefficients) -> float:
    """Recovery-gate fidelity F0 (1 - c1/T1)(1 - c2/Tphi)(1 - c3/Tc)."""
    if T1 <= 0 or Tphi <= 0 or Tc <= 0:
        raise ValueError("all coherence times must be > 0")
    F0, c1, c2, c3 = coefficients
    return F0 * (1.0 - c1 / T1) * (1.0 - c2 / Tphi) * (1.0 - c3 / Tc)


@dataclass(frozen=True)
class DampedSinusoidFit:
    y0: float
    A: float
    tau: float
    omega: float
    phi0: float
    residual: float
    degenerate: bool = False


def fit_damped_sinusoid(t, y) -> DampedSinusoidFit:
    """Least-squares fit of y = y0 + A exp(-t/tau) cos(omega t + phi0).

    Needs at least 8 samples spanning at least one oscillation period.
    A constant series returns a degenerate-flagged result with A ~ 0.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size < 8:
        raise FitError(f"need at least 8 samples, got {t.size}")
    span = np.ptp(y)
    if span < 1e-12:
        return DampedSinusoidFit(float(y.mean()), 0.0, np.inf, 0.0, 0.0, 0.0, degenerate=True)

    # FFT-based frequency seed (assumes near-uniform sampling)
    dt = np.median(np.diff(t))
    yf = np.fft.rfft(y - y.mean())
    freqs = np.fft.rfftfreq(t.size, dt)
    omega0 = 2.0 * pi * freqs[np.argmax(np.abs(yf[1:])) + 1]
    if omega0 * (t[-1] - t[0]) < 2.0 * pi:
        omega0 = 2.0 * pi / max(t[-1] - t[0], dt)

    def model(tt, y0, A, tau, omega, phi0):
        return y0 + A * np.exp(-tt / tau) * np.cos(omega * tt + phi0)

    p0 = [float(y.mean()), span / 2.0, float(t[-1] - t[0]) if t[-1] > t[0] else 1.0, omega0, 0.0]
    try:
        popt, _ = curve_fit(model, t, y, p0=p0, maxfev=20000)
    except RuntimeError as exc:
        resid = float(np.linalg.norm(y - model(t, *p0)))
        raise FitError(f"damped-sinusoid fit failed to converge (residual {resid:.3g})") from exc
    resid = float(np.linalg.norm(y - model(t, *popt)))
    y0, A, tau, omega, phi0 = popt
    if omega < 0:  # canonicalize sign
        omega, phi0 = -omega, -phi0
    return DampedSinusoidFit(y0, A, tau, omega, phi0, resid)

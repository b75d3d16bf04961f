"""Scenario runner and analysis front end.

Declarative TOML scenarios drive the cycle engine and tomography helpers,
emitting deterministic CSV series (config hash embedded in the header) and
static plots. Subcommands: run, grape, wigner, bell-sweep, budget, fit.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import aqec, grape
from .code import BinomialCode, binomial_code, logical_state
from .device import DeviceParams, fit_damped_sinusoid, load_device_params
from .errors import ConfigError, FitError
from .hilbert import DensityMatrix, SpaceSpec, basis_ket
from .tomo import (PAULIS, chsh_bell, fit_exponential_fidelity, negativity,
                   wigner)

BELL_MODES = ("uncorrected", "corrected", "purified")
_MODE_MAP = {"uncorrected": "uncorrected", "corrected": "corrected",
             "purified": "detect-only"}


@dataclass(frozen=True)
class Scenario:
    """One figure-style experiment: what to prepare, how to cycle, what to emit."""

    name: str
    kind: str = "decay"  # decay | bell-decay | bell-sweep | wigner
    encoding: str = "binomial"
    modes: tuple[str, ...] = BELL_MODES
    cavity: tuple[str, str] = ("S1", "S3")
    tau: float = 50.0
    n_cycles: int = 6
    theta_points: int = 41
    preparation_fidelity: float | None = None
    seed: int = 0
    cutoff: int = 10
    device: str | None = None

    def __post_init__(self):
        if self.kind not in ("decay", "bell-decay", "bell-sweep", "wigner"):
            raise ConfigError(f"scenario field 'kind': unknown value {self.kind!r}")
        if self.encoding not in ("binomial", "fock01"):
            raise ConfigError(f"scenario field 'encoding': {self.encoding!r}")
        for m in self.modes:
            if m not in _MODE_MAP and m != "fock01":
                raise ConfigError(f"scenario field 'modes': {m!r}")
        if self.n_cycles < 1:
            raise ConfigError("scenario field 'n_cycles': must be >= 1")

    def config_hash(self) -> str:
        blob = json.dumps(
            {k: list(v) if isinstance(v, tuple) else v
             for k, v in sorted(self.__dict__.items())},
            sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class ResultSeries:
    name: str
    axis_name: str
    axis: np.ndarray
    columns: dict
    fits: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def to_csv(self, path, force: bool = False) -> None:
        _check_overwrite(path, self.metadata.get("config_hash", ""), force)
        with open(path, "w") as fh:
            for key in sorted(self.metadata):
                fh.write(f"# {key} = {self.metadata[key]}\n")
            fh.write(f"# timestamp = {time.strftime('%Y-%m-%dT%H:%M:%S')}\n")
            cols = list(self.columns)
            fh.write(",".join([self.axis_name] + cols) + "\n")
            for i, x in enumerate(self.axis):
                row = [repr(float(x))]
                row += [repr(float(self.columns[c][i])) for c in cols]
                fh.write(",".join(row) + "\n")


def _check_overwrite(path, config_hash: str, force: bool) -> None:
    if force or not os.path.exists(path):
        return
    with open(path) as fh:
        for line in fh:
            if line.startswith("# config_hash ="):
                old = line.split("=", 1)[1].strip()
                if old != config_hash:
                    raise ConfigError(
                        f"{path} holds results for a different config "
                        f"({old} != {config_hash}); pass --force to overwrite")
                return
            if not line.startswith("#"):
                break


def scenario_from_dict(raw: dict) -> Scenario:
    known = set(Scenario.__dataclass_fields__)
    bad = set(raw) - known
    if bad:
        raise ConfigError(f"unknown scenario field(s): {sorted(bad)}")
    if "name" not in raw:
        raise ConfigError("scenario field 'name' is required")
    for key in ("modes", "cavity"):
        if key in raw:
            raw[key] = tuple(raw[key]) if isinstance(raw[key], list) else raw[key]
    if isinstance(raw.get("cavity"), str):
        raw["cavity"] = (raw["cavity"], raw["cavity"])
    if isinstance(raw.get("modes"), str):
        raw["modes"] = (raw["modes"],)
    return Scenario(**raw)


def load_scenarios(path) -> list[Scenario]:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    if "scenario" in raw:
        return [scenario_from_dict(s) for s in raw["scenario"]]
    return [scenario_from_dict(raw)]


# ---------------------------------------------------------------------------
# State preparation


def _fock01_code(cutoff: int) -> BinomialCode:
    """Fock {|0>,|1>} physical encoding squeezed into the code interface."""
    return BinomialCode(cutoff, basis_ket(cutoff, 0), basis_ket(cutoff, 1),
                        basis_ket(cutoff, 2), basis_ket(cutoff, 3))


def prepare_logical_target(target: str, theta: float = 0.0,
                           preparation_fidelity: float | None = None) -> np.ndarray:
    """2x2 or 4x4 logical-level density matrix for a named target.

    Imperfect preparation is modeled as one-sided depolarization with
    p = 4(1-F)/3, which lands exactly at the requested fidelity.
    """
    if target == "bell":
        psi = np.zeros(4, dtype=complex)
        psi[1] = 1 / np.sqrt(2)
        psi[2] = np.exp(1j * theta) / np.sqrt(2)
        rho = np.outer(psi, psi.conj())
    elif target == "plus_i":
        psi = np.array([1.0, -1j]) / np.sqrt(2)
        rho = np.outer(psi, psi.conj())
    else:
        raise ConfigError(f"unknown preparation target {target!r}")
    if preparation_fidelity is not None:
        p = 4 * (1 - preparation_fidelity) / 3
        rho = (1 - p) * rho + p * np.eye(rho.shape[0]) / rho.shape[0]
    return rho


def prepare_initial_state(encoding: str, target: str, theta: float = 0.0,
                          preparation_fidelity: float | None = None,
                          cutoff: int = 10) -> DensityMatrix:
    """Encode a (possibly depolarized) logical target into the cavity modes,
    control ancillas in |g>."""
    code = binomial_code(cutoff) if encoding == "binomial" else _fock01_code(cutoff)
    rho_l = prepare_logical_target(target, theta, preparation_fidelity)
    basis = np.column_stack([code.logical0.amplitudes, code.logical1.amplitudes])
    g = np.zeros((2, 2))
    g[0, 0] = 1.0
    if rho_l.shape[0] == 2:
        cav = basis @ rho_l @ basis.conj().T
        return DensityMatrix(np.kron(cav, g), SpaceSpec((cutoff, 2)))
    enc = np.kron(basis, basis)  # two-sided logical -> (cav1, cav2)
    cav = enc @ rho_l @ enc.conj().T
    # interleave ancillas: order (cav1, anc1, cav2, anc2)
    full = np.kron(cav, np.kron(g, g))
    d = cutoff
    perm = np.arange(d * d * 4).reshape(d, d, 2, 2).transpose(0, 2, 1, 3).reshape(-1)
    full = full[np.ix_(perm, perm)]
    return DensityMatrix(full, SpaceSpec((cutoff, 2, cutoff, 2)))


# ---------------------------------------------------------------------------
# Logical two-qubit analytics via per-side transfer matrices


def _pauli_coeffs(rho: np.ndarray) -> np.ndarray:
    return np.array([[np.trace(np.kron(P, Q) @ rho).real for Q in PAULIS]
                     for P in PAULIS])


def _coeffs_to_rho(R: np.ndarray) -> np.ndarray:
    return sum(R[i, j] * np.kron(PAULIS[i], PAULIS[j])
               for i in range(4) for j in range(4)) / 4


def _two_sided_series(scn: Scenario, code: BinomialCode, params: DeviceParams,
                      mode: str, rho_l: np.ndarray):
    """Per-cycle logical two-qubit states from factorized per-side cycling."""
    sides = []
    for cav in scn.cavity:
        cfg = aqec.CycleConfig(tau=scn.tau, n_cycles=scn.n_cycles,
                               mode=_MODE_MAP[mode], cavity=cav,
                               cutoff=scn.cutoff)
        _, ptms, acc = aqec.logical_ptm_series(cfg, code, params)
        sides.append((ptms, acc))
    R0 = _pauli_coeffs(rho_l)
    states, acceptance = [], []
    for k in range(scn.n_cycles):
        R = sides[0][0][k] @ R0 @ sides[1][0][k].T
        rho = _coeffs_to_rho(R)
        rho = rho / np.trace(rho).real
        states.append(rho)
        acceptance.append(float(sides[0][1][k] * sides[1][1][k]))
    times = np.arange(1, scn.n_cycles + 1) * scn.tau
    return times, states, np.array(acceptance)


def _zero_crossing(t: np.ndarray, y: np.ndarray) -> float:
    """First linear-interpolated time where y drops to 0 (inf if it never does)."""
    for i in range(1, len(t)):
        if y[i] <= 0 < y[i - 1]:
            return t[i - 1] + (t[i] - t[i - 1]) * y[i - 1] / (y[i - 1] - y[i])
    return float("inf") if y[-1] > 0 else float(t[0])


# ---------------------------------------------------------------------------
# Scenario execution


def run_scenario(scn: Scenario, out_dir=".", force: bool = False) -> ResultSeries:
    params = load_device_params(scn.device)
    code = binomial_code(scn.cutoff)
    meta = {"config_hash": scn.config_hash(), "seed": scn.seed,
            "scenario": scn.name, "kind": scn.kind}

    if scn.kind == "decay":
        columns, fits = {}, {}
        curves = ["fock01"] + [m for m in scn.modes]
        times = None
        for curve in curves:
            if curve == "fock01":
                ccode = _fock01_code(scn.cutoff)
                cfg = aqec.CycleConfig(tau=scn.tau, n_cycles=scn.n_cycles,
                                       mode="uncorrected", cavity=scn.cavity[0],
                                       cutoff=scn.cutoff)
                t, f = aqec.process_fidelity_series(cfg, ccode, params)
            else:
                cfg = aqec.CycleConfig(tau=scn.tau, n_cycles=scn.n_cycles,
                                       mode=_MODE_MAP[curve], cavity=scn.cavity[0],
                                       cutoff=scn.cutoff)
                t, f = aqec.process_fidelity_series(cfg, code, params)
            times = t
            columns[curve] = f
            fit = fit_exponential_fidelity(t, f)
            fits[curve] = {"T": fit.T, "stderr_T": fit.stderr_T, "A": fit.A}
        series = ResultSeries(scn.name, "time_us", times, columns, fits, meta)

    elif scn.kind == "bell-decay":
        rho_l = prepare_logical_target("bell", 0.0, scn.preparation_fidelity)
        bell = prepare_logical_target("bell")
        columns, fits = {}, {}
        times = None
        for mode in scn.modes:
            times, states, acc = _two_sided_series(scn, code, params, mode, rho_l)
            fid = np.array([np.trace(bell @ r).real for r in states])
            neg = np.array([negativity(DensityMatrix(r, SpaceSpec((2, 2))))
                            for r in states])
            columns[f"bell_fidelity_{mode}"] = fid
            columns[f"negativity_{mode}"] = neg
            columns[f"acceptance_{mode}"] = acc
            fit = fit_exponential_fidelity(times, fid)
            fits[mode] = {"T": fit.T, "stderr_T": fit.stderr_T,
                          "negativity_lifetime": _zero_crossing(times, neg)}
        series = ResultSeries(scn.name, "time_us", times, columns, fits, meta)

    elif scn.kind == "bell-sweep":
        thetas = np.linspace(0.0, 2 * np.pi, scn.theta_points)
        columns = {}
        for mode in ("ideal", *scn.modes):
            bs = []
            for th in thetas:
                rho_l = prepare_logical_target(
                    "bell", th,
                    None if mode == "ideal" else scn.preparation_fidelity)
                if mode == "ideal":
                    rho = rho_l
                else:
                    _, states, _ = _two_sided_series(scn, code, params, mode, rho_l)
                    rho = states[-1]
                bs.append(chsh_bell(DensityMatrix(rho, SpaceSpec((2, 2))), th))
            columns[f"bell_signal_{mode}"] = np.array(bs)
        fits = {}
        for name, col in columns.items():
            try:
                sf = fit_damped_sinusoid(thetas, col)
                fits[name] = {"max": float(np.max(col)), "omega": sf.omega}
            except FitError:
                fits[name] = {"max": float(np.max(col))}
        series = ResultSeries(scn.name, "theta_rad", thetas, columns, fits, meta)

    elif scn.kind == "wigner":
        # render at an enlarged cutoff so displacements out to |beta|=2.5
        # stay below the truncation-warning threshold
        state = logical_state(binomial_code(max(scn.cutoff, 50)),
                              1 / np.sqrt(2), -1j / np.sqrt(2))
        ax = np.linspace(-2.5, 2.5, 41)
        wg = wigner(state.to_density_matrix(), ax, ax)
        series = ResultSeries(scn.name, "re_beta", wg.re_axis,
                              {f"im_{i}": wg.values[i, :]
                               for i in range(len(wg.im_axis))}, {}, meta)

    path = os.path.join(out_dir, f"{scn.name}.csv")
    os.makedirs(out_dir, exist_ok=True)
    series.to_csv(path, force=force)
    _plot_series(series, os.path.join(out_dir, f"{scn.name}.png"))
    return series


def _plot_series(series: ResultSeries, path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for name, col in series.columns.items():
        ax.plot(series.axis, col, marker="o", ms=3, label=name)
    ax.set_xlabel(series.axis_name)
    ax.legend(fontsize=7)
    ax.set_title(series.name)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def fit_and_report(series: ResultSeries, model: str = "exp-floor",
                   stream=None) -> dict:
    """Re-fit every column of a series and print a readable table."""
    stream = stream or sys.stdout
    out = {}
    print(f"{'column':<28}{'value':>12}{'stderr':>12}{'T=-tau/ln(1-p)':>18}",
          file=stream)
    for name, col in series.columns.items():
        if model == "exp-floor":
            try:
                fit = fit_exponential_fidelity(series.axis, col)
            except (FitError, ValueError):
                print(f"{name:<28}{'(no exp-floor fit)':>42}", file=stream)
                continue
            # per-cycle depolarization implied by the fitted decay time
            tau = series.axis[1] - series.axis[0] if len(series.axis) > 1 else 1.0
            p = 1.0 - np.exp(-tau / fit.T) if np.isfinite(fit.T) else 0.0
            cross = aqec.depolarizing_decay_time(p, tau) if 0 < p < 1 else float("inf")
            out[name] = {"T": fit.T, "stderr_T": fit.stderr_T, "p_per_cycle": p}
            print(f"{name:<28}{fit.T:>12.2f}{fit.stderr_T:>12.3f}{cross:>18.2f}",
                  file=stream)
        elif model == "damped-sinusoid":
            fit = fit_damped_sinusoid(series.axis, col)
            out[name] = {"A": fit.A, "omega": fit.omega, "tau": fit.tau}
            print(f"{name:<28}{fit.A:>12.4f}{fit.omega:>12.4f}{fit.tau:>18.2f}",
                  file=stream)
        else:
            raise ConfigError(f"unknown fit model {model!r}")
    return out


def budget_report(params: DeviceParams, stream=None) -> dict:
    stream = stream or sys.stdout
    out = {}
    for cav in sorted(params.error_budget):
        entries = params.error_budget[cav]
        factors = [entries[k] for k in ("gate", "uncorrectable", "measurement")]
        total = aqec.error_budget_compose(factors)
        T = aqec.depolarizing_decay_time(1 - total, 50.0)
        out[cav] = {"factors": factors, "total": total, "T_us": T}
        pct = " x ".join(f"{100 * f:.1f}%" for f in factors)
        print(f"{cav}: {pct} = {100 * total:.1f}%  ->  T = {T:.1f} us",
              file=stream)
    return out


# ---------------------------------------------------------------------------
# Entry point


def _cmd_run(args) -> int:
    scenarios = load_scenarios(args.path)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.cutoff is not None:
        overrides["cutoff"] = args.cutoff
    if overrides:
        scenarios = [scenario_from_dict({**s.__dict__, **overrides})
                     for s in scenarios]
    if args.jobs > 1 and len(scenarios) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(run_scenario, s, args.out_dir, args.force)
                       for s in scenarios]
            for f in futures:
                f.result()
    else:
        for s in scenarios:
            run_scenario(s, args.out_dir, args.force)
    for s in scenarios:
        print(f"{s.name}: wrote {os.path.join(args.out_dir, s.name)}.csv/.png")
    return 0


def _cmd_grape(args) -> int:
    with open(args.path, "rb") as fh:
        raw = tomllib.load(fh)
    params = load_device_params(raw.get("device"))
    code = binomial_code(args.cutoff or raw.get("cutoff", 10))
    problem = grape.aqec_problem(code, params, raw.get("cavity", "S1"),
                                 raw.get("tau", 50.0))
    n_steps = int(raw.get("n_steps", 1000))
    dt = float(raw.get("dt", 2e-3))
    init = grape.random_pulse(n_steps, 4, dt=dt, amplitude=raw.get("init_amplitude", 1.0),
                              seed=args.seed if args.seed is not None else raw.get("seed", 0))
    res = grape.optimize(problem, init,
                         max_iterations=int(raw.get("max_iterations", 1000)),
                         target_fidelity=raw.get("target_fidelity"))
    os.makedirs(args.out_dir, exist_ok=True)
    name = raw.get("name", "pulse")
    out = os.path.join(args.out_dir, f"{name}.csv")
    grape.save_pulse(res.pulse, out)
    print(f"{name}: fidelity {res.fidelity:.6f} converged={res.converged} "
          f"iterations={res.n_iterations} -> {out}")
    return 0 if res.converged else 1


def _cmd_wigner(args) -> int:
    cutoff = max(args.cutoff or 10, 50)  # headroom for corner |beta|^2 = 12.5
    code = binomial_code(cutoff)
    try:
        a_str, b_str = args.state.split(",")
        alpha, beta = complex(a_str), complex(b_str)
    except ValueError as exc:
        raise ConfigError(
            f"state spec must be 'alpha,beta' complex pair, got {args.state!r}"
        ) from exc
    norm = np.hypot(abs(alpha), abs(beta))
    state = logical_state(code, alpha / norm, beta / norm)
    axis = np.linspace(-2.5, 2.5, 61)
    wg = wigner(state.to_density_matrix(), axis, axis)
    os.makedirs(args.out_dir, exist_ok=True)
    series = ResultSeries("wigner", "re_beta", wg.re_axis,
                          {f"im_{i}": wg.values[i, :]
                           for i in range(len(wg.im_axis))},
                          {}, {"config_hash": "", "state": args.state})
    series.to_csv(os.path.join(args.out_dir, "wigner.csv"), force=args.force)
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    fig, ax = plt.subplots(figsize=(5, 4))
    m = ax.pcolormesh(wg.re_axis, wg.im_axis, wg.values, cmap="RdBu_r",
                      vmin=-2 / np.pi, vmax=2 / np.pi)
    fig.colorbar(m, ax=ax)
    ax.set_xlabel("Re(beta)")
    ax.set_ylabel("Im(beta)")
    fig.savefig(os.path.join(args.out_dir, "wigner.png"), dpi=120)
    plt.close(fig)
    print(f"wigner: wrote {args.out_dir}/wigner.csv/.png")
    return 0


def _cmd_bell_sweep(args) -> int:
    scenarios = load_scenarios(args.path)
    for s in scenarios:
        if s.kind != "bell-sweep":
            s = scenario_from_dict({**s.__dict__, "kind": "bell-sweep"})
        series = run_scenario(s, args.out_dir, args.force)
        for name, fit in series.fits.items():
            print(f"{s.name}/{name}: max B = {fit['max']:.4f}")
    return 0


def _cmd_budget(args) -> int:
    params = load_device_params(None if args.path == "default" else args.path)
    budget_report(params)
    return 0


def _cmd_fit(args) -> int:
    with open(args.path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if len(lines) < 2:
        raise ConfigError(f"{args.path}: no data rows to fit")
    names = lines[0].split(",")
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
    series = ResultSeries(os.path.basename(args.path), names[0], data[:, 0],
                          {n: data[:, i + 1] for i, n in enumerate(names[1:])})
    fit_and_report(series, args.model)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="elqsim",
                                description="Logical-qubit entanglement protection simulator")
    p.add_argument("--out-dir", default=".", help="artifact output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--cutoff", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--force", action="store_true",
                   help="overwrite outputs with mismatched config hash")
    sub = p.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("run", help="run scenario file")
    sp.add_argument("path")
    sp.set_defaults(func=_cmd_run)
    sp = sub.add_parser("grape", help="optimize a control pulse")
    sp.add_argument("path")
    sp.set_defaults(func=_cmd_grape)
    sp = sub.add_parser("wigner", help="Wigner snapshot of a logical state")
    sp.add_argument("state", help="'alpha,beta' complex pair")
    sp.set_defaults(func=_cmd_wigner)
    sp = sub.add_parser("bell-sweep", help="Bell-signal phase sweep")
    sp.add_argument("path")
    sp.set_defaults(func=_cmd_bell_sweep)
    sp = sub.add_parser("budget", help="error-budget report")
    sp.add_argument("path", nargs="?", default="default")
    sp.set_defaults(func=_cmd_budget)
    sp = sub.add_parser("fit", help="fit a CSV series")
    sp.add_argument("path")
    sp.add_argument("--model", default="exp-floor",
                    choices=["exp-floor", "damped-sinusoid"])
    sp.set_defaults(func=_cmd_fit)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    except Exception as exc:  # runtime failures still get structured output
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line runner: `hamsym <subcommand> ...` or `hamsym run --config exp.ini`.

Outputs are CSV files with a ``# key: value`` metadata block followed by a
header row. The data section depends only on the inputs and the seed.
If ``--out`` is omitted, files land in $HAMSYM_OUTPUT_DIR (default: the
working directory).

Exit codes: 0 success, 1 internal error, 2 bad parameter, 3 unreadable or
missing input, 4 structure violation, 5 numerical failure.
"""
from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .core import StructureError
from .dynamics import (METHODS, IntegrationError, driven_pendulum_system, harmonic_system,
                       integrate, pendulum_system)
from .integrable import (KINDS, ActionAngleEnsemble, EncodedState, SeparatrixError,
                         decode_ensemble, encode_ensemble, evolve_encoded)
from .lie import (STATIONARY, NegativeActionError, ResonanceError, SingularActionError,
                  complexity_table, global_error_probe, lie_evolve,
                  one_step_error, twist_system)
from .observables import (BlockObservable, action_observable, coherence_observable,
                          energy_observable, expectation, shot_estimate)
from .quantize import HAMILTON_SCALE, equivalence_report, quantize
from .svgplot import PlotError, render
from .textio import (TextFormatError, dumps_array, dumps_ensemble, dumps_table, read_array,
                     read_ensemble, read_table)

EXIT_OK, EXIT_INTERNAL, EXIT_PARAM, EXIT_INPUT, EXIT_STRUCTURE, EXIT_NUMERIC = 0, 1, 2, 3, 4, 5
DEFAULT_SEED = 1234
OUTPUT_ENV = "HAMSYM_OUTPUT_DIR"
CONVENTION = ("H_c = 1/2 <psi|H|psi>; dz/dt = Omega grad H_c reproduces exp(-iHt) "
              f"(gradient scale {HAMILTON_SCALE}); z^T H~ z = 2 H_c runs at twice the frequency")
EXPERIMENT_KINDS = ("quantize-equivalence", "integrable-evolve", "observables", "lie-bench",
                    "complexity-table")


class ParameterError(ValueError):
    pass


class ConfigError(ValueError):
    """A config that parses but misses or mangles a field."""


class ConfigParseError(ConfigError):
    """A config file that cannot be read as INI text."""


def _floats(text, name="value") -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    try:
        return [float(x) for x in str(text).replace(";", ",").split(",") if x.strip()]
    except ValueError as exc:
        raise ParameterError(f"{name}: expected comma-separated numbers, got {text!r}") from exc


def _ints(text, name="value") -> list[int]:
    vals = _floats(text, name)
    if any(v != int(v) for v in vals):
        raise ParameterError(f"{name}: expected integers, got {text!r}")
    return [int(v) for v in vals]


def config_hash(params: dict) -> str:
    blob = json.dumps(params, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def metadata(command: str, params: dict, **extra) -> dict:
    meta = {"tool": "hamsym", "version": __version__, "command": command,
            "config_hash": config_hash({"command": command, **params}),
            "convention": CONVENTION}
    meta.update(extra)
    return meta


def output_path(out: Optional[str], default_name: str) -> Path:
    path = Path(out) if out else Path(os.environ.get(OUTPUT_ENV, ".")) / default_name
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


# experiments shared by subcommands and config runs

def random_hermitian(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return 0.5 * (a + a.conj().T)


def random_state(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed + 1)
    psi = rng.normal(size=n) + 1j * rng.normal(size=n)
    return psi / np.linalg.norm(psi)


def random_ensemble(n_traj: int, n_modes: int, seed: int) -> ActionAngleEnsemble:
    rng = np.random.default_rng(seed)
    return ActionAngleEnsemble(rng.uniform(0.1, 1.0, (n_traj, n_modes)),
                               rng.uniform(0.0, 2 * math.pi, (n_traj, n_modes)))


def exp_equivalence(hq, psi0, T: float, dt: float, integrator: str):
    if integrator not in ("verlet", "yoshida4", "rk4_reference"):
        raise ParameterError(f"integrator must be one of {METHODS}")
    if not (T > 0 and dt > 0):
        raise ParameterError("T and dt must be positive")
    rep = equivalence_report(hq, psi0, T, dt, integrator)
    rows = list(zip(rep.times, rep.error, rep.energy_drift))
    return ["t", "e", "H_c_drift"], rows, {"max_error": rep.max_error, "integrator": integrator,
                                           "dt": dt, "T": T}


def exp_evolve(ens: ActionAngleEnsemble, omega, dt: float, steps: int, kind: str):
    if kind not in KINDS:
        raise ParameterError(f"kind must be one of {KINDS}")
    if steps < 0:
        raise ParameterError("steps must be non-negative")
    enc = encode_ensemble(ens, kind)
    return decode_ensemble(evolve_encoded(enc, omega, dt, steps))


def build_observable(spec: str, n_traj: int, n_modes: int, omega, subset) -> BlockObservable:
    name, _, arg = spec.partition(":")
    if name == "action":
        if not arg:
            raise ParameterError("observable action needs a mode index, e.g. action:0")
        return action_observable(int(arg), n_traj, n_modes, subset)
    if name == "energy":
        if omega is None:
            raise ParameterError("observable energy needs --omega")
        if len(omega) != n_modes:
            raise ParameterError(f"--omega needs {n_modes} values")
        return energy_observable(omega, n_traj, subset)
    if name == "coherence":
        return coherence_observable(n_traj, n_modes, subset)
    raise ParameterError(f"unknown observable {spec!r}; use action:k, energy or coherence")


def exp_observe(ens: ActionAngleEnsemble, observable: str, omega, subset, shots, seed: int,
                kind: str = "entangled"):
    if shots is not None and shots < 1:
        raise ParameterError("shots must be a positive integer")
    if subset is not None and any(not 0 <= j < ens.n_traj for j in subset):
        raise ParameterError(f"subset indices must lie in 0..{ens.n_traj - 1}")
    f = build_observable(observable, ens.n_traj, ens.n_modes, omega, subset)
    enc = encode_ensemble(ens, kind)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        exact = expectation(enc, f, rescale_by_c=True)
    if shots is None:
        est, err, n_shots = float("nan"), float("nan"), 0
    else:
        r = shot_estimate(enc, f, shots, seed, rescale_by_c=True)
        est, err, n_shots = r.value, r.stderr, r.shots
    cols = ["exact", "estimate", "stderr", "shots", "seed", "n_subset", "n_traj"]
    return cols, [(exact, est, err, n_shots, seed, f.n_subset, ens.n_traj)], \
        {"observable": observable, "normalisation": "1/N_s over all trajectories"}


def exp_lie_series(ens: ActionAngleEnsemble, eps: float, dt: float, T: float, drive: float,
                   monitor: str, record_every: int):
    sys_ = twist_system(eps, n_modes=ens.n_modes, drive=drive)
    ref = STATIONARY if monitor == "stationary" else None
    run = lie_evolve(sys_, ens.actions, ens.angles, T, dt, monitor=ref, record_every=record_every)
    rows = list(zip(run.times, run.action_drift, run.angle_residual, run.eps_prime, run.eps_total))
    return ["t", "action_drift", "angle_residual", "eps_prime", "eps_total"], rows, {}


def exp_lie_bench(eps_list, dt_list, T_list, i0: float, theta0: float, drive: float):
    rows = []
    for eps in eps_list:
        sys_ = twist_system(eps, drive=drive)
        for dt in dt_list:
            for T in T_list:
                if T == 0:
                    err = one_step_error(sys_, [[i0]], [[theta0]], 0.0, dt)
                else:
                    err = float(global_error_probe(sys_, [[i0]], [[theta0]], T, dt,
                                                   checkpoints=1).errors[-1])
                rows.append((eps, dt, T, err))
    extra = {}
    one = [r for r in rows if r[2] == 0]
    if len({r[0] for r in one}) > 1 and len({r[1] for r in one}) > 1:
        x = np.array([[math.log(r[0]), math.log(r[1]), 1.0] for r in one])
        y = np.log([r[3] for r in one])
        a, b, _ = np.linalg.lstsq(x, y, rcond=None)[0]
        extra = {"one_step_eps_exponent": f"{a:.4f}", "one_step_dt_exponent": f"{b:.4f}"}
    return ["eps", "dt", "T", "error"], rows, extra


def exp_complexity(n_modes, n_traj, eps, eps_t, nu, kappa, T_list, n_steps, branch):
    rows = []
    for T in T_list:
        r = complexity_table(n_modes, n_traj, eps, eps_t, nu, kappa, T, n_steps, branch)
        rows.append((T, r.quantum_width, r.quantum_depth, r.classical_memory, r.classical_cost,
                     r.n_steps, r.eps_total))
    cols = ["T", "quantum_width", "quantum_depth", "classical_memory", "classical_cost",
            "n_steps", "eps_total"]
    return cols, rows, {"classical_poly": "N^3", "branch": branch}


def write_csv(path: Path, cols, rows, meta):
    path.write_text(dumps_table(cols, rows, meta))
    return path


# encoded-state files

def dumps_encoded(enc: EncodedState, meta: dict) -> str:
    extra = dict(meta, kind=enc.kind, n_modes=enc.n_modes,
                 scales=";".join(repr(float(c)) for c in enc.scales))
    return dumps_array(enc.amplitudes, extra)


def read_encoded(path) -> EncodedState:
    amps, meta = read_array(path)
    try:
        kind = meta["kind"]
        n_modes = int(meta["n_modes"])
        scales = np.array(_floats(meta["scales"], "scales"))
    except KeyError as exc:
        raise TextFormatError(f"encoded-state file lacks metadata field {exc}") from exc
    if kind == "entangled":
        amps = amps.reshape(-1)
    return EncodedState(kind, amps, scales, n_modes)


# subcommands

def cmd_quantize(a):
    h, _ = read_array(a.input)
    hq = quantize(np.real(h), a.tol)
    meta = metadata("quantize", {"input": str(a.input), "tol": a.tol}, stable=hq.stable)
    out = output_path(a.out, "hq.csv")
    out.write_text(dumps_array(hq.h_q, meta))
    return out


def cmd_equivalence(a):
    if a.hq:
        hq, _ = read_array(a.hq)
    else:
        hq = random_hermitian(a.dim, a.seed)
    psi0 = read_array(a.psi0)[0].reshape(-1) if a.psi0 else random_state(hq.shape[0], a.seed)
    params = {"hq": a.hq, "dim": a.dim, "seed": a.seed, "T": a.T, "dt": a.dt,
              "integrator": a.integrator}
    cols, rows, extra = exp_equivalence(hq, psi0, a.T, a.dt, a.integrator)
    return write_csv(output_path(a.out, "equivalence.csv"), cols, rows,
                     metadata("equivalence", params, **extra))


def _canonical_system(a):
    if a.system == "harmonic":
        return harmonic_system(a.omega)
    if a.system == "pendulum":
        return pendulum_system()
    if a.system == "driven_pendulum":
        return driven_pendulum_system(a.eps, a.drive)
    if a.system == "twist":
        return twist_system(a.eps, drive=a.drive).as_canonical()
    raise ParameterError(f"unknown system {a.system!r}")


def cmd_integrate(a):
    system = _canonical_system(a)
    z0 = np.array(_floats(a.z0, "--z0"))
    if z0.size != 2 * system.n:
        raise ParameterError(f"--z0 needs {2 * system.n} numbers (q then p)")
    if not (a.T > 0 and a.dt > 0):
        raise ParameterError("T and dt must be positive")
    traj = integrate(system, z0, a.T, a.dt, a.method, record_every=a.record_every)
    energy = [float(system.hamiltonian(q, p, t)) for q, p, t in zip(traj.q, traj.p, traj.times)]
    cols = (["t"] + [f"q{k}" for k in range(system.n)] + [f"p{k}" for k in range(system.n)]
            + ["H"])
    rows = [(t, *z, e) for t, z, e in zip(traj.times, traj.states, energy)]
    params = {k: getattr(a, k) for k in ("system", "z0", "T", "dt", "method", "eps", "drive",
                                         "omega", "record_every")}
    return write_csv(output_path(a.out, "trajectory.csv"), cols, rows,
                     metadata("integrate", params))


def cmd_encode(a):
    ens = read_ensemble(a.ensemble)
    if a.kind not in KINDS:
        raise ParameterError(f"kind must be one of {KINDS}")
    enc = encode_ensemble(ens, a.kind)
    out = output_path(a.out, "state.csv")
    out.write_text(dumps_encoded(enc, metadata("encode", {"ensemble": str(a.ensemble),
                                                          "kind": a.kind})))
    return out


def cmd_evolve(a):
    omega = _floats(a.omega, "--omega")
    params = {"ensemble": a.ensemble, "state": a.state, "omega": omega, "dt": a.dt,
              "steps": a.steps, "kind": a.kind}
    meta = metadata("evolve", params)
    if a.state:
        enc = read_encoded(a.state)
        if a.steps < 0:
            raise ParameterError("steps must be non-negative")
        out = output_path(a.out, "state_evolved.csv")
        out.write_text(dumps_encoded(evolve_encoded(enc, omega, a.dt, a.steps), meta))
        return out
    if not a.ensemble:
        raise ParameterError("give --ensemble or --state")
    ens = exp_evolve(read_ensemble(a.ensemble), omega, a.dt, a.steps, a.kind)
    out = output_path(a.out, "ensemble_evolved.csv")
    out.write_text(dumps_ensemble(ens, meta))
    return out


def cmd_observe(a):
    ens = read_ensemble(a.ensemble)
    subset = _ints(a.subset, "--subset") if a.subset else None
    omega = _floats(a.omega, "--omega") if a.omega else None
    params = {"ensemble": str(a.ensemble), "observable": a.observable, "subset": subset,
              "omega": omega, "shots": a.shots, "seed": a.seed, "kind": a.kind}
    cols, rows, extra = exp_observe(ens, a.observable, omega, subset, a.shots, a.seed, a.kind)
    return write_csv(output_path(a.out, "observe.csv"), cols, rows,
                     metadata("observe", params, **extra))


def cmd_lie(a):
    if a.system != "twist":
        raise ParameterError("only the twist system is available for Lie stepping")
    ens = read_ensemble(a.ensemble)
    params = {"ensemble": str(a.ensemble), "eps": a.eps, "dt": a.dt, "T": a.T,
              "drive": a.drive, "monitor": a.monitor, "record_every": a.record_every}
    cols, rows, extra = exp_lie_series(ens, a.eps, a.dt, a.T, a.drive, a.monitor,
                                       a.record_every)
    return write_csv(output_path(a.out, "lie_series.csv"), cols, rows,
                     metadata("lie", params, **extra))


def cmd_lie_bench(a):
    eps, dts, Ts = _floats(a.eps, "--eps"), _floats(a.dt, "--dt"), _floats(a.T, "--T")
    params = {"eps": eps, "dt": dts, "T": Ts, "I0": a.I0, "theta0": a.theta0, "drive": a.drive}
    cols, rows, extra = exp_lie_bench(eps, dts, Ts, a.I0, a.theta0, a.drive)
    return write_csv(output_path(a.out, "lie_bench.csv"), cols, rows,
                     metadata("lie-bench", params, **extra))


def cmd_complexity(a):
    Ts = _floats(a.T, "--T")
    params = {"N": a.N, "Ns": a.Ns, "eps": a.eps, "eps_t": a.eps_t, "nu": a.nu,
              "kappa": a.kappa, "T": Ts, "n_steps": a.n_steps, "branch": a.branch}
    cols, rows, extra = exp_complexity(a.N, a.Ns, a.eps, a.eps_t, a.nu, a.kappa, Ts,
                                       a.n_steps, a.branch)
    return write_csv(output_path(a.out, "complexity.csv"), cols, rows,
                     metadata("complexity", params, **extra))


def cmd_plot(a):
    table = read_table(a.csv)
    ys = [c.strip() for c in a.y.split(",") if c.strip()]
    svg = render(table, a.x, ys, log=not a.linear, title=a.title or "")
    out = output_path(a.out, "plot.svg")
    out.write_text(svg)
    return out


# config-driven runs

@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    params: dict
    seed: int = DEFAULT_SEED
    out: Optional[str] = None
    base_dir: Path = field(default=Path("."))

    def require(self, *names):
        missing = [n for n in names if n not in self.params]
        if missing:
            raise ConfigError(f"{self.kind}: missing required field(s): {', '.join(missing)}")

    def get(self, name, default=None, conv=str):
        if name not in self.params:
            return default
        try:
            return conv(self.params[name])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"field {name!r}: cannot parse {self.params[name]!r}") from exc

    def path(self, name) -> Path:
        p = Path(self.params[name])
        return p if p.is_absolute() else self.base_dir / p

    @property
    def hash(self) -> str:
        return config_hash({"kind": self.kind, "seed": self.seed, **self.params})


def parse_config(path) -> ExperimentConfig:
    """INI text with an [experiment] section (kind, seed, out) and a [parameters] section."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        cp.read_string(path.read_text())
    except configparser.Error as exc:
        raise ConfigParseError(f"cannot parse {path}: {exc}") from exc
    if "experiment" not in cp:
        raise ConfigError("missing [experiment] section")
    exp = cp["experiment"]
    kind = exp.get("kind")
    if kind is None:
        raise ConfigError("field 'kind' is required in [experiment]")
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(f"field 'kind': unknown experiment {kind!r}; "
                          f"choose from {', '.join(EXPERIMENT_KINDS)}")
    try:
        seed = int(exp.get("seed", str(DEFAULT_SEED)))
    except ValueError as exc:
        raise ConfigError(f"field 'seed': not an integer: {exp.get('seed')!r}") from exc
    params = dict(cp["parameters"]) if "parameters" in cp else {}
    return ExperimentConfig(kind, params, seed, exp.get("out"), path.parent)


def _config_ensemble(cfg: ExperimentConfig) -> ActionAngleEnsemble:
    if "ensemble" in cfg.params:
        return read_ensemble(cfg.path("ensemble"))
    cfg.require("n_traj", "n_modes")
    return random_ensemble(cfg.get("n_traj", conv=int), cfg.get("n_modes", conv=int), cfg.seed)


def run(cfg: ExperimentConfig) -> Path:
    meta_params = {"kind": cfg.kind, "seed": cfg.seed, **cfg.params}
    if cfg.kind == "quantize-equivalence":
        cfg.require("T", "dt")
        ham = cfg.get("hamiltonian", "random")
        if "hq" in cfg.params:
            hq = read_array(cfg.path("hq"))[0]
        elif ham == "rotation":
            hq = np.array([[cfg.get("omega", 1.0, float)]], dtype=complex)
        elif ham == "random":
            hq = random_hermitian(cfg.get("dim", 2, int), cfg.seed)
        else:
            raise ConfigError(f"field 'hamiltonian': unknown value {ham!r}")
        psi0 = random_state(hq.shape[0], cfg.seed)
        cols, rows, extra = exp_equivalence(hq, psi0, cfg.get("T", conv=float),
                                            cfg.get("dt", conv=float),
                                            cfg.get("integrator", "verlet"))
        name = "equivalence.csv"
    elif cfg.kind == "integrable-evolve":
        cfg.require("omega", "dt", "steps")
        ens = exp_evolve(_config_ensemble(cfg), _floats(cfg.params["omega"], "omega"),
                         cfg.get("dt", conv=float), cfg.get("steps", conv=int),
                         cfg.get("encoding", "entangled"))
        out = output_path(cfg.out, "ensemble_evolved.csv")
        out.write_text(dumps_ensemble(ens, metadata("run", meta_params)))
        return out
    elif cfg.kind == "observables":
        cfg.require("observable", "shots")
        ens = _config_ensemble(cfg)
        subset = _ints(cfg.params["subset"], "subset") if "subset" in cfg.params else None
        omega = _floats(cfg.params["omega"], "omega") if "omega" in cfg.params else None
        cols, rows, extra = exp_observe(ens, cfg.params["observable"], omega, subset,
                                        cfg.get("shots", conv=int), cfg.seed,
                                        cfg.get("encoding", "entangled"))
        name = "observe.csv"
    elif cfg.kind == "lie-bench":
        cfg.require("eps", "dt")
        cols, rows, extra = exp_lie_bench(_floats(cfg.params["eps"], "eps"),
                                          _floats(cfg.params["dt"], "dt"),
                                          _floats(cfg.get("T", "0"), "T"),
                                          cfg.get("I0", 2.5, float), cfg.get("theta0", 0.4, float),
                                          cfg.get("drive", 1.0, float))
        name = "lie_bench.csv"
    else:
        cfg.require("N", "Ns", "eps", "eps_t", "nu", "kappa", "T")
        n_steps = cfg.get("n_steps", None, float)
        cols, rows, extra = exp_complexity(cfg.get("N", conv=int), cfg.get("Ns", conv=int),
                                           cfg.get("eps", conv=float), cfg.get("eps_t", conv=float),
                                           cfg.get("nu", conv=float), cfg.get("kappa", conv=float),
                                           _floats(cfg.params["T"], "T"), n_steps,
                                           cfg.get("branch", "auto"))
        name = "complexity.csv"
    return write_csv(output_path(cfg.out, name), cols, rows,
                     metadata("run", meta_params, **extra))


def cmd_run(a):
    return run(parse_config(a.config))


# parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hamsym",
        description="Quantum-symplectic simulation toolkit. Files default to "
                    f"${OUTPUT_ENV} (or the working directory) when --out is omitted.")
    p.add_argument("--version", action="version", version=f"hamsym {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("quantize", help="quantize a J-commuting quadratic Hamiltonian matrix")
    s.add_argument("--input", required=True, help="real 2N x 2N matrix CSV (H tilde)")
    s.add_argument("--tol", type=float, default=1e-10, help="commutator tolerance")
    s.add_argument("--out", help="output complex matrix CSV")
    s.set_defaults(func=cmd_quantize)

    s = sub.add_parser("equivalence", help="Schrodinger vs Hamilton flow error series")
    s.add_argument("--hq", help="complex Hermitian matrix CSV; random if omitted")
    s.add_argument("--dim", type=int, default=2, help="size of the random Hamiltonian")
    s.add_argument("--psi0", help="complex initial state CSV; random if omitted")
    s.add_argument("--seed", type=int, default=DEFAULT_SEED, help="seed for random inputs")
    s.add_argument("--T", type=float, default=10.0, help="final time")
    s.add_argument("--dt", type=float, default=0.01, help="time step")
    s.add_argument("--integrator", default="verlet", choices=METHODS)
    s.add_argument("--out", help="output CSV (t, e, H_c_drift)")
    s.set_defaults(func=cmd_equivalence)

    s = sub.add_parser("integrate", help="integrate a bundled canonical system")
    s.add_argument("--system", default="pendulum",
                   choices=("harmonic", "pendulum", "driven_pendulum", "twist"))
    s.add_argument("--z0", required=True, help="initial state q...,p... (comma separated)")
    s.add_argument("--T", type=float, required=True, help="final time")
    s.add_argument("--dt", type=float, required=True, help="time step")
    s.add_argument("--method", default="verlet", choices=METHODS)
    s.add_argument("--eps", type=float, default=0.1, help="perturbation strength")
    s.add_argument("--drive", type=float, default=1.0, help="drive frequency")
    s.add_argument("--omega", type=float, default=1.0, help="harmonic frequency")
    s.add_argument("--record-every", type=int, default=1, help="keep every n-th step")
    s.add_argument("--out", help="output trajectory CSV")
    s.set_defaults(func=cmd_integrate)

    s = sub.add_parser("encode", help="KvN-encode an action-angle ensemble")
    s.add_argument("--ensemble", required=True, help="ensemble CSV with columns j,k,I,theta")
    s.add_argument("--kind", default="entangled", choices=KINDS)
    s.add_argument("--out", help="output complex state CSV")
    s.set_defaults(func=cmd_encode)

    s = sub.add_parser("evolve", help="evolve an encoded ensemble by diagonal unitaries")
    s.add_argument("--ensemble", help="ensemble CSV (output is an ensemble CSV)")
    s.add_argument("--state", help="encoded state CSV (output is a state CSV)")
    s.add_argument("--omega", required=True, help="mode frequencies, comma separated")
    s.add_argument("--dt", type=float, required=True, help="time step")
    s.add_argument("--steps", type=int, default=1, help="number of steps")
    s.add_argument("--kind", default="entangled", choices=KINDS)
    s.add_argument("--out", help="output CSV")
    s.set_defaults(func=cmd_evolve)

    s = sub.add_parser("observe", help="exact and sampled ensemble observables")
    s.add_argument("--ensemble", required=True, help="ensemble CSV")
    s.add_argument("--observable", required=True, help="action:k, energy or coherence")
    s.add_argument("--omega", help="mode frequencies for the energy observable")
    s.add_argument("--subset", help="trajectory indices, comma separated (default all)")
    s.add_argument("--shots", type=int, help="number of simulated measurements")
    s.add_argument("--seed", type=int, default=DEFAULT_SEED, help="sampling seed")
    s.add_argument("--kind", default="entangled", choices=KINDS)
    s.add_argument("--out", help="output report CSV")
    s.set_defaults(func=cmd_observe)

    s = sub.add_parser("lie", help="Lie-transform stepping of an ensemble")
    s.add_argument("--system", default="twist", help="near-integrable system (twist)")
    s.add_argument("--eps", type=float, required=True, help="perturbation strength")
    s.add_argument("--dt", type=float, required=True, help="time step")
    s.add_argument("--T", type=float, required=True, help="total time")
    s.add_argument("--drive", type=float, default=1.0, help="perturbation frequency")
    s.add_argument("--ensemble", required=True, help="ensemble CSV")
    s.add_argument("--monitor", default="start", choices=("start", "stationary"),
                   help="generator used for the barred-variable diagnostics")
    s.add_argument("--record-every", type=int, default=1, help="keep every n-th step")
    s.add_argument("--out", help="output series CSV")
    s.set_defaults(func=cmd_lie)

    s = sub.add_parser("lie-bench", help="Lie-step error grid over eps, dt and T")
    s.add_argument("--eps", default="0.04,0.02,0.01", help="eps values")
    s.add_argument("--dt", default="0.2,0.1,0.05", help="time steps")
    s.add_argument("--T", default="0", help="horizons; 0 means a single step")
    s.add_argument("--I0", type=float, default=2.5, help="initial action")
    s.add_argument("--theta0", type=float, default=0.4, help="initial angle")
    s.add_argument("--drive", type=float, default=1.0, help="perturbation frequency")
    s.add_argument("--out", help="output grid CSV")
    s.set_defaults(func=cmd_lie_bench)

    s = sub.add_parser("complexity", help="quantum versus classical cost table")
    s.add_argument("--N", type=int, required=True, help="modes per trajectory")
    s.add_argument("--Ns", type=int, required=True, help="number of trajectories")
    s.add_argument("--eps", type=float, default=0.1, help="perturbation strength")
    s.add_argument("--eps-t", type=float, default=0.01, help="target total error")
    s.add_argument("--nu", type=float, default=2.0, help="per-step error order")
    s.add_argument("--kappa", type=float, default=4.0, help="classical integrator order")
    s.add_argument("--T", default="10,100,1000", help="total times")
    s.add_argument("--n-steps", type=float, help="step count for the nu = 1 branch")
    s.add_argument("--branch", default="auto", choices=("auto", "root", "linear"))
    s.add_argument("--out", help="output table CSV")
    s.set_defaults(func=cmd_complexity)

    s = sub.add_parser("plot", help="static SVG line plot of CSV columns")
    s.add_argument("--csv", required=True, help="input CSV with a header row")
    s.add_argument("--x", required=True, help="x column")
    s.add_argument("--y", required=True, help="y columns, comma separated")
    s.add_argument("--linear", action="store_true", help="linear axes (default log-log)")
    s.add_argument("--title", help="plot title")
    s.add_argument("--out", help="output SVG")
    s.set_defaults(func=cmd_plot)

    s = sub.add_parser("run", help="run an experiment described by an INI config")
    s.add_argument("--config", required=True, help="INI file with [experiment] and [parameters]")
    s.set_defaults(func=cmd_run)
    return p


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, StructureError):
        return EXIT_STRUCTURE
    if isinstance(exc, (IntegrationError, SeparatrixError, NegativeActionError, ResonanceError,
                        SingularActionError, FloatingPointError)):
        return EXIT_NUMERIC
    if isinstance(exc, (FileNotFoundError, TextFormatError, ConfigParseError, IsADirectoryError)):
        return EXIT_INPUT
    if isinstance(exc, (ValueError, KeyError, PlotError)):
        return EXIT_PARAM
    return EXIT_INTERNAL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out = args.func(args)
    except Exception as exc:  # reported, mapped to an exit code
        code = exit_code(exc)
        if code == EXIT_INTERNAL:
            raise
        print(f"hamsym {args.command}: error: {exc}", file=sys.stderr)
        return code
    print(out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Command-line experiment runner.

    ionsim <experiment> [--config PATH] [--seed N] [--out DIR] [--workers N]
                        [--dump-circuit] [--refocus] [--strict-phase]

Each run writes one or more CSV files and ``manifest.json`` into the output
directory. Failures print a JSON object to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import platform
import sys
import time
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .channels import LindbladTerm, MasterEquation, apply_channel, integrate_master_equation, trotter_evolve
from .circuits import (
    Circuit,
    circuit_realization,
    coherent_block,
    default_flip_qubit,
    dissipative_block,
    measure_stabilizer,
    qnd_readout,
    system_channel,
)
from .config import EXPERIMENTS, ExperimentConfig, line_of
from .errors import CapacityError, ConfigError, IonSimError
from .gates import HamiltonianTerm
from .identities import verify_identities
from .models import (
    color_code_seven,
    ground_space_weight,
    logical_gate,
    logical_prepare_zero,
    pump_channels,
    syndrome,
    toric_two_plaquette,
)
from .noise import NoiseModel, ordering_bootstrap, pumping_circuit, repeated_pumping_mc
from .qstate import (
    DensityMatrix,
    PauliString,
    StateVector,
    expectation,
    fidelity,
    new_basis_state,
    product_state,
    random_state,
    trace_distance,
)


@dataclass
class Result:
    tables: dict = field(default_factory=dict)  # file name -> CSV text
    circuit: Circuit | None = None
    lines: list = field(default_factory=list)  # human-readable report
    ok: bool = True


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(header: list, rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _pauli(label: str, field_name: str) -> PauliString:
    try:
        return PauliString.from_label(label)
    except ValueError as exc:
        raise ConfigError(str(exc), field=field_name) from None


def _initial_state(cfg: ExperimentConfig, n: int, default: str) -> StateVector:
    spec = cfg.initial or default
    if spec == "random":
        rng = np.random.default_rng(cfg.seed)
        return product_state([random_state(1, rng).amplitudes for _ in range(n)])
    if len(spec) != n or set(spec) - {"0", "1"}:
        raise ConfigError(f"initial must be 'random' or {n} bits, got {spec!r}", field="initial")
    return new_basis_state(n, spec)


def _with_ancilla(psi: StateVector) -> StateVector:
    n = psi.num_qubits + 1
    amps = np.zeros(2**n, dtype=complex)
    amps[0::2] = psi.amplitudes
    return StateVector(amps, n)


def _pair_labels(n: int) -> list[tuple[str, PauliString]]:
    out = []
    for i in range(n):
        for j in range(i + 1, n):
            out.append((f"Z{i + 1}Z{j + 1}", PauliString.from_sparse(n, {i: "Z", j: "Z"})))
    return out


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def run_verify(cfg: ExperimentConfig) -> Result:
    res = Result()
    results = verify_identities(strict=cfg.strict_phase)
    rows = []
    for r in results:
        rows.append([r.name, r.deviation, r.tolerance, r.passed])
        res.lines.append(f"{'PASS' if r.passed else 'FAIL'}  {r.name}  deviation={r.deviation:.3e}")
    res.tables["identities.csv"] = write_csv(["identity", "deviation", "tolerance", "passed"], rows)
    res.ok = all(r.passed for r in results)
    res.circuit = coherent_block(_pauli(cfg.stabilizer, "stabilizer"), cfg.phi, cfg.refocus)
    return res


def run_coherent(cfg: ExperimentConfig) -> Result:
    a = _pauli(cfg.stabilizer, "stabilizer")
    n = a.num_qubits
    circuit = coherent_block(a, cfg.phi, cfg.refocus)
    psi0 = _initial_state(cfg, n, "1" * n)
    state = _with_ancilla(psi0)
    anc_z = PauliString.from_sparse(n + 1, {0: "Z"})
    sys_a = a.embed(n + 1, 1)
    zs = [PauliString.from_sparse(n + 1, {k + 1: "Z"}) for k in range(n)]
    ref = _with_ancilla(psi0)
    header = ["step", "A", *[f"Z{k + 1}" for k in range(n)], "ancilla_Z", "return_fidelity"]
    rows = []
    for step in range(cfg.steps + 1):
        if step:
            state = circuit.apply(state)
        rows.append([step, expectation(state, sys_a), *[expectation(state, z) for z in zs],
                     expectation(state, anc_z), fidelity(state, ref)])
    return Result({"coherent_evolve.csv": write_csv(header, rows)}, circuit)


def run_pump(cfg: ExperimentConfig) -> Result:
    a = _pauli(cfg.stabilizer, "stabilizer")
    n = a.num_qubits
    flip_qubit = cfg.flips.get(cfg.stabilizer, default_flip_qubit(a))
    circuit = dissipative_block(a, cfg.theta, flip_qubit, refocus=cfg.refocus, decompose=cfg.refocus)
    ch = system_channel(circuit)
    rho = _initial_state(cfg, n, "1" * n).to_density()
    pairs = _pair_labels(n)
    header = ["step", "A", *[p for p, _ in pairs]]
    rows = []
    for step in range(cfg.steps + 1):
        if step:
            rho = apply_channel(rho, ch)
        rows.append([step, expectation(rho, a), *[expectation(rho, s) for _, s in pairs]])
    return Result({"pump.csv": write_csv(header, rows)}, circuit)


def _cool(cfg: ExperimentConfig, model, rho: DensityMatrix, extra=()) -> tuple[list, list]:
    realization = "circuit" if cfg.refocus else "channel"
    names = cfg.schedule if cfg.schedule is not None else model.names
    try:
        channels = pump_channels(model, cfg.theta, names, realization)
    except KeyError as exc:
        raise ConfigError(f"unknown stabilizer {exc.args[0]!r} in schedule", field="schedule") from None
    header = ["step", "sweep", "pumped", *model.names, *[e for e, _ in extra], "ground_weight"]

    def row(step, sweep, pumped):
        return [step, sweep, pumped, *syndrome(rho, model), *[expectation(rho, op) for _, op in extra],
                ground_space_weight(rho, model)]

    rows = [row(0, 0, "")]
    step = 0
    for sweep in range(1, cfg.sweeps + 1):
        for name, ch in zip(names, channels):
            rho = apply_channel(rho, ch)
            step += 1
            rows.append(row(step, sweep, name))
    return header, rows


def _flips(cfg: ExperimentConfig) -> dict:
    return {k: int(v) for k, v in cfg.flips.items()}


def run_cool_toric(cfg: ExperimentConfig) -> Result:
    model = toric_two_plaquette(_flips(cfg))
    rho = _initial_state(cfg, 7, "random").to_density()
    header, rows = _cool(cfg, model, rho)
    first = model.stabilizers[0]
    circuit = dissipative_block(first.string, cfg.theta, first.flip_qubit, first.flip.symbols[first.flip.support[0]],
                                refocus=cfg.refocus, decompose=cfg.refocus)
    res = Result({"cool_toric.csv": write_csv(header, rows)}, circuit)
    res.lines.append(f"final ground-space weight {rows[-1][-1]:.12f}")
    return res


def run_cool_colorcode(cfg: ExperimentConfig) -> Result:
    model = color_code_seven(_flips(cfg))
    rho = _initial_state(cfg, 7, "0" * 7).to_density()
    header, rows = _cool(cfg, model, rho, [("Zbar", model.logical_z)])
    first = model.stabilizers[0]
    circuit = dissipative_block(first.string, cfg.theta, first.flip_qubit, first.flip.symbols[first.flip.support[0]],
                                refocus=cfg.refocus, decompose=cfg.refocus)
    res = Result({"cool_colorcode.csv": write_csv(header, rows)}, circuit)
    res.lines.append("final stabilizers " + " ".join(f"{v:+.12f}" for v in rows[-1][3:9]))
    return res


def run_logical(cfg: ExperimentConfig) -> Result:
    model = color_code_seven(_flips(cfg))
    rho = logical_prepare_zero(model, cfg.theta)
    header = ["step", "gate", *model.names, "Xbar", "Zbar", "ground_weight"]

    def row(step, gate):
        return [step, gate, *syndrome(rho, model), expectation(rho, model.logical_x),
                expectation(rho, model.logical_z), ground_space_weight(rho, model)]

    rows = [row(0, "prepare")]
    for k, g in enumerate(cfg.gates, 1):
        try:
            rho = logical_gate(rho, str(g), model)
        except ValueError as exc:
            raise ConfigError(str(exc), field="gates") from None
        rows.append(row(k, g))
    return Result({"logical_demo.csv": write_csv(header, rows)})


def run_qnd(cfg: ExperimentConfig) -> Result:
    a = _pauli(cfg.stabilizer, "stabilizer")
    n = a.num_qubits
    psi = _initial_state(cfg, n, "random")
    p_plus = 0.5 * (1 + expectation(psi, a))
    rows = []
    agree = 0
    plus = 0
    for trial in range(cfg.trajectories):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed, spawn_key=(trial,))))
        first, post = measure_stabilizer(psi, a, rng, cfg.refocus)
        second, _ = measure_stabilizer(post, a, rng, cfg.refocus)
        rows.append([trial, first, second])
        agree += first == second
        plus += first == 1
    res = Result({"qnd_measure.csv": write_csv(["trial", "first", "second"], rows)}, qnd_readout(a, cfg.refocus))
    res.lines.append(f"repeat agreement {agree}/{cfg.trajectories}")
    res.lines.append(f"P(+1) observed {plus / cfg.trajectories:.6f} expected {p_plus:.6f}")
    res.ok = agree == cfg.trajectories
    return res


def run_noise(cfg: ExperimentConfig) -> Result:
    nz = cfg.noise
    model = NoiseModel.from_spread(nz["spread"], nz["spread_convention"], mean_shift=nz["mean_shift"],
                                   targets=tuple(nz["targets"]), independent=nz["independent"],
                                   ms_std_dev=nz["ms_std_dev"])
    record = repeated_pumping_mc(cfg.trajectories, cfg.steps, cfg.seed, model, cfg.theta, cfg.workers)
    res = Result({"noise_mc.csv": record.to_csv()}, pumping_circuit(cfg.theta))
    if cfg.trajectories > 1 and cfg.steps >= 2:
        order = ordering_bootstrap(record)
        res.tables["ordering.csv"] = write_csv(
            ["step", "difference", "ci_lower", "ci_upper", "holds"],
            [[o.step, o.difference, o.lower, o.upper, o.holds] for o in order])
        res.lines.extend(f"step {o.step}: <ZiZ4> - <ZiZj> = {o.difference:+.4f} "
                         f"[{o.lower:+.4f}, {o.upper:+.4f}]" for o in order)
    if cfg.dump_trajectories:
        res.tables["noise_trajectories.csv"] = record.trajectories_csv()
    return res


def _equation(cfg: ExperimentConfig) -> MasterEquation:
    ham, jumps = [], []
    for k, t in enumerate(cfg.terms):
        kind = t.get("type")
        try:
            if kind == "hamiltonian":
                ham.append(HamiltonianTerm(float(t["coefficient"]), _pauli(t["string"], f"terms[{k}]")))
            elif kind == "pump":
                jumps.append(LindbladTerm.pump(_pauli(t["string"], f"terms[{k}]"),
                                               _pauli(t["flip"], f"terms[{k}]"), float(t["rate"])))
            else:
                raise ConfigError(f"term type must be 'hamiltonian' or 'pump', got {kind!r}", field=f"terms[{k}]")
        except KeyError as exc:
            raise ConfigError(f"term {k} lacks {exc.args[0]!r}", field=f"terms[{k}]") from None
    try:
        return MasterEquation(ham, jumps)
    except ValueError as exc:
        raise ConfigError(str(exc), field="terms") from None


def run_trotter(cfg: ExperimentConfig) -> Result:
    eq = _equation(cfg)
    n = eq.num_qubits
    rho0 = _initial_state(cfg, n, "1" * n).to_density()
    observables = []
    for t in list(eq.hamiltonian_terms) + [j for j in eq.lindblad_terms]:
        s = t.string if isinstance(t, HamiltonianTerm) else t.stabilizer
        if s.label() not in [o.label() for o in observables]:
            observables.append(s)
    builder = partial(circuit_realization, refocus=cfg.refocus)
    trotter = trotter_evolve(rho0, eq, cfg.tau, cfg.steps, builder)
    header = ["step", "time", "trace_distance"]
    for o in observables:
        header += [f"trotter_{o.symbols}", f"ode_{o.symbols}"]
    rows = []
    exact = rho0
    for step, rho in enumerate(trotter):
        if step:
            exact = integrate_master_equation(exact, eq, cfg.tau, cfg.dt)
        vals = []
        for o in observables:
            vals += [expectation(rho, o), expectation(exact, o)]
        rows.append([step, step * cfg.tau, trace_distance(rho, exact), *vals])
    return Result({"trotter_vs_ode.csv": write_csv(header, rows)})


RUNNERS = {
    "verify-identities": run_verify,
    "coherent-evolve": run_coherent,
    "pump": run_pump,
    "cool-toric": run_cool_toric,
    "cool-colorcode": run_cool_colorcode,
    "logical-demo": run_logical,
    "qnd-measure": run_qnd,
    "noise-mc": run_noise,
    "trotter-vs-ode": run_trotter,
}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ionsim", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON experiment config")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--out", type=Path, help="output directory (overrides the config)")
        p.add_argument("--workers", type=int, help="worker processes for noise-mc")
        p.add_argument("--dump-circuit", action="store_true", help="print the experiment's circuit")
        p.add_argument("--refocus", action="store_true", help="use echo-refocused global gates")
        p.add_argument("--strict-phase", action="store_true", help="compare unitaries including global phase")
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    data = {}
    source = None
    if args.config is not None:
        try:
            source = args.config.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}", field="config") from None
        try:
            data = json.loads(source)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object", line=1)
        if data.get("experiment", args.experiment) != args.experiment:
            raise ConfigError(f"config is for {data['experiment']!r}, not {args.experiment!r}",
                              field="experiment", line=line_of(source, "experiment"))
    data["experiment"] = args.experiment
    if args.seed is not None:
        data["seed"] = args.seed
    if args.out is not None:
        data["out"] = str(args.out)
    if args.workers is not None:
        data["workers"] = args.workers
    if args.refocus:
        data["refocus"] = True
    if args.strict_phase:
        data["strict_phase"] = True
    return ExperimentConfig.from_dict(data, source)


def _versions() -> dict:
    return {"ionsim": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def run(cfg: ExperimentConfig, dump_circuit: bool = False, stream=None) -> int:
    """Run one experiment and write its outputs; returns the exit status."""
    stream = stream or sys.stdout
    start = time.perf_counter()
    result = RUNNERS[cfg.experiment](cfg)
    wall = time.perf_counter() - start
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in result.tables.items():
        (out / name).write_text(text)
    if result.circuit is not None and dump_circuit:
        text = result.circuit.dumps()
        (out / "circuit.txt").write_text(text)
        stream.write(text)
    manifest = {
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "versions": _versions(),
        "wall_time_s": wall,
        "outputs": sorted(result.tables),
        "status": "ok" if result.ok else "failed",
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    for line in result.lines:
        stream.write(line + "\n")
    return 0 if result.ok else 1


def _error(exc: Exception) -> dict:
    return {"error": type(exc).__name__, "message": str(exc),
            "field": getattr(exc, "field", None), "line": getattr(exc, "line", None)}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        return run(cfg, args.dump_circuit)
    except ConfigError as exc:
        code = 2
        err = exc
    except CapacityError as exc:
        code = 3
        err = exc
    except (IonSimError, ValueError, KeyError) as exc:
        code = 1
        err = exc
    sys.stderr.write(json.dumps(_error(err)) + "\n")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Gaussian gate-angle noise, Monte Carlo over repeated four-qubit pumping, dephasing limit.

The pumping circuit acts on five ions (ancilla 0, system 1..4) and uses only
global MS gates, global rotations and addressed z rotations on ions 0 and 4:

1. MS(pi/2, 0) on all ions;
2. the correcting gate C_4(theta), decomposed into an ancilla x rotation,
   the two-ion gate U_MS^(0,4)(theta, pi/2) (four global quarter-angle MS
   gates and addressed z(pi) echoes on 0 and 4) and a y rotation on ion 4;
   addressed x and y rotations are global rotations around one addressed
   z rotation;
3. MS(-pi/2, 0) on all ions;
4. optical pumping of the ancilla.

By default every addressed z rotation on ions 0 and 4 fluctuates.

Each trajectory carries the exact 16x16 system density matrix, so the
ancilla reset is averaged analytically and only the gate angles are
sampled. Trajectory ``t`` draws its angles from
``Generator(PCG64(SeedSequence(seed, spawn_key=(t,))))`` with numpy's
ziggurat ``standard_normal``; trajectories are processed in fixed-size
blocks and reduced in trajectory order, so results do not depend on the
number of workers.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channels import LindbladTerm, MasterEquation, apply_channel, rk4_step, stabilizer_pump_channel
from .circuits import Circuit, coherent_block, system_channel, two_ion_ms_via_refocus
from .gates import LOCAL_ROT, MS, GateOp, HamiltonianTerm, local_rotation, ms_basis, ms_gate, ms_spectrum, reset
from .qstate import DensityMatrix, PauliString, lift_operator, random_state, trace_distance

BLOCK_SIZE = 250
NUM_SYSTEM = 4
NUM_IONS = NUM_SYSTEM + 1

STABILIZER = PauliString("XXXX")
FLIP = PauliString("IIIZ")
PAIRS = list(itertools.combinations(range(1, NUM_SYSTEM + 1), 2))
OBSERVABLES = ["A"] + [f"Z{i}Z{j}" for i, j in PAIRS]


@dataclass(frozen=True)
class NoiseModel:
    """Gaussian angle noise: angle -> angle + mean_shift + N(0, std_dev^2).

    ``targets`` lists the ions whose addressed z rotations fluctuate. With
    ``independent`` every noisy gate draws its own offset; otherwise one
    offset per pump step is shared by all of them. ``ms_std_dev`` adds the
    same kind of noise to the MS angles (off by default).
    """

    std_dev: float = 0.3 * np.pi / 2
    mean_shift: float = 0.0
    targets: tuple = (0, 4)
    independent: bool = True
    ms_std_dev: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if not (self.std_dev >= 0 and self.ms_std_dev >= 0):
            raise ValueError("standard deviations must be non-negative")

    @classmethod
    def from_spread(cls, spread: float, convention: str = "std", **kw) -> "NoiseModel":
        """Build from a spread read either as a standard deviation or as a variance."""
        if convention == "std":
            return cls(std_dev=spread, **kw)
        if convention == "variance":
            return cls(std_dev=math.sqrt(spread), **kw)
        raise ValueError(f"unknown spread convention {convention!r}")

    def is_noisy(self, op: GateOp) -> bool:
        if op.kind == LOCAL_ROT and op.axis == "z" and op.targets[0] in self.targets:
            return True
        return op.kind == MS and self.ms_std_dev > 0


def sample_angle(nominal: float, model: NoiseModel, rng: np.random.Generator) -> float:
    return nominal + model.mean_shift + model.std_dev * rng.standard_normal()


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


# ---------------------------------------------------------------------------
# Circuit
# ---------------------------------------------------------------------------


def _addressed(axis: str, angle: float, q: int) -> list[GateOp]:
    """Addressed x or y rotation from global y or x rotations around an addressed z rotation."""
    ions = range(NUM_IONS)
    if axis == "x":
        return ([local_rotation("y", -np.pi / 2, i) for i in ions] + [local_rotation("z", angle, q)]
                + [local_rotation("y", np.pi / 2, i) for i in ions])
    if axis == "y":
        return ([local_rotation("x", np.pi / 2, i) for i in ions] + [local_rotation("z", angle, q)]
                + [local_rotation("x", -np.pi / 2, i) for i in ions])
    raise ValueError(axis)


def pumping_circuit(theta: float = np.pi / 2) -> Circuit:
    """One pump step for A = X1 X2 X3 X4 with flip Z4, from global gates and addressed z rotations."""
    ions = tuple(range(NUM_IONS))
    q = NUM_SYSTEM
    ops = [ms_gate(np.pi / 2, 0.0, ions)]
    ops += _addressed("x", -np.pi / 2, 0)
    ops += two_ion_ms_via_refocus(q, theta, np.pi / 2, NUM_IONS).ops
    ops += _addressed("x", np.pi / 2, 0)
    ops += _addressed("y", -theta, q)
    ops += [ms_gate(-np.pi / 2, 0.0, ions), reset(0)]
    return Circuit(NUM_IONS, ops, f"noisy pump XXXX flip Z4 theta={theta!r}")


@dataclass
class _Compiled:
    fixed: list          # len k+1, 32x32 unitaries between noisy gates
    weights: np.ndarray  # (k, 32): noisy gate j is V_j diag(exp(-i angle_j w_j)) V_j^dag
    nominal: np.ndarray  # (k,)
    is_ms: np.ndarray    # (k,) bool


def _lift(op: GateOp) -> np.ndarray:
    return Circuit(NUM_IONS, [op]).unitary()


def compile_circuit(circuit: Circuit, model: NoiseModel) -> _Compiled:
    """Split the unitary part into fixed segments and diagonalized noisy gates."""
    d = 2**NUM_IONS
    fixed, weights, nominal, is_ms = [], [], [], []
    seg = np.eye(d, dtype=complex)
    bits = (np.arange(d)[:, None] >> np.arange(NUM_IONS)[None, :]) & 1
    for op in circuit.unitary_part().ops:
        if not model.is_noisy(op):
            seg = _lift(op) @ seg
            continue
        if op.kind == MS:
            k = len(op.targets)
            v_local = ms_basis(op.phi, k)
            v = lift_operator(v_local, op.targets, NUM_IONS)
            w_local = ms_spectrum(k) / 4
            w = w_local[_local_index(bits, op.targets)]
        else:
            v = np.eye(d, dtype=complex)
            w = 0.5 * (1 - 2 * bits[:, op.targets[0]])
        fixed.append(v.conj().T @ seg)
        seg = v
        weights.append(w)
        nominal.append(op.theta)
        is_ms.append(op.kind == MS)
    fixed.append(seg)
    return _Compiled(fixed, np.array(weights, dtype=float).reshape(len(weights), d), np.array(nominal),
                     np.array(is_ms, dtype=bool))


def _local_index(bits: np.ndarray, targets) -> np.ndarray:
    return sum(bits[:, t] << j for j, t in enumerate(targets))


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


def _observable_tables():
    d = 2**NUM_SYSTEM
    bits = (np.arange(d)[:, None] >> np.arange(NUM_SYSTEM)[None, :]) & 1
    z = 1 - 2 * bits  # z[b, k] for system qubit k+1
    zz = np.stack([z[:, i - 1] * z[:, j - 1] for i, j in PAIRS], axis=1).astype(float)
    return STABILIZER.to_matrix(), zz


def _measure(rho: np.ndarray, a_mat: np.ndarray, zz: np.ndarray) -> np.ndarray:
    """rho: (T, 16, 16) -> (T, 7) observable values."""
    a = np.einsum("ij,tji->t", a_mat, rho).real
    diag = np.einsum("tii->ti", rho).real
    return np.concatenate([a[:, None], diag @ zz], axis=1)


def _draw_offsets(seed: int, indices: range, steps: int, comp: _Compiled, model: NoiseModel) -> np.ndarray:
    k = len(comp.nominal)
    out = np.empty((len(indices), steps, k))
    for row, t in enumerate(indices):
        rng = trajectory_rng(seed, t)
        if model.independent:
            g = rng.standard_normal((steps, k))
        else:
            g = np.repeat(rng.standard_normal((steps, 1)), k, axis=1)
        sd = np.where(comp.is_ms, model.ms_std_dev, model.std_dev)
        out[row] = model.mean_shift + sd * g
    return out


def _run_block(args) -> np.ndarray:
    """Observables (T, steps+1, 7) for trajectories ``start..stop``."""
    seed, start, stop, steps, theta, model = args
    comp = compile_circuit(pumping_circuit(theta), model)
    offsets = _draw_offsets(seed, range(start, stop), steps, comp, model)
    t_count = stop - start
    d = 2**NUM_SYSTEM
    a_mat, zz = _observable_tables()
    rho = np.zeros((t_count, d, d), dtype=complex)
    rho[:, d - 1, d - 1] = 1.0  # |1111>
    out = np.empty((t_count, steps + 1, len(OBSERVABLES)))
    out[:, 0] = _measure(rho, a_mat, zz)
    # columns of the full unitary with the ancilla (bit 0) in |0>
    cols = np.arange(d) * 2
    for s in range(steps):
        angles = comp.nominal[None, :] + offsets[:, s, :]
        u = np.broadcast_to(comp.fixed[0][:, cols], (t_count, 2 * d, d))
        for j in range(len(comp.nominal)):
            phase = np.exp(-1j * angles[:, j, None] * comp.weights[j][None, :])
            u = comp.fixed[j + 1] @ (phase[:, :, None] * u)
        k = u.reshape(t_count, d, 2, d)
        k0, k1 = k[:, :, 0, :], k[:, :, 1, :]
        rho = k0 @ rho @ k0.conj().transpose(0, 2, 1) + k1 @ rho @ k1.conj().transpose(0, 2, 1)
        out[:, s + 1] = _measure(rho, a_mat, zz)
    return out


@dataclass
class RunRecord:
    seed: int
    steps: int
    trajectory_count: int
    series: dict
    stderr: dict
    config: dict = field(default_factory=dict)
    samples: np.ndarray | None = field(default=None, repr=False)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "observable", "mean", "stderr"])
        for s in range(self.steps + 1):
            for name in OBSERVABLES:
                w.writerow([s, name, format(float(self.series[name][s]), ".17g"),
                            format(float(self.stderr[name][s]), ".17g")])
        return buf.getvalue()

    def trajectories_csv(self) -> str:
        if self.samples is None:
            raise ValueError("record holds no per-trajectory samples")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trajectory", "step", *OBSERVABLES])
        for t, traj in enumerate(self.samples):
            for s, row in enumerate(traj):
                w.writerow([t, s, *(format(float(v), ".17g") for v in row)])
        return buf.getvalue()


def repeated_pumping_mc(trajectories: int = 10000, steps: int = 6, seed: int = 0,
                        model: NoiseModel | None = None, theta: float = np.pi / 2, workers: int = 1,
                        keep_samples: bool = True) -> RunRecord:
    """Average the noisy pump sequence over seeded trajectories, starting from |1111>."""
    if trajectories < 1:
        raise ValueError("need at least one trajectory")
    if steps < 0:
        raise ValueError("steps must be >= 0")
    model = model or NoiseModel()
    jobs = [(seed, a, min(a + BLOCK_SIZE, trajectories), steps, theta, model)
            for a in range(0, trajectories, BLOCK_SIZE)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(_run_block, jobs))
    else:
        blocks = [_run_block(j) for j in jobs]
    samples = np.concatenate(blocks, axis=0)
    mean = samples.mean(axis=0)
    if trajectories > 1:
        err = samples.std(axis=0, ddof=1) / math.sqrt(trajectories)
    else:
        err = np.zeros_like(mean)
    series = {name: mean[:, k] for k, name in enumerate(OBSERVABLES)}
    stderr = {name: err[:, k] for k, name in enumerate(OBSERVABLES)}
    config = {"std_dev": model.std_dev, "mean_shift": model.mean_shift, "targets": list(model.targets),
              "independent": model.independent, "ms_std_dev": model.ms_std_dev, "theta": theta}
    return RunRecord(seed, steps, trajectories, series, stderr, config, samples if keep_samples else None)


def exact_pumping_series(steps: int, theta: float = np.pi / 2) -> dict:
    """Noiseless observables from the exact pump channel, for the noiseless-limit check."""
    ch = stabilizer_pump_channel(STABILIZER, FLIP, theta)
    d = 2**NUM_SYSTEM
    rho = np.zeros((d, d), dtype=complex)
    rho[d - 1, d - 1] = 1.0
    state = DensityMatrix(rho, NUM_SYSTEM)
    a_mat, zz = _observable_tables()
    rows = [_measure(state.matrix[None], a_mat, zz)[0]]
    for _ in range(steps):
        state = apply_channel(state, ch)
        rows.append(_measure(state.matrix[None], a_mat, zz)[0])
    rows = np.array(rows)
    return {name: rows[:, k] for k, name in enumerate(OBSERVABLES)}


@dataclass
class OrderingResult:
    step: int
    difference: float
    lower: float
    upper: float

    @property
    def holds(self) -> bool:
        return self.upper < 0


def ordering_bootstrap(record: RunRecord, first_step: int = 2, resamples: int = 2000,
                       seed: int = 12345) -> list[OrderingResult]:
    """Bootstrap 95% intervals of mean<Z_i Z_4> - mean<Z_i Z_j> (i, j != 4) per step."""
    if record.samples is None:
        raise ValueError("ordering check needs per-trajectory samples")
    with4 = [1 + k for k, (i, j) in enumerate(PAIRS) if j == NUM_SYSTEM]
    without = [1 + k for k, (i, j) in enumerate(PAIRS) if j != NUM_SYSTEM]
    diff = record.samples[:, :, with4].mean(axis=2) - record.samples[:, :, without].mean(axis=2)
    rng = np.random.default_rng(seed)
    n = diff.shape[0]
    idx = rng.integers(0, n, size=(resamples, n))
    out = []
    for s in range(first_step, record.steps + 1):
        boot = diff[idx, s].mean(axis=1)
        lo, hi = np.percentile(boot, [2.5, 97.5])
        out.append(OrderingResult(s, float(diff[:, s].mean()), float(lo), float(hi)))
    return out


# ---------------------------------------------------------------------------
# Dephasing limit
# ---------------------------------------------------------------------------


@dataclass
class DephasingReport:
    phi0: float
    sigma: float
    tau: float
    steps: int
    max_distance: float
    mean_distance: float
    probes: int


def averaged_coherent_channel(stabilizer: PauliString, phi0: float, sigma: float, nodes: int = 60):
    """Gaussian average over phi ~ N(phi0, sigma^2) of the coherent block, as a superoperator."""
    if sigma == 0:
        xs, ws = np.array([0.0]), np.array([1.0])
    else:
        xs, ws = np.polynomial.hermite_e.hermegauss(nodes)
        ws = ws / np.sqrt(2 * np.pi)
    n = stabilizer.num_qubits
    d = 2**n
    sup = np.zeros((d * d, d * d), dtype=complex)
    for x, w in zip(xs, ws):
        u = coherent_block(stabilizer, phi0 + sigma * x).unitary()
        u_sys = u.reshape(d, 2, d, 2)[:, 0, :, 0]
        sup += w * np.kron(u_sys, u_sys.conj())
    return sup


def dephasing_limit_check(phi0: float = 0.05, sigma: float = 0.05, tau: float = 1.0, steps: int = 1,
                          probes: int = 100, seed: int = 0, stabilizer: PauliString = STABILIZER,
                          nodes: int = 60) -> DephasingReport:
    """Compare the averaged noisy coherent block with RK4 steps of the dephasing master equation.

    The master equation has H = -(phi0/tau) A and the jump A at rate sigma^2/tau.
    """
    if max(abs(phi0), sigma) > 0.3:
        warnings.warn("phi0 or sigma outside the small-parameter regime", RuntimeWarning, stacklevel=2)
    d = 2**stabilizer.num_qubits
    sup = averaged_coherent_channel(stabilizer, phi0, sigma, nodes)
    ham = [HamiltonianTerm(-phi0 / tau, stabilizer)] if phi0 else []
    jumps = [LindbladTerm.dephasing(stabilizer, sigma**2 / tau)] if sigma else []
    eq = MasterEquation(ham, jumps, stabilizer.num_qubits)
    rng = np.random.default_rng(seed)
    dists = []
    for _ in range(probes):
        psi = random_state(stabilizer.num_qubits, rng).amplitudes
        rho = np.outer(psi, psi.conj())
        a, b = rho, rho
        for _ in range(steps):
            a = (sup @ a.reshape(-1)).reshape(d, d)
            b = rk4_step(b, eq, tau)
        dists.append(trace_distance(a, b))
    return DephasingReport(phi0, sigma, tau, steps, float(max(dists)), float(np.mean(dists)), probes)

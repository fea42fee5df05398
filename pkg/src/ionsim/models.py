"""Two-plaquette toric code and seven-qubit color code: stabilizers, cooling, logical gates.

Qubit labels in this module are 1-based system labels, as in the lattice
pictures; the system-only Pauli strings store label ``k`` at index ``k - 1``.

Geometry tables
---------------

Toric code on two plaquettes (a 2x3 grid of vertices, seven edges)::

    TL --e1-- TM --e5-- TR
    |         |         |
    e2   B1   e4   B2   e6
    |         |         |
    BL --e3-- BM --e7-- BR

    plaquettes  B1 = Z{1,2,3,4} flip X4     B2 = Z{4,5,6,7} flip X6
    vertices    A1 = X{1,2}   (TL) flip Z2   A2 = X{2,3}   (BL) flip Z3
                A3 = X{3,4,7} (BM) flip Z7   A4 = X{6,7}   (BR) flip Z6
                A5 = X{5,6}   (TR) flip Z5   A6 = X{1,4,5} (TM) flip Z1

The vertex flips hop an excitation along the chain A1 -> A2 -> ... -> A6, so a
single ordered sweep leaves every vertex at +1 (their product is the
identity). The plaquette flip X4 hops a B1 excitation onto B2 and X6 pushes a
B2 excitation out through the boundary.

Color code on three plaquettes sharing qubit 1::

    P1 = {1,2,3,4}   P2 = {1,3,5,6}   P3 = {1,2,5,7}
    A_k = X on P_k (flip Z on 4, 6, 7)   B_k = Z on P_k (flip X on 4, 6, 7)

Each corner qubit 4, 6, 7 belongs to one plaquette only, so every pump
leaves the other five stabilizers untouched.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .channels import KrausChannel, LindbladTerm, MasterEquation, apply_channel, stabilizer_pump_channel
from .errors import DomainError
from .gates import HamiltonianTerm
from .qstate import (
    DensityMatrix,
    PauliString,
    State,
    StateVector,
    apply_operator,
    as_density,
    expectation,
    new_basis_state,
)


@dataclass(frozen=True)
class StabilizerSpec:
    name: str
    string: PauliString
    flip: PauliString
    energy_coefficient: float = 1.0

    def __post_init__(self):
        if not self.string.is_hermitian():
            raise DomainError(f"{self.name}: stabilizer is not Hermitian")
        sq = self.string * self.string
        if sq.phase != 0 or sq.weight != 0:
            raise DomainError(f"{self.name}: stabilizer does not square to the identity")
        if self.flip.commutes_with(self.string):
            raise DomainError(f"{self.name}: flip {self.flip} commutes with the stabilizer")

    @property
    def flip_qubit(self) -> int:
        """1-based label of the flipped qubit (single-qubit flips)."""
        return self.flip.support[0] + 1

    def pump_channel(self, theta: float) -> KrausChannel:
        return stabilizer_pump_channel(self.string, self.flip, theta)


@dataclass(frozen=True)
class CodeModel:
    name: str
    num_system_qubits: int
    stabilizers: tuple
    logical_x: PauliString | None = None
    logical_z: PauliString | None = None
    notes: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "stabilizers", tuple(self.stabilizers))
        specs = self.stabilizers
        for s in specs:
            if s.string.num_qubits != self.num_system_qubits:
                raise DomainError(f"{s.name} acts on {s.string.num_qubits} qubits")
        for i, a in enumerate(specs):
            for b in specs[i + 1:]:
                if not a.string.commutes_with(b.string):
                    raise DomainError(f"{a.name} and {b.name} do not commute")
        for logical in (self.logical_x, self.logical_z):
            if logical is None:
                continue
            for s in specs:
                if not logical.commutes_with(s.string):
                    raise DomainError(f"logical {logical} does not commute with {s.name}")

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.stabilizers]

    def __getitem__(self, name: str) -> StabilizerSpec:
        for s in self.stabilizers:
            if s.name == name:
                return s
        raise KeyError(name)

    def gf2_rank(self) -> int:
        """Rank of the stabilizer generators as binary symplectic vectors."""
        rows = []
        for s in self.stabilizers:
            x, z, _ = s.string.masks()
            rows.append(x | (z << self.num_system_qubits))
        rank = 0
        for bit in range(2 * self.num_system_qubits):
            pivot = next((r for r in rows if (r >> bit) & 1), None)
            if pivot is None:
                continue
            rows.remove(pivot)
            rows = [r ^ pivot if (r >> bit) & 1 else r for r in rows]
            rank += 1
        return rank

    def ground_dimension(self) -> int:
        return 2 ** (self.num_system_qubits - self.gf2_rank())

    def ground_projector(self) -> np.ndarray:
        d = 2**self.num_system_qubits
        eye = np.eye(d)
        return reduce(lambda acc, s: acc @ (0.5 * (eye + s.string.to_matrix())), self.stabilizers, eye)

    def master_equation(self, gamma: float, energy: float = 0.0) -> MasterEquation:
        """Pump terms at rate ``gamma`` and optionally H = -energy * sum_i c_i A_i."""
        lindblad = [LindbladTerm.pump(s.string, s.flip, gamma) for s in self.stabilizers]
        ham = [HamiltonianTerm(-energy * s.energy_coefficient, s.string)
               for s in self.stabilizers] if energy else []
        return MasterEquation(ham, lindblad, self.num_system_qubits)

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "num_system_qubits": self.num_system_qubits,
            "stabilizers": [
                {"name": s.name, "string": s.string.label(), "flip": s.flip.label(),
                 "support": [q + 1 for q in s.string.support], "energy_coefficient": s.energy_coefficient}
                for s in self.stabilizers
            ],
        }
        if self.logical_x is not None:
            out["logical_x"] = self.logical_x.label()
        if self.logical_z is not None:
            out["logical_z"] = self.logical_z.label()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _spec(name: str, n: int, kind: str, labels, flip_kind: str, flip_label: int) -> StabilizerSpec:
    string = PauliString.from_sparse(n, {q - 1: kind for q in labels})
    flip = PauliString.from_sparse(n, {flip_label - 1: flip_kind})
    return StabilizerSpec(name, string, flip)


TORIC_PLAQUETTES = {"B1": ((1, 2, 3, 4), 4), "B2": ((4, 5, 6, 7), 6)}
TORIC_VERTICES = {
    "A1": ((1, 2), 2),
    "A2": ((2, 3), 3),
    "A3": ((3, 4, 7), 7),
    "A4": ((6, 7), 6),
    "A5": ((5, 6), 5),
    "A6": ((1, 4, 5), 1),
}

COLOR_PLAQUETTES = {1: ((1, 2, 3, 4), 4), 2: ((1, 3, 5, 6), 6), 3: ((1, 2, 5, 7), 7)}


def toric_two_plaquette(flips: dict | None = None) -> CodeModel:
    """Seven edge qubits, two plaquettes, six boundary-reduced vertices.

    Schedule order is the stabilizer order: vertices along the hopping chain,
    then the two plaquettes. ``flips`` overrides flip labels by stabilizer name.
    """
    flips = flips or {}
    n = 7
    specs = [_spec(k, n, "X", sup, "Z", flips.get(k, f)) for k, (sup, f) in TORIC_VERTICES.items()]
    specs += [_spec(k, n, "Z", sup, "X", flips.get(k, f)) for k, (sup, f) in TORIC_PLAQUETTES.items()]
    return CodeModel("toric-two-plaquette", n, specs)


def color_code_seven(flips: dict | None = None) -> CodeModel:
    """Seven-qubit color code with logical X = prod X and Z = prod Z."""
    flips = flips or {}
    n = 7
    specs = [_spec(f"A{k}", n, "X", sup, "Z", flips.get(f"A{k}", f)) for k, (sup, f) in COLOR_PLAQUETTES.items()]
    specs += [_spec(f"B{k}", n, "Z", sup, "X", flips.get(f"B{k}", f)) for k, (sup, f) in COLOR_PLAQUETTES.items()]
    return CodeModel("color-code-seven", n, specs, PauliString("X" * n), PauliString("Z" * n))


def syndrome(state: State, model: CodeModel) -> list[float]:
    return [expectation(state, s.string) for s in model.stabilizers]


def excitations(state: State, model: CodeModel) -> list[str]:
    """Names of the stabilizers with negative expectation."""
    return [s.name for s, v in zip(model.stabilizers, syndrome(state, model)) if v < 0]


def ground_space_weight(state: State, model: CodeModel) -> float:
    p = model.ground_projector()
    if isinstance(state, StateVector):
        return float(np.vdot(state.amplitudes, p @ state.amplitudes).real)
    return float(np.trace(p @ state.matrix).real)


def pump_channels(model: CodeModel, theta: float, schedule, realization: str) -> list[KrausChannel]:
    specs = [model[name] for name in schedule] if schedule is not None else list(model.stabilizers)
    if realization == "channel":
        return [s.pump_channel(theta) for s in specs]
    if realization == "circuit":
        from .circuits import dissipative_block, system_channel

        out = []
        for s in specs:
            q = s.flip.support[0]
            out.append(system_channel(dissipative_block(s.string, theta, q + 1, s.flip.symbols[q])))
        return out
    raise ValueError(f"unknown realization {realization!r}")


def cool_to_ground(model: CodeModel, rho0: State, theta: float, sweeps: int, schedule=None,
                   realization: str = "channel") -> tuple[DensityMatrix, list[list[float]]]:
    """Apply every pump in schedule order, ``sweeps`` times.

    Returns the final state and the syndrome after each pump, starting with the
    syndrome of ``rho0``.
    """
    if sweeps < 1:
        raise ValueError("sweeps must be >= 1")
    channels = pump_channels(model, theta, schedule, realization)
    rho = as_density(rho0)
    trace = [syndrome(rho, model)]
    for _ in range(sweeps):
        for ch in channels:
            rho = apply_channel(rho, ch)
            trace.append(syndrome(rho, model))
    return rho, trace


def sweeps_to_ground(model: CodeModel, rho0: State, theta: float, tol: float = 1e-8,
                     max_sweeps: int = 100) -> int:
    """Number of full sweeps until the ground-space weight reaches 1 - tol (-1 if never)."""
    channels = pump_channels(model, theta, None, "channel")
    p = model.ground_projector()
    rho = as_density(rho0).matrix
    for sweep in range(1, max_sweeps + 1):
        for ch in channels:
            rho = sum(e @ rho @ e.conj().T for e in ch.elements)
        if np.trace(p @ rho).real >= 1 - tol:
            return sweep
    return -1


def logical_prepare_zero(model: CodeModel, theta: float = np.pi / 2, max_sweeps: int = 200,
                         tol: float = 1e-12) -> DensityMatrix:
    """Pump |0...0> into the code space; for theta < pi/2 sweep until converged."""
    if model.logical_z is None:
        raise DomainError(f"{model.name} has no logical operators")
    rho = new_basis_state(model.num_system_qubits, "0" * model.num_system_qubits).to_density()
    channels = pump_channels(model, theta, None, "channel")
    for _ in range(max_sweeps):
        for ch in channels:
            rho = apply_channel(rho, ch)
        if ground_space_weight(rho, model) >= 1 - tol:
            break
    return rho


def logical_zero_state(model: CodeModel) -> StateVector:
    """|0bar>: the projection of |0...0> onto the code space, normalized."""
    n = model.num_system_qubits
    v = model.ground_projector() @ new_basis_state(n, "0" * n).amplitudes
    return StateVector(v, n, normalize=True)


_LOGICAL_LOCAL = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Z": np.diag([1, -1]).astype(complex),
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "K": np.diag([1, 1j]),
}


def _gate_key(which: str) -> str:
    # accepts "X", "xbar" or "X\u0304"
    key = which.upper().replace("BAR", "").replace("\u0304", "").strip()
    if key not in _LOGICAL_LOCAL:
        raise ValueError(f"unknown logical gate {which!r}")
    return key


def transversal_operator(which: str, num_qubits: int) -> np.ndarray:
    """Dense prod_i of the single-qubit gate ``which`` in {X, Z, H, K}."""
    return reduce(np.kron, [_LOGICAL_LOCAL[_gate_key(which)]] * num_qubits)


def logical_gate(state: State, which: str, model: CodeModel | None = None) -> State:
    """Apply the transversal logical gate X, Z, H or K on every system qubit."""
    key = _gate_key(which)
    if model is not None and ground_space_weight(state, model) < 1 - 1e-8:
        warnings.warn("state is not in the code space", RuntimeWarning, stacklevel=2)
    for q in range(state.num_qubits):
        state = apply_operator(state, _LOGICAL_LOCAL[key], (q,))
    return state

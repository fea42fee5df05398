"""Circuit type, printer/parser, equivalence checking and the gate-sequence builders.

Register layout: qubit 0 is the ancilla and system qubit ``k`` (1-based label)
is register qubit ``k``. Stabilizers passed to the builders are system-only
Pauli strings, so factor ``j`` of the string lives on register qubit ``j + 1``.

Time order: ``Circuit.ops[0]`` acts first. The dense unitary of a circuit is
``U = M[-1] @ ... @ M[0]``.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .channels import KrausChannel
from .errors import DimensionError, DomainError, UnregisteredTermError
from .gates import (
    CONTROLLED,
    LOCAL_ROT,
    MAX_DENSE_GATE_QUBITS,
    MS,
    RESET,
    GateOp,
    HamiltonianTerm,
    backward_ms_ops,
    correcting_gate,
    local_rotation,
    ms_gate,
    reset,
    rotation_matrix,
)
from .qstate import (
    PAULI_MATRICES,
    DensityMatrix,
    PauliString,
    State,
    StateVector,
    apply_local,
    apply_operator,
)

# Ancilla factor exp(sign * i * phi * sigma_axis), keyed by n mod 4
ANCILLA_FACTORS = {
    "X": {1: ("y", -1), 2: ("z", -1), 3: ("y", +1), 0: ("z", +1)},
    "Y": {1: ("x", +1), 2: ("z", -1), 3: ("x", -1), 0: ("z", +1)},
}
_MS_PHASE = {"X": 0.0, "Y": np.pi / 2}


@dataclass(eq=True)
class Circuit:
    """Ordered gate sequence on ``num_qubits`` qubits."""

    num_qubits: int
    ops: list = field(default_factory=list)
    metadata: str = ""

    def __post_init__(self):
        self.ops = list(self.ops)
        for op in self.ops:
            if any(not 0 <= t < self.num_qubits for t in op.targets):
                raise DimensionError(f"{op} does not fit a {self.num_qubits}-qubit register")

    def __len__(self) -> int:
        return len(self.ops)

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.num_qubits != self.num_qubits:
            raise DimensionError("cannot concatenate circuits on different registers")
        return Circuit(self.num_qubits, self.ops + other.ops, self.metadata)

    @property
    def has_reset(self) -> bool:
        return any(op.kind == RESET for op in self.ops)

    def unitary_part(self) -> "Circuit":
        """The circuit without a trailing reset on the ancilla."""
        ops = list(self.ops)
        if ops and ops[-1].kind == RESET and ops[-1].targets == (0,):
            ops.pop()
        if any(op.kind == RESET for op in ops):
            raise DomainError("reset is only allowed as the final op on the ancilla")
        return Circuit(self.num_qubits, ops, self.metadata)

    def unitary(self) -> np.ndarray:
        """Dense unitary; raises if the circuit contains a reset."""
        if self.has_reset:
            raise DomainError("circuit with a reset has no unitary; use unitary_part()")
        n = self.num_qubits
        if n > MAX_DENSE_GATE_QUBITS:
            raise DomainError(f"dense circuits are limited to {MAX_DENSE_GATE_QUBITS} qubits")
        d = 2**n
        t = np.eye(d, dtype=complex).reshape((2,) * n + (d,))
        for op in self.ops:
            t = apply_local(t, n, op.matrix(), op.targets)
        return t.reshape(d, d)

    def apply(self, state: State, rng: np.random.Generator | None = None) -> State:
        """Run the circuit on a state.

        A reset on a density matrix is the optical-pumping channel. On a pure
        state it is sampled (measure, then flip to |0>), which needs ``rng``.
        """
        if state.num_qubits != self.num_qubits:
            raise DimensionError(f"{self.num_qubits}-qubit circuit on {state.num_qubits}-qubit state")
        from .channels import optical_pump_reset

        for op in self.ops:
            if op.kind == RESET:
                if isinstance(state, DensityMatrix):
                    state = optical_pump_reset(state, op.targets[0])
                else:
                    if rng is None:
                        raise ValueError("resetting a pure state needs an rng")
                    state = reset_qubit(state, op.targets[0], rng)
            else:
                state = apply_operator(state, op.matrix(), op.targets)
        return state

    def dumps(self) -> str:
        lines = [f"# qubits: {self.num_qubits}"]
        if self.metadata:
            lines.append(f"# target: {self.metadata}")
        lines.extend(format_op(op) for op in self.ops)
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "Circuit":
        num_qubits = None
        metadata = ""
        ops = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("qubits:"):
                    num_qubits = int(body.split(":", 1)[1])
                elif body.startswith("target:"):
                    metadata = body.split(":", 1)[1].strip()
                continue
            try:
                ops.append(parse_op(line))
            except (ValueError, KeyError) as exc:
                raise ValueError(f"line {lineno}: cannot parse {line!r}: {exc}") from None
        if num_qubits is None:
            num_qubits = 1 + max((max(op.targets) for op in ops), default=0)
        return cls(num_qubits, ops, metadata)


def format_op(op: GateOp) -> str:
    if op.kind == MS:
        return f"MS({','.join(map(str, op.targets))}; {float(op.theta)!r}, {float(op.phi)!r})"
    if op.kind == LOCAL_ROT:
        return f"R({op.axis}, {float(op.theta)!r}, {op.targets[0]})"
    if op.kind == CONTROLLED:
        return f"C[{op.row}]({float(op.theta)!r}; {op.targets[0]}, {op.targets[1]})"
    return f"RESET({op.targets[0]})"


_MS_RE = re.compile(r"^MS\(([\d,\s]+);\s*(\S+),\s*(\S+)\)$")
_R_RE = re.compile(r"^R\(([xyz]),\s*(\S+),\s*(\d+)\)$")
_C_RE = re.compile(r"^C\[(\d)\]\((\S+);\s*(\d+),\s*(\d+)\)$")
_RESET_RE = re.compile(r"^RESET\((\d+)\)$")


def parse_op(line: str) -> GateOp:
    if m := _MS_RE.match(line):
        targets = tuple(int(t) for t in m.group(1).split(","))
        return ms_gate(float(m.group(2)), float(m.group(3)), targets)
    if m := _R_RE.match(line):
        return local_rotation(m.group(1), float(m.group(2)), int(m.group(3)))
    if m := _C_RE.match(line):
        return GateOp(CONTROLLED, (int(m.group(3)), int(m.group(4))), float(m.group(2)), row=int(m.group(1)))
    if m := _RESET_RE.match(line):
        return reset(int(m.group(1)))
    raise ValueError("unknown op syntax")


# ---------------------------------------------------------------------------
# Equivalence checking
# ---------------------------------------------------------------------------


def trace_overlap(u: np.ndarray, v: np.ndarray) -> float:
    """|tr(U^dag V)| / d, equal to 1 iff U and V agree up to a global phase."""
    if u.shape != v.shape:
        raise DimensionError(f"shapes {u.shape} and {v.shape} differ")
    return float(abs(np.vdot(u, v)) / u.shape[0])


def deviation(u: np.ndarray, v: np.ndarray, strict: bool = False) -> float:
    """1 - trace overlap, or the max-norm difference when ``strict``."""
    if strict:
        return float(np.abs(np.asarray(u) - np.asarray(v)).max())
    return max(0.0, 1.0 - trace_overlap(u, v))


def equivalent(a: Circuit | np.ndarray, b: Circuit | np.ndarray, atol: float = 1e-10,
               strict: bool = False) -> bool:
    ua = a.unitary() if isinstance(a, Circuit) else a
    ub = b.unitary() if isinstance(b, Circuit) else b
    return deviation(ua, ub, strict) < atol


# ---------------------------------------------------------------------------
# MS realizations on subsets (echo refocusing)
# ---------------------------------------------------------------------------


def forward_only(ops: Sequence[GateOp]) -> list[GateOp]:
    """Replace every negative-angle MS gate by forward gates (equal up to phase)."""
    out = []
    for op in ops:
        if op.kind == MS and op.theta < 0:
            out.extend(backward_ms_ops(-op.theta, op.phi, op.targets))
        else:
            out.append(op)
    return out


def ms_on_subset(theta: float, phi: float, targets: Sequence[int], num_qubits: int,
                 refocus: bool = False) -> list[GateOp]:
    """MS on ``targets``: a direct subset gate, or global gates with echoes.

    With ``refocus`` every ion outside ``targets`` is removed by the echo
    MS(theta/2) Z(pi) MS(theta/2) Z(pi), applied recursively, which uses
    2^m global gates for m excluded ions.
    """
    targets = tuple(sorted(targets))
    excluded = [q for q in range(num_qubits) if q not in targets]
    if not refocus or not excluded:
        return [ms_gate(theta, phi, targets)]
    return _echo(theta, phi, tuple(range(num_qubits)), excluded)


def _echo(theta: float, phi: float, ions: tuple[int, ...], excluded: list[int]) -> list[GateOp]:
    if not excluded:
        return [ms_gate(theta, phi, ions)]
    e, rest = excluded[0], excluded[1:]
    half = _echo(theta / 2, phi, ions, rest)
    flip = local_rotation("z", np.pi, e)
    return half + [flip] + half + [flip]


def refocused_ms_excluding(excluded: int, theta: float, phi: float, num_ions: int) -> Circuit:
    """Global MS gates with a pi echo on ion ``excluded``: MS on all other ions."""
    if num_ions < 3:
        raise DomainError("refocusing needs at least three ions")
    if not 0 <= excluded < num_ions:
        raise DimensionError(f"ion {excluded} outside {num_ions} ions")
    ops = _echo(theta, phi, tuple(range(num_ions)), [excluded])
    others = [q for q in range(num_ions) if q != excluded]
    return Circuit(num_ions, ops, f"U_MS({theta!r}, {phi!r}) on ions {others}")


def star_ms(theta: float, phi: float, num_ions: int) -> Circuit:
    """prod_i U_MS^(0,i)(theta, phi) from two global gates and two ancilla flips."""
    if num_ions < 3:
        raise DomainError("the star sequence needs at least three ions")
    ions = tuple(range(num_ions))
    flip = local_rotation("z", np.pi, 0)
    if theta > 0:
        inverse = backward_ms_ops(theta / 2, phi, ions)
    else:
        inverse = [ms_gate(-theta / 2, phi, ions)]
    ops = [ms_gate(theta / 2, phi, ions), flip, *inverse, flip]
    return Circuit(num_ions, ops, f"prod_i U_MS^(0,i)({theta!r}, {phi!r})")


def two_ion_ms_via_refocus(i: int, theta: float, phi: float, num_ions: int) -> Circuit:
    """U_MS^(0,i)(theta, phi) from four global quarter-angle gates and four pi flips."""
    if i == 0 or not 0 < i < num_ions:
        raise DomainError(f"second ion must be in 1..{num_ions - 1}, got {i}")
    ions = tuple(range(num_ions))
    z0 = local_rotation("z", np.pi, 0)
    zi = local_rotation("z", np.pi, i)
    fwd = ms_gate(theta / 4, phi, ions)
    bwd = ms_gate(-theta / 4, phi, ions)
    ops = [fwd, z0, bwd, zi, fwd, z0, bwd, zi]
    return Circuit(num_ions, ops, f"U_MS^(0,{i})({theta!r}, {phi!r})")


# ---------------------------------------------------------------------------
# Correcting gate decompositions
# ---------------------------------------------------------------------------


def decompose_correcting_gate(variant: int, theta: float, flip_qubit: int, num_qubits: int | None = None,
                              refocus: bool = True) -> Circuit:
    """C_i(theta) from local rotations and one two-ion MS gate U_MS^(0,i)(+-theta, pi/2).

    For more than two qubits the two-ion gate is realized with global gates
    (``two_ion_ms_via_refocus``) unless ``refocus`` is False.
    """
    gate = correcting_gate(variant, theta, flip_qubit)
    n = num_qubits if num_qubits is not None else flip_qubit + 1
    if flip_qubit >= n:
        raise DimensionError(f"flip qubit {flip_qubit} outside {n} qubits")
    i = flip_qubit
    row = gate.row
    ms_theta = -theta if row == 3 else theta
    if refocus and n > 2:
        ms_ops = two_ion_ms_via_refocus(i, ms_theta, np.pi / 2, n).ops
    else:
        ms_ops = [ms_gate(ms_theta, np.pi / 2, (0, i))]
    basis_q = 0 if row in (0, 2) else i
    local = {0: ("y", -theta), 2: ("y", theta), 1: ("z", theta), 3: ("z", theta)}[row]
    ops = [local_rotation("x", -np.pi / 2, basis_q), *ms_ops, local_rotation("x", np.pi / 2, basis_q),
           local_rotation(local[0], local[1], i)]
    return Circuit(n, ops, f"C[{row}]({theta!r}; 0, {i})")


def correcting_unitary(variant: int, theta: float, flip_qubit: int, num_qubits: int) -> np.ndarray:
    """Dense projector-form C_i(theta) embedded in ``num_qubits`` qubits."""
    return Circuit(num_qubits, [correcting_gate(variant, theta, flip_qubit)]).unitary()


# ---------------------------------------------------------------------------
# Local basis changes for non-X stabilizers
# ---------------------------------------------------------------------------

_CLIFFORD_MOVES = [(a, s) for a in "xyz" for s in (np.pi / 2, -np.pi / 2, np.pi)]


def _conj_pauli(rots: tuple, pauli: str) -> tuple[int, str]:
    """Return (sign, P') with W pauli W^dag = sign P' for W = rotations in time order."""
    w = np.eye(2, dtype=complex)
    for axis, angle in rots:
        w = rotation_matrix(axis, angle) @ w
    m = w @ PAULI_MATRICES[pauli] @ w.conj().T
    for name in "XYZ":
        c = np.trace(PAULI_MATRICES[name] @ m) / 2
        if abs(abs(c) - 1) < 1e-9:
            return int(round(c.real)), name
    raise AssertionError("not a Clifford")


@lru_cache(maxsize=None)
def basis_change(factor: str, sign: int = 1, flip: str | None = None) -> tuple:
    """Shortest rotation list W (time order) with W X W^dag = sign*factor and W Z W^dag = +-flip."""
    if flip is not None and flip in (factor, "I"):
        raise DomainError(f"flip {flip} must anticommute with factor {factor}")
    for length in range(4):
        for rots in itertools.product(_CLIFFORD_MOVES, repeat=length):
            if _conj_pauli(rots, "X") != (sign, factor):
                continue
            if flip is not None and _conj_pauli(rots, "Z")[1] != flip:
                continue
            return rots
    raise AssertionError("Clifford search exhausted")  # pragma: no cover


def _stabilizer_layout(stabilizer: PauliString, offset: int = 1):
    if not stabilizer.is_hermitian():
        raise DomainError(f"stabilizer {stabilizer} is not Hermitian")
    support = stabilizer.support
    if not support:
        raise DomainError("stabilizer has weight 0")
    qubits = [q + offset for q in support]
    factors = [stabilizer.symbols[q] for q in support]
    return qubits, factors, stabilizer.phase == 2


def _conjugation(qubits, factors, negative: bool, flip_at: int | None = None, flip: str | None = None):
    """(pre, post) op lists turning the X...X base block into the signed target block."""
    pre, post = [], []
    for k, (q, f) in enumerate(zip(qubits, factors)):
        sign = -1 if (negative and k == 0) else 1
        rots = basis_change(f, sign, flip if q == flip_at else None)
        post.extend(local_rotation(a, s, q) for a, s in rots)
        pre.extend(local_rotation(a, -s, q) for a, s in reversed(rots))
    return pre, post


def block_flip(stabilizer: PauliString, flip_qubit: int, flip: str | None = None) -> PauliString:
    """System-only flip operator realized by ``dissipative_block`` on register qubit ``flip_qubit``."""
    qubits, factors, negative = _stabilizer_layout(stabilizer)
    if flip_qubit not in qubits:
        raise DomainError(f"flip qubit {flip_qubit} is not in the stabilizer support {qubits}")
    k = qubits.index(flip_qubit)
    rots = basis_change(factors[k], -1 if (negative and k == 0) else 1, flip)
    _, name = _conj_pauli(rots, "Z")
    return PauliString.from_sparse(stabilizer.num_qubits, {flip_qubit - 1: name})


# ---------------------------------------------------------------------------
# Coherent and dissipative blocks
# ---------------------------------------------------------------------------


def _ancilla_rotation(kind: str, n: int, phi: float, qubit: int = 0) -> GateOp:
    axis, sign = ANCILLA_FACTORS[kind][n % 4]
    # exp(sign * i * phi * sigma) = R(-2 sign phi)
    return local_rotation(axis, -2 * sign * phi, qubit)


def coherent_block(stabilizer: PauliString, phi: float, refocus: bool = False,
                   forward: bool = False) -> Circuit:
    """Circuit on ancilla + system equal to exp(i phi sigma^z_0 A) up to a global phase.

    All-X and all-Y stabilizers use the ancilla-factor sequence directly (phi_MS = 0
    or pi/2); other stabilizers conjugate the X-type sequence with local
    rotations. With the ancilla in |0> this is exp(i phi A) on the system.
    """
    qubits, factors, negative = _stabilizer_layout(stabilizer)
    n = len(qubits)
    num_qubits = stabilizer.num_qubits + 1
    if set(factors) == {"Y"} and not negative:
        kind, pre, post = "Y", [], []
    else:
        kind = "X"
        pre, post = _conjugation(qubits, factors, negative)
    ions = (0, *qubits)
    ms_phi = _MS_PHASE[kind]
    core = [
        *ms_on_subset(np.pi / 2, ms_phi, ions, num_qubits, refocus),
        _ancilla_rotation(kind, n, phi),
        *ms_on_subset(-np.pi / 2, ms_phi, ions, num_qubits, refocus),
    ]
    if forward:
        core = forward_only(core)
    return Circuit(num_qubits, pre + core + post, f"exp(i*{phi!r}*Z0*{stabilizer.label()})")


def coherent_block_ancilla_free(stabilizer: PauliString, phi: float) -> Circuit:
    """Circuit on the system qubits alone equal to exp(i phi A) up to a global phase.

    The first support qubit takes the ancilla role: a y rotation maps its X
    factor to Z, the weight-(n-1) coherent block supplies exp(i phi Z_1 A'),
    and the inverse rotation restores X.
    """
    qubits, factors, negative = _stabilizer_layout(stabilizer, offset=0)
    n = len(qubits)
    if n < 2:
        raise DomainError("the ancilla-free block needs weight >= 2")
    pre, post = _conjugation(qubits, factors, negative)
    lead = qubits[0]
    ions = tuple(qubits)
    core = [
        local_rotation("y", -np.pi / 2, lead),
        ms_gate(np.pi / 2, 0.0, ions),
        _ancilla_rotation("X", n - 1, phi, lead),
        ms_gate(-np.pi / 2, 0.0, ions),
        local_rotation("y", np.pi / 2, lead),
    ]
    return Circuit(stabilizer.num_qubits, pre + core + post, f"exp(i*{phi!r}*{stabilizer.label()})")


def default_flip_qubit(stabilizer: PauliString) -> int:
    """Register index of the last support qubit."""
    return stabilizer.support[-1] + 1


def dissipative_block(stabilizer: PauliString, theta: float, flip_qubit: int | None = None,
                      flip: str | None = None, refocus: bool = False, decompose: bool = False,
                      forward: bool = False) -> Circuit:
    """Pumping sequence MS(pi/2), C_i(theta), MS(-pi/2), RESET(0).

    ``flip_qubit`` is a register index (system label) in the support. The
    realized flip operator is reported by ``block_flip``: Z on an X or Y
    factor and X on a Z factor unless ``flip`` asks for another anticommuting
    Pauli. With the ancilla traced out the block acts as the pump channel
    E_1 = P+ + cos(theta) P-, E_2 = sin(theta) F P-.
    """
    qubits, factors, negative = _stabilizer_layout(stabilizer)
    flip_qubit = qubits[-1] if flip_qubit is None else flip_qubit
    if flip_qubit not in qubits:
        raise DomainError(f"flip qubit {flip_qubit} is not in the stabilizer support {qubits}")
    n = len(qubits)
    num_qubits = stabilizer.num_qubits + 1
    pre, post = _conjugation(qubits, factors, negative, flip_qubit, flip)
    ions = (0, *qubits)
    if decompose:
        ctrl = decompose_correcting_gate(n, theta, flip_qubit, num_qubits, refocus).ops
    else:
        ctrl = [correcting_gate(n, theta, flip_qubit)]
    core = [
        *ms_on_subset(np.pi / 2, 0.0, ions, num_qubits, refocus),
        *ctrl,
        *ms_on_subset(-np.pi / 2, 0.0, ions, num_qubits, refocus),
    ]
    if forward:
        core = forward_only(core)
    f = block_flip(stabilizer, flip_qubit, flip)
    meta = f"pump {stabilizer.label()} flip {f.label()[1:]} theta={theta!r}"
    return Circuit(num_qubits, pre + core + post + [reset(0)], meta)


def system_channel(circuit: Circuit) -> KrausChannel:
    """Channel on qubits 1..n-1 for an ancilla prepared in |0> and discarded afterwards."""
    u = circuit.unitary_part().unitary()
    n = circuit.num_qubits - 1
    d = 2**n
    blocks = u.reshape(d, 2, d, 2)
    elements = tuple(blocks[:, b, :, 0] for b in range(2))
    elements = tuple(e for e in elements if np.abs(e).max() > 0)
    return KrausChannel(elements, n)


# ---------------------------------------------------------------------------
# QND readout and measurement
# ---------------------------------------------------------------------------

_YKETS = {+1: np.array([1, 1j]) / np.sqrt(2), -1: np.array([1, -1j]) / np.sqrt(2)}


def qnd_readout(stabilizer: PauliString, refocus: bool = False) -> Circuit:
    """Ancilla to |+>, then exp(i pi/4 sigma^z_0 A).

    Afterwards the ancilla is |y-> on the A = +1 eigenspace and |y+> on A = -1.
    """
    block = coherent_block(stabilizer, np.pi / 4, refocus)
    prep = local_rotation("y", np.pi / 2, 0)
    return Circuit(block.num_qubits, [prep, *block.ops], f"readout {stabilizer.label()}")


def _project(state: StateVector, qubit: int, ket: np.ndarray) -> tuple[float, np.ndarray]:
    n = state.num_qubits
    t = np.moveaxis(state.amplitudes.reshape((2,) * n), n - 1 - qubit, 0)
    rest = np.tensordot(ket.conj(), t, axes=(0, 0))
    return float(np.vdot(rest, rest).real), rest


def _embed(rest: np.ndarray, qubit: int, ket: np.ndarray, n: int) -> np.ndarray:
    t = np.multiply.outer(ket, rest)
    return np.moveaxis(t, 0, n - 1 - qubit).reshape(-1)


def measure_ancilla_y(state: StateVector, rng: np.random.Generator, qubit: int = 0
                      ) -> tuple[int, StateVector]:
    """Born-rule sigma^y measurement; returns the eigenvalue and the collapsed state."""
    if not isinstance(state, StateVector):
        raise TypeError("measure_ancilla_y samples pure states")
    p_plus, rest_plus = _project(state, qubit, _YKETS[+1])
    outcome = +1 if rng.random() < p_plus else -1
    if outcome == +1:
        rest, p = rest_plus, p_plus
    else:
        p, rest = _project(state, qubit, _YKETS[-1])
    amps = _embed(rest / np.sqrt(p), qubit, _YKETS[outcome], state.num_qubits)
    return outcome, StateVector(amps, state.num_qubits)


def reset_qubit(state: StateVector, qubit: int, rng: np.random.Generator) -> StateVector:
    """Sampled optical pumping of a pure state: measure ``qubit`` in z and map to |0>."""
    p0, rest0 = _project(state, qubit, np.array([1, 0], dtype=complex))
    if rng.random() < p0:
        rest, p = rest0, p0
    else:
        p, rest = _project(state, qubit, np.array([0, 1], dtype=complex))
    amps = _embed(rest / np.sqrt(p), qubit, np.array([1, 0], dtype=complex), state.num_qubits)
    return StateVector(amps, state.num_qubits)


def measure_stabilizer(system: StateVector, stabilizer: PauliString, rng: np.random.Generator,
                       refocus: bool = False) -> tuple[int, StateVector]:
    """QND measurement of A on a system state; returns (eigenvalue of A, post-measurement system state)."""
    if system.num_qubits != stabilizer.num_qubits:
        raise DimensionError("stabilizer and state act on different registers")
    n = system.num_qubits + 1
    full = StateVector(_embed(system.amplitudes.reshape((2,) * system.num_qubits), 0,
                              np.array([1, 0], dtype=complex), n), n)
    full = qnd_readout(stabilizer, refocus).apply(full)
    outcome, collapsed = measure_ancilla_y(full, rng)
    _, rest = _project(collapsed, 0, _YKETS[outcome])
    # the ancilla is left in |y-> for A = +1 and |y+> for A = -1
    return -outcome, StateVector(rest.reshape(-1), system.num_qubits)


# ---------------------------------------------------------------------------
# Trotter realizations
# ---------------------------------------------------------------------------


def circuit_realization(term, tau: float, refocus: bool = False) -> KrausChannel:
    """Channel of the circuit realizing one master-equation term for a time step tau.

    A Hamiltonian term E*P becomes the coherent block with phi = -E*tau; a
    pump term with rate gamma becomes the dissipative block with
    theta = sqrt(gamma*tau).
    """
    from .channels import LindbladTerm

    if isinstance(term, HamiltonianTerm):
        block = coherent_block(term.string, -term.coefficient * tau, refocus)
        return system_channel(block)
    if isinstance(term, LindbladTerm) and term.stabilizer is not None and term.flip is not None:
        flip = term.flip
        if flip.weight != 1 or flip.phase not in (0, 2):
            raise UnregisteredTermError(f"flip {flip} is not a single-qubit Pauli")
        q = flip.support[0]
        block = dissipative_block(term.stabilizer, np.sqrt(term.rate * tau), q + 1,
                                  flip.symbols[q], refocus)
        return system_channel(block)
    raise UnregisteredTermError(f"no circuit realization for {term!r}")


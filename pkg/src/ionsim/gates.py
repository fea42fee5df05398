"""Gate objects and exact unitaries: MS gates, local rotations, correcting gates.

Rotation convention everywhere: ``R_axis(angle) = exp(-i * angle * sigma_axis / 2)``.
The exponential factor ``exp(i * a * sigma)`` is therefore ``R(-2a)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .errors import DomainError
from .qstate import PAULI_MATRICES, PauliString, lift_operator

MS = "MS"
LOCAL_ROT = "R"
CONTROLLED = "C"
RESET = "RESET"

MAX_DENSE_GATE_QUBITS = 10

# Correcting-gate rows keyed by n mod 4: (inert projector, active projector, flip axis, sign)
# the active branch applies exp(sign * i * theta * sigma_axis) to the flip qubit.
_KET = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "y+": np.array([1, 1j], dtype=complex) / np.sqrt(2),
    "y-": np.array([1, -1j], dtype=complex) / np.sqrt(2),
}
CORRECTING_ROWS = {
    0: ("0", "1", "Y", +1),
    1: ("y-", "y+", "Z", -1),
    2: ("1", "0", "Y", -1),
    3: ("y+", "y-", "Z", -1),
}


def rotation_matrix(axis: str, angle: float) -> np.ndarray:
    """exp(-i angle sigma_axis / 2)."""
    sigma = PAULI_MATRICES[axis.upper()]
    return np.cos(angle / 2) * np.eye(2) - 1j * np.sin(angle / 2) * sigma


def _equatorial_basis(phi: float) -> np.ndarray:
    # columns are the +1/-1 eigenvectors of cos(phi) X + sin(phi) Y
    e = np.exp(1j * phi)
    return np.array([[1, 1], [e, -e]], dtype=complex) / np.sqrt(2)


def ms_spectrum(num_targets: int) -> np.ndarray:
    """Eigenvalues of S^2 in the product eigenbasis of the equatorial Paulis."""
    idx = np.arange(2**num_targets)
    ones = np.array([bin(i).count("1") for i in idx])
    return (num_targets - 2 * ones).astype(float) ** 2


def ms_basis(phi: float, num_targets: int) -> np.ndarray:
    v = _equatorial_basis(phi)
    return reduce(np.kron, [v] * num_targets)


def ms_matrix(theta: float, phi: float, num_targets: int) -> np.ndarray:
    """MS unitary on ``num_targets`` ions, exp(-i theta/4 (cos phi Sx + sin phi Sy)^2).

    Built from the closed-form spectrum: in the eigenbasis of the equatorial
    Pauli on each ion, S is diagonal with eigenvalue k - 2*(number of -1s).
    """
    if num_targets < 2:
        raise DomainError("an MS gate needs at least two ions")
    v = ms_basis(phi, num_targets)
    phases = np.exp(-1j * theta / 4 * ms_spectrum(num_targets))
    return (v * phases) @ v.conj().T


def ms_unitary(theta: float, phi: float, targets: Sequence[int], num_qubits: int) -> np.ndarray:
    """Dense MS gate on ``targets``, identity on the remaining qubits."""
    targets = tuple(targets)
    if len(targets) < 2:
        raise DomainError("an MS gate needs at least two targets")
    if num_qubits > MAX_DENSE_GATE_QUBITS:
        raise DomainError(f"dense gates are limited to {MAX_DENSE_GATE_QUBITS} qubits")
    return lift_operator(ms_matrix(theta, phi, len(targets)), targets, num_qubits)


def matrix_exp_oracle(h: np.ndarray) -> np.ndarray:
    """exp(-i H) for Hermitian H via eigendecomposition.

    Deliberately independent of every gate constructor in this module: it is
    the reference the constructors are checked against.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1] or h.shape[0] > 1024:
        raise DomainError("oracle takes a square matrix of dimension <= 1024")
    if np.abs(h - h.conj().T).max() > 1e-10:
        raise DomainError("oracle input is not Hermitian")
    w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    return (v * np.exp(-1j * w)) @ v.conj().T


def correcting_matrix(row: int, theta: float) -> np.ndarray:
    """Two-qubit controlled gate of one row; bit 0 = ancilla, bit 1 = flip qubit."""
    if row not in CORRECTING_ROWS:
        raise DomainError(f"unknown correcting-gate row {row!r}")
    inert, active, axis, sign = CORRECTING_ROWS[row]
    p_inert = np.outer(_KET[inert], _KET[inert].conj())
    p_active = np.outer(_KET[active], _KET[active].conj())
    flip = rotation_matrix(axis, -2 * sign * theta)
    # kron(flip-qubit op, ancilla op)
    return np.kron(np.eye(2), p_inert) + np.kron(flip, p_active)


@dataclass(frozen=True)
class GateOp:
    """One symbolic gate of a circuit.

    ``kind`` is MS, R (local rotation about ``axis``), C (correcting
    gate, ``row`` = n mod 4, targets ``(0, i)``) or RESET (optical pumping of
    one qubit to |0>). Angles are stored as given, never wrapped.
    """

    kind: str
    targets: tuple[int, ...]
    theta: float = 0.0
    phi: float = 0.0
    axis: str | None = None
    row: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if len(set(self.targets)) != len(self.targets):
            raise ValueError(f"repeated targets {self.targets}")
        if self.kind == MS and len(self.targets) < 2:
            raise DomainError("an MS gate needs at least two targets")
        if self.kind == LOCAL_ROT and (len(self.targets) != 1 or self.axis not in ("x", "y", "z")):
            raise ValueError("a local rotation has one target and axis x, y or z")
        if self.kind == CONTROLLED and (len(self.targets) != 2 or self.row not in CORRECTING_ROWS):
            raise DomainError("a correcting gate needs targets (ancilla, i) and a row in 0..3")
        if self.kind == RESET and len(self.targets) != 1:
            raise ValueError("reset acts on exactly one qubit")
        if self.kind not in (MS, LOCAL_ROT, CONTROLLED, RESET):
            raise ValueError(f"unknown gate kind {self.kind!r}")

    @property
    def is_unitary(self) -> bool:
        return self.kind != RESET

    def matrix(self) -> np.ndarray:
        """Local matrix on ``targets`` (bit j of the index is ``targets[j]``)."""
        if self.kind == MS:
            return ms_matrix(self.theta, self.phi, len(self.targets))
        if self.kind == LOCAL_ROT:
            return rotation_matrix(self.axis, self.theta)
        if self.kind == CONTROLLED:
            return correcting_matrix(self.row, self.theta)
        raise DomainError("reset is not unitary")

    def with_theta(self, theta: float) -> "GateOp":
        return GateOp(self.kind, self.targets, theta, self.phi, self.axis, self.row)


@dataclass(frozen=True)
class HamiltonianTerm:
    """coefficient * string, energies in units of 1/time (hbar = 1)."""

    coefficient: float
    string: PauliString

    def __post_init__(self):
        if not np.isfinite(self.coefficient):
            raise DomainError("Hamiltonian coefficient must be finite")
        if not self.string.is_hermitian():
            raise DomainError(f"{self.string} is not Hermitian")

    def matrix(self) -> np.ndarray:
        return self.coefficient * self.string.to_matrix()


def ms_gate(theta: float, phi: float, targets: Sequence[int]) -> GateOp:
    return GateOp(MS, tuple(targets), theta, phi)


def local_rotation(axis: str, angle: float, qubit: int) -> GateOp:
    """exp(-i angle sigma_axis / 2) on one qubit."""
    return GateOp(LOCAL_ROT, (qubit,), angle, axis=axis.lower())


def reset(qubit: int = 0) -> GateOp:
    return GateOp(RESET, (qubit,))


def correcting_gate(variant: int, theta: float, flip_qubit: int) -> GateOp:
    """Controlled gate C_i(theta) between the ancilla and ``flip_qubit``.

    ``variant`` is the stabilizer weight (or its residue mod 4) selecting the
    correcting-gate row.
    """
    if flip_qubit == 0:
        raise DomainError("the flip qubit cannot be the ancilla")
    try:
        row = int(variant) % 4
    except (TypeError, ValueError):
        raise DomainError(f"unknown correcting-gate variant {variant!r}") from None
    return GateOp(CONTROLLED, (0, flip_qubit), theta, row=row)


def equatorial_flip(phi: float, qubit: int) -> list[GateOp]:
    """Rotations equal to cos(phi) X + sin(phi) Y on ``qubit`` up to a phase."""
    if phi == 0.0:
        return [local_rotation("x", np.pi, qubit)]
    if phi == np.pi / 2:
        return [local_rotation("y", np.pi, qubit)]
    return [local_rotation("z", -phi, qubit), local_rotation("x", np.pi, qubit),
            local_rotation("z", phi, qubit)]


def backward_ms_ops(theta: float, phi: float, targets: Sequence[int]) -> list[GateOp]:
    """Forward-angle gates equal to U_MS(-theta, phi) on ``targets`` up to a phase.

    With an odd number of ions U_MS(pi) is a global phase, so U_MS(pi - theta)
    alone suffices. With an even number U_MS(pi) is proportional to the
    product of the equatorial Paulis, which has to be undone explicitly.
    """
    if theta < 0:
        raise DomainError("backward rewriting takes the magnitude theta >= 0 of U_MS(-theta)")
    targets = tuple(targets)
    ops: list[GateOp] = []
    if len(targets) % 2 == 0:
        for q in targets:
            ops.extend(equatorial_flip(phi, q))
    ops.append(ms_gate(np.pi - theta, phi, targets))
    return ops


def backward_ms_as_forward(theta: float, phi: float, n_plus_1: int):
    """Circuit on ``n_plus_1`` ions realizing U_MS(-theta, phi) with forward gates."""
    from .circuits import Circuit

    ops = backward_ms_ops(theta, phi, range(n_plus_1))
    return Circuit(n_plus_1, ops, f"U_MS(-{theta!r}, {phi!r}) from forward gates")


def is_unitary(u: np.ndarray, atol: float = 1e-12) -> bool:
    return bool(np.abs(u.conj().T @ u - np.eye(u.shape[0])).max() < atol)

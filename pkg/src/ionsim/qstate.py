"""Dense pure and mixed states of an n-qubit register and Pauli-string algebra.

Basis convention, used by every module in the package: bit ``q`` of a basis
index (little-endian) is the state of qubit ``q``, and qubit 0 is the
ancilla. A dense operator on ``n`` qubits is therefore
``kron(op[n-1], ..., op[1], op[0])``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import CapacityError, DimensionError, DomainError

MAX_PURE_QUBITS = 20
MAX_MIXED_QUBITS = 8

ATOL = 1e-12

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# single-qubit products a*b = i**k * c
_PAULI_PRODUCT = {
    ("I", "I"): (0, "I"), ("I", "X"): (0, "X"), ("I", "Y"): (0, "Y"), ("I", "Z"): (0, "Z"),
    ("X", "I"): (0, "X"), ("X", "X"): (0, "I"), ("X", "Y"): (1, "Z"), ("X", "Z"): (3, "Y"),
    ("Y", "I"): (0, "Y"), ("Y", "X"): (3, "Z"), ("Y", "Y"): (0, "I"), ("Y", "Z"): (1, "X"),
    ("Z", "I"): (0, "Z"), ("Z", "X"): (1, "Y"), ("Z", "Y"): (3, "X"), ("Z", "Z"): (0, "I"),
}

_PHASE_PREFIX = {0: "+", 1: "+i", 2: "-", 3: "-i"}


def _check_pure_capacity(n: int) -> None:
    if not 1 <= n <= MAX_PURE_QUBITS:
        raise CapacityError(f"pure states hold 1..{MAX_PURE_QUBITS} qubits, got {n}")


def _check_mixed_capacity(n: int) -> None:
    if not 1 <= n <= MAX_MIXED_QUBITS:
        raise CapacityError(f"density matrices hold 1..{MAX_MIXED_QUBITS} qubits, got {n}")


def _num_qubits_for(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 2 or 2**n != dim:
        raise DimensionError(f"dimension {dim} is not a power of two")
    return n


# ---------------------------------------------------------------------------
# Pauli strings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PauliString:
    """Signed tensor product of single-qubit Pauli factors.

    ``symbols[q]`` is the factor on qubit ``q``; ``phase`` is ``k`` in the
    overall prefactor ``i**k``. Labels are written qubit 0 first, for example
    ``PauliString.from_label("-XXZI")``.
    """

    symbols: str
    phase: int = 0

    def __post_init__(self):
        if not self.symbols or any(s not in "IXYZ" for s in self.symbols):
            raise ValueError(f"invalid Pauli symbols {self.symbols!r}")
        object.__setattr__(self, "phase", int(self.phase) % 4)

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        label = label.strip()
        for prefix, k in (("+i", 1), ("-i", 3), ("i", 1), ("+", 0), ("-", 2)):
            if label.startswith(prefix):
                return cls(label[len(prefix):], k)
        return cls(label, 0)

    @classmethod
    def from_sparse(cls, num_qubits: int, factors: Mapping[int, str], phase: int = 0) -> "PauliString":
        """Build a string from ``{qubit: symbol}``; unlisted qubits carry I."""
        symbols = ["I"] * num_qubits
        for q, s in factors.items():
            if not 0 <= q < num_qubits:
                raise ValueError(f"qubit {q} outside register of {num_qubits}")
            symbols[q] = s
        return cls("".join(symbols), phase)

    @classmethod
    def identity(cls, num_qubits: int) -> "PauliString":
        return cls("I" * num_qubits)

    @property
    def num_qubits(self) -> int:
        return len(self.symbols)

    @property
    def coefficient(self) -> complex:
        return 1j**self.phase

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(q for q, s in enumerate(self.symbols) if s != "I")

    @property
    def weight(self) -> int:
        return len(self.support)

    def is_hermitian(self) -> bool:
        return self.phase in (0, 2)

    def __mul__(self, other: "PauliString") -> "PauliString":
        if not isinstance(other, PauliString):
            return NotImplemented
        if other.num_qubits != self.num_qubits:
            raise DimensionError("Pauli strings act on different registers")
        k = self.phase + other.phase
        out = []
        for a, b in zip(self.symbols, other.symbols):
            dk, c = _PAULI_PRODUCT[a, b]
            k += dk
            out.append(c)
        return PauliString("".join(out), k)

    def __neg__(self) -> "PauliString":
        return PauliString(self.symbols, self.phase + 2)

    def adjoint(self) -> "PauliString":
        return PauliString(self.symbols, -self.phase)

    def commutes_with(self, other: "PauliString") -> bool:
        clashes = sum(
            1 for a, b in zip(self.symbols, other.symbols) if a != "I" and b != "I" and a != b
        )
        return clashes % 2 == 0

    def embed(self, num_qubits: int, offset: int = 0) -> "PauliString":
        """Place this string on qubits ``offset..offset+n-1`` of a larger register."""
        if offset < 0 or offset + self.num_qubits > num_qubits:
            raise DimensionError("embedding does not fit the target register")
        symbols = "I" * offset + self.symbols + "I" * (num_qubits - offset - self.num_qubits)
        return PauliString(symbols, self.phase)

    def masks(self) -> tuple[int, int, int]:
        """Return ``(x_mask, z_mask, y_count)`` of the symplectic representation."""
        x = z = 0
        ny = 0
        for q, s in enumerate(self.symbols):
            if s in "XY":
                x |= 1 << q
            if s in "ZY":
                z |= 1 << q
            ny += s == "Y"
        return x, z, ny

    def to_matrix(self) -> np.ndarray:
        mats = [PAULI_MATRICES[s] for s in reversed(self.symbols)]
        return self.coefficient * reduce(np.kron, mats)

    def label(self) -> str:
        return _PHASE_PREFIX[self.phase] + self.symbols

    def __str__(self) -> str:
        return self.label()


def _pauli_action(p: PauliString) -> tuple[np.ndarray, np.ndarray]:
    """Return (perm, coeff) with (P psi)[perm[b]] = coeff[b] * psi[b]."""
    x, z, ny = p.masks()
    idx = np.arange(2**p.num_qubits)
    parity = np.zeros_like(idx)
    zz = idx & z
    while np.any(zz):
        parity ^= zz & 1
        zz >>= 1
    # Y = i X Z per qubit
    coeff = (1j ** ((p.phase + ny) % 4)) * (1 - 2 * parity)
    return idx ^ x, coeff.astype(complex)


# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------


class StateVector:
    """Normalized pure state of ``num_qubits`` qubits (at most 20)."""

    __slots__ = ("amplitudes", "num_qubits")

    def __init__(self, amplitudes, num_qubits: int | None = None, normalize: bool = False):
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        n = _num_qubits_for(amps.size) if num_qubits is None else int(num_qubits)
        _check_pure_capacity(n)
        if amps.size != 2**n:
            raise DimensionError(f"expected {2**n} amplitudes, got {amps.size}")
        if normalize:
            amps = amps / np.linalg.norm(amps)
        self.amplitudes = amps
        self.num_qubits = n

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()), self.num_qubits)

    def copy(self) -> "StateVector":
        return StateVector(self.amplitudes.copy(), self.num_qubits)

    def __repr__(self) -> str:
        return f"StateVector(num_qubits={self.num_qubits})"


class DensityMatrix:
    """Mixed state of ``num_qubits`` qubits (at most 8)."""

    __slots__ = ("matrix", "num_qubits")

    def __init__(self, matrix, num_qubits: int | None = None):
        m = np.asarray(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError("density matrix must be square")
        n = _num_qubits_for(m.shape[0]) if num_qubits is None else int(num_qubits)
        _check_mixed_capacity(n)
        if m.shape[0] != 2**n:
            raise DimensionError(f"expected a {2**n}x{2**n} matrix")
        self.matrix = m
        self.num_qubits = n

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def is_valid(self, atol: float = 1e-10) -> bool:
        """Hermitian, unit trace and positive semidefinite within ``atol``."""
        m = self.matrix
        if np.abs(m - m.conj().T).max() > atol or abs(np.trace(m) - 1) > atol:
            return False
        return float(np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min()) >= -atol

    def purity(self) -> float:
        return float(np.vdot(self.matrix, self.matrix).real)

    def copy(self) -> "DensityMatrix":
        return DensityMatrix(self.matrix.copy(), self.num_qubits)

    def __repr__(self) -> str:
        return f"DensityMatrix(num_qubits={self.num_qubits})"


State = Union[StateVector, DensityMatrix]


def as_density(state: State) -> DensityMatrix:
    return state.to_density() if isinstance(state, StateVector) else state


def new_basis_state(num_qubits: int, bits: str | Sequence[int]) -> StateVector:
    """Computational basis state; ``bits[q]`` is the value of qubit ``q``."""
    _check_pure_capacity(num_qubits)
    bits = [int(b) for b in bits]
    if len(bits) != num_qubits or any(b not in (0, 1) for b in bits):
        raise ValueError(f"need {num_qubits} bits in {{0, 1}}, got {bits!r}")
    amps = np.zeros(2**num_qubits, dtype=complex)
    amps[sum(b << q for q, b in enumerate(bits))] = 1.0
    return StateVector(amps, num_qubits)


def product_state(factors: Sequence[np.ndarray]) -> StateVector:
    """Tensor product of single-qubit vectors, ``factors[q]`` on qubit ``q``."""
    vec = reduce(np.kron, [np.asarray(f, dtype=complex) for f in reversed(factors)])
    return StateVector(vec, len(factors), normalize=True)


def random_state(num_qubits: int, rng: np.random.Generator) -> StateVector:
    """Haar-random pure state."""
    _check_pure_capacity(num_qubits)
    v = rng.normal(size=2**num_qubits) + 1j * rng.normal(size=2**num_qubits)
    return StateVector(v, num_qubits, normalize=True)


def random_density(num_qubits: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Random mixed state drawn from the induced (Ginibre) measure."""
    d = 2**num_qubits
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return DensityMatrix(rho / np.trace(rho).real, num_qubits)


def ghz_state(num_qubits: int) -> StateVector:
    amps = np.zeros(2**num_qubits, dtype=complex)
    amps[0] = amps[-1] = 1 / np.sqrt(2)
    return StateVector(amps, num_qubits)


# ---------------------------------------------------------------------------
# Local operator application
# ---------------------------------------------------------------------------


def apply_local(tensor: np.ndarray, num_qubits: int, matrix: np.ndarray, targets: Sequence[int],
                axis_offset: int = 0) -> np.ndarray:
    """Contract a ``2^k x 2^k`` matrix into the qubit axes of ``tensor``.

    ``tensor`` has shape ``(2,)*num_qubits`` starting at ``axis_offset``
    (further axes are carried along). Bit ``j`` of the matrix index refers to
    ``targets[j]``.
    """
    k = len(targets)
    g = np.asarray(matrix).reshape((2,) * (2 * k))
    axes = [axis_offset + num_qubits - 1 - q for q in reversed(targets)]
    out = np.tensordot(g, tensor, axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(out, list(range(k)), axes)


def apply_operator(state: State, matrix: np.ndarray, targets: Sequence[int]) -> State:
    """Apply ``matrix`` on ``targets`` (psi -> M psi, or rho -> M rho M^dag)."""
    targets = tuple(int(t) for t in targets)
    n = state.num_qubits
    if len(set(targets)) != len(targets) or any(not 0 <= t < n for t in targets):
        raise DimensionError(f"invalid targets {targets} for {n} qubits")
    if isinstance(state, StateVector):
        t = apply_local(state.amplitudes.reshape((2,) * n), n, matrix, targets)
        return StateVector(t.reshape(-1), n)
    t = state.matrix.reshape((2,) * (2 * n))
    t = apply_local(t, n, matrix, targets)
    t = apply_local(t, n, np.conj(matrix), targets, axis_offset=n)
    return DensityMatrix(t.reshape(2**n, 2**n), n)


def apply_pauli_string(state: State, p: PauliString) -> State:
    if p.num_qubits != state.num_qubits:
        raise DimensionError(f"{p.num_qubits}-qubit string on {state.num_qubits}-qubit state")
    perm, coeff = _pauli_action(p)
    if isinstance(state, StateVector):
        out = np.empty_like(state.amplitudes)
        out[perm] = coeff * state.amplitudes
        return StateVector(out, state.num_qubits)
    m = np.empty_like(state.matrix)
    m[perm, :] = coeff[:, None] * state.matrix
    out = np.empty_like(m)
    out[:, perm] = m * coeff.conj()[None, :]
    return DensityMatrix(out, state.num_qubits)


def expectation(state: State, p: PauliString) -> float:
    """<P> for a Hermitian Pauli string; the imaginary part must vanish."""
    if not p.is_hermitian():
        raise DomainError(f"{p} is not Hermitian (phase +-i)")
    if p.num_qubits != state.num_qubits:
        raise DimensionError(f"{p.num_qubits}-qubit string on {state.num_qubits}-qubit state")
    perm, coeff = _pauli_action(p)
    if isinstance(state, StateVector):
        psi = state.amplitudes
        val = np.vdot(psi[perm], coeff * psi)
    else:
        val = np.sum(coeff * state.matrix[np.arange(state.dim), perm])
    if abs(val.imag) > 1e-10:
        raise DomainError(f"expectation has imaginary part {val.imag:.3e}")
    return float(val.real)


def expectation_operator(state: State, op: np.ndarray) -> complex:
    if isinstance(state, StateVector):
        return complex(np.vdot(state.amplitudes, op @ state.amplitudes))
    return complex(np.trace(op @ state.matrix))


def partial_trace(rho: State, keep: Iterable[int]) -> DensityMatrix:
    """Reduced state on the qubits in ``keep`` (returned in ascending order)."""
    keep = sorted(set(int(q) for q in keep))
    n = rho.num_qubits
    if not keep:
        raise ValueError("keep set must be nonempty")
    if keep[0] < 0 or keep[-1] >= n:
        raise DimensionError(f"keep {keep} outside {n}-qubit register")
    drop = [q for q in range(n) if q not in keep]
    if isinstance(rho, StateVector):
        t = rho.amplitudes.reshape((2,) * n)
        kept_axes = [n - 1 - q for q in reversed(keep)]
        drop_axes = [n - 1 - q for q in reversed(drop)]
        t = np.transpose(t, kept_axes + drop_axes).reshape(2 ** len(keep), -1)
        return DensityMatrix(t @ t.conj().T, len(keep))
    t = rho.matrix.reshape((2,) * (2 * n))
    row_keep = [n - 1 - q for q in reversed(keep)]
    row_drop = [n - 1 - q for q in reversed(drop)]
    t = np.transpose(t, row_keep + row_drop + [a + n for a in row_keep] + [a + n for a in row_drop])
    dk, dd = 2 ** len(keep), 2 ** len(drop)
    t = t.reshape(dk, dd, dk, dd)
    return DensityMatrix(np.einsum("ajbj->ab", t), len(keep))


def fidelity(a: State, b: StateVector) -> float:
    """<b| rho_a |b> (for pure ``a``: |<b|a>|^2)."""
    if a.num_qubits != b.num_qubits:
        raise DimensionError("fidelity between states of different size")
    if isinstance(a, StateVector):
        return float(abs(np.vdot(b.amplitudes, a.amplitudes)) ** 2)
    return float(np.vdot(b.amplitudes, a.matrix @ b.amplitudes).real)


def overlap_abs(a: StateVector, b: StateVector) -> float:
    """|<a|b>|, the global-phase-insensitive comparison of pure states."""
    if a.num_qubits != b.num_qubits:
        raise DimensionError("overlap between states of different size")
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)))


def trace_distance(a: State | np.ndarray, b: State | np.ndarray) -> float:
    ma = as_density(a).matrix if not isinstance(a, np.ndarray) else a
    mb = as_density(b).matrix if not isinstance(b, np.ndarray) else b
    diff = ma - mb
    return 0.5 * float(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))).sum())


def lift_operator(op: np.ndarray, targets: Sequence[int], num_qubits: int) -> np.ndarray:
    """Dense embedding of a local operator into the full register."""
    d = 2**num_qubits
    eye = np.eye(d, dtype=complex).reshape((2,) * num_qubits + (d,))
    return apply_local(eye, num_qubits, op, targets).reshape(d, d)

"""Kraus channels, optical pumping, Lindblad generators and Trotterized evolution."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence, Union

import numpy as np
import scipy.linalg

from .errors import AccuracyError, CompletenessError, DimensionError, DomainError, UnregisteredTermError
from .gates import HamiltonianTerm
from .qstate import DensityMatrix, PauliString, State, apply_operator, as_density

COMPLETENESS_TOL = 1e-10

_P0 = np.array([[1, 0], [0, 0]], dtype=complex)
_LOWER = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """Channel rho -> sum_k E_k rho E_k^dag with dense operation elements."""

    elements: tuple
    num_qubits: int

    def __post_init__(self):
        elements = tuple(np.asarray(e, dtype=complex) for e in self.elements)
        d = 2**self.num_qubits
        if not elements or any(e.shape != (d, d) for e in elements):
            raise DimensionError(f"Kraus elements must be {d}x{d}")
        object.__setattr__(self, "elements", elements)
        err = self.completeness_error()
        if err > COMPLETENESS_TOL:
            raise CompletenessError(f"sum E^dag E deviates from identity by {err:.3e}")

    @property
    def dim(self) -> int:
        return 2**self.num_qubits

    def completeness_error(self) -> float:
        acc = sum(e.conj().T @ e for e in self.elements)
        return float(np.abs(acc - np.eye(self.dim)).max())

    def superoperator(self) -> np.ndarray:
        """Matrix acting on row-major vec(rho)."""
        return sum(np.kron(e, e.conj()) for e in self.elements)

    def choi(self) -> np.ndarray:
        """Normalized Choi state sum_k vec(E_k) vec(E_k)^dag / d."""
        vecs = np.stack([e.reshape(-1) for e in self.elements], axis=1)
        return vecs @ vecs.conj().T / self.dim

    def then(self, other: "KrausChannel") -> "KrausChannel":
        """Channel applying ``self`` first and ``other`` second."""
        if other.num_qubits != self.num_qubits:
            raise DimensionError("cannot compose channels on different registers")
        return KrausChannel(tuple(b @ a for b in other.elements for a in self.elements), self.num_qubits)

    @classmethod
    def identity(cls, num_qubits: int) -> "KrausChannel":
        return cls((np.eye(2**num_qubits, dtype=complex),), num_qubits)

    @classmethod
    def unitary(cls, u: np.ndarray) -> "KrausChannel":
        u = np.asarray(u, dtype=complex)
        return cls((u,), int(u.shape[0]).bit_length() - 1)


def choi_distance(a: KrausChannel, b: KrausChannel) -> float:
    """Trace distance between the normalized Choi states of two channels."""
    if a.num_qubits != b.num_qubits:
        raise DimensionError("cannot compare channels on different registers")
    # the Choi difference is W S W^dag with W = [vec(E_k)..., vec(F_l)...] and
    # S = diag(+1, ..., -1, ...); with W = QR its spectrum is that of R S R^dag
    w = np.stack([e.reshape(-1) for e in a.elements + b.elements], axis=1) / np.sqrt(a.dim)
    s = np.array([1.0] * len(a.elements) + [-1.0] * len(b.elements))
    r = np.linalg.qr(w, mode="r")
    m = (r * s[None, :]) @ r.conj().T
    return 0.5 * float(np.abs(np.linalg.eigvalsh(0.5 * (m + m.conj().T))).sum())


def apply_channel(rho: State, ch: KrausChannel) -> DensityMatrix:
    rho = as_density(rho)
    if rho.num_qubits != ch.num_qubits:
        raise DimensionError(f"{ch.num_qubits}-qubit channel on {rho.num_qubits}-qubit state")
    err = ch.completeness_error()
    if err > COMPLETENESS_TOL:
        raise CompletenessError(f"channel violates completeness by {err:.3e}")
    m = rho.matrix
    out = sum(e @ m @ e.conj().T for e in ch.elements)
    return DensityMatrix(out, rho.num_qubits)


def _projectors(stabilizer: PauliString) -> tuple[np.ndarray, np.ndarray]:
    if not stabilizer.is_hermitian():
        raise DomainError(f"stabilizer {stabilizer} is not Hermitian")
    a = stabilizer.to_matrix()
    eye = np.eye(a.shape[0])
    return 0.5 * (eye + a), 0.5 * (eye - a)


def stabilizer_pump_channel(stabilizer: PauliString, flip: PauliString, theta: float) -> KrausChannel:
    """Pump the -1 eigenspace of ``stabilizer`` into the +1 eigenspace.

    E_1 = P+ + cos(theta) P-, E_2 = sin(theta) flip P-; a -1 eigenstate is
    converted with probability sin(theta)^2 and +1 eigenstates are dark.
    """
    if flip.num_qubits != stabilizer.num_qubits:
        raise DimensionError("flip and stabilizer act on different registers")
    if flip.commutes_with(stabilizer):
        raise DomainError(f"flip {flip} commutes with {stabilizer}; it cannot pump")
    p_plus, p_minus = _projectors(stabilizer)
    e1 = p_plus + np.cos(theta) * p_minus
    e2 = np.sin(theta) * flip.to_matrix() @ p_minus
    return KrausChannel((e1, e2), stabilizer.num_qubits)


def optical_pump_reset(rho: State, qubit: int = 0) -> DensityMatrix:
    """Incoherently reset ``qubit`` to |0> with Kraus pair {|0><0|, |0><1|}."""
    rho = as_density(rho)
    return DensityMatrix(
        apply_operator(rho, _P0, (qubit,)).matrix + apply_operator(rho, _LOWER, (qubit,)).matrix,
        rho.num_qubits,
    )


@dataclass(frozen=True, eq=False)
class LindbladTerm:
    """Jump operator with rate; pump terms also remember their stabilizer and flip."""

    jump: np.ndarray
    rate: float
    stabilizer: PauliString | None = None
    flip: PauliString | None = None

    def __post_init__(self):
        object.__setattr__(self, "jump", np.asarray(self.jump, dtype=complex))
        if not (np.isfinite(self.rate) and self.rate >= 0):
            raise DomainError(f"rate must be finite and non-negative, got {self.rate}")

    @classmethod
    def pump(cls, stabilizer: PauliString, flip: PauliString, rate: float) -> "LindbladTerm":
        """c = flip (1 - A)/2, the stabilizer-pumping jump operator."""
        if flip.commutes_with(stabilizer):
            raise DomainError(f"flip {flip} commutes with {stabilizer}")
        _, p_minus = _projectors(stabilizer)
        return cls(flip.to_matrix() @ p_minus, rate, stabilizer, flip)

    @classmethod
    def dephasing(cls, op: PauliString, rate: float) -> "LindbladTerm":
        return cls(op.to_matrix(), rate)


@dataclass(eq=False)
class MasterEquation:
    hamiltonian_terms: Sequence[HamiltonianTerm] = field(default_factory=list)
    lindblad_terms: Sequence[LindbladTerm] = field(default_factory=list)
    num_qubits: int | None = None

    def __post_init__(self):
        sizes = {t.string.num_qubits for t in self.hamiltonian_terms}
        sizes |= {int(t.jump.shape[0]).bit_length() - 1 for t in self.lindblad_terms}
        if self.num_qubits is not None:
            sizes.add(self.num_qubits)
        if len(sizes) != 1:
            raise DimensionError(f"terms act on registers of sizes {sorted(sizes)}")
        self.num_qubits = sizes.pop()

    @property
    def dim(self) -> int:
        return 2**self.num_qubits

    @cached_property
    def hamiltonian(self) -> np.ndarray:
        h = np.zeros((self.dim, self.dim), dtype=complex)
        for t in self.hamiltonian_terms:
            h += t.matrix()
        return h

    @cached_property
    def _jumps(self) -> list[tuple[float, np.ndarray, np.ndarray, np.ndarray]]:
        out = []
        for t in self.lindblad_terms:
            c = t.jump
            out.append((t.rate, c, c.conj().T, c.conj().T @ c))
        return out

    def liouvillian(self) -> np.ndarray:
        """Superoperator on row-major vec(rho)."""
        eye = np.eye(self.dim)
        h = self.hamiltonian
        lv = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
        for rate, c, _, cdc in self._jumps:
            lv += rate * (np.kron(c, c.conj()) - 0.5 * np.kron(cdc, eye) - 0.5 * np.kron(eye, cdc.T))
        return lv


def lindblad_rhs(rho: State | np.ndarray, eq: MasterEquation) -> np.ndarray:
    """d rho / dt = -i[H, rho] + sum gamma/2 (2 c rho c^dag - c^dag c rho - rho c^dag c)."""
    m = rho if isinstance(rho, np.ndarray) else as_density(rho).matrix
    if m.shape != (eq.dim, eq.dim):
        raise DimensionError(f"state of dimension {m.shape[0]} for a {eq.dim}-dimensional equation")
    h = eq.hamiltonian
    out = -1j * (h @ m - m @ h)
    for rate, c, cd, cdc in eq._jumps:
        out += rate * (c @ m @ cd - 0.5 * (cdc @ m + m @ cdc))
    return out


def rk4_step(m: np.ndarray, eq: MasterEquation, dt: float) -> np.ndarray:
    k1 = lindblad_rhs(m, eq)
    k2 = lindblad_rhs(m + 0.5 * dt * k1, eq)
    k3 = lindblad_rhs(m + 0.5 * dt * k2, eq)
    k4 = lindblad_rhs(m + dt * k3, eq)
    return m + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate_master_equation(rho0: State, eq: MasterEquation, t_final: float, dt: float,
                              max_trace_drift: float = 1e-6) -> DensityMatrix:
    """Fixed-step RK4 from 0 to ``t_final``; the step is shrunk to divide t_final.

    Raises AccuracyError when the trace or the trace norm of the result moves
    more than ``max_trace_drift`` away from 1.
    """
    rho0 = as_density(rho0)
    if t_final < 0 or dt <= 0:
        raise ValueError("need t_final >= 0 and dt > 0")
    if t_final == 0:
        return rho0.copy()
    if dt > t_final:
        raise ValueError("dt must not exceed t_final")
    n_steps = math.ceil(t_final / dt - 1e-12)
    h = t_final / n_steps
    m = rho0.matrix.copy()
    for _ in range(n_steps):
        m = rk4_step(m, eq, h)
        drift = abs(np.trace(m) - 1.0)
        if drift > max_trace_drift:
            raise AccuracyError(f"trace drifted by {drift:.3e}; reduce dt")
    # RK4 keeps the trace exactly; an unstable step shows up in the trace norm
    norm = np.abs(np.linalg.eigvalsh(0.5 * (m + m.conj().T))).sum()
    if abs(norm - 1.0) > max_trace_drift:
        raise AccuracyError(f"trace norm drifted to {norm:.6g}; reduce dt")
    return DensityMatrix(m, rho0.num_qubits)


def exact_propagator(eq: MasterEquation, t: float) -> np.ndarray:
    """exp(L t) as a superoperator (row-major vec convention)."""
    return scipy.linalg.expm(eq.liouvillian() * t)


def apply_superoperator(s: np.ndarray, rho: State) -> DensityMatrix:
    rho = as_density(rho)
    return DensityMatrix((s @ rho.matrix.reshape(-1)).reshape(rho.dim, rho.dim), rho.num_qubits)


Term = Union[HamiltonianTerm, LindbladTerm]
Builder = Callable[[Term, float], KrausChannel]


def trotter_channels(eq: MasterEquation, tau: float, builders: Builder | None = None) -> list[KrausChannel]:
    """Per-term channels of one Trotter step, coherent terms first.

    ``builders(term, tau)`` returns the realization of one term. By default
    each term is realized by its ancilla circuit (``circuits.circuit_realization``)
    with phi = E tau and theta = sqrt(gamma tau).
    """
    if builders is None:
        from .circuits import circuit_realization as builders
    out = []
    for term in list(eq.hamiltonian_terms) + list(eq.lindblad_terms):
        ch = builders(term, tau)
        if ch is None:
            raise UnregisteredTermError(f"no realization for term {term!r}")
        out.append(ch)
    return out


def trotter_step(rho: State, eq: MasterEquation, tau: float, builders: Builder | None = None,
                 channels: Sequence[KrausChannel] | None = None) -> DensityMatrix:
    """One first-order Trotter step: every coherent block, then every dissipative block."""
    if channels is None:
        channels = trotter_channels(eq, tau, builders)
    out = as_density(rho)
    for ch in channels:
        out = apply_channel(out, ch)
    return out


def trotter_evolve(rho: State, eq: MasterEquation, tau: float, steps: int,
                   builders: Builder | None = None) -> list[DensityMatrix]:
    """States after 0..steps Trotter steps (realizations built once)."""
    channels = trotter_channels(eq, tau, builders)
    out = [as_density(rho)]
    for _ in range(steps):
        out.append(trotter_step(out[-1], eq, tau, channels=channels))
    return out


def exact_term_builder(term: Term, tau: float) -> KrausChannel:
    """Realize a term by its own exact propagator exp(L_term tau)."""
    if isinstance(term, HamiltonianTerm):
        return KrausChannel.unitary(scipy.linalg.expm(-1j * tau * term.matrix()))
    sub = MasterEquation([], [term])
    s = exact_propagator(sub, tau)
    return superoperator_to_kraus(s, sub.num_qubits)


def superoperator_to_kraus(s: np.ndarray, num_qubits: int, atol: float = 1e-12) -> KrausChannel:
    """Kraus form of a CP map given on row-major vec(rho), via its Choi matrix."""
    d = 2**num_qubits
    # Choi J[(i,k),(j,l)] = S[(i,j),(k,l)]
    j = s.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)
    w, v = np.linalg.eigh(0.5 * (j + j.conj().T))
    elements = [np.sqrt(wi) * v[:, i].reshape(d, d) for i, wi in enumerate(w) if wi > atol]
    return KrausChannel(tuple(elements), num_qubits)


@dataclass
class LimitReport:
    theta: float
    tau: float
    steps: int
    per_step: float
    cumulative: float


def lindblad_limit_check(stabilizer: PauliString, flip: PauliString, theta: float, tau: float = 1.0,
                         steps: int = 100, rho0: State | None = None, substeps: int = 10) -> LimitReport:
    """Repeated pump channel vs. RK4 of the pump master equation with gamma = theta^2/tau.

    ``per_step`` is the largest one-step trace distance between the channel and
    the integrator started from the same state along the channel trajectory;
    ``cumulative`` compares the two evolutions after ``steps`` steps.
    """
    from .qstate import trace_distance

    ch = stabilizer_pump_channel(stabilizer, flip, theta)
    eq = MasterEquation([], [LindbladTerm.pump(stabilizer, flip, theta**2 / tau)])
    n = stabilizer.num_qubits
    if rho0 is None:
        rho0 = DensityMatrix(np.diag([0.0] * (2**n - 1) + [1.0]).astype(complex), n)
    a = as_density(rho0)
    b = a
    per_step = 0.0
    for _ in range(steps):
        a_next = apply_channel(a, ch)
        per_step = max(per_step, trace_distance(a_next, integrate_master_equation(a, eq, tau, tau / substeps)))
        a = a_next
        b = integrate_master_equation(b, eq, tau, tau / substeps)
    return LimitReport(theta, tau, steps, per_step, trace_distance(a, b))

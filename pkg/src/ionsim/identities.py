"""Catalogue of circuit identities checked against independent dense oracles."""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Callable, Iterator

import numpy as np

from .channels import choi_distance, stabilizer_pump_channel
from .circuits import (
    block_flip,
    coherent_block,
    coherent_block_ancilla_free,
    correcting_unitary,
    decompose_correcting_gate,
    deviation,
    dissipative_block,
    refocused_ms_excluding,
    star_ms,
    system_channel,
    two_ion_ms_via_refocus,
)
from .gates import backward_ms_as_forward, matrix_exp_oracle, ms_unitary
from .qstate import PAULI_MATRICES, PauliString, lift_operator

TOL = 1e-10


@dataclass(frozen=True)
class IdentityResult:
    name: str
    deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.deviation < self.tolerance


def _sigma_sum(phi: float, targets, n: int) -> np.ndarray:
    loc = np.cos(phi) * PAULI_MATRICES["X"] + np.sin(phi) * PAULI_MATRICES["Y"]
    return sum(lift_operator(loc, (q,), n) for q in targets)


def ms_oracle(theta: float, phi: float, targets, n: int) -> np.ndarray:
    s = _sigma_sum(phi, targets, n)
    return matrix_exp_oracle(theta / 4 * s @ s)


def ancilla_oracle(stabilizer: PauliString, phi: float) -> np.ndarray:
    """exp(i phi sigma^z_0 A) on ancilla + system."""
    h = np.kron(stabilizer.to_matrix(), PAULI_MATRICES["Z"])
    return matrix_exp_oracle(-phi * h)


def _two_ion_product(theta: float, phi: float, n: int) -> np.ndarray:
    return reduce(lambda acc, i: ms_oracle(theta, phi, (0, i), n) @ acc, range(1, n), np.eye(2**n))


def _checks(strict: bool) -> Iterator[tuple[str, Callable[[], float]]]:
    def unitary_check(circuit_fn, oracle_fn):
        return lambda: deviation(circuit_fn().unitary(), oracle_fn(), strict)

    for phi in (0.1, np.pi / 4, np.pi / 2, 1.3):
        a = PauliString("XXXX")
        yield (f"exp(i phi Z0 A) n=4 phi={phi:.4g}",
               unitary_check(lambda a=a, phi=phi: coherent_block(a, phi), lambda a=a, phi=phi: ancilla_oracle(a, phi)))
    for kind in "XY":
        for n in range(1, 7):
            a = PauliString(kind * n)
            yield (f"ancilla factor {kind.lower()}-type n={n}",
                   unitary_check(lambda a=a: coherent_block(a, 0.37), lambda a=a: ancilla_oracle(a, 0.37)))
    for label in ("ZZZZ", "XYZ", "-XXXX", "ZIZY"):
        a = PauliString.from_label(label)
        yield (f"basis-changed block {label}",
               unitary_check(lambda a=a: coherent_block(a, 0.37), lambda a=a: ancilla_oracle(a, 0.37)))
    for n in (2, 3, 4):
        a = PauliString("X" * n)
        yield (f"ancilla-free n={n}",
               unitary_check(lambda a=a: coherent_block_ancilla_free(a, np.pi / 8),
                             lambda a=a: matrix_exp_oracle(-np.pi / 8 * a.to_matrix())))
    for n in range(1, 7):
        for theta in (0.05, np.pi / 4, np.pi / 2):
            a = PauliString("X" * n)

            def pump(a=a, theta=theta):
                q = a.num_qubits
                f = block_flip(a, q)
                return choi_distance(system_channel(dissipative_block(a, theta, q)),
                                     stabilizer_pump_channel(a, f, theta))

            yield f"pump channel n={n} theta={theta:.4g}", pump
    for n in (2, 3, 4, 5):
        for theta in (0.3, np.pi / 2):
            yield (f"backward MS ions={n} theta={theta:.4g}",
                   unitary_check(lambda n=n, theta=theta: backward_ms_as_forward(theta, 0.7, n),
                                 lambda n=n, theta=theta: ms_oracle(-theta, 0.7, range(n), n)))
    for n in (3, 4, 5):
        for theta in (np.pi / 4, np.pi / 2):
            others = tuple(range(n - 1))
            yield (f"echo-excluded MS ions={n} theta={theta:.4g}",
                   unitary_check(lambda n=n, theta=theta: refocused_ms_excluding(n - 1, theta, 0.3, n),
                                 lambda n=n, theta=theta, o=others: ms_oracle(theta, 0.3, o, n)))
            yield (f"star ions={n} theta={theta:.4g}",
                   unitary_check(lambda n=n, theta=theta: star_ms(theta, 0.3, n),
                                 lambda n=n, theta=theta: _two_ion_product(theta, 0.3, n)))
            yield (f"two-ion MS via echo ions={n} theta={theta:.4g}",
                   unitary_check(lambda n=n, theta=theta: two_ion_ms_via_refocus(n - 1, theta, 0.3, n),
                                 lambda n=n, theta=theta: ms_oracle(theta, 0.3, (0, n - 1), n)))
    for row in range(4):
        for theta in (0.0, 0.4, np.pi / 4, np.pi / 2, 2.0):
            yield (f"correcting gate row {row} theta={theta:.4g}",
                   unitary_check(lambda row=row, theta=theta: decompose_correcting_gate(row, theta, 3, 5),
                                 lambda row=row, theta=theta: correcting_unitary(row, theta, 3, 5)))
    for k in (2, 3, 5):
        for theta in (0.3, np.pi / 2):
            yield (f"MS vs oracle k={k} theta={theta:.4g}",
                   lambda k=k, theta=theta: deviation(ms_unitary(theta, 0.9, range(k), k),
                                                      ms_oracle(theta, 0.9, range(k), k), True))


def verify_identities(strict: bool = False, tol: float = TOL) -> list[IdentityResult]:
    """Evaluate every identity; ``strict`` also demands equal global phases.

    Channel identities (pump channels) are compared by Choi distance, which has
    no phase freedom, so ``strict`` does not change them.
    """
    return [IdentityResult(name, float(fn()), tol) for name, fn in _checks(strict)]

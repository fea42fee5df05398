from functools import reduce

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ionsim.errors import CapacityError, DimensionError, DomainError
from ionsim.qstate import (
    DensityMatrix,
    PauliString,
    StateVector,
    apply_operator,
    apply_pauli_string,
    expectation,
    fidelity,
    ghz_state,
    lift_operator,
    new_basis_state,
    partial_trace,
    product_state,
    random_density,
    random_state,
    trace_distance,
)

P = {"I": np.eye(2), "X": np.array([[0, 1], [1, 0]]), "Y": np.array([[0, -1j], [1j, 0]]), "Z": np.diag([1, -1])}

pauli_strings = st.text("IXYZ", min_size=1, max_size=4)


def dense(symbols):
    return reduce(np.kron, [P[s] for s in reversed(symbols)]).astype(complex)


def test_basis_state_little_endian():
    psi = new_basis_state(3, "100")
    assert psi.amplitudes[1] == 1
    psi = new_basis_state(3, [0, 0, 1])
    assert psi.amplitudes[4] == 1


def test_label_round_trip():
    for label in ("XXZI", "-XYZ", "+iZ", "-iYY"):
        assert PauliString.from_label(label).label().lstrip("+") == label.lstrip("+")


def test_to_matrix_matches_kron():
    assert np.allclose(PauliString("XIZ").to_matrix(), dense("XIZ"))
    assert np.allclose(PauliString("YY", 2).to_matrix(), -dense("YY"))


@given(pauli_strings.flatmap(lambda a: st.tuples(st.just(a), st.text("IXYZ", min_size=len(a), max_size=len(a)))))
def test_product_matches_matrices(pair):
    a, b = (PauliString(s) for s in pair)
    assert np.allclose((a * b).to_matrix(), a.to_matrix() @ b.to_matrix())
    comm = a.to_matrix() @ b.to_matrix() - b.to_matrix() @ a.to_matrix()
    assert a.commutes_with(b) == np.allclose(comm, 0)


def test_invalid_symbols():
    with pytest.raises(ValueError):
        PauliString("XQ")
    with pytest.raises(DimensionError):
        PauliString("X") * PauliString("XX")


def test_embed_and_support():
    p = PauliString("XZ").embed(4, 1)
    assert p.symbols == "IXZI"
    assert p.support == (1, 2) and p.weight == 2
    with pytest.raises(DimensionError):
        PauliString("XZ").embed(2, 1)


@settings(max_examples=30)
@given(pauli_strings, st.integers(0, 2**31 - 1))
def test_expectation_matches_dense(symbols, seed):
    rng = np.random.default_rng(seed)
    n = len(symbols)
    psi = random_state(n, rng)
    p = PauliString(symbols)
    m = dense(symbols)
    assert expectation(psi, p) == pytest.approx(np.vdot(psi.amplitudes, m @ psi.amplitudes).real, abs=1e-12)
    rho = random_density(n, rng)
    assert expectation(rho, p) == pytest.approx(np.trace(m @ rho.matrix).real, abs=1e-12)
    out = apply_pauli_string(psi, p)
    assert np.allclose(out.amplitudes, m @ psi.amplitudes)
    rout = apply_pauli_string(rho, p)
    assert np.allclose(rout.matrix, m @ rho.matrix @ m.conj().T)


def test_expectation_rejects_antihermitian():
    with pytest.raises(DomainError):
        expectation(new_basis_state(1, "0"), PauliString("Z", 1))


def test_apply_operator_targets_order(rng):
    u = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))[0]
    psi = random_state(3, rng)
    out = apply_operator(psi, u, (2, 0))
    assert np.allclose(out.amplitudes, lift_operator(u, (2, 0), 3) @ psi.amplitudes)
    # bit j of the matrix index is targets[j]
    swap = np.eye(4)[[0, 2, 1, 3]]
    assert np.allclose(lift_operator(swap, (0, 1), 3), np.kron(np.eye(2), swap))
    rho = psi.to_density()
    assert np.allclose(apply_operator(rho, u, (2, 0)).matrix, out.to_density().matrix)
    with pytest.raises(DimensionError):
        apply_operator(psi, u, (0, 0))


def test_partial_trace(rng):
    a, b = random_state(1, rng), random_state(2, rng)
    joint = StateVector(np.kron(b.amplitudes, a.amplitudes), 3)
    assert np.allclose(partial_trace(joint, [0]).matrix, a.to_density().matrix)
    assert np.allclose(partial_trace(joint.to_density(), [1, 2]).matrix, b.to_density().matrix)


def test_product_state_order(rng):
    a, b = random_state(1, rng), random_state(1, rng)
    assert np.allclose(product_state([a.amplitudes, b.amplitudes]).amplitudes, np.kron(b.amplitudes, a.amplitudes))


def test_ghz_and_metrics():
    ghz = ghz_state(4)
    assert expectation(ghz, PauliString("XXXX")) == pytest.approx(1)
    assert fidelity(ghz, ghz) == pytest.approx(1)
    zero = new_basis_state(4, "0000")
    assert trace_distance(ghz, zero) == pytest.approx(np.sqrt(1 - 0.5))
    assert fidelity(zero.to_density(), ghz) == pytest.approx(0.5)


def test_capacity_limits():
    with pytest.raises(CapacityError):
        new_basis_state(21, "0" * 21)
    with pytest.raises(CapacityError):
        DensityMatrix(np.eye(2**9) / 2**9)


def test_density_validity(rng):
    rho = random_density(3, rng, rank=2)
    assert rho.is_valid()
    assert rho.trace() == pytest.approx(1)
    assert rho.purity() <= 1 + 1e-12

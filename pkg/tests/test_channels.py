from functools import partial

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from ionsim.channels import (
    KrausChannel,
    LindbladTerm,
    MasterEquation,
    apply_channel,
    apply_superoperator,
    choi_distance,
    exact_propagator,
    exact_term_builder,
    integrate_master_equation,
    lindblad_limit_check,
    lindblad_rhs,
    optical_pump_reset,
    stabilizer_pump_channel,
    superoperator_to_kraus,
    trotter_channels,
    trotter_evolve,
)
from ionsim.circuits import circuit_realization
from ionsim.errors import AccuracyError, CompletenessError, DimensionError, DomainError, UnregisteredTermError
from ionsim.gates import HamiltonianTerm
from ionsim.qstate import DensityMatrix, PauliString, expectation, new_basis_state, random_density, trace_distance

A = PauliString("XXXX")
F = PauliString("IIIZ")


@settings(max_examples=25)
@given(st.floats(0, np.pi, allow_nan=False))
def test_pump_channel_law(theta):
    ch = stabilizer_pump_channel(A, F, theta)
    assert ch.completeness_error() < 1e-12
    a = A.to_matrix()
    p_minus = 0.5 * (np.eye(16) - a)
    rho = DensityMatrix(p_minus / np.trace(p_minus), 4)
    out = apply_channel(rho, ch)
    assert expectation(out, A) == pytest.approx(-1 + 2 * np.sin(theta) ** 2, abs=1e-12)


def test_pump_leaves_plus_space_invariant(rng):
    a = A.to_matrix()
    p_plus = 0.5 * (np.eye(16) + a)
    v = p_plus @ (rng.normal(size=16) + 1j * rng.normal(size=16))
    rho = DensityMatrix(np.outer(v, v.conj()) / np.vdot(v, v).real, 4)
    out = apply_channel(rho, stabilizer_pump_channel(A, F, 0.8))
    assert trace_distance(out, rho) < 1e-12


def test_pump_rejects_commuting_flip():
    with pytest.raises(DomainError):
        stabilizer_pump_channel(A, PauliString("IIIX"), 0.5)
    with pytest.raises(DimensionError):
        stabilizer_pump_channel(A, PauliString("Z"), 0.5)


def test_kraus_validation():
    with pytest.raises(CompletenessError):
        KrausChannel((0.5 * np.eye(2),), 1)
    with pytest.raises(DimensionError):
        KrausChannel((np.eye(4),), 1)


def test_choi_distance_known_values():
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    ident, flip = KrausChannel.identity(1), KrausChannel.unitary(x)
    assert choi_distance(ident, ident) < 1e-15
    assert choi_distance(ident, flip) == pytest.approx(1.0)
    half = KrausChannel((np.sqrt(0.5) * np.eye(2), np.sqrt(0.5) * x), 1)
    assert choi_distance(ident, half) == pytest.approx(0.5)


def test_choi_distance_matches_dense(rng):
    a = stabilizer_pump_channel(PauliString("XX"), PauliString("IZ"), 0.4)
    b = stabilizer_pump_channel(PauliString("XX"), PauliString("IZ"), 0.5)
    diff = a.choi() - b.choi()
    dense = 0.5 * np.abs(np.linalg.eigvalsh(diff)).sum()
    assert choi_distance(a, b) == pytest.approx(dense, abs=1e-13)


def test_channel_composition():
    a = stabilizer_pump_channel(A, F, 0.3)
    b = stabilizer_pump_channel(A, F, 0.4)
    rho = new_basis_state(4, "1111").to_density()
    seq = apply_channel(apply_channel(rho, a), b)
    assert trace_distance(apply_channel(rho, a.then(b)), seq) < 1e-12
    s = b.superoperator() @ a.superoperator()
    assert trace_distance(apply_superoperator(s, rho), seq) < 1e-12


def test_optical_pump_reset(rng):
    rho = random_density(2, rng)
    out = optical_pump_reset(rho, 0)
    z0 = PauliString("ZI")
    assert expectation(out, z0) == pytest.approx(1)
    assert out.trace() == pytest.approx(1)


def test_master_equation_dimensions():
    with pytest.raises(DimensionError):
        MasterEquation([HamiltonianTerm(1.0, PauliString("XX"))], [LindbladTerm.pump(A, F, 1.0)])
    with pytest.raises(DomainError):
        LindbladTerm.pump(A, F, -1.0)
    with pytest.raises(DomainError):
        LindbladTerm.pump(A, PauliString("XIII"), 1.0)


def test_liouvillian_matches_rhs(rng):
    eq = MasterEquation([HamiltonianTerm(-0.7, PauliString("XZ"))],
                        [LindbladTerm.pump(PauliString("XX"), PauliString("IZ"), 0.3),
                         LindbladTerm.dephasing(PauliString("ZI"), 0.1)])
    rho = random_density(2, rng).matrix
    assert np.allclose((eq.liouvillian() @ rho.reshape(-1)).reshape(4, 4), lindblad_rhs(rho, eq))


def test_rk4_matches_exact_propagator(rng):
    eq = MasterEquation([HamiltonianTerm(-1.0, PauliString("XX"))],
                        [LindbladTerm.pump(PauliString("XX"), PauliString("IZ"), 0.5)])
    rho = random_density(2, rng)
    num = integrate_master_equation(rho, eq, 1.0, 0.01)
    exact = apply_superoperator(exact_propagator(eq, 1.0), rho)
    assert trace_distance(num, exact) < 1e-9


def test_integrator_accuracy_guard():
    eq = MasterEquation([HamiltonianTerm(-50.0, PauliString("XX"))],
                        [LindbladTerm.pump(PauliString("XX"), PauliString("IZ"), 50.0)])
    with pytest.raises(AccuracyError):
        integrate_master_equation(new_basis_state(2, "11"), eq, 1.0, 0.5)
    with pytest.raises(ValueError):
        integrate_master_equation(new_basis_state(2, "11"), eq, 1.0, 2.0)


def test_superoperator_to_kraus_round_trip():
    ch = stabilizer_pump_channel(PauliString("XX"), PauliString("IZ"), 0.6)
    back = superoperator_to_kraus(ch.superoperator(), 2)
    assert choi_distance(ch, back) < 1e-12


def test_pump_dissipator_limit():
    # per-step error falls as theta^4
    r1 = lindblad_limit_check(PauliString("XX"), PauliString("IZ"), 0.1, steps=10)
    r2 = lindblad_limit_check(PauliString("XX"), PauliString("IZ"), 0.05, steps=10)
    assert np.log2(r1.per_step / r2.per_step) > 3.8


def test_trotter_converges_to_master_equation():
    eq = MasterEquation([HamiltonianTerm(-1.0, PauliString("XX")), HamiltonianTerm(-0.5, PauliString("ZI"))],
                        [LindbladTerm.pump(PauliString("XX"), PauliString("IZ"), 0.5)])
    rho0 = new_basis_state(2, "11")
    exact = integrate_master_equation(rho0, eq, 1.0, 0.01)
    errs = []
    for k in (8, 16, 32):
        tau = 1.0 / k
        errs.append(trace_distance(trotter_evolve(rho0, eq, tau, k, exact_term_builder)[-1], exact))
    # first-order splitting: error halves with tau
    assert errs[0] / errs[1] == pytest.approx(2, rel=0.15)
    assert errs[1] / errs[2] == pytest.approx(2, rel=0.15)


def test_circuit_realization_per_term():
    h = HamiltonianTerm(-0.8, PauliString("XYZ"))
    assert choi_distance(circuit_realization(h, 0.1), exact_term_builder(h, 0.1)) < 1e-10
    refocused = partial(circuit_realization, refocus=True)
    assert choi_distance(refocused(h, 0.1), exact_term_builder(h, 0.1)) < 1e-10
    pump = LindbladTerm.pump(PauliString("ZZZ"), PauliString("XII"), 0.4)
    ch = circuit_realization(pump, 0.25)
    assert choi_distance(ch, stabilizer_pump_channel(PauliString("ZZZ"), PauliString("XII"), np.sqrt(0.1))) < 1e-10


def test_unregistered_term():
    eq = MasterEquation([], [LindbladTerm.dephasing(PauliString("ZZ"), 0.1)])
    with pytest.raises(UnregisteredTermError):
        trotter_channels(eq, 0.1)
    with pytest.raises(UnregisteredTermError):
        trotter_channels(MasterEquation([HamiltonianTerm(1.0, PauliString("XX"))]), 0.1, lambda t, tau: None)


def test_exact_term_builder_unitary():
    h = HamiltonianTerm(0.3, PauliString("XZ"))
    ch = exact_term_builder(h, 0.5)
    assert np.allclose(ch.elements[0], expm(-0.15j * PauliString("XZ").to_matrix()))

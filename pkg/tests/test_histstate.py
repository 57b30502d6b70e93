"""Unit tests for history states and system-time entanglement."""

import numpy as np
import pytest

from clocksim import hamiltonians, histstate
from clocksim.histstate import (
    HistoryState,
    build_history_state,
    build_history_state_circuit,
    check_majorization,
    condition_on_time,
    delta_coefficients,
    entanglement_loschmidt_bound,
    fluctuation_bound,
    linear_entropy,
    offdiagonal_delta_weight,
    reduced_states,
)
from clocksim.qcore import (
    PauliString,
    PauliSum,
    ValidationError,
    hermitian_eig,
    pauli_sum_to_matrix,
    propagator,
    purity,
)

RNG = np.random.default_rng(1234)

Z = PauliSum.from_terms([PauliString(1.0, "Z")])
X = PauliSum.from_terms([PauliString(1.0, "X")])


def random_hermitian_sum(n, rng, terms=8):
    letters = ["".join(rng.choice(list("IXYZ"), size=n)) for _ in range(terms)]
    return PauliSum.from_terms(
        [PauliString(c, w) for c, w in zip(rng.normal(size=terms), letters)], n)


def random_state(q, rng):
    a = rng.normal(size=2**q) + 1j * rng.normal(size=2**q)
    return a / np.linalg.norm(a)


def test_separable_history_state():
    psi = build_history_state(Z, np.array([1.0, 0.0]), m=2, epsilon=0.3)
    expect = np.zeros(8, dtype=complex)
    for t in range(4):
        expect[2 * t] = 0.5 * np.exp(-1j * 0.3 * t)
    assert np.max(np.abs(psi.state - expect)) < 1e-12
    assert linear_entropy(psi) < 1e-12
    _, rho_s = reduced_states(psi)
    assert abs(purity(rho_s) - 1.0) < 1e-12


def test_maximally_entangled_single_clock():
    psi = build_history_state(X, np.array([1.0, 0.0]), m=1, epsilon=np.pi / 2)
    expect = np.array([1.0, 0.0, 0.0, -1.0j]) / np.sqrt(2)
    assert np.max(np.abs(psi.state - expect)) < 1e-12
    assert abs(linear_entropy(psi) - 0.5) < 1e-12
    rho_t, _ = reduced_states(psi)
    assert np.allclose(rho_t.matrix, 0.5 * np.eye(2))


def test_circuit_path_matches_formula_path():
    h = random_hermitian_sum(3, RNG)
    psi0 = random_state(3, RNG)
    a = build_history_state(h, psi0, m=3, epsilon=0.41)
    b = build_history_state_circuit(h, psi0, m=3, epsilon=0.41)
    assert np.max(np.abs(a.state - b.state)) < 1e-12


def test_history_circuit_gate_log_structure():
    h = random_hermitian_sum(2, RNG)
    circ = histstate.history_circuit(h, random_state(2, RNG), m=3, epsilon=0.2)
    kinds = [g.kind for g in circ.log]
    assert kinds.count("1q") == 3
    assert kinds.count("controlled-multi") == 3


def test_condition_on_time():
    h = random_hermitian_sum(2, RNG)
    psi0 = random_state(2, RNG)
    psi = build_history_state(h, psi0, m=3, epsilon=0.17)
    assert np.max(np.abs(condition_on_time(psi, 0).amplitudes - psi0)) < 1e-12
    mat = pauli_sum_to_matrix(h)
    for t in (1, 5, 7):
        got = condition_on_time(psi, t).amplitudes
        want = propagator(mat, 0.17 * t) @ psi0
        assert abs(abs(np.vdot(got, want)) - 1.0) < 1e-12
    with pytest.raises(ValidationError):
        condition_on_time(psi, 8)


def test_reduced_states_kraus_sum_oracle():
    h = random_hermitian_sum(2, RNG)
    psi0 = random_state(2, RNG)
    psi = build_history_state(h, psi0, m=2, epsilon=0.6)
    mat = pauli_sum_to_matrix(h)
    rho_oracle = np.zeros((4, 4), dtype=complex)
    for t in range(4):
        snap = propagator(mat, 0.6 * t) @ psi0
        rho_oracle += np.outer(snap, snap.conj()) / 4.0
    rho_t, rho_s = reduced_states(psi)
    assert np.max(np.abs(rho_s.matrix - rho_oracle)) < 1e-12
    assert abs(purity(rho_t) - purity(rho_s)) < 1e-12


def test_linear_entropy_matches_schmidt_spectrum():
    h = random_hermitian_sum(2, RNG)
    psi = build_history_state(h, random_state(2, RNG), m=2, epsilon=0.8)
    rho_t, _ = reduced_states(psi)
    p = np.linalg.eigvalsh(rho_t.matrix)
    assert abs(linear_entropy(psi) - (1.0 - np.sum(p**2))) < 1e-12


def test_majorization_eigenstate_trivial():
    h = random_hermitian_sum(2, RNG)
    spec = hermitian_eig(pauli_sum_to_matrix(h))
    psi = build_history_state(h, spec.eigenvectors[:, 0], m=2, epsilon=0.5)
    report = check_majorization(psi, h)
    assert report.holds
    assert report.spectrum_rho_s[0] > 1.0 - 1e-10


def test_majorization_periodic_equality():
    # H = Z + I has two levels split by 2, so tau = pi; one clock qubit
    # with T = tau hits the dephasing exactly.
    h = np.diag([2.0, 0.0])
    plus = np.array([1.0, 1.0]) / np.sqrt(2)
    psi = build_history_state(h, plus, m=1, epsilon=np.pi / 2)
    _, rho_s = reduced_states(psi)
    rho_bar = hamiltonians.dephased_state(h, plus)
    assert np.max(np.abs(rho_s.matrix - rho_bar.matrix)) < 1e-12
    report = check_majorization(psi, h)
    assert report.holds and report.max_violation < 1e-12


def test_majorization_random_instances():
    for _ in range(25):
        n = int(RNG.integers(1, 4))
        m = int(RNG.integers(1, 4))
        h = random_hermitian_sum(n, RNG)
        psi = build_history_state(h, random_state(n, RNG), m=m,
                                  epsilon=float(RNG.uniform(0.05, 2.0)))
        report = check_majorization(psi, h)
        assert report.holds, report.max_violation


def test_entanglement_loschmidt_bound_eigenstate():
    h = random_hermitian_sum(2, RNG)
    spec = hermitian_eig(pauli_sum_to_matrix(h))
    psi0 = spec.eigenvectors[:, 1]
    psi = build_history_state(h, psi0, m=2, epsilon=0.3)
    e2, lbar, slack = entanglement_loschmidt_bound(psi, h, psi0)
    assert abs(e2) < 1e-12 and abs(lbar - 1.0) < 1e-12 and abs(slack) < 1e-12


def test_entanglement_loschmidt_bound_periodic_equality():
    h = np.diag([2.0, 0.0])
    plus = np.array([1.0, 1.0]) / np.sqrt(2)
    psi = build_history_state(h, plus, m=1, epsilon=np.pi / 2)
    e2, lbar, slack = entanglement_loschmidt_bound(psi, h, plus)
    assert abs(slack) < 1e-12
    # E_2 also equals 1 - L_tilde for the periodic construction
    l_tilde = 0.5 * (1.0 + abs(np.vdot(plus, propagator(h, np.pi / 2) @ plus)) ** 2)
    assert abs(e2 - (1.0 - l_tilde)) < 1e-12


def test_entanglement_loschmidt_bound_random():
    for _ in range(20):
        n, m = int(RNG.integers(1, 4)), int(RNG.integers(1, 4))
        h = random_hermitian_sum(n, RNG)
        psi0 = random_state(n, RNG)
        psi = build_history_state(h, psi0, m=m, epsilon=float(RNG.uniform(0.05, 2.0)))
        _, _, slack = entanglement_loschmidt_bound(psi, h, psi0)
        assert slack >= -1e-12


def test_fluctuation_commuting_observable():
    h = random_hermitian_sum(2, RNG)
    mat = pauli_sum_to_matrix(h)
    psi0 = random_state(2, RNG)
    psi = build_history_state(h, psi0, m=2, epsilon=0.4)
    report = fluctuation_bound(psi, h, psi0, h)  # obs = h commutes with itself
    assert report.sigma2 < 1e-12
    assert np.max(np.abs(mat - mat.conj().T)) < 1e-12


def test_fluctuation_single_qubit_closed_form():
    plus = np.array([1.0, 1.0]) / np.sqrt(2)
    psi = build_history_state(Z, plus, m=2, epsilon=0.7)
    report = fluctuation_bound(psi, Z, plus, X)
    # <X(t)> = cos 2t: variance 1/2; L_bar = 1/2; Delta^2 = 4.
    assert abs(report.sigma2 - 0.5) < 1e-12
    assert abs(report.lbar - 0.5) < 1e-12
    assert abs(report.delta2 - 4.0) < 1e-12
    assert report.bound_lbar >= report.sigma2
    assert report.bound >= report.sigma2 - 1e-10


def test_fluctuation_chain_random():
    for _ in range(15):
        n = int(RNG.integers(1, 4))
        h = random_hermitian_sum(n, RNG)
        obs = random_hermitian_sum(n, RNG, terms=4)
        psi0 = random_state(n, RNG)
        psi = build_history_state(h, psi0, m=2, epsilon=float(RNG.uniform(0.1, 1.5)))
        r = fluctuation_bound(psi, h, psi0, obs)
        assert r.sigma2 <= r.bound_lbar + 1e-10
        assert r.bound_lbar <= r.bound + 1e-10


def test_delta_coefficients_closed_form():
    energies = np.array([0.0, 0.9, 2.3])
    N, eps = 8, 0.37
    delta = delta_coefficients(energies, N, eps)
    ts = np.arange(N)
    for i in range(3):
        for j in range(3):
            direct = np.mean(np.exp(-1j * (energies[i] - energies[j]) * ts * eps))
            assert abs(delta[i, j] - direct) < 1e-12
    assert np.allclose(np.diag(delta), 1.0)


def test_delta_resonance_handled():
    energies = np.array([0.0, 2.0 * np.pi / 0.5])  # gap * eps = 2 pi exactly
    delta = delta_coefficients(energies, 4, 0.5)
    assert np.allclose(delta, 1.0)


def test_offdiagonal_delta_weight_decreases_under_doubling():
    # Doubling N at fixed eps multiplies each |Delta|^2 by cos^2(N theta / 2) <= 1.
    h = hamiltonians.build_aubry_andre_spin(
        hamiltonians.AubryAndreParams(n=4, J=2.0, lam=1.0))
    weights = [offdiagonal_delta_weight(h, 2**m, 0.3) for m in range(1, 7)]
    assert all(b <= a + 1e-12 for a, b in zip(weights, weights[1:]))


def test_purity_symmetry_over_random_instances():
    for _ in range(10):
        n, m = int(RNG.integers(1, 4)), int(RNG.integers(1, 4))
        psi = build_history_state(random_hermitian_sum(n, RNG), random_state(n, RNG),
                                  m=m, epsilon=float(RNG.uniform(0.1, 2.0)))
        rho_t, rho_s = reduced_states(psi)
        assert abs(purity(rho_t) - purity(rho_s)) < 1e-12


def test_history_state_validation():
    with pytest.raises(ValidationError):
        HistoryState(state=np.ones(8) / np.sqrt(8.0), n=1, m=2, epsilon=0.5, T=1.7)
    bad = np.zeros(8)
    bad[0] = 1.0  # time blocks not uniformly weighted
    with pytest.raises(ValidationError):
        HistoryState(state=bad, n=1, m=2, epsilon=0.5, T=2.0)

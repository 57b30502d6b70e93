"""Unit tests for gate-count models and log audits."""

import numpy as np
import pytest

from clocksim import vhd
from clocksim.depth import (
    DepthReport,
    GateCountModel,
    audit_gate_log,
    cartan_w_gate_count,
    crossover,
    diagonalized_counts,
    trotter_counts,
)
from clocksim.histstate import history_circuit
from clocksim.protocols import parallel_f_circuit
from clocksim.qcore import PauliString, PauliSum, ValidationError

RNG = np.random.default_rng(31)


def test_trotter_counts_small_case():
    m = GateCountModel(gamma=1.0, beta=1.0, l=1, alpha_exp=2.0, epsilon=1.0, N=4)
    rep = trotter_counts(m)
    assert rep.seq_total == 14.0  # 1 + 4 + 9
    assert rep.par_total == 5.0  # 1 + 4


def test_trotter_counts_single_step():
    m = GateCountModel(gamma=0.5, beta=3.0, l=4, alpha_exp=1.7, epsilon=0.3, N=2)
    rep = trotter_counts(m)
    assert abs(rep.seq_total - 0.5 * 4 * 0.3**1.7) < 1e-12
    assert abs(rep.par_total - 0.5 * 3 * 16 * 0.3**1.7) < 1e-12
    assert abs(rep.ratio - 3.0 * 4) < 1e-12


def test_trotter_ratio_approaches_beta_l_over_n():
    m = GateCountModel(gamma=1.0, beta=2.0, l=20, alpha_exp=2.0, epsilon=1.0, N=1024)
    rep = trotter_counts(m)
    target = m.beta * m.l / m.N
    assert 0.5 * target < rep.ratio < 2.0 * target


def test_ratio_band_for_large_n():
    for n_exp in range(6, 13):
        m = GateCountModel(beta=2.0, l=8, alpha_exp=2.0, N=2**n_exp)
        rep = trotter_counts(m)
        assert abs(rep.ratio * m.N / (m.beta * m.l) - 1.0) <= 1.0


def test_ratio_monotone_in_n():
    ratios = []
    for n_exp in range(1, 12):
        m = GateCountModel(beta=2.0, l=6, alpha_exp=2.0, N=2**n_exp)
        ratios.append(trotter_counts(m).ratio)
    assert all(b <= a + 1e-12 for a, b in zip(ratios, ratios[1:]))


def test_crossover_trivial_and_estimate():
    assert crossover(GateCountModel(beta=1.0, l=1)) == 2
    m = GateCountModel(beta=2.0, l=8, alpha_exp=2.0)  # beta*l = 16
    n_star = crossover(m)
    assert n_star <= 2 ** (int(np.ceil(np.log2(16))) + 1)


def test_crossover_doubly_logarithmic_in_dimension():
    # l = log2(d) for d = 2^200; the winning clock size stays modest.
    m = GateCountModel(beta=2.0, l=200, alpha_exp=2.0)
    n_star = crossover(m)
    assert n_star is not None and n_star <= 512


def test_model_validation():
    with pytest.raises(ValidationError):
        GateCountModel(N=3)
    with pytest.raises(ValidationError):
        GateCountModel(gamma=0.0)
    with pytest.raises(ValidationError):
        DepthReport(seq_total=0.0, par_total=1.0, ratio=0.0)


def test_diagonalized_counts_example():
    # n=6, L=3, m=4: 24 controlled rotations + 2*30 ansatz gates + 4 Hadamards.
    w = cartan_w_gate_count(6, 3)
    assert w == 30
    assert diagonalized_counts(6, 4, w) == 88
    assert diagonalized_counts(6, 1, w) == 1 + 6 + 60
    assert diagonalized_counts(6, 4, w, omit_final_w=True) == 88 - 30


def test_history_circuit_audit_matches_structure():
    h = PauliSum.from_terms([PauliString(0.7, "ZZ"), PauliString(0.4, "XI")])
    psi0 = np.array([1.0, 0, 0, 0], dtype=complex)
    circ = history_circuit(h, psi0, m=3, epsilon=0.2)
    counts = audit_gate_log(circ)
    assert counts == {"1q": 3, "controlled-multi": 3}


def test_diagonalized_circuit_audit_matches_model():
    n, L, m_clock = 4, 2, 3
    a = vhd.CartanAnsatz(n=n, L=L, alpha=RNG.uniform(0, 2 * np.pi, 2 * (n - 1) * L),
                         beta=RNG.normal(size=n))
    psi0 = np.zeros(2**n, dtype=complex)
    psi0[0] = 1.0
    for omit in (False, True):
        circ = vhd.diagonalized_history_circuit(a, psi0, m_clock, 0.4, omit_final_w=omit)
        counts = audit_gate_log(circ)
        total = sum(counts.values())
        assert total == diagonalized_counts(n, m_clock, cartan_w_gate_count(n, L), omit)
        assert counts["controlled-1q"] == m_clock * n
        assert counts["1q"] == m_clock
        assert counts["2q"] == (1 if omit else 2) * cartan_w_gate_count(n, L)


def test_parallel_f_circuit_audit_is_fig2_plus_overhead():
    h = PauliSum.from_terms([PauliString(0.7, "ZZ"), PauliString(0.4, "XX")])
    psi0 = np.zeros(4, dtype=complex)
    psi0[0] = 1.0
    m_clock = 3
    circ = parallel_f_circuit(h, psi0, PauliString(1.0, "XI"), PauliString(1.0, "ZI"),
                              omega=0.3, m=m_clock, epsilon=0.2, imaginary=False)
    counts = audit_gate_log(circ)
    # Fig. 2 skeleton (m Hadamards + m controlled evolutions) plus two ancilla
    # Hadamards, two controlled Paulis, and m controlled phase gates.
    assert counts["controlled-multi"] == m_clock + 2
    assert counts["1q"] == m_clock + 2
    assert counts["controlled-1q"] == m_clock

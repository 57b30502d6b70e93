"""Unit tests for the Cartan-ansatz variational diagonalizer."""

import numpy as np
import pytest
import scipy.linalg

from clocksim import vhd
from clocksim.hamiltonians import XYParams, aubry_andre_xy_params, build_xy_spin
from clocksim.histstate import build_history_state, reduced_states
from clocksim.qcore import PauliString, PauliSum, ValidationError, pauli_sum_to_matrix

RNG = np.random.default_rng(515)


def random_ansatz(n, L, rng, tied=False):
    return vhd.CartanAnsatz(n=n, L=L,
                            alpha=rng.uniform(0, 2 * np.pi, vhd.CartanAnsatz.num_alpha(n, L, tied)),
                            beta=rng.normal(size=n), tied=tied)


def exact_model_sum(ansatz):
    """PauliSum equal to W(alpha) D(beta) W(alpha)^dag, built via the engine."""
    eng = vhd._engine(ansatz.n)
    gen_ids, param_ids = eng.gate_sequence(ansatz.L, ansatz.tied)
    vec = np.zeros((1, eng.dim))
    vec[0, eng.z_idx] = ansatz.beta
    for k, g in enumerate(gen_ids):
        eng.apply_gate(vec, int(g), np.array([ansatz.alpha[param_ids[k]]]))
    terms = [PauliString(c, w) for c, w in zip(vec[0], eng.basis) if abs(c) > 1e-14]
    return PauliSum.from_terms(terms, ansatz.n)


# ---------------------------------------------------------------------------
# Ansatz unitary
# ---------------------------------------------------------------------------

def test_zero_angles_give_identity():
    a = vhd.CartanAnsatz(n=3, L=2, alpha=np.zeros(8), beta=np.zeros(3))
    assert np.allclose(vhd.apply_ansatz_W(a), np.eye(8))


def test_single_gate_matches_exponential_oracle():
    theta = 0.8
    a = vhd.CartanAnsatz(n=2, L=1, alpha=np.array([theta, 0.0]), beta=np.zeros(2))
    w = vhd.apply_ansatz_W(a)
    gen = PauliString(1.0, "XY").matrix()
    assert np.max(np.abs(w - scipy.linalg.expm(1j * theta * gen))) < 1e-12


def test_ansatz_is_unitary():
    a = random_ansatz(4, 3, RNG)
    w = vhd.apply_ansatz_W(a)
    assert np.max(np.abs(w @ w.conj().T - np.eye(16))) < 1e-10


def test_parameter_count_validation():
    with pytest.raises(ValidationError):
        vhd.CartanAnsatz(n=3, L=2, alpha=np.zeros(7), beta=np.zeros(3))
    with pytest.raises(ValidationError):
        vhd.CartanAnsatz(n=3, L=2, alpha=np.zeros(8), beta=np.zeros(2))
    # tied variant halves the angle count
    vhd.CartanAnsatz(n=3, L=2, alpha=np.zeros(4), beta=np.zeros(3), tied=True)


# ---------------------------------------------------------------------------
# Cost
# ---------------------------------------------------------------------------

def test_cost_zero_at_exact_match():
    beta = np.array([0.4, -1.2, 0.7])
    h = PauliSum.from_terms([PauliString(beta[j], "".join(
        "Z" if k == j else "I" for k in range(3))) for j in range(3)], 3)
    a = vhd.CartanAnsatz(n=3, L=1, alpha=np.zeros(4), beta=beta)
    assert vhd.vhd_cost(h, a) < 1e-28


def test_cost_at_identity_is_squared_norm():
    h = build_xy_spin(XYParams(n=3, ax=(0.5, -0.3), ay=(0.2, 0.8), az=(0.1, 0.0, -0.7)))
    a = vhd.CartanAnsatz(n=3, L=1, alpha=np.zeros(4), beta=np.zeros(3))
    want = sum(abs(t.coefficient) ** 2 for t in h.terms)
    assert abs(vhd.vhd_cost(h, a) - want) < 1e-12


def test_cost_matches_dense_trace_oracle():
    h = build_xy_spin(aubry_andre_xy_params(3, 2.0, 1.1))
    for _ in range(4):
        a = random_ansatz(3, 2, RNG)
        w = vhd.apply_ansatz_W(a)
        hhat = w @ np.diag(vhd.diagonal_model_matrix(a)) @ w.conj().T
        dense = float(np.linalg.norm(pauli_sum_to_matrix(h) - hhat) ** 2) / 8.0
        cost = vhd.vhd_cost(h, a)
        assert abs(cost - dense) < 1e-12
        assert cost >= -1e-15


def test_cost_counts_out_of_span_terms():
    # A ZZ term cannot be reached by the ansatz family; it becomes a floor.
    h = PauliSum.from_terms([PauliString(0.5, "ZZ")], 2)
    a = vhd.CartanAnsatz(n=2, L=1, alpha=np.zeros(2), beta=np.zeros(2))
    assert abs(vhd.vhd_cost(h, a) - 0.25) < 1e-12


# ---------------------------------------------------------------------------
# Gradient
# ---------------------------------------------------------------------------

def test_gradient_vanishes_at_constructed_minimum():
    a_star = random_ansatz(3, 2, RNG)
    h = exact_model_sum(a_star)
    ga, gb = vhd.vhd_gradient(h, a_star)
    assert np.max(np.abs(ga)) < 1e-8
    assert np.max(np.abs(gb)) < 1e-8
    assert vhd.vhd_cost(h, a_star) < 1e-12  # float cancellation noise on O(1) terms


def test_gradient_matches_finite_differences():
    h = build_xy_spin(aubry_andre_xy_params(3, 2.0, 0.9))
    a = random_ansatz(3, 2, RNG)
    ga, gb = vhd.vhd_gradient(h, a)
    step = 1e-5
    for i in range(0, ga.size, 3):
        up, dn = a.alpha.copy(), a.alpha.copy()
        up[i] += step
        dn[i] -= step
        fd = (vhd.vhd_cost(h, vhd.CartanAnsatz(3, 2, up, a.beta))
              - vhd.vhd_cost(h, vhd.CartanAnsatz(3, 2, dn, a.beta))) / (2 * step)
        assert abs(ga[i] - fd) < 1e-6 * max(1.0, abs(fd))
    for j in range(gb.size):
        up, dn = a.beta.copy(), a.beta.copy()
        up[j] += step
        dn[j] -= step
        fd = (vhd.vhd_cost(h, vhd.CartanAnsatz(3, 2, a.alpha, up))
              - vhd.vhd_cost(h, vhd.CartanAnsatz(3, 2, a.alpha, dn))) / (2 * step)
        assert abs(gb[j] - fd) < 1e-6 * max(1.0, abs(fd))


def test_gradient_equals_two_point_parameter_shift():
    h = build_xy_spin(aubry_andre_xy_params(3, 2.0, 2.2))
    a = random_ansatz(3, 2, RNG)
    ga, _ = vhd.vhd_gradient(h, a)
    for i in (0, 3, 6):
        up, dn = a.alpha.copy(), a.alpha.copy()
        up[i] += np.pi / 4
        dn[i] -= np.pi / 4
        shift = vhd.vhd_cost(h, vhd.CartanAnsatz(3, 2, up, a.beta)) \
            - vhd.vhd_cost(h, vhd.CartanAnsatz(3, 2, dn, a.beta))
        assert abs(ga[i] - shift) < 1e-12


def test_beta_gradient_quadratic_structure():
    # At W = I and diagonal H, the beta gradient is 2(beta - target).
    target = np.array([0.3, -0.9, 1.4])
    h = PauliSum.from_terms([PauliString(target[j], "".join(
        "Z" if k == j else "I" for k in range(3))) for j in range(3)], 3)
    beta = np.array([1.0, 0.0, -2.0])
    a = vhd.CartanAnsatz(n=3, L=1, alpha=np.zeros(4), beta=beta)
    _, gb = vhd.vhd_gradient(h, a)
    assert np.max(np.abs(gb - 2.0 * (beta - target))) < 1e-12


def test_tied_variant_consistency():
    # A brick's two gates are consecutive, so tying duplicates each angle.
    n, L = 3, 2
    tied = random_ansatz(n, L, RNG, tied=True)
    full_alpha = np.concatenate(
        [np.repeat(tied.alpha[l * (n - 1):(l + 1) * (n - 1)], 2) for l in range(L)])
    untied = vhd.CartanAnsatz(n=n, L=L, alpha=full_alpha, beta=tied.beta)
    h = build_xy_spin(aubry_andre_xy_params(n, 2.0, 1.7))
    assert abs(vhd.vhd_cost(h, tied) - vhd.vhd_cost(h, untied)) < 1e-12
    ga_tied, _ = vhd.vhd_gradient(h, tied)
    ga_full, _ = vhd.vhd_gradient(h, untied)
    for k in range(tied.alpha.size):
        combined = ga_full[2 * k] + ga_full[2 * k + 1]
        assert abs(ga_tied[k] - combined) < 1e-12


# ---------------------------------------------------------------------------
# Lie closure
# ---------------------------------------------------------------------------

def test_lie_closure_dimension_formula():
    for n, want in ((2, 2), (3, 6), (4, 12), (5, 20), (6, 30)):
        assert vhd.lie_closure_dim(vhd.cartan_generators(n)) == want


def test_lie_closure_commuting_generators():
    # n=2: the two generators commute, closure stays 2-dimensional.
    gens = [PauliString(1.0, "XY"), PauliString(1.0, "YX")]
    assert vhd.lie_closure_dim(gens) == 2


def test_lie_closure_truncation():
    with pytest.raises(vhd.ClosureTruncated) as err:
        vhd.lie_closure_dim(vhd.cartan_generators(6), max_dim=10)
    assert err.value.reached > 10


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def test_train_two_site_toy_converges():
    h = build_xy_spin(XYParams(n=2, ax=(0.9,), ay=(-0.4,), az=(0.3, -0.8)))
    cfg = vhd.TrainConfig(restarts=3, max_iters=20000, stop_loss=1e-14, seed=4)
    report = vhd.vhd_train(h, 2, 1, cfg)
    assert report.best_loss < 1e-12
    assert report.converged_runs >= 1
    # direct max-norm consequence of a tiny cost
    w = vhd.apply_ansatz_W(report.best_params)
    hhat = w @ np.diag(vhd.diagonal_model_matrix(report.best_params)) @ w.conj().T
    gap = np.max(np.abs(pauli_sum_to_matrix(h) - hhat))
    assert gap < np.sqrt(4.0 * max(report.best_loss, 1e-30))


def test_train_past_overparametrization_threshold():
    # One layer past the n=4 threshold the landscape trains reliably.
    h = build_xy_spin(aubry_andre_xy_params(4, 2.0, 2.0))
    cfg = vhd.TrainConfig(restarts=4, max_iters=20000, stop_loss=1e-6, seed=2)
    report = vhd.vhd_train(h, 4, 3, cfg)
    assert report.best_loss < 1e-6
    assert report.converged_runs >= 1


def test_batch_training_matches_single_target_runs():
    h1 = build_xy_spin(aubry_andre_xy_params(3, 2.0, 1.0))
    h2 = build_xy_spin(aubry_andre_xy_params(3, 2.0, 2.5))
    cfg = vhd.TrainConfig(restarts=2, max_iters=300, stop_loss=1e-14, seed=6)
    joint = vhd.vhd_train_batch([h1, h2], 3, 2, cfg)
    solo = [vhd.vhd_train(h1, 3, 2, cfg),
            vhd.vhd_train_batch([h1, h2], 3, 2, cfg)[1]]
    assert abs(joint[0].best_loss - solo[0].best_loss) < 1e-12
    assert np.allclose(joint[0].loss_history[0], solo[0].loss_history[0])
    assert abs(joint[1].best_loss - solo[1].best_loss) < 1e-12


def test_trained_rotation_is_diagonal():
    # Exact-minimum instance: the rotated Hamiltonian must be diagonal and
    # the diagonal model must carry the exact spectrum.
    a_star = random_ansatz(3, 2, RNG)
    h = exact_model_sum(a_star)
    off, rotated = vhd.off_diagonal_audit(h, a_star)
    assert off < 1e-10
    want = np.sort(np.linalg.eigvalsh(pauli_sum_to_matrix(h)))
    got = np.sort(vhd.diagonal_model_matrix(a_star))
    assert np.max(np.abs(want - got)) < 1e-10


def test_train_report_validation():
    with pytest.raises(ValidationError):
        vhd.TrainConfig(lr_alpha=0.0)
    with pytest.raises(ValidationError):
        vhd.TrainReport(loss_history=(np.array([1.0]),), best_loss=0.5,
                        best_params=random_ansatz(2, 1, RNG), converged_runs=0,
                        stop_loss=1e-14)


# ---------------------------------------------------------------------------
# Diagonalized history states
# ---------------------------------------------------------------------------

def test_diagonalized_builder_matches_exact_history_state():
    a_star = random_ansatz(3, 2, RNG)
    h = exact_model_sum(a_star)
    build = vhd.diagonalized_history_builder(a_star, m=2, epsilon=0.5, h=h, max_cost=1e-12)
    psi0 = RNG.normal(size=8) + 1j * RNG.normal(size=8)
    psi0 /= np.linalg.norm(psi0)
    got = build(psi0)
    want = build_history_state(h, psi0, m=2, epsilon=0.5)
    assert np.max(np.abs(got.state - want.state)) < 1e-10


def test_omitting_final_sweep_preserves_clock_spectrum():
    a_star = random_ansatz(3, 2, RNG)
    h = exact_model_sum(a_star)
    psi0 = RNG.normal(size=8) + 1j * RNG.normal(size=8)
    psi0 /= np.linalg.norm(psi0)
    full = vhd.diagonalized_history_builder(a_star, m=2, epsilon=0.7)(psi0)
    trimmed = vhd.diagonalized_history_builder(a_star, m=2, epsilon=0.7,
                                               omit_final_w=True)(psi0)
    rho_full, _ = reduced_states(full)
    rho_trim, _ = reduced_states(trimmed)
    s_full = np.sort(np.linalg.eigvalsh(rho_full.matrix))
    s_trim = np.sort(np.linalg.eigvalsh(rho_trim.matrix))
    assert np.max(np.abs(s_full - s_trim)) < 1e-12


def test_builder_refuses_above_threshold():
    a = random_ansatz(3, 2, RNG)
    h = build_xy_spin(aubry_andre_xy_params(3, 2.0, 1.0))
    with pytest.raises(vhd.ThresholdViolation):
        vhd.diagonalized_history_builder(a, m=2, epsilon=0.5, h=h, max_cost=1e-12)

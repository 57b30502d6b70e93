"""Clock-register estimator circuits as simulated experiments.

Six protocols, each in two modes: ``exact`` evaluates circuit outcome
probabilities analytically, ``sampled`` draws shot-level measurement
outcomes from them.

* sequential / parallel estimation of the windowed correlation average
  F~(O1, O2, omega) via Hadamard tests (one ancilla; the parallel variant
  adds the clock register and ancilla-controlled phase gates),
* sequential / parallel Loschmidt-echo averages via Bell-basis overlap
  measurements,
* history-state purity via a two-copy Bell-basis overlap on the clock
  blocks, and via classical shadows with random single-qubit Cliffords
  on the clock qubits.

Randomness uses the counter-based Philox generator; every sampled cell
owns a stream derived from (seed, cell path), so results are reproducible
and order-independent.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .histstate import HistoryState, build_history_state, reduced_states
from .qcore import (
    DEFAULT_DENSE_CAP,
    Circuit,
    DensityMatrix,
    MatrixLike,
    PauliString,
    PauliSum,
    Spectrum,
    StateLike,
    ValidationError,
    _as_matrix,
    _check_cap,
    as_amplitudes,
    hermitian_eig,
    propagator,
)


# ---------------------------------------------------------------------------
# Configuration, results, RNG streams
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EstimatorConfig:
    """Experiment mode and budget.

    ``shots`` is the total experiment budget, spread uniformly over the
    protocol's (time, term-pair, branch) cells.  When ``delta_target`` is
    set it overrides the budget with ceil(1/delta^2) shots per cell, the
    flat accounting behind the O(N/delta^2) experiment counts.
    """

    mode: str = "exact"
    shots: int = 4096
    seed: int = 0
    delta_target: float | None = None

    def __post_init__(self):
        if self.mode not in ("exact", "sampled"):
            raise ValidationError("mode must be 'exact' or 'sampled'")
        if self.mode == "sampled" and self.shots < 1:
            raise ValidationError("sampled mode needs shots >= 1")
        if self.delta_target is not None and not self.delta_target > 0:
            raise ValidationError("delta_target must be positive")

    def shots_per_cell(self, n_cells: int) -> int:
        if self.delta_target is not None:
            return max(1, math.ceil(1.0 / self.delta_target**2))
        return max(1, self.shots // max(1, n_cells))


@dataclass(frozen=True)
class EstimateResult:
    """Estimator output; stderr is 0 in exact mode and a plug-in standard
    error (complex components combined in quadrature) in sampled mode."""

    value: complex
    stderr: float
    shots_used: int
    mode: str

    def __post_init__(self):
        if self.stderr < 0:
            raise ValidationError("stderr must be nonnegative")
        if self.mode == "exact" and self.stderr != 0:
            raise ValidationError("exact mode must report zero stderr")

    @property
    def real(self) -> float:
        return float(np.real(self.value))


@dataclass(frozen=True)
class ShadowSnapshot:
    """Per-clock-qubit Clifford choices and the measured clock bitstring."""

    unitary_choice: tuple[int, ...]
    outcome_bits: tuple[int, ...]

    def __post_init__(self):
        if len(self.unitary_choice) != len(self.outcome_bits):
            raise ValidationError("choice and outcome lengths must match")


def result_record(protocol: str, params: dict, result: EstimateResult, seed: int) -> dict:
    """JSON-ready record with the stable wire schema."""
    return {
        "protocol": protocol,
        "params": params,
        "mode": result.mode,
        "value_re": float(np.real(result.value)),
        "value_im": float(np.imag(result.value)),
        "stderr": float(result.stderr),
        "shots": int(result.shots_used),
        "seed": int(seed),
    }


def _path_int(token) -> int:
    if isinstance(token, (int, np.integer)):
        return int(token) & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.sha256(str(token).encode()).digest()
    return int.from_bytes(digest[:8], "little")


def rng_stream(seed: int, *path) -> np.random.Generator:
    """Independent counter-based stream for (seed, cell path)."""
    seq = np.random.SeedSequence((int(seed), *[_path_int(t) for t in path]))
    return np.random.Generator(np.random.Philox(seed=seq))


# ---------------------------------------------------------------------------
# Shared circuit pieces
# ---------------------------------------------------------------------------

def _system_targets(n: int) -> list[int]:
    return list(range(n - 1, -1, -1))


def _state_ensemble(rho0: StateLike | DensityMatrix) -> list[tuple[float, np.ndarray]]:
    if isinstance(rho0, DensityMatrix) or (isinstance(rho0, np.ndarray) and rho0.ndim == 2):
        mat = rho0.matrix if isinstance(rho0, DensityMatrix) else np.asarray(rho0, dtype=complex)
        evals, evecs = np.linalg.eigh(mat)
        return [(float(w), evecs[:, i]) for i, w in enumerate(evals) if w > 1e-14]
    return [(1.0, as_amplitudes(rho0))]


def _binomial_z(p0: float, shots: int, rng: np.random.Generator) -> tuple[float, float]:
    """Sample an ancilla-Z mean from ``shots`` Bernoulli(p0) outcomes."""
    k = int(rng.binomial(shots, min(1.0, max(0.0, p0))))
    phat = k / shots
    z = 2.0 * phat - 1.0
    var = 4.0 * phat * (1.0 - phat) / shots
    return z, var


def _ancilla_p0(state: np.ndarray, ancilla_bit: int) -> float:
    probs = np.abs(state) ** 2
    idx = np.arange(probs.size)
    return float(probs[(idx >> ancilla_bit) & 1 == 0].sum())


def hadamard_test_circuit(psi0: np.ndarray, evolution: np.ndarray, p1: PauliString,
                          p2: PauliString, imaginary: bool,
                          dense_cap: int = DEFAULT_DENSE_CAP) -> Circuit:
    """Fig.-4-style circuit: ancilla Hadamard test of <P1 U P2> on n+1 qubits."""
    n = len(p1.letters)
    q = n + 1
    circ = Circuit(q, dense_cap)
    init = np.zeros(2**q, dtype=complex)
    init[: 2**n] = psi0
    circ.set_state(init)
    anc = n
    targets = _system_targets(n)
    circ.h(anc)
    circ.cu(anc, PauliString(1.0, p2.letters).matrix(), targets, name="c-O2")
    circ.u(evolution, targets, name="U(eps t)")
    circ.cu(anc, PauliString(1.0, p1.letters).matrix(), targets, name="c-O1")
    if imaginary:
        circ.sdg(anc)
    circ.h(anc)
    return circ


def parallel_f_circuit(h: MatrixLike, psi0: np.ndarray, p1: PauliString, p2: PauliString,
                       omega: float, m: int, epsilon: float, imaginary: bool,
                       spectrum: Spectrum | None = None,
                       dense_cap: int = DEFAULT_DENSE_CAP) -> Circuit:
    """Fig.-5-style circuit on n + m + 1 qubits.

    Hadamards on clocks and ancilla, ancilla-controlled O2, clock-controlled
    evolutions, ancilla-controlled O1, then ancilla-controlled phase gates of
    angle -omega eps 2^(j-1) on clock qubit j, composing to exp(-i omega eps t)
    on the |1> ancilla branch.
    """
    mat = _as_matrix(h, dense_cap)
    n = int(round(math.log2(mat.shape[0])))
    q = n + m + 1
    circ = Circuit(q, dense_cap)
    init = np.zeros(2**q, dtype=complex)
    init[: 2**n] = psi0
    circ.set_state(init)
    anc = n + m
    targets = _system_targets(n)
    if spectrum is None:
        spectrum = hermitian_eig(mat)
    circ.h(anc)
    for j in range(1, m + 1):
        circ.h(n + j - 1)
    circ.cu(anc, PauliString(1.0, p2.letters).matrix(), targets, name="c-O2")
    for j in range(1, m + 1):
        u = propagator(mat, epsilon * 2 ** (j - 1), spectrum)
        circ.cu(n + j - 1, u, targets, name=f"c-U(eps*2^{j - 1})")
    circ.cu(anc, PauliString(1.0, p1.letters).matrix(), targets, name="c-O1")
    for j in range(1, m + 1):
        circ.cphase(anc, n + j - 1, -omega * epsilon * 2 ** (j - 1))
    if imaginary:
        circ.sdg(anc)
    circ.h(anc)
    return circ


# ---------------------------------------------------------------------------
# F~ estimators
# ---------------------------------------------------------------------------

def estimate_F_sequential(h: MatrixLike, rho0, o1: PauliSum, o2: PauliSum, omega: float,
                          N: int, epsilon: float, cfg: EstimatorConfig,
                          dense_cap: int = DEFAULT_DENSE_CAP) -> EstimateResult:
    """Windowed correlation average by one Hadamard test per (t, term pair, branch).

    Phases exp(-i omega eps t) are attached classically; the experiment count
    scales as N * M1 * M2 / delta^2.
    """
    mat = _as_matrix(h, dense_cap)
    n = int(round(math.log2(mat.shape[0])))
    _check_cap(n + 1, dense_cap)
    if o1.n != n or o2.n != n:
        raise ValidationError("observables must act on the system's qubit count")
    spectrum = hermitian_eig(mat)
    ensemble = _state_ensemble(rho0)
    n_cells = N * len(o1.terms) * len(o2.terms) * 2
    shots_cell = cfg.shots_per_cell(n_cells)

    value = 0.0 + 0.0j
    var = 0.0
    shots_used = 0
    for t in range(N):
        u_t = propagator(mat, epsilon * t, spectrum)
        phase = np.exp(-1j * omega * epsilon * t) / N
        for i1, term1 in enumerate(o1.terms):
            for i2, term2 in enumerate(o2.terms):
                weight = phase * complex(term1.coefficient) * complex(term2.coefficient)
                comps = []
                for bi, imag in enumerate((False, True)):
                    p0 = 0.0
                    for w, psi in ensemble:
                        circ = hadamard_test_circuit(psi, u_t, term1, term2, imag, dense_cap)
                        p0 += w * _ancilla_p0(circ.state, n)
                    if cfg.mode == "exact":
                        comps.append(2.0 * p0 - 1.0)
                    else:
                        rng = rng_stream(cfg.seed, "f-seq", t, i1, i2, bi)
                        z, v = _binomial_z(p0, shots_cell, rng)
                        comps.append(z)
                        var += abs(weight) ** 2 * v
                        shots_used += shots_cell
                value += weight * (comps[0] + 1j * comps[1])
    stderr = math.sqrt(var) if cfg.mode == "sampled" else 0.0
    return EstimateResult(value=value, stderr=stderr, shots_used=shots_used, mode=cfg.mode)


def estimate_F_parallel(h: MatrixLike, rho0, o1: PauliSum, o2: PauliSum, omega: float,
                        m: int, epsilon: float, cfg: EstimatorConfig,
                        dense_cap: int = DEFAULT_DENSE_CAP) -> EstimateResult:
    """Windowed correlation average from the clock-register circuit.

    A single experiment cell covers all N = 2^m times; the count scales as
    M1 * M2 / delta^2.
    """
    mat = _as_matrix(h, dense_cap)
    n = int(round(math.log2(mat.shape[0])))
    _check_cap(n + m + 1, dense_cap)
    if o1.n != n or o2.n != n:
        raise ValidationError("observables must act on the system's qubit count")
    spectrum = hermitian_eig(mat)
    ensemble = _state_ensemble(rho0)
    n_cells = len(o1.terms) * len(o2.terms) * 2
    shots_cell = cfg.shots_per_cell(n_cells)
    anc = n + m

    value = 0.0 + 0.0j
    var = 0.0
    shots_used = 0
    for i1, term1 in enumerate(o1.terms):
        for i2, term2 in enumerate(o2.terms):
            weight = complex(term1.coefficient) * complex(term2.coefficient)
            comps = []
            for bi, imag in enumerate((False, True)):
                p0 = 0.0
                for w, psi in ensemble:
                    circ = parallel_f_circuit(mat, psi, term1, term2, omega, m,
                                              epsilon, imag, spectrum, dense_cap)
                    p0 += w * _ancilla_p0(circ.state, anc)
                if cfg.mode == "exact":
                    comps.append(2.0 * p0 - 1.0)
                else:
                    rng = rng_stream(cfg.seed, "f-par", i1, i2, bi)
                    z, v = _binomial_z(p0, shots_cell, rng)
                    comps.append(z)
                    var += abs(weight) ** 2 * v
                    shots_used += shots_cell
            value += weight * (comps[0] + 1j * comps[1])
    stderr = math.sqrt(var) if cfg.mode == "sampled" else 0.0
    return EstimateResult(value=value, stderr=stderr, shots_used=shots_used, mode=cfg.mode)


# ---------------------------------------------------------------------------
# Bell-basis overlap machinery
# ---------------------------------------------------------------------------

def _bell_measure(circ: Circuit, pairs: Sequence[tuple[int, int]]) -> None:
    """Bell-basis unmapping on wire pairs: CNOT then Hadamard on the first wire."""
    for a, b in pairs:
        circ.cx(a, b)
    for a, _ in pairs:
        circ.h(a)


def _pair_parity_signs(q: int, pairs: Sequence[tuple[int, int]]) -> np.ndarray:
    """Outcome-indexed +-1: the product of SWAP eigenvalues after unmapping.

    The singlet maps to |11> on its pair, so the sign is (-1)^(both bits set)
    accumulated over pairs.
    """
    idx = np.arange(2**q, dtype=np.uint64)
    common = np.zeros_like(idx)
    for a, b in pairs:
        both = ((idx >> np.uint64(a)) & (idx >> np.uint64(b))) & np.uint64(1)
        common += both
    return np.where(common % 2 == 0, 1.0, -1.0)


def _overlap_from_circuit(circ: Circuit, pairs, cfg: EstimatorConfig, rng_path,
                          shots_cell: int) -> tuple[float, float, int]:
    """(value, variance, shots) of the Bell-parity mean for one prepared state."""
    signs = _pair_parity_signs(circ.q, pairs)
    probs = circ.probabilities()
    exact = float(signs @ probs)
    if cfg.mode == "exact":
        return exact, 0.0, 0
    rng = rng_stream(cfg.seed, *rng_path)
    counts = rng.multinomial(shots_cell, probs / probs.sum())
    vhat = float(counts @ signs) / shots_cell
    var = max(0.0, 1.0 - vhat**2) / shots_cell
    return vhat, var, shots_cell


def estimate_loschmidt_sequential(h: MatrixLike, psi0: StateLike, N: int, epsilon: float,
                                  cfg: EstimatorConfig,
                                  dense_cap: int = DEFAULT_DENSE_CAP) -> EstimateResult:
    """Discrete echo average from N-1 two-copy overlap experiments.

    Each run prepares psi_0 (x) U(eps t) psi_0 on 2n qubits and measures in
    the Bell basis; the t = 0 term is 1 and costs nothing.
    """
    mat = _as_matrix(h, dense_cap)
    n = int(round(math.log2(mat.shape[0])))
    _check_cap(2 * n, dense_cap)
    spectrum = hermitian_eig(mat)
    psi = as_amplitudes(psi0)
    pairs = [(n + j, j) for j in range(n)]
    shots_cell = cfg.shots_per_cell(max(1, N - 1))

    total = 1.0  # t = 0
    var = 0.0
    shots_used = 0
    for t in range(1, N):
        circ = Circuit(2 * n, dense_cap)
        snap = propagator(mat, epsilon * t, spectrum) @ psi
        circ.set_state(np.kron(psi, snap))
        _bell_measure(circ, pairs)
        v, cell_var, used = _overlap_from_circuit(circ, pairs, cfg, ("l-seq", t), shots_cell)
        total += v
        var += cell_var
        shots_used += used
    value = total / N
    stderr = math.sqrt(var) / N if cfg.mode == "sampled" else 0.0
    return EstimateResult(value=value, stderr=stderr, shots_used=shots_used, mode=cfg.mode)


def estimate_loschmidt_parallel(h: MatrixLike, psi0: StateLike, m: int, epsilon: float,
                                cfg: EstimatorConfig,
                                dense_cap: int = DEFAULT_DENSE_CAP) -> EstimateResult:
    """Discrete echo average from one history-state overlap experiment.

    Prepares |Psi> (x) |psi_0> on 2n + m qubits and Bell-measures the system
    block against the reference copy, estimating Tr[rho_S |psi_0><psi_0|].
    """
    mat = _as_matrix(h, dense_cap)
    n = int(round(math.log2(mat.shape[0])))
    _check_cap(2 * n + m, dense_cap)
    hist = build_history_state(mat, psi0, m, epsilon, dense_cap=dense_cap)
    circ = Circuit(2 * n + m, dense_cap)
    circ.set_state(np.kron(hist.state, as_amplitudes(psi0)))
    pairs = [(n + j, j) for j in range(n)]
    _bell_measure(circ, pairs)
    shots_cell = cfg.shots_per_cell(1)
    v, var, used = _overlap_from_circuit(circ, pairs, cfg, ("l-par",), shots_cell)
    stderr = math.sqrt(var) if cfg.mode == "sampled" else 0.0
    return EstimateResult(value=v, stderr=stderr, shots_used=used, mode=cfg.mode)


def estimate_purity_overlap(psi: HistoryState, cfg: EstimatorConfig,
                            dense_cap: int = DEFAULT_DENSE_CAP) -> EstimateResult:
    """Tr[rho_T^2] from two history-state copies, Bell-measured on the clocks."""
    block = psi.m + psi.n
    _check_cap(2 * block, dense_cap)
    circ = Circuit(2 * block, dense_cap)
    circ.set_state(np.kron(psi.state, psi.state))
    pairs = [(block + psi.n + j, psi.n + j) for j in range(psi.m)]
    _bell_measure(circ, pairs)
    shots_cell = cfg.shots_per_cell(1)
    v, var, used = _overlap_from_circuit(circ, pairs, cfg, ("purity-overlap",), shots_cell)
    stderr = math.sqrt(var) if cfg.mode == "sampled" else 0.0
    return EstimateResult(value=v, stderr=stderr, shots_used=used, mode=cfg.mode)


# ---------------------------------------------------------------------------
# Classical shadows
# ---------------------------------------------------------------------------

def _single_qubit_cliffords() -> tuple[np.ndarray, ...]:
    """The 24 single-qubit Cliffords, generated from H and S, deduped up to phase."""
    h = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
    s = np.array([[1, 0], [0, 1j]], dtype=complex)

    def key(u):
        flat = u.reshape(-1)
        pivot = flat[np.argmax(np.abs(flat) > 1e-9)]
        return tuple(np.round(flat / pivot * (abs(pivot)), 9))

    found = {key(np.eye(2, dtype=complex)): np.eye(2, dtype=complex)}
    frontier = [np.eye(2, dtype=complex)]
    while frontier:
        nxt = []
        for u in frontier:
            for g in (h, s):
                v = g @ u
                k = key(v)
                if k not in found:
                    found[k] = v
                    nxt.append(v)
        frontier = nxt
    assert len(found) == 24
    return tuple(found.values())


_CLIFFORDS: tuple[np.ndarray, ...] | None = None


def clifford_set() -> tuple[np.ndarray, ...]:
    global _CLIFFORDS
    if _CLIFFORDS is None:
        _CLIFFORDS = _single_qubit_cliffords()
    return _CLIFFORDS


def draw_shadow_snapshots(rho: np.ndarray, K: int, seed: int) -> list[ShadowSnapshot]:
    """Randomized-measurement snapshots of an m-qubit density matrix."""
    cliffords = clifford_set()
    m = int(round(math.log2(rho.shape[0])))
    rng = rng_stream(seed, "shadows")
    snapshots = []
    for _ in range(K):
        choice = rng.integers(0, 24, size=m)
        u = np.array([[1.0]], dtype=complex)
        for j in range(m, 0, -1):  # qubit j <-> bit j-1, high bits outermost
            u = np.kron(u, cliffords[choice[j - 1]])
        probs = np.clip(np.real(np.diag(u @ rho @ u.conj().T)), 0.0, None)
        probs /= probs.sum()
        b = int(rng.choice(probs.size, p=probs))
        bits = tuple((b >> (j - 1)) & 1 for j in range(1, m + 1))
        snapshots.append(ShadowSnapshot(tuple(int(c) for c in choice), bits))
    return snapshots


def shadow_purity_estimate(snapshots: Sequence[ShadowSnapshot], n_bootstrap: int = 100,
                           seed: int = 0) -> tuple[float, float]:
    """U-statistic purity estimator with a bootstrap standard error.

    Each snapshot inverts the measurement channel qubit-wise,
    rho_hat = kron_j (3 U_j^dag |b_j><b_j| U_j - 1), and the unbiased purity
    estimate averages Tr[rho_hat_i rho_hat_j] over ordered pairs i != j.
    """
    K = len(snapshots)
    if K < 2:
        raise ValidationError("purity U-statistic needs at least 2 snapshots")
    cliffords = clifford_set()
    m = len(snapshots[0].unitary_choice)
    eye = np.eye(2, dtype=complex)
    gram = np.ones((K, K))
    for q in range(m):
        mats = np.empty((K, 2, 2), dtype=complex)
        for i, snap in enumerate(snapshots):
            u = cliffords[snap.unitary_choice[q]]
            ket = u.conj().T[:, snap.outcome_bits[q]]
            mats[i] = 3.0 * np.outer(ket, ket.conj()) - eye
        gram *= np.real(np.einsum("iab,jba->ij", mats, mats))
    total = (gram.sum() - np.trace(gram)) / (K * (K - 1))
    rng = rng_stream(seed, "shadow-boot")
    boots = np.empty(n_bootstrap)
    for b in range(n_bootstrap):
        idx = rng.integers(0, K, size=K)
        sub = gram[np.ix_(idx, idx)]
        boots[b] = (sub.sum() - np.trace(sub)) / (K * (K - 1))
    return float(total), float(np.std(boots))


def estimate_purity_shadows(psi: HistoryState, K: int, seed: int,
                            n_bootstrap: int = 100) -> EstimateResult:
    """Tr[rho_T^2] from K randomized single-qubit Clifford measurements.

    Only the clock qubits are rotated and recorded: the purity of the clock
    marginal is the target, so system-side randomization adds nothing.
    """
    if K < 2:
        raise ValidationError("need K >= 2 snapshots")
    rho_t, _ = reduced_states(psi)
    snaps = draw_shadow_snapshots(rho_t.matrix, K, seed)
    value, stderr = shadow_purity_estimate(snaps, n_bootstrap=n_bootstrap, seed=seed)
    return EstimateResult(value=value, stderr=stderr, shots_used=K, mode="sampled")
